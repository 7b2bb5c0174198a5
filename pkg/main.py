# ABOUTME: Entry point for the qgspectra command-line tool
# ABOUTME: Delegates to src.cli so `python main.py <command>` matches the installed script

from src.cli import main


if __name__ == "__main__":
    main()
