# ABOUTME: SQLite persistence for enumerated orbit catalogs
# ABOUTME: Catalogs are keyed by graph hash and length cutoff and stored as JSON payloads

import json
import logging
import sqlite3
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional

from src.models import OrbitCatalog
from src.utils import resolve_cache_dir

logger = logging.getLogger(__name__)

CACHE_FILE = "orbits.db"


class OrbitCatalogCache:
    """Handle all database operations for orbit catalogs"""

    def __init__(self, db_path: Optional[str] = None):
        if db_path is None:
            db_path = str(resolve_cache_dir() / CACHE_FILE)
        self.db_path = str(Path(db_path).expanduser())
        self.init_database()

    @contextmanager
    def get_connection(self):
        """Context manager for database connections"""
        conn = sqlite3.connect(self.db_path)
        conn.row_factory = sqlite3.Row
        try:
            yield conn
        finally:
            conn.close()

    def init_database(self):
        """Initialize database schema"""
        with self.get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute('''
                CREATE TABLE IF NOT EXISTS orbit_catalogs (
                    graph_hash TEXT NOT NULL,
                    l_max INTEGER NOT NULL,
                    created_at TEXT NOT NULL,
                    orbit_count INTEGER NOT NULL,
                    payload TEXT NOT NULL,
                    PRIMARY KEY (graph_hash, l_max)
                )
            ''')
            conn.commit()
            logger.debug(f"Orbit cache initialized at {self.db_path}")

    def save_catalog(self, catalog: OrbitCatalog) -> bool:
        """Save or replace a catalog"""
        payload = json.dumps(catalog.to_dict())
        count = sum(len(v) for v in catalog.orbits.values())
        with self.get_connection() as conn:
            try:
                conn.execute('''
                    INSERT OR REPLACE INTO orbit_catalogs (graph_hash, l_max, created_at, orbit_count, payload)
                    VALUES (?, ?, ?, ?, ?)
                ''', (catalog.graph_hash, catalog.l_max, datetime.now().isoformat(), count, payload))
                conn.commit()
                logger.info(f"Cached orbit catalog {catalog.graph_hash[:12]} (l <= {catalog.l_max}, {count} classes)")
                return True
            except sqlite3.Error as e:
                logger.error(f"Failed to cache orbit catalog {catalog.graph_hash[:12]}: {e}")
                conn.rollback()
                return False

    def load_catalog(self, graph_hash: str, l_max: int) -> Optional[OrbitCatalog]:
        """Smallest cached catalog with cutoff >= l_max, truncated to l_max"""
        with self.get_connection() as conn:
            row = conn.execute('''
                SELECT l_max, payload FROM orbit_catalogs
                WHERE graph_hash = ? AND l_max >= ?
                ORDER BY l_max ASC LIMIT 1
            ''', (graph_hash, l_max)).fetchone()

        if row is None:
            return None
        try:
            catalog = OrbitCatalog.from_dict(json.loads(row['payload']))
        except (KeyError, TypeError, ValueError) as e:
            logger.warning(f"Corrupt orbit catalog row for {graph_hash[:12]} (l <= {row['l_max']}): {e}")
            return None
        return catalog if catalog.l_max == l_max else catalog.truncated(l_max)

    def list_catalogs(self) -> List[Dict]:
        """Summary rows, newest first"""
        with self.get_connection() as conn:
            rows = conn.execute('''
                SELECT graph_hash, l_max, created_at, orbit_count FROM orbit_catalogs
                ORDER BY created_at DESC
            ''').fetchall()
        return [dict(row) for row in rows]

    def delete_catalog(self, graph_hash: str, l_max: Optional[int] = None) -> int:
        """Delete one cutoff, or every cutoff for the graph; returns rows removed"""
        with self.get_connection() as conn:
            if l_max is None:
                cursor = conn.execute('DELETE FROM orbit_catalogs WHERE graph_hash = ?', (graph_hash,))
            else:
                cursor = conn.execute(
                    'DELETE FROM orbit_catalogs WHERE graph_hash = ? AND l_max = ?', (graph_hash, l_max)
                )
            conn.commit()
            return cursor.rowcount

    def clear(self) -> int:
        with self.get_connection() as conn:
            cursor = conn.execute('DELETE FROM orbit_catalogs')
            conn.commit()
            logger.info(f"Cleared {cursor.rowcount} cached orbit catalogs")
            return cursor.rowcount
