# ABOUTME: Performance tracking for CLI stages and long-running spectral computations
# ABOUTME: Provides a timing context manager, a decorator and a JSON export of per-operation statistics

import functools
import json
import logging
import time
from collections import deque
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path
from typing import Deque, Dict, List, Optional

logger = logging.getLogger(__name__)

# Oldest records are dropped past this; statistics keep every run
MAX_LOG_ENTRIES = 1000


class PerformanceTracker:
    """Timing records and per-operation statistics"""

    def __init__(self, max_logs: int = MAX_LOG_ENTRIES):
        self.max_logs = max_logs
        self.logs: Deque[Dict] = deque(maxlen=max_logs)
        self.stats: Dict[str, Dict] = {}

    @contextmanager
    def track_operation(self, description: str):
        """
        Context manager that times a block and records its outcome

        Args:
            description: Name of the stage, used as the statistics key
        """
        start_time = time.perf_counter()
        operation_id = f"{description}_{int(start_time)}"
        try:
            yield operation_id
        except Exception as e:
            self._log_operation(description, time.perf_counter() - start_time, f"Failed: {e}", operation_id)
            raise
        self._log_operation(description, time.perf_counter() - start_time, "Success", operation_id)

    def _log_operation(self, description: str, duration: float, status: str, operation_id: str):
        """Log operation performance data"""
        self.logs.append({
            "timestamp": datetime.now().isoformat(),
            "operation": description,
            "duration": round(duration, 6),
            "status": status,
            "operation_id": operation_id,
        })

        if description not in self.stats:
            self.stats[description] = {
                "count": 0,
                "total_duration": 0.0,
                "avg_duration": 0.0,
                "min_duration": float('inf'),
                "max_duration": 0.0,
                "success_count": 0,
            }

        stats = self.stats[description]
        stats["count"] += 1
        stats["total_duration"] += duration
        stats["avg_duration"] = stats["total_duration"] / stats["count"]
        stats["min_duration"] = min(stats["min_duration"], duration)
        stats["max_duration"] = max(stats["max_duration"], duration)
        if status == "Success":
            stats["success_count"] += 1

        logger.info(f"PERF: {description} - {duration:.3f}s - {status}")

    def total_time(self) -> float:
        return sum(stats["total_duration"] for stats in self.stats.values())

    def get_slow_operations(self, threshold: float = 5.0) -> List[Dict]:
        """Operations whose average duration exceeds threshold seconds"""
        slow_ops = [
            {
                "operation": op,
                "avg_duration": stats["avg_duration"],
                "count": stats["count"],
                "success_rate": stats["success_count"] / stats["count"] * 100,
            }
            for op, stats in self.stats.items()
            if stats["avg_duration"] > threshold
        ]
        return sorted(slow_ops, key=lambda x: x["avg_duration"], reverse=True)

    def reset(self):
        self.logs = deque(maxlen=self.max_logs)
        self.stats = {}

    def export_performance_data(self, filepath: Optional[str] = None) -> str:
        """Export performance data to JSON file"""
        if not filepath:
            timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
            filepath = f"performance_data_{timestamp}.json"

        data = {
            "export_timestamp": datetime.now().isoformat(),
            "logs": list(self.logs),
            "statistics": self.stats,
        }
        Path(filepath).write_text(json.dumps(data, indent=2))
        return filepath


# Global instance
performance_tracker = PerformanceTracker()


def track_performance(description: str):
    """Decorator to track function performance"""
    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            with performance_tracker.track_operation(description):
                return func(*args, **kwargs)
        return wrapper
    return decorator
