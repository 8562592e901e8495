import logging
import time
from functools import wraps
from typing import List, Optional


def timeit(logger: Optional[logging.Logger] = None):
    """Log the wall time of every call at debug level.

    Without an explicit logger, methods log to their instance's `logger` and plain functions to their module logger."""

    def decorator(method):
        @wraps(method)
        def timed(*args, **kw):
            ts = time.perf_counter()
            result = method(*args, **kw)
            te = time.perf_counter()
            target = logger or getattr(args[0] if args else None, 'logger', None)
            (target or logging.getLogger(method.__module__)).debug(
                '%r  %2.4f ms', method.__name__, (te - ts) * 1000)
            return result

        return timed

    return decorator


class Stopwatch(object):
    """Accumulates the wall time spent inside `with stopwatch:` blocks for the current lap."""

    def __init__(self):
        self.laps: List[float] = []
        self._current = 0.0
        self._started: Optional[float] = None

    def __enter__(self):
        self._started = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self._current += time.perf_counter() - self._started
        self._started = None

    def lap(self) -> float:
        """Close the current lap and return it in milliseconds"""
        elapsed_ms = self._current * 1000.0
        self.laps.append(elapsed_ms)
        self._current = 0.0
        return elapsed_ms

    def mean_ms(self) -> float:
        if not self.laps:
            return 0.0
        return sum(self.laps) / len(self.laps)

    def max_ms(self) -> float:
        return max(self.laps) if self.laps else 0.0


def elapsed_us(start: float) -> float:
    return (time.perf_counter() - start) * 1e6
