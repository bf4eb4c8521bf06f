"""
CPU and wall-clock timing of a single operation.
"""

import logging
import time
from dataclasses import dataclass

try:
    import resource
except ImportError:  # Windows
    resource = None


@dataclass(frozen=True)
class TimingRecord:
    """
    Seconds spent in an operation.

    cpu_accounting is False when the platform has no per-process user/system
    accounting; user_s and system_s then repeat elapsed_s.
    """

    user_s: float
    system_s: float
    elapsed_s: float
    cpu_accounting: bool = True


def _cpu_times():
    usage = resource.getrusage(resource.RUSAGE_SELF)
    return usage.ru_utime, usage.ru_stime


def timed(operation, *args, **kwargs):
    """
    Run operation(*args, **kwargs) and measure it.

    Returns:
        tuple: (operation result, TimingRecord)
    """
    if resource is None:
        start = time.perf_counter()
        result = operation(*args, **kwargs)
        elapsed = max(0.0, time.perf_counter() - start)
        logging.warning("No user/system CPU accounting on this platform; reporting elapsed time")
        return result, TimingRecord(elapsed, elapsed, elapsed, False)

    user_start, system_start = _cpu_times()
    start = time.perf_counter()
    result = operation(*args, **kwargs)
    elapsed = time.perf_counter() - start
    user_end, system_end = _cpu_times()
    record = TimingRecord(max(0.0, user_end - user_start), max(0.0, system_end - system_start), max(0.0, elapsed))
    logging.debug("Timed %s: user %.3fs, system %.3fs, elapsed %.3fs",
                  getattr(operation, "__name__", operation), record.user_s, record.system_s, record.elapsed_s)
    return result, record
