import os

THREADS_ENV = "QITE_MPEMBA_THREADS"


def worker_count() -> int:
    """Worker-pool size: ``$QITE_MPEMBA_THREADS`` if set, else the CPU count."""
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
        if value < 1:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
        return value
    return os.cpu_count() or 1
