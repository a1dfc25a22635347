import contextlib
import os

from threadpoolctl import threadpool_limits

ENV_VAR = "REFILL3D_THREADS"


def thread_cap():
    """Thread cap from ``REFILL3D_THREADS`` (None when unset or invalid)."""
    raw = os.environ.get(ENV_VAR, "").strip()
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        return None
    return n if n > 0 else None


@contextlib.contextmanager
def limited_threads():
    """Cap native thread pools (BLAS, OpenMP) for the duration of the block.

    Reductions in the numerical code avoid BLAS, so results do not depend on
    the cap; it only bounds resource usage.
    """
    n = thread_cap()
    if n is None:
        yield
        return
    with threadpool_limits(limits=n):
        yield
