"""Fork-based trajectory fan-out with index-stable merging.

Workers receive index ranges only; the work closure is inherited through
fork, so models built from arbitrary callables need no pickling.  Results
are reassembled in trajectory order, which makes every downstream estimate
independent of worker count and scheduling.
"""

import multiprocessing as mp

_PAYLOAD = None


def _chunk_worker(bounds):
    lo, hi = bounds
    fn = _PAYLOAD
    return [fn(k) for k in range(lo, hi)]


def map_indices(fn, n, threads=1):
    """Evaluate fn(k) for k in range(n), optionally across forked workers.

    fn must return a picklable record (tuples of plain floats/ints).  Falls
    back to the serial path when fork is unavailable or n is small.
    """
    if threads is None:
        threads = 1
    threads = max(1, int(threads))
    if threads == 1 or n < 4 * threads or "fork" not in mp.get_all_start_methods():
        return [fn(k) for k in range(n)]
    global _PAYLOAD
    chunk = max(1, -(-n // (threads * 8)))
    bounds = [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]
    ctx = mp.get_context("fork")
    _PAYLOAD = fn
    try:
        with ctx.Pool(threads) as pool:
            parts = pool.map(_chunk_worker, bounds)
    finally:
        _PAYLOAD = None
    return [rec for part in parts for rec in part]
