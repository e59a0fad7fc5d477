"""Per-environment Euler-Maruyama integration on a breakpoint-aligned grid.

The grid is induced by prescribed breakpoints (jump candidate times plus the
window endpoints): each inter-breakpoint span is subdivided into equal steps
no longer than dt_target, so every breakpoint is a node exactly and no step
ever straddles a jump time.  Increments are drawn once for the whole grid,
in node order, which keeps runs bit-identical whenever (generator state,
breakpoints, dt_target) agree.

Euler-Maruyama is used deliberately: coefficients may be merely measurable,
possibly degenerate, so there is no extra regularity for a higher-order
scheme to exploit, and state-adaptive stepping would consume randomness
state-dependently and break cross-cutoff coupling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteError


@dataclass(frozen=True)
class BrownianGrid:
    nodes: np.ndarray        # all grid times, strictly increasing
    steps: np.ndarray        # np.diff(nodes)
    increments: np.ndarray   # (len(nodes)-1, dim); variance of each row = step
    break_index: np.ndarray  # positions of the input breakpoints in nodes
    dim: int


def make_grid(breakpoints, dt_target, dim, rng):
    """Build the grid and draw all its Gaussian increments.

    breakpoints must be strictly increasing; dt_target > 0 fixes the largest
    step.  Subdivision uses linspace so breakpoint floats are preserved
    exactly as nodes.
    """
    bp = np.asarray(breakpoints, dtype=float)
    if bp.size < 2:
        raise ValueError("need at least two breakpoints")
    spans = np.diff(bp)
    if not (spans > 0).all():
        raise ValueError("breakpoints must be strictly increasing")
    if not dt_target > 0:
        raise ValueError("dt_target must be positive")
    counts = np.maximum(1, np.ceil(spans / dt_target * (1.0 - 1e-12)).astype(np.int64))
    total = int(counts.sum())
    seg = np.repeat(np.arange(spans.size), counts)
    ends = np.cumsum(counts)
    frac = (np.arange(1, total + 1) - np.repeat(ends - counts, counts)) \
        / np.repeat(counts, counts)
    vals = bp[seg] + frac * spans[seg]
    vals[ends - 1] = bp[1:]  # breakpoints survive as nodes bit-exactly
    nodes = np.concatenate((bp[:1], vals))
    bidx = np.concatenate(([0], ends)).astype(np.intp)
    steps = np.diff(nodes)
    incr = rng.standard_normal((steps.size, dim)) * np.sqrt(steps)[:, None]
    return BrownianGrid(nodes, steps, incr, bidx, dim)


def integrate_segment(model, x0, regime, t0, t1, grid):
    """Euler-Maruyama over the grid nodes in [t0, t1] with a frozen regime.

    t0 and t1 must be grid nodes.  Returns (times, states) with states[k] the
    solution at times[k] and states[0] == x0.  Raises NonFiniteError carrying
    the finite prefix if any coordinate becomes NaN or infinite; the caller
    treats that as an explosion candidate at the reported node time.
    """
    nodes = grid.nodes
    a = int(np.searchsorted(nodes, t0))
    b = int(np.searchsorted(nodes, t1))
    if not (t0 < t1 and a < nodes.size and b < nodes.size
            and nodes[a] == t0 and nodes[b] == t1):
        raise ValueError("segment endpoints must be grid nodes with t0 < t1")
    drift, dispersion = model.drift, model.dispersion
    steps, incr = grid.steps, grid.increments
    m = b - a
    states = np.empty((m + 1, model.dim))
    x = np.asarray(x0, dtype=float)
    states[0] = x
    i = int(regime)
    fail_at = None
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        try:
            t = t0
            for k in range(a, b):
                x = x + drift(x, i, t) * steps[k] + dispersion(x, i, t) @ incr[k]
                states[k - a + 1] = x
                t = nodes[k + 1]
        except (OverflowError, FloatingPointError):
            fail_at = k - a + 1
            states[fail_at:] = np.nan
    finite = np.isfinite(states).all(axis=1)
    if not finite.all():
        bad = int(np.argmin(finite))
        if fail_at is not None:
            bad = min(bad, fail_at)
        # finite prefix only; the failure node itself is reported via .time
        raise NonFiniteError(float(nodes[a + bad]), nodes[a:a + bad].copy(),
                             states[:bad])
    return nodes[a:b + 1], states
