"""Poisson mark-time streams with cutoff thinning and superposition extension.

A stream holds one realization of a unit-intensity planar Poisson measure
restricted to marks in [0, k_max) and times in [0, horizon): event times form
a rate-k_max Poisson process and marks are i.i.d. Uniform[0, k_max),
independent of the times.  Thinning to a cutoff K <= k_max keeps exactly the
events with mark < K, so every truncation level sees the same underlying
measure -- the device that makes cross-cutoff path equality bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import EXTEND, POISSON, substream


@dataclass(frozen=True)
class JumpStream:
    k_max: float
    horizon: float
    times: np.ndarray
    marks: np.ndarray
    seed_token: tuple

    def __len__(self):
        return self.times.size


def sample_stream(k_max, horizon, seed, traj=0):
    """Sample a master stream: Poisson(k_max * horizon) events, uniform marks.

    Events at exactly t = 0 or t = horizon are excluded (half-open window).
    Fully determined by (seed, traj).
    """
    if not k_max >= 0:
        raise ValueError("k_max must be nonnegative")
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    rng = substream(seed, traj, POISSON)
    n = int(rng.poisson(k_max * horizon)) if k_max > 0 else 0
    times = np.sort(rng.uniform(0.0, horizon, n))
    marks = rng.uniform(0.0, k_max, n)
    keep = times > 0.0
    return JumpStream(float(k_max), float(horizon), times[keep], marks[keep],
                      (int(seed), int(traj)))


def thin(stream, cutoff):
    """Restrict to events with mark < cutoff.

    Monotone in cutoff: the kept events for a smaller cutoff are a subset of
    those for a larger one, bit-exactly.
    """
    if not 0 <= cutoff <= stream.k_max:
        raise ValueError(f"cutoff {cutoff} outside (0, k_max={stream.k_max}]")
    keep = stream.marks < cutoff
    return JumpStream(float(cutoff), stream.horizon, stream.times[keep],
                      stream.marks[keep], stream.seed_token + ("thin", float(cutoff)))


def extend_stream(stream, new_k_max, seed, traj=0, chunk=1):
    """Raise the mark ceiling by superposing an independent band of events.

    Existing events are preserved verbatim; the added events carry marks in
    [k_max, new_k_max), so thinning the extended stream at any cutoff at or
    below the old ceiling returns exactly the old thinned stream.
    """
    if new_k_max <= stream.k_max:
        return stream
    rng = substream(seed, traj, EXTEND, chunk)
    extra_rate = new_k_max - stream.k_max
    n = int(rng.poisson(extra_rate * stream.horizon))
    t2 = rng.uniform(0.0, stream.horizon, n)
    z2 = rng.uniform(stream.k_max, new_k_max, n)
    keep = t2 > 0.0
    times = np.concatenate([stream.times, t2[keep]])
    marks = np.concatenate([stream.marks, z2[keep]])
    order = np.argsort(times, kind="stable")
    return JumpStream(float(new_k_max), stream.horizon, times[order], marks[order],
                      stream.seed_token + ("extend", float(new_k_max), int(chunk)))
