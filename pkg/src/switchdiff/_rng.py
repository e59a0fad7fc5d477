"""Counter-based substreams keyed by (seed, trajectory, purpose).

Every random draw in the package comes from a Philox generator derived from
the run seed plus a spawn key, so Brownian increments, jump events, stream
extensions and auxiliary draws never share or interleave state.  Two runs
that agree on (seed, trajectory index, purpose) consume identical streams,
which is what the cross-truncation coupling tests rely on.
"""

import numpy as np

POISSON = 0
BROWNIAN = 1
EXTEND = 2
AUX = 3


def substream(seed, traj, purpose, *extra):
    """Return a fresh Generator for one (trajectory, purpose) substream."""
    key = (int(traj), int(purpose)) + tuple(int(e) for e in extra)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))
