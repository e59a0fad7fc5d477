"""Monte Carlo verification layer.

Estimates the quantities the non-explosion certificates and the continuity
theory make checkable: growth-functional moments against their Gronwall
bound, stop-time tail probabilities across localization levels, semigroup
continuity profiles under common random numbers, and a matrix-exponential
law check for the pure switching mechanism.  Every probe consumes
trajectories from the hybrid solver; none re-implements dynamics.
Accumulation is per-trajectory-index, so estimates do not depend on worker
count or scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, List

import numpy as np
from scipy.linalg import expm

from ._parallel import map_indices
from ._rng import AUX, substream
from .certify import gronwall_bound_poly, tau_tail_bound_poly
from .errors import TruncationLeak
from .hybrid import simulate


@dataclass
class ProbeReport:
    """Labelled estimates with 95% confidence half-widths and diagnostics."""

    name: str
    params: Dict[str, object]
    labels: List[str]
    estimates: List[float]
    half_widths: List[float]
    n: int
    diagnostics: Dict[str, object]

    def value(self, label):
        return self.estimates[self.labels.index(label)]

    def half_width(self, label):
        return self.half_widths[self.labels.index(label)]

    def rows(self):
        par = ";".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        diag = ";".join(f"{k}={v}" for k, v in sorted(self.diagnostics.items()))
        return [[self.name, par, lab, est, hw, self.n, diag]
                for lab, est, hw in zip(self.labels, self.estimates, self.half_widths)]


def _mean_ci(values):
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    m = float(v.mean())
    hw = 1.96 * float(v.std(ddof=1)) / math.sqrt(v.size) if v.size > 1 else 0.0
    return m, hw


def _binom_hw(p_hat, n):
    return 1.96 * math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / n)


def estimate_moment(model, cert, x0, i0, t, n, cfg, *, threads=1):
    """Estimate E[(1+|X|^2)^p + p*regime^beta] at t stopped at the level ceiling.

    The caller is expected to have certified the model (check_condition_poly
    on a covering grid); the report pairs the estimate with the certificate's
    Gronwall bound.  Non-finite blow-ups are excluded from the mean and
    counted in diagnostics.
    """
    p, beta = cert.p, cert.beta
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if t <= 0.0:
        v0 = (1.0 + float(x0 @ x0)) ** p + p * float(i0) ** beta
        return ProbeReport(
            "moment",
            {"t": t, "p": p, "beta": beta, "x0": list(map(float, x0)), "i0": i0},
            ["moment", "gronwall_bound"],
            [v0, gronwall_bound_poly(cert, x0, i0, 0.0)],
            [0.0, 0.0], n, {"explosions": 0, "level_stops": 0})
    run_cfg = replace(cfg, horizon=float(t))

    def one(k):
        path = simulate(model, x0, i0, run_cfg, traj=k, record="events")
        _, xe, le = path.terminal
        st = path.status
        if st.nonfinite:
            return (float("nan"), 1.0, 1.0)
        val = (1.0 + float(xe @ xe)) ** p + p * float(le) ** beta
        return (val, 1.0 if st.exploded else 0.0, 0.0)

    recs = np.array(map_indices(one, n, threads), dtype=float)
    ok = ~np.isnan(recs[:, 0])
    est, hw = _mean_ci(recs[ok, 0])
    bound = gronwall_bound_poly(cert, x0, i0, t)
    return ProbeReport(
        "moment",
        {"t": t, "p": p, "beta": beta, "x0": list(map(float, x0)), "i0": i0},
        ["moment", "gronwall_bound"],
        [est, bound],
        [hw, 0.0],
        int(ok.sum()),
        {"explosions": int(n - ok.sum()), "level_stops": int(recs[ok, 1].sum())},
    )


def estimate_tau_tail(model, x0, i0, t, m_list, delta, n, cfg, *, cert=None,
                      n_starts=5, threads=1):
    """Estimate P(stop time of level M <= t) for each M, over a ball of starts.

    Starts are x0 plus points at distance delta (seeded, deterministic); all
    starts share trajectory substreams, so the per-M supremum inherits the
    per-path monotonicity of stop times in the level.  When a polynomial
    certificate is supplied, the analytic tail bound is reported per level.
    """
    levels = sorted(int(m) for m in m_list)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    d = x0.size
    aux = substream(cfg.seed, 0, AUX)
    starts = [x0]
    for _ in range(max(0, n_starts - 1)):
        u = aux.standard_normal(d)
        nu = float(np.linalg.norm(u))
        starts.append(x0 + (delta / nu) * u if nu > 0 else x0.copy())
    run_cfg = replace(cfg, horizon=float(t), stop_level=levels[0],
                      max_stop_level=levels[-1])
    horizon = float(t)

    tails = np.zeros((len(starts), len(levels)))
    explosions = 0
    for si, y in enumerate(starts):
        def one(k, _y=y):
            path = simulate(model, _y, i0, run_cfg, traj=k, record="events",
                            levels=levels)
            hit = {lv: tau for lv, tau in path.escalations}
            if path.status.nonfinite:
                # a non-finite blow-up exits every remaining level by then
                for lv in levels:
                    hit.setdefault(lv, path.status.tau)
            return tuple(hit.get(lv, math.inf) for lv in levels) + (
                1.0 if path.status.nonfinite else 0.0,)

        recs = np.array(map_indices(one, n, threads), dtype=float)
        explosions += int(recs[:, -1].sum())
        tails[si] = (recs[:, :-1] <= horizon).mean(axis=0)

    labels, ests, hws = [], [], []
    for li, lv in enumerate(levels):
        for si in range(len(starts)):
            labels.append(f"tail[M={lv},start={si}]")
            ests.append(float(tails[si, li]))
            hws.append(_binom_hw(tails[si, li], n))
        top = int(np.argmax(tails[:, li]))
        labels.append(f"tail_sup[M={lv}]")
        ests.append(float(tails[top, li]))
        hws.append(_binom_hw(tails[top, li], n))
        if cert is not None:
            labels.append(f"bound[M={lv}]")
            ests.append(max(tau_tail_bound_poly(cert, y, i0, t, lv) for y in starts))
            hws.append(0.0)
    return ProbeReport(
        "tau_tail",
        {"t": t, "delta": delta, "m_list": levels, "i0": i0,
         "x0": list(map(float, x0)), "n_starts": len(starts)},
        labels, ests, hws, n, {"explosions": explosions},
    )


def feller_probe(model, f, t, x, i, offsets, n, cfg, *, couple=True, threads=1):
    """Continuity profile of x -> E f(X_t, regime_t) around a start point.

    Estimates the semigroup value at x and at each offset start.  With
    couple=True every start reuses the same per-trajectory substreams --
    identical jump stream and Brownian increments -- which conditions on the
    frozen jump path and gives low-variance paired differences (at offset 0
    the difference is exactly zero).  With couple=False replicas are
    independent.  Paths that end before t (level ceiling or blow-up) are
    evaluated at their terminal state and counted in diagnostics.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = x.size
    deltas = [np.zeros(d)]
    for off in offsets:
        o = np.atleast_1d(np.asarray(off, dtype=float))
        deltas.append(np.full(d, float(o)) if o.size == 1 and d > 1 else o)
    run_cfg = replace(cfg, horizon=float(t))

    vals = np.empty((len(deltas), n))
    truncated = np.zeros(len(deltas), dtype=int)
    for di, dv in enumerate(deltas):
        y = x + dv
        base = 0 if couple else di * n

        def one(k, _y=y, _b=base):
            path = simulate(model, _y, i, run_cfg, traj=_b + k, record="events")
            _, xe, le = path.terminal
            bad = 1.0 if not path.status.reached_horizon else 0.0
            return (float(f(xe, le)), bad)

        recs = np.array(map_indices(one, n, threads), dtype=float)
        vals[di] = recs[:, 0]
        truncated[di] = int(recs[:, 1].sum())

    labels, ests, hws = [], [], []
    for di, dv in enumerate(deltas):
        tag = f"{float(dv[0]):g}" if d == 1 else f"{float(np.linalg.norm(dv)):g}"
        m, hw = _mean_ci(vals[di])
        labels.append(f"ptf[delta={tag}]")
        ests.append(m)
        hws.append(hw)
        diff = vals[di] - vals[0]
        if couple:
            dm, dhw = _mean_ci(diff)
        else:
            dm = float(diff.mean())
            dhw = 1.96 * math.sqrt(vals[di].var(ddof=1) / n + vals[0].var(ddof=1) / n)
        labels.append(f"diff[delta={tag}]")
        ests.append(abs(dm))
        hws.append(dhw)
    return ProbeReport(
        "feller",
        {"t": t, "x": list(map(float, x)), "i": i, "couple": couple,
         "offsets": [float(np.linalg.norm(np.atleast_1d(o))) for o in offsets]},
        labels, ests, hws, n, {"truncated": int(truncated.sum())},
    )


def ctmc_oracle(model, i0, t, j_trunc, n, cfg, *, x0=None, threads=1,
                leak_tol=1e-3):
    """Compare the simulated switching law against the matrix-exponential law.

    Valid for models whose diffusion is frozen (b = sigma = 0) or whose
    rates do not depend on x; rates are evaluated at x0.  The truncated
    generator keeps full row sums, so its exponential gives the exact
    sub-probability law of paths that never leave {1..j_trunc}; the
    empirical law is restricted the same way, leaving only sampling noise.
    Raises TruncationLeak when the simulated mass above j_trunc exceeds
    leak_tol.
    """
    J = int(j_trunc)
    if not 2 <= J <= 400:
        raise ValueError("j_trunc must be between 2 and 400")
    if not 1 <= i0 <= J:
        raise ValueError("i0 must lie within the truncated regime window")
    x0 = np.zeros(model.dim) if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))
    rates = model.rates
    gen = np.zeros((J, J))
    for a in range(1, J + 1):
        for b in range(1, J + 1):
            if a != b:
                gen[a - 1, b - 1] = rates.rate(a, b, x0)
        gen[a - 1, a - 1] = -rates.row_sum(a, x0)
    p_exact = expm(gen * float(t))[i0 - 1]
    leak_exact = max(0.0, 1.0 - float(p_exact.sum()))

    level = J + 2 + int(math.ceil(float(np.linalg.norm(x0))))
    run_cfg = replace(cfg, horizon=float(t), stop_level=level, max_stop_level=level)

    def one(k):
        if t <= 0.0:
            return (float(i0), float(i0), 0.0)
        path = simulate(model, x0, i0, run_cfg, traj=k, record="events")
        return (float(path.terminal[2]), float(path.max_regime),
                1.0 if path.status.nonfinite else 0.0)

    recs = np.array(map_indices(one, n, threads), dtype=float)
    stayed = recs[:, 1] <= J
    leak_sim = float(1.0 - stayed.mean())
    if leak_sim > leak_tol:
        raise TruncationLeak(
            f"simulated mass {leak_sim:.3g} above truncation {J} exceeds {leak_tol:g}")
    counts = np.bincount(recs[stayed, 0].astype(int), minlength=J + 1)[1:J + 1]
    p_hat = counts / n
    tv = 0.5 * (np.abs(p_hat - p_exact).sum() + abs(leak_sim - leak_exact))

    expected = np.append(p_exact, leak_exact) * n
    observed = np.append(counts, n - int(stayed.sum())).astype(float)
    use = expected >= 5.0
    chi2 = float(((observed[use] - expected[use]) ** 2 / expected[use]).sum()) if use.any() else 0.0

    labels = ["tv", "chi2", "chi2_bins", "leak_sim", "leak_exact"]
    ests = [float(tv), chi2, float(use.sum()), leak_sim, leak_exact]
    hws = [0.0] * 5
    for j in range(1, J + 1):
        labels += [f"p_hat[{j}]", f"p_exact[{j}]"]
        ests += [float(p_hat[j - 1]), float(p_exact[j - 1])]
        hws += [_binom_hw(float(p_hat[j - 1]), n), 0.0]
    return ProbeReport(
        "ctmc_oracle",
        {"t": t, "i0": i0, "j_trunc": J, "x0": list(map(float, x0))},
        labels, ests, hws, n,
        {"explosions": int(recs[:, 2].sum()), "stayed": int(stayed.sum())},
    )
