"""Built-in model registry.

Arbitrary measurable coefficients cannot be serialized, so the CLI exposes a
fixed set of named families; library users author models in code against
RegimeModel directly.  Builders are pure: the same parameters always yield
coefficient functions with identical behaviour.
"""

from __future__ import annotations

import numpy as np

from .certify import PowerLawRates
from .model import DenseRates, RegimeModel


def _ou_pair(thetas, sigmas, rates, horizon, dim):
    thetas = np.asarray(thetas, dtype=float)
    mats = [sg * np.eye(dim) for sg in np.asarray(sigmas, dtype=float)]
    n_th, n_sg = thetas.size, len(mats)

    def drift(x, i, t):
        return -thetas[min(i, n_th) - 1] * x

    def dispersion(x, i, t):
        return mats[min(i, n_sg) - 1]

    return RegimeModel(dim, drift, dispersion, rates, horizon)


def build_ou2(theta1=1.0, theta2=0.5, sigma1=1.0, sigma2=1.0,
              q12=1.0, q21=2.0, horizon=1.0, dim=1):
    """Mean-reverting diffusion in each of two regimes, constant switch rates."""
    rates = DenseRates([[0.0, q12], [q21, 0.0]])
    return _ou_pair([theta1, theta2], [sigma1, sigma2], rates, horizon, int(dim))


def build_ctmc2(q12=1.0, q21=2.0, horizon=1.0):
    """Pure switching between two regimes; the diffusion is frozen."""
    rates = DenseRates([[0.0, q12], [q21, 0.0]])
    zero = np.zeros(1)
    zmat = np.zeros((1, 1))
    return RegimeModel(1, lambda x, i, t: zero, lambda x, i, t: zmat, rates, horizon)


def build_ctmcn(n_regimes=5, scale=1.0, horizon=2.0):
    """Pure switching on n regimes with rates scale/|i-j|; diffusion frozen."""
    n = int(n_regimes)
    if n < 2:
        raise ValueError("n_regimes must be at least 2")
    q = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            if a != b:
                q[a, b] = scale / abs(a - b)
    zero = np.zeros(1)
    zmat = np.zeros((1, 1))
    return RegimeModel(1, lambda x, i, t: zero, lambda x, i, t: zmat,
                       DenseRates(q), horizon)


def build_powerlaw(gamma=3.0, p=1.0, theta=1.0, sigma=1.0, horizon=1.0, dim=1):
    """Mean-reverting diffusion under the power-law switching family.

    Rates (j + |x|^p)/|k - j|^gamma couple the switch intensity to both the
    regime index and the state radius; every regime shares the same
    drift/dispersion.
    """
    rates = PowerLawRates(gamma, p)
    return _ou_pair([theta], [sigma], rates, horizon, int(dim))


def build_blowup(horizon=1.0):
    """Deterministic superlinear drift x^2 with no noise and no switching.

    Started from x0 = 2 the closed-form trajectory blows up at time 1/2.
    """
    rates = DenseRates([[0.0]])

    def drift(x, i, t):
        return x * x

    zmat = np.zeros((1, 1))
    return RegimeModel(1, drift, lambda x, i, t: zmat, rates, horizon)


def build_degenerate(theta=1.0, sigma=1.0, q12=1.0, q21=1.0, horizon=1.0):
    """Two regimes where the second has zero dispersion (degenerate diffusion)."""
    rates = DenseRates([[0.0, q12], [q21, 0.0]])
    smat = sigma * np.eye(1)
    zmat = np.zeros((1, 1))

    def drift(x, i, t):
        return -theta * x

    def dispersion(x, i, t):
        return smat if i == 1 else zmat

    return RegimeModel(1, drift, dispersion, rates, horizon)


_REGISTRY = {
    "ou2": (build_ou2, "two-regime mean-reverting diffusion, constant rates",
            {"theta1": float, "theta2": float, "sigma1": float, "sigma2": float,
             "q12": float, "q21": float, "horizon": float, "dim": int}),
    "ctmc2": (build_ctmc2, "pure two-state switching, frozen diffusion",
              {"q12": float, "q21": float, "horizon": float}),
    "ctmcN": (build_ctmcn, "pure n-state switching, rates scale/|i-j|",
              {"n_regimes": int, "scale": float, "horizon": float}),
    "powerlaw": (build_powerlaw, "mean-reverting diffusion, power-law rate family",
                 {"gamma": float, "p": float, "theta": float, "sigma": float,
                  "horizon": float, "dim": int}),
    "blowup": (build_blowup, "superlinear drift x^2, no noise, no switching",
               {"horizon": float}),
    "degenerate": (build_degenerate, "two regimes, zero dispersion in regime 2",
                   {"theta": float, "sigma": float, "q12": float, "q21": float,
                    "horizon": float}),
}


def model_names():
    return sorted(_REGISTRY)


def model_params(name):
    if name not in _REGISTRY:
        raise KeyError(f"unknown model {name!r}")
    return _REGISTRY[name][2]


def make_model(name, **params):
    if name not in _REGISTRY:
        raise KeyError(f"unknown model {name!r}")
    builder, _, schema = _REGISTRY[name]
    for key in params:
        if key not in schema:
            raise KeyError(f"model {name!r} has no parameter {key!r}")
    cast = {k: schema[k](v) for k, v in params.items()}
    return builder(**cast)


def list_models():
    """Human-readable registry listing with parameter schemas."""
    lines = []
    for name in model_names():
        builder, desc, schema = _REGISTRY[name]
        defaults = builder.__defaults__ or ()
        names = builder.__code__.co_varnames[:builder.__code__.co_argcount]
        pairs = ", ".join(f"{k}={v}" for k, v in zip(names, defaults))
        lines.append(f"{name:12s} {desc}")
        lines.append(f"{'':12s} parameters: {pairs}")
    return "\n".join(lines)
