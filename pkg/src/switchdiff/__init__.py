"""Simulation and certification toolkit for state-dependent regime-switching diffusions.

The package simulates coupled processes (X_t, regime_t) on R^d x {1, 2, ...}
where X follows a per-regime stochastic differential equation and the regime
switches at state-dependent rates, realized by classifying uniform Poisson
marks against per-regime interval layouts.  Alongside the solver it ships
grid checkers for Lyapunov-style non-explosion certificates and Monte Carlo
probes (moment bounds, exit tails, coupled continuity profiles, and a
matrix-exponential law oracle for the switching mechanism).
"""

__version__ = "0.1.0"

from .certify import (BetaSumReport, CertificateReport, ExponentialCertificate,
                      GridSpec, PolynomialCertificate, PowerLawRates,
                      check_condition_exp, check_condition_poly,
                      check_local_bounded_beta_sum, default_grid,
                      gronwall_bound_poly, tau_tail_bound_poly, zeta_partial)
from .errors import (ConfigError, NonFiniteError, SwitchDiffError,
                     TailUnresolvable, TruncationLeak)
from .hybrid import (HybridPath, PathStatus, SimConfig, Switch, auto_truncation,
                     simulate, simulate_truncated,
                     simulate_with_truncated_coefficients)
from .integrate import BrownianGrid, integrate_segment, make_grid
from .jumps import JumpStream, extend_stream, sample_stream, thin
from .model import (DenseRates, FunctionRates, IntervalRow, RateMatrix,
                    RegimeModel, interval_row, mark_displacement,
                    truncate_coefficients)
from .models import list_models, make_model, model_names
from .probe import (ProbeReport, ctmc_oracle, estimate_moment,
                    estimate_tau_tail, feller_probe)

__all__ = [
    "__version__",
    "BetaSumReport", "BrownianGrid", "CertificateReport", "ConfigError",
    "DenseRates", "ExponentialCertificate", "FunctionRates", "GridSpec",
    "HybridPath", "IntervalRow", "JumpStream", "NonFiniteError", "PathStatus",
    "PolynomialCertificate", "PowerLawRates", "ProbeReport", "RateMatrix",
    "RegimeModel", "SimConfig", "Switch", "SwitchDiffError", "TailUnresolvable",
    "TruncationLeak", "auto_truncation", "check_condition_exp",
    "check_condition_poly", "check_local_bounded_beta_sum", "ctmc_oracle",
    "default_grid", "estimate_moment", "estimate_tau_tail", "extend_stream",
    "feller_probe", "gronwall_bound_poly", "integrate_segment", "interval_row",
    "list_models", "make_grid", "make_model", "mark_displacement",
    "model_names", "sample_stream", "simulate", "simulate_truncated",
    "simulate_with_truncated_coefficients", "tau_tail_bound_poly", "thin",
    "truncate_coefficients", "zeta_partial",
]
