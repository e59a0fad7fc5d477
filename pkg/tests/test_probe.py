"""Monte Carlo probes against closed-form and frozen-dynamics oracles."""

import numpy as np
import pytest

from switchdiff import (DenseRates, PolynomialCertificate, RegimeModel,
                        SimConfig, TruncationLeak, ctmc_oracle, estimate_moment,
                        estimate_tau_tail, feller_probe, make_model)


def frozen_model(horizon=1.0):
    z, zm = np.zeros(1), np.zeros((1, 1))
    return RegimeModel(1, lambda x, i, t: z, lambda x, i, t: zm,
                       DenseRates(np.zeros((1, 1))), horizon)


CFG = SimConfig(stop_level=8, max_stop_level=64, seed=314, dt_target=0.05)


class TestEstimateMoment:
    def test_frozen_path_exact_zero_variance(self):
        cert = PolynomialCertificate(p=1.0, beta=1.0, growth=0.0)
        rep = estimate_moment(frozen_model(), cert, [2.0], 1, 1.0, 200, CFG)
        assert rep.value("moment") == (1 + 4.0) + 1.0
        assert rep.half_width("moment") == 0.0
        assert rep.value("moment") <= rep.value("gronwall_bound")

    def test_time_zero(self):
        cert = PolynomialCertificate(p=1.0, beta=1.0, growth=1.0)
        rep = estimate_moment(frozen_model(), cert, [3.0], 2, 0.0, 50, CFG)
        assert rep.value("moment") == (1 + 9.0) + 2.0
        assert rep.half_width("moment") == 0.0

    def test_ou_two_regime_below_bound(self):
        model = make_model("ou2")
        cert = PolynomialCertificate(p=1.0, beta=1.0, growth=6.0)
        rep = estimate_moment(model, cert, [1.0], 1, 1.0, 2000, CFG)
        assert rep.value("moment") <= (rep.value("gronwall_bound")
                                       + 3 * rep.half_width("moment"))
        assert rep.diagnostics["explosions"] == 0


class TestEstimateTauTail:
    def test_frozen_never_exits(self):
        rep = estimate_tau_tail(frozen_model(), [1.0], 1, 1.0, [4, 8], 0.1,
                                100, CFG)
        assert rep.value("tail_sup[M=4]") == 0.0
        assert rep.value("tail_sup[M=8]") == 0.0

    def test_already_outside_is_one(self):
        rep = estimate_tau_tail(frozen_model(), [5.0], 2, 1.0, [4], 0.1, 50, CFG)
        assert rep.value("tail_sup[M=4]") == 1.0

    def test_ou_decreasing_below_bound(self):
        model = make_model("ou2", sigma1=2.0, sigma2=2.0)
        cert = PolynomialCertificate(p=1.0, beta=1.0, growth=6.0)
        rep = estimate_tau_tail(model, [1.0], 1, 1.0, [4, 8, 16], 0.1, 500,
                                CFG, cert=cert)
        sups = [rep.value(f"tail_sup[M={m}]") for m in (4, 8, 16)]
        assert all(b <= a for a, b in zip(sups, sups[1:]))
        for m in (4, 8, 16):
            hw = rep.half_width(f"tail_sup[M={m}]")
            assert rep.value(f"tail_sup[M={m}]") <= (rep.value(f"bound[M={m}]")
                                                     + 3 * hw + 1e-12)


class TestFellerProbe:
    def test_constant_function(self):
        model = make_model("ou2")
        rep = feller_probe(model, lambda x, j: 1.0, 1.0, [0.0], 1,
                           [0.1, 0.5], 100, CFG)
        for lab in rep.labels:
            if lab.startswith("ptf"):
                assert rep.value(lab) == 1.0
            if lab.startswith("diff"):
                assert rep.value(lab) == 0.0

    def test_coupled_zero_offset_identity(self):
        model = make_model("ou2")
        f = lambda x, j: float(x[0] > 0)
        rep = feller_probe(model, f, 1.0, [0.0], 1, [0.0, 0.2], 200, CFG,
                           couple=True)
        assert rep.value("diff[delta=0]") == 0.0
        assert rep.half_width("diff[delta=0]") == 0.0

    def test_profile_shrinks_with_offset(self):
        model = make_model("ou2")
        f = lambda x, j: float(x[0] > 0)
        rep = feller_probe(model, f, 1.0, [0.0], 1, [0.05, 0.5], 4000, CFG,
                           couple=True)
        small = rep.value("diff[delta=0.05]")
        large = rep.value("diff[delta=0.5]")
        assert small < large

    def test_uncoupled_runs(self):
        model = make_model("ou2")
        f = lambda x, j: float(x[0] > 0)
        rep = feller_probe(model, f, 0.5, [0.0], 1, [0.3], 300, CFG,
                           couple=False)
        assert np.isfinite(rep.value("diff[delta=0.3]"))
        assert rep.half_width("diff[delta=0.3]") > 0


class TestCtmcOracle:
    def test_two_state_closed_form(self):
        # P(regime_1 = 2 | start 1) = (q12/(q12+q21)) (1 - exp(-(q12+q21)))
        model = make_model("ctmc2", q12=1.0, q21=2.0)
        n = 20_000
        cfg = SimConfig(stop_level=5, seed=99, dt_target=1.0)
        rep = ctmc_oracle(model, 1, 1.0, 2, n, cfg)
        p_true = (1.0 / 3.0) * (1.0 - np.exp(-3.0))
        assert rep.value("p_exact[2]") == pytest.approx(p_true, abs=1e-12)
        se = np.sqrt(p_true * (1 - p_true) / n)
        assert abs(rep.value("p_hat[2]") - p_true) < 3 * se
        assert rep.value("tv") < 0.02

    def test_no_rates_point_mass(self):
        model = frozen_model()
        rep = ctmc_oracle(model, 1, 1.0, 2, 200,
                          SimConfig(stop_level=5, seed=1, dt_target=1.0))
        assert rep.value("p_hat[1]") == 1.0
        assert rep.value("tv") == pytest.approx(0.0, abs=1e-12)

    def test_time_zero_point_mass(self):
        model = make_model("ctmc2")
        rep = ctmc_oracle(model, 2, 0.0, 3, 100,
                          SimConfig(stop_level=6, seed=1, dt_target=1.0))
        assert rep.value("p_hat[2]") == 1.0
        assert rep.value("p_exact[2]") == 1.0
        assert rep.value("tv") == 0.0

    def test_truncation_leak_raises(self):
        model = make_model("ctmcN", n_regimes=6, scale=2.0, horizon=2.0)
        with pytest.raises(TruncationLeak):
            ctmc_oracle(model, 2, 2.0, 3, 500,
                        SimConfig(stop_level=12, seed=5, dt_target=2.0))

    def test_five_state_tv_small(self):
        model = make_model("ctmcN", n_regimes=5)
        rep = ctmc_oracle(model, 1, 1.0, 5, 20_000,
                          SimConfig(stop_level=8, seed=17, dt_target=1.0))
        assert rep.value("tv") < 0.02
        assert rep.value("leak_sim") == 0.0


class TestReportRows:
    def test_rows_shape(self):
        model = make_model("ctmc2")
        rep = ctmc_oracle(model, 1, 0.5, 2, 100,
                          SimConfig(stop_level=5, seed=3, dt_target=1.0))
        rows = rep.rows()
        assert all(len(r) == 7 for r in rows)
        assert rows[0][0] == "ctmc_oracle"
