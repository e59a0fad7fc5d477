"""Grid construction and the fixed-regime Euler-Maruyama integrator."""

import numpy as np
import pytest

from switchdiff import (DenseRates, NonFiniteError, RegimeModel,
                        integrate_segment, make_grid)
from switchdiff._rng import BROWNIAN, substream
from switchdiff.integrate import BrownianGrid

NO_RATES = DenseRates(np.zeros((1, 1)))


def diffusion_model(b, s, dim=1, horizon=10.0):
    return RegimeModel(dim, b, s, NO_RATES, horizon)


def ou_model(theta=1.0, sigma=np.sqrt(2.0)):
    eye = np.eye(1)
    return diffusion_model(lambda x, i, t: -theta * x,
                           lambda x, i, t: sigma * eye)


class TestMakeGrid:
    def test_breakpoints_are_nodes_exactly(self):
        bp = [0.0, 0.137, 0.55, 1.0]
        g = make_grid(bp, 0.1, 1, substream(0, 0, BROWNIAN))
        for t, idx in zip(bp, g.break_index):
            assert g.nodes[idx] == t

    def test_steps_bounded_by_target(self):
        g = make_grid([0.0, 0.31, 1.0], 0.07, 1, substream(0, 0, BROWNIAN))
        assert (g.steps <= 0.07 * (1 + 1e-9)).all()
        assert (g.steps > 0).all()

    def test_increment_variance_matches_step(self):
        # aggregate many seeds; per-step variance should equal step length
        bp = [0.0, 0.5, 1.0]
        draws = []
        for seed in range(400):
            g = make_grid(bp, 0.25, 1, substream(seed, 0, BROWNIAN))
            draws.append(g.increments[:, 0] / np.sqrt(g.steps))
        z = np.concatenate(draws)
        assert abs(z.var() - 1.0) < 0.1
        assert abs(z.mean()) < 0.05

    def test_deterministic_given_seed(self):
        a = make_grid([0.0, 1.0], 0.01, 2, substream(5, 3, BROWNIAN))
        b = make_grid([0.0, 1.0], 0.01, 2, substream(5, 3, BROWNIAN))
        assert np.array_equal(a.nodes, b.nodes)
        assert np.array_equal(a.increments, b.increments)

    def test_rejects_bad_breakpoints(self):
        with pytest.raises(ValueError):
            make_grid([0.0, 0.0, 1.0], 0.1, 1, substream(0, 0, BROWNIAN))


class TestIntegrateSegment:
    def test_frozen_dynamics(self):
        m = diffusion_model(lambda x, i, t: np.zeros(1),
                            lambda x, i, t: np.zeros((1, 1)))
        g = make_grid([0.0, 1.0], 0.1, 1, substream(0, 0, BROWNIAN))
        _, xs = integrate_segment(m, np.array([2.5]), 1, 0.0, 1.0, g)
        assert (xs == 2.5).all()

    def test_constant_drift_exact_any_dt(self):
        m = diffusion_model(lambda x, i, t: np.ones(1),
                            lambda x, i, t: np.zeros((1, 1)))
        for dt in (0.5, 0.13, 0.011):
            g = make_grid([0.0, 2.0], dt, 1, substream(0, 0, BROWNIAN))
            _, xs = integrate_segment(m, np.array([1.0]), 1, 0.0, 2.0, g)
            assert xs[-1, 0] == pytest.approx(3.0, abs=1e-12)

    def test_ou_terminal_mean(self):
        # closed-form oracle: E X_1 = x0 * exp(-1); weak-order-1 bias allowed
        m = ou_model()
        n, dt = 20_000, 1.0 / 32.0
        total = 0.0
        for k in range(n):
            g = make_grid([0.0, 1.0], dt, 1, substream(77, k, BROWNIAN))
            _, xs = integrate_segment(m, np.array([1.0]), 1, 0.0, 1.0, g)
            total += xs[-1, 0]
        mean = total / n
        sd_terminal = np.sqrt(1 - np.exp(-2.0))
        tol = 3 * sd_terminal / np.sqrt(n) + 2.0 * dt
        assert abs(mean - np.exp(-1.0)) < tol

    def test_determinism(self):
        m = ou_model()
        outs = []
        for _ in range(2):
            g = make_grid([0.0, 1.0], 0.01, 1, substream(3, 9, BROWNIAN))
            _, xs = integrate_segment(m, np.array([1.0]), 1, 0.0, 1.0, g)
            outs.append(xs)
        assert np.array_equal(outs[0], outs[1])

    def test_segment_endpoints_must_be_nodes(self):
        m = ou_model()
        g = make_grid([0.0, 1.0], 0.1, 1, substream(0, 0, BROWNIAN))
        with pytest.raises(ValueError):
            integrate_segment(m, np.array([1.0]), 1, 0.05, 1.0, g)

    def test_breakpoint_transparency_constant_coefficients(self):
        # splitting one step with consistent increments leaves the terminal
        # state unchanged (constant-coefficient steps are exact under splits)
        b = lambda x, i, t: np.array([0.7])
        s = lambda x, i, t: np.array([[1.3]])
        m = diffusion_model(b, s)
        rng = np.random.default_rng(2)
        z = rng.standard_normal(3)
        # coarse grid: steps 0.5, 0.5; the first fine pair sums to the first
        # coarse increment and the last increment is shared verbatim
        coarse = BrownianGrid(
            nodes=np.array([0.0, 0.5, 1.0]),
            steps=np.array([0.5, 0.5]),
            increments=np.array([[0.5 * (z[0] + z[1])], [np.sqrt(0.5) * z[2]]]),
            break_index=np.array([0, 2]),
            dim=1)
        fine = BrownianGrid(
            nodes=np.array([0.0, 0.25, 0.5, 1.0]),
            steps=np.array([0.25, 0.25, 0.5]),
            increments=np.array([[0.5 * z[0]], [0.5 * z[1]], [np.sqrt(0.5) * z[2]]]),
            break_index=np.array([0, 3]),
            dim=1)
        _, xs_c = integrate_segment(m, np.array([0.2]), 1, 0.0, 1.0, coarse)
        _, xs_f = integrate_segment(m, np.array([0.2]), 1, 0.0, 1.0, fine)
        assert xs_f[-1, 0] == pytest.approx(xs_c[-1, 0], abs=1e-12)

    def test_refinement_bias_slope(self):
        # OU terminal-mean bias ~ O(dt): slope about 1 on log-log
        theta = 1.0
        m = diffusion_model(lambda x, i, t: -theta * x,
                            lambda x, i, t: np.zeros((1, 1)))
        x0 = np.array([1.0])
        biases = []
        dts = [2.0 ** -3, 2.0 ** -4, 2.0 ** -5]
        for dt in dts:
            g = make_grid([0.0, 1.0], dt, 1, substream(0, 0, BROWNIAN))
            _, xs = integrate_segment(m, x0, 1, 0.0, 1.0, g)
            biases.append(abs(xs[-1, 0] - np.exp(-1.0)))
        slope = np.polyfit(np.log(dts), np.log(biases), 1)[0]
        assert 0.8 < slope < 1.2

    def test_nonfinite_raises_with_failure_time(self):
        m = diffusion_model(lambda x, i, t: x * x,
                            lambda x, i, t: np.zeros((1, 1)))
        g = make_grid([0.0, 1.0], 1e-3, 1, substream(0, 0, BROWNIAN))
        with pytest.raises(NonFiniteError) as err:
            integrate_segment(m, np.array([2.0]), 1, 0.0, 1.0, g)
        assert 0.4 < err.value.time < 0.6
        assert np.isfinite(err.value.states).all()
