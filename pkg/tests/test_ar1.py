import math

import numpy as np
import pytest
from scipy import integrate, stats

from siscorrect.ar1 import (
    Ar1Model,
    Ar1Params,
    geom_sum,
    kstep_logpdf,
    partial_weight_log,
    simulate_truth,
    stationary_logpdf,
    transition_logpdf,
    u2_log_normalizer,
    u2_normalizer,
)

P = Ar1Params(phi=0.5, sigma2=1.0, theta=0.2)


class TestParams:
    def test_unstable_phi_rejected(self):
        for phi in (1.0, -1.0, 1.5):
            with pytest.raises(ValueError, match="phi"):
                Ar1Params(phi=phi, sigma2=1.0, theta=0.2)

    def test_nonpositive_variance_rejected(self):
        with pytest.raises(ValueError, match="sigma2"):
            Ar1Params(phi=0.5, sigma2=0.0, theta=0.2)

    def test_theta_outside_unit_interval_rejected(self):
        for theta in (-0.01, 1.01):
            with pytest.raises(ValueError, match="theta"):
                Ar1Params(phi=0.5, sigma2=1.0, theta=theta)

    def test_stationary_variance(self):
        assert P.stationary_variance == pytest.approx(1.0 / 0.75)


class TestDensities:
    def test_geom_sum_golden(self):
        assert geom_sum(0.5, 3) == pytest.approx(1.0 + 0.25 + 0.0625)
        assert geom_sum(0.5, 0) == 0.0
        assert geom_sum(0.0, 0) == 0.0
        assert geom_sum(0.0, 7) == 1.0
        with pytest.raises(ValueError):
            geom_sum(0.5, -1)

    def test_stationary_logpdf_matches_scipy(self):
        x = np.linspace(-4, 4, 9)
        want = stats.norm.logpdf(x, 0.0, math.sqrt(P.stationary_variance))
        assert np.allclose(stationary_logpdf(P, x), want, atol=1e-12)

    def test_transition_logpdf_matches_scipy(self):
        prev = np.array([-1.0, 0.0, 2.5])
        cur = np.array([0.3, -0.7, 1.0])
        want = stats.norm.logpdf(cur, P.phi * prev, math.sqrt(P.sigma2))
        assert np.allclose(transition_logpdf(P, prev, cur), want, atol=1e-12)

    def test_kstep_satisfies_chapman_kolmogorov(self):
        # integrate the one-step kernel against itself and compare with the
        # closed-form two-step kernel
        start, end = 0.8, -0.4

        def integrand(z):
            return math.exp(
                float(transition_logpdf(P, np.array([start]), np.array([z]))[0])
                + float(transition_logpdf(P, np.array([z]), np.array([end]))[0])
            )

        val, _ = integrate.quad(integrand, -12, 12)
        assert math.log(val) == pytest.approx(
            float(kstep_logpdf(P, start, end, 2)), abs=1e-9
        )

    def test_kstep_one_step_reduces_to_transition(self):
        assert float(kstep_logpdf(P, 1.2, 0.1, 1)) == pytest.approx(
            float(transition_logpdf(P, np.array([1.2]), np.array([0.1]))[0])
        )


class TestPartialWeight:
    def test_transition_index_golden(self):
        # phi=.5, sigma2=1: changing x2 from 0 to 1 with x1 = 0 costs
        # exp(-(1 - 0)/2), log weight -1/2
        orig = np.array([0.0, 0.0, 0.0])
        corr = np.array([0.0, 1.0, 0.0])
        assert partial_weight_log(P, orig, corr, 2) == pytest.approx(-0.5)

    def test_first_index_golden(self):
        # stationary ratio: -(1 - phi^2)/(2 sigma2) * (y1^2 - x1^2) = -0.375
        orig = np.array([0.0, 0.0])
        corr = np.array([1.0, 0.0])
        assert partial_weight_log(P, orig, corr, 1) == pytest.approx(-0.375)

    def test_matches_density_ratio_everywhere(self):
        gen = np.random.default_rng(10)
        x = gen.normal(size=6)
        y = x.copy()
        y[[1, 2, 4]] = gen.normal(size=3)
        for i in range(1, 7):
            if i == 1:
                want = float(stationary_logpdf(P, y[0]) - stationary_logpdf(P, x[0]))
            else:
                want = float(
                    transition_logpdf(P, y[i - 2], y[i - 1])
                    - transition_logpdf(P, x[i - 2], x[i - 1])
                )
            assert partial_weight_log(P, x, y, i) == pytest.approx(want, abs=1e-12)

    def test_untouched_series_has_unit_weight(self):
        x = np.array([0.4, -1.1, 0.0])
        for i in (1, 2, 3):
            assert partial_weight_log(P, x, x, i) == 0.0


class TestU2Normalizer:
    def test_interior_block_is_bridge_mass(self):
        # replacing x3 of a 5-long series leaves the 2-step kernel from x2
        # to x4; verify against direct quadrature of the freed factor
        x = np.array([0.3, -0.2, 9.9, 0.7, 0.1])  # replaced slot value is irrelevant

        def integrand(z):
            return math.exp(
                float(transition_logpdf(P, x[1], z))
                + float(transition_logpdf(P, z, x[3]))
            )

        val, _ = integrate.quad(integrand, -12, 12)
        got = u2_log_normalizer(P, x, [3])
        assert got == pytest.approx(math.log(val), abs=1e-9)
        assert got == pytest.approx(float(kstep_logpdf(P, x[1], x[3], 2)), abs=1e-12)

    def test_two_wide_block_is_double_integral(self):
        x = np.array([0.3, -0.2, 0.0, 0.0, 0.7, 0.1])

        def integrand(z4, z3):
            return math.exp(
                float(transition_logpdf(P, x[1], z3))
                + float(transition_logpdf(P, z3, z4))
                + float(transition_logpdf(P, z4, x[4]))
            )

        val, _ = integrate.dblquad(integrand, -12, 12, -12, 12)
        assert u2_log_normalizer(P, x, [3, 4]) == pytest.approx(
            math.log(val), abs=1e-8
        )

    def test_block_starting_the_series_leaves_stationary_mass(self):
        x = np.array([0.0, 0.0, 1.3, 0.4])

        def integrand(z2, z1):
            return math.exp(
                float(stationary_logpdf(P, z1))
                + float(transition_logpdf(P, z1, z2))
                + float(transition_logpdf(P, z2, x[2]))
            )

        val, _ = integrate.dblquad(integrand, -14, 14, -14, 14)
        got = u2_log_normalizer(P, x, [1, 2])
        assert got == pytest.approx(math.log(val), abs=1e-8)
        assert got == pytest.approx(float(stationary_logpdf(P, x[2])), abs=1e-12)

    def test_block_ending_at_horizon_contributes_nothing(self):
        x = np.array([0.3, -0.2, 0.0, 0.0])
        assert u2_log_normalizer(P, x, [3, 4]) == 0.0

    def test_disjoint_blocks_add(self):
        x = np.random.default_rng(11).normal(size=7)
        got = u2_log_normalizer(P, x, [2, 5, 4])
        want = u2_log_normalizer(P, x, [2]) + u2_log_normalizer(P, x, [4, 5])
        assert got == pytest.approx(want, abs=1e-12)

    def test_block_outside_history_rejected(self):
        with pytest.raises(ValueError, match="outside history"):
            u2_log_normalizer(P, np.zeros(3), [4])

    def test_exp_wrapper(self):
        x = np.array([0.3, -0.2, 9.9, 0.7, 0.1])
        assert u2_normalizer(P, x, [3]) == pytest.approx(
            math.exp(u2_log_normalizer(P, x, [3]))
        )

    def test_model_method_vectorizes_the_scalar_form(self):
        model = Ar1Model(P)
        gen = np.random.default_rng(12)
        block = gen.normal(size=(5, 8, 1))
        newly = [2, 3, 6]
        got = model.u2_log_normalizer(block, newly)
        want = [u2_log_normalizer(P, block[j, :, 0], newly) for j in range(5)]
        assert np.allclose(got, want, atol=1e-12)


class TestModelAdapter:
    def test_sampler_shapes_and_moments(self):
        model = Ar1Model(P)
        gen = np.random.default_rng(13)
        init = model.initial_sample(gen, 40000)
        assert init.shape == (40000, 1)
        sv = P.stationary_variance
        assert abs(init.mean()) < 4 * math.sqrt(sv / 40000)
        assert abs(init.var() - sv) < 4 * sv * math.sqrt(2.0 / 40000)
        prev = np.full((40000, 1), 2.0)
        nxt = model.transition_sample(gen, prev)
        assert nxt.shape == (40000, 1)
        assert abs(nxt.mean() - P.phi * 2.0) < 4 * math.sqrt(P.sigma2 / 40000)

    def test_logpdfs_delegate_to_module_functions(self):
        model = Ar1Model(P)
        rows = np.array([[0.5], [-1.0]])
        prev = np.array([[0.1], [0.2]])
        assert np.allclose(model.initial_logpdf(rows), stationary_logpdf(P, rows[:, 0]))
        assert np.allclose(
            model.transition_logpdf(prev, rows),
            transition_logpdf(P, prev[:, 0], rows[:, 0]),
        )

    def test_u1_box_indicator(self):
        model = Ar1Model(P, u1_bound=2.0)
        vals = np.array([[1.9, -1.9], [1.9, 2.1], [0.0, 0.0]])
        got = model.u1_log_indicator(vals)
        assert got[0] == 0.0 and got[2] == 0.0
        assert got[1] == -np.inf

    def test_default_bound_is_eight_stationary_sds(self):
        model = Ar1Model(P)
        assert model.u1_bound == pytest.approx(8.0 * math.sqrt(P.stationary_variance))

    def test_bad_bound_rejected(self):
        with pytest.raises(ValueError):
            Ar1Model(P, u1_bound=0.0)


class TestSimulateTruth:
    def test_deterministic_in_seed(self):
        a = simulate_truth(P, 25, 99)
        b = simulate_truth(P, 25, 99)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
        c = simulate_truth(P, 25, 100)
        assert not np.array_equal(a[0], c[0])

    def test_reveal_steps_are_legal(self):
        for seed in range(20):
            _, reveal = simulate_truth(P, 30, seed)
            r = reveal[:, 0]
            own = np.arange(1, 31)
            assert np.all((r == 0) | (r >= own))
            assert np.all(r <= 30)

    def test_certain_revelation_hits_birth_step(self):
        params = Ar1Params(phi=0.5, sigma2=1.0, theta=1.0)
        _, reveal = simulate_truth(params, 12, 3)
        assert np.array_equal(reveal[:, 0], np.arange(1, 13))

    def test_zero_theta_reveals_nothing(self):
        params = Ar1Params(phi=0.5, sigma2=1.0, theta=0.0)
        _, reveal = simulate_truth(params, 12, 3)
        assert np.all(reveal == 0)

    def test_birth_step_revelation_rate_matches_theta(self):
        hits = total = 0
        for seed in range(30):
            _, reveal = simulate_truth(P, 60, 1000 + seed)
            own = np.arange(1, 61)
            hits += int(np.sum(reveal[:, 0] == own))
            total += 60
        rate = hits / total
        sd = math.sqrt(P.theta * (1 - P.theta) / total)
        assert abs(rate - P.theta) < 4 * sd

    def test_values_follow_the_recursion(self):
        params = Ar1Params(phi=0.7, sigma2=0.5, theta=0.2)
        x, _ = simulate_truth(params, 5000, 42)
        x = x[:, 0]
        resid = x[1:] - params.phi * x[:-1]
        assert abs(resid.mean()) < 4 * math.sqrt(params.sigma2 / 4999)
        assert abs(resid.var() - params.sigma2) < 4 * params.sigma2 * math.sqrt(2 / 4999)
        # innovations must be uncorrelated with the past
        corr = np.corrcoef(resid, x[:-1])[0, 1]
        assert abs(corr) < 4 / math.sqrt(4999)

    def test_bad_horizon_rejected(self):
        with pytest.raises(ValueError):
            simulate_truth(P, 0, 1)
