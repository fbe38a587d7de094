import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import TRUTH, close, mp_param_derivative, random_params
from nestces.data import Dataset, SynthSpec, generate
from nestces.errors import NonPositiveAggregate
from nestces.model import CesParams, Observation, eval_ces
from nestces.objective import FreeMask, Problem, Scale, jacobian, residuals, rss

ALL_FREE = FreeMask(True, True, True, True, True)
SINGLE = [Observation(10.0, 3.0, 7.0)]
CAPITAL_ONLY = CesParams(2, 1, 1, 0.5, 1.2)


def test_perfect_fit_has_zero_residuals():
    K = np.array([1.0, 2.0, 5.0])
    L = np.array([3.0, 1.0, 4.0])
    V = eval_ces(TRUTH, K, L)
    data = [Observation(v, k, l) for v, k, l in zip(V, K, L)]
    assert np.all(residuals(TRUTH, data) == 0.0)
    assert rss(TRUTH, data) == 0.0


def test_single_observation_levels():
    assert residuals(CAPITAL_ONLY, SINGLE, Scale.Levels) == pytest.approx([4.0], rel=1e-15)
    assert rss(CAPITAL_ONLY, SINGLE) == pytest.approx(16.0, rel=1e-15)


def test_single_observation_logs():
    assert residuals(CAPITAL_ONLY, SINGLE, Scale.Logs) == pytest.approx([math.log(10 / 6)], rel=1e-14)
    assert residuals(CAPITAL_ONLY, SINGLE, Scale.Logs)[0] == pytest.approx(0.51082562, abs=5e-9)


def test_generated_five_point_set_round_trips():
    data = generate(SynthSpec(TRUTH, 5, seed=42))
    assert rss(TRUTH, data) <= 1e-18


def test_inadmissible_observation_index_propagates():
    data = [Observation(1.0, 1.0, 1.0), Observation(1.0, 100.0, 1.0)]
    with pytest.raises(NonPositiveAggregate) as info:
        residuals(CesParams(1, 0.5, 3.0, 0.5, 1.0), data)
    assert info.value.index == 1


class TestFreeMask:
    def test_needs_a_free_parameter(self):
        with pytest.raises(ValueError, match="no free parameters"):
            FreeMask(False, False, False, False, False)

    def test_fixing(self):
        mask = FreeMask.fixing({"rho", "rho1"})
        assert mask.indices == [0, 1, 2]
        assert FreeMask.fixing(["A", "delta"]).indices == [2, 3, 4]

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            FreeMask.fixing(["gamma"])


class TestJacobian:
    def test_A_column_is_prediction_over_A(self):
        data = generate(SynthSpec(TRUTH, 20, seed=1, noise_sigma=0.1))
        J = jacobian(TRUTH, data, FreeMask(True, False, False, False, False))
        pred = Problem(data).predict(TRUTH)
        assert J.shape == (20, 1)
        np.testing.assert_allclose(J[:, 0], pred / TRUTH.efficiency_A, rtol=1e-14)

    def test_column_order_follows_parameter_order(self):
        data = generate(SynthSpec(TRUTH, 10, seed=2))
        full = jacobian(TRUTH, data, ALL_FREE)
        part = jacobian(TRUTH, data, FreeMask(False, True, False, False, True))
        np.testing.assert_array_equal(part, full[:, [1, 4]])

    @pytest.mark.parametrize("scale", list(Scale))
    def test_against_double_precision_finite_differences(self, scale):
        # moderate parameters keep every entry far from the FD rounding floor
        rng = np.random.default_rng(11)
        data = generate(SynthSpec(TRUTH, 30, seed=5))
        prob = Problem(data, scale)
        for _ in range(10):
            p = random_params(rng, rho_low=0.2, rho_high=2.0)
            J = prob.jacobian(p, [0, 1, 2, 3, 4])
            theta = p.as_array()
            for j in range(5):
                h = 1e-6 * max(1.0, abs(theta[j]))
                up, down = theta.copy(), theta.copy()
                up[j] += h
                down[j] -= h
                fd = (prob.predict(CesParams.from_array(up)) - prob.predict(CesParams.from_array(down))) / (2 * h)
                scale_ref = np.max(np.abs(fd))
                np.testing.assert_allclose(J[:, j], fd, rtol=1e-6, atol=1e-6 * scale_ref)

    def test_against_extended_precision_differences(self):
        rng = np.random.default_rng(12)
        for _ in range(30):
            p = random_params(rng)
            K, L = np.exp(rng.uniform(math.log(0.1), math.log(100), 2))
            J = Problem([Observation(1.0, K, L)]).jacobian(p, [0, 1, 2, 3, 4])[0]
            for j in range(5):
                assert close(J[j], mp_param_derivative(p.as_array(), K, L, j), 1e-6)

    @pytest.mark.parametrize("scale", list(Scale))
    def test_rho_columns_near_zero_use_finite_differences(self, scale):
        data = generate(SynthSpec(TRUTH, 10, seed=3))
        prob = Problem(data, scale)
        at_zero = prob.jacobian(TRUTH.replace(rho=0.0, rho1=0.0), [3, 4])
        nearby = prob.jacobian(TRUTH.replace(rho=1e-6, rho1=1e-6), [3, 4])
        assert np.all(np.isfinite(at_zero))
        np.testing.assert_allclose(at_zero, nearby, rtol=1e-4, atol=1e-9)


class TestInvariants:
    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_rss_permutation_invariant(self, seed):
        data = generate(SynthSpec(TRUTH, 15, seed=seed, noise_sigma=0.2))
        perm = np.random.default_rng(seed).permutation(15)
        shuffled = Dataset(tuple(data.observations[i] for i in perm))
        p = TRUTH.replace(delta=0.55)
        assert rss(p, shuffled) == pytest.approx(rss(p, data), rel=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(c=st.floats(1e-3, 1e3), seed=st.integers(0, 1000))
    def test_rescaling_output_and_A(self, c, seed):
        data = generate(SynthSpec(TRUTH, 8, seed=seed, noise_sigma=0.1))
        scaled = [Observation(o.output * c, o.capital, o.labor) for o in data]
        p_scaled = TRUTH.replace(A=TRUTH.efficiency_A * c)
        r_log = residuals(TRUTH, data, Scale.Logs)
        np.testing.assert_allclose(residuals(p_scaled, scaled, Scale.Logs), r_log, atol=1e-12)
        r_lev = residuals(TRUTH, data, Scale.Levels)
        np.testing.assert_allclose(residuals(p_scaled, scaled, Scale.Levels), c * r_lev, rtol=1e-9, atol=1e-12 * c)

    def test_problem_matches_functional_api(self):
        data = generate(SynthSpec(TRUTH, 12, seed=9, noise_sigma=0.1))
        for scale in Scale:
            np.testing.assert_array_equal(Problem(data, scale).residuals(TRUTH), residuals(TRUTH, data, scale))
