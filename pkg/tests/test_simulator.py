import math

import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from twosize.errors import OutOfRange
from twosize.model import GenicSelection, Neutral, ParentIndependentMutation, SizeParams
from twosize.simulator import (GenerationState, endpoint_ensemble, exact_one_step_law, initial_state,
                               record_stride, simulate_ensemble, simulate_trajectory, step_generation,
                               step_generation_reference)
from twosize.streams import stream


@pytest.fixture
def rng():
    return np.random.default_rng(77)


def law_of_next(law):
    out = {}
    for x, m, q in zip(law.x_freq, law.size, law.prob):
        out[(float(x), int(m))] = out.get((float(x), int(m)), 0.0) + q
    return out


class TestStep:
    def test_absorbing_zero(self, rng):
        nxt = step_generation(GenerationState(0, 5), Neutral(), SizeParams("0.3", 5), False, rng)
        assert (nxt.k_small, nxt.m_size) == (0, 5)

    def test_absorbing_one(self, rng):
        nxt = step_generation(GenerationState(7, 7), Neutral(), SizeParams("0.5", 5), False, rng)
        assert (nxt.x_freq, nxt.m_size) == (1.0, 10)

    def test_exact_one_step_law(self):
        law = exact_one_step_law(0.5, Neutral(), SizeParams("0.5", 1))
        assert law_of_next(law) == pytest.approx({(0.0, 1): 0.5, (1.0, 2): 0.25, (0.5, 2): 0.25})
        assert law.expect(law.x_freq) == pytest.approx(0.375, abs=1e-15)

    def test_strict_zero_drift_example(self):
        law = exact_one_step_law(0.5, Neutral(), SizeParams("0.5", 1), strict=True)
        assert law.expect(law.x_freq) == pytest.approx(0.5, abs=1e-15)

    def test_stopping_bias_sweep(self):
        vals = []
        for R in (20, 40, 80):
            law = exact_one_step_law(0.5, Neutral(), SizeParams("0.3", R))
            vals.append(R * (law.expect(law.x_freq) - 0.5))
        gaps = [abs(v + 0.175) for v in vals]
        assert gaps[0] > gaps[1] > gaps[2]
        for R, g in zip((20, 40, 80), gaps):
            assert g * R < 0.2  # O(1/R)

    @pytest.mark.parametrize("theta", ["0.3", "0.5"])
    @pytest.mark.parametrize("R", [1, 2.5, 5, 10])
    def test_strict_neutrality(self, theta, R):
        params = SizeParams(theta, R)
        for m in range(1, 9):
            for k in range(m + 1):
                law = exact_one_step_law(k / m, Neutral(), params, strict=True)
                assert abs(law.expect(law.x_freq) - k / m) <= 1e-12

    def test_monotone_coupling(self):
        params = SizeParams("0.3", 5)
        grid = np.linspace(0, 1, 101)

        def cdf(x):
            law = exact_one_step_law(x, GenicSelection(1.0), params)
            return np.array([law.prob[law.x_freq <= g + 1e-15].sum() for g in grid])

        for lo, hi in ((0.1, 0.3), (0.3, 0.7), (0.7, 0.95)):
            assert np.all(cdf(hi) <= cdf(lo) + 1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 30), st.integers(1, 30), st.sampled_from(["0.3", "0.5", "2/3"]), st.floats(1, 40),
           st.booleans(), st.integers(0, 2**32))
    @example(0, 1, "0.3", 1.0000000000000002, False, 0)
    def test_invariants(self, k, m, theta, R, strict, seed):
        k = min(k, m)
        params = SizeParams(theta, R)
        nxt = step_generation(GenerationState(k, m), GenicSelection(0.5), params, strict, np.random.default_rng(seed))
        consumed = float(params.theta) * nxt.k_small + nxt.k_large
        assert 0 <= nxt.x_freq <= 1
        if strict:
            assert R - 1 < consumed <= R + 1e-12
        else:
            assert 0 <= consumed - R < 1  # R + 1 can round down to an integer
            assert R <= nxt.m_size <= (R + 1) / params.theta_float

    def test_invalid_state(self):
        with pytest.raises(OutOfRange):
            GenerationState(3, 2)
        with pytest.raises(OutOfRange):
            GenerationState(0, 0)


class TestReferenceStep:
    @pytest.mark.parametrize("strict", [False, True])
    def test_matches_exact_law(self, strict):
        params = SizeParams("0.5", 2)
        spec = ParentIndependentMutation(0.5, 0.3)
        state = GenerationState(1, 3)
        law = law_of_next(exact_one_step_law(state.x_freq, spec, params, strict))
        n = 40_000
        rng = np.random.default_rng(3)
        counts = {}
        for _ in range(n):
            s = step_generation_reference(state, spec, params, strict, rng)
            counts[(s.x_freq, s.m_size)] = counts.get((s.x_freq, s.m_size), 0) + 1
        assert set(counts) <= set(law)
        for key, q in law.items():
            assert abs(counts.get(key, 0) / n - q) <= 4 * math.sqrt(q * (1 - q) / n) + 1e-12


class TestTrajectories:
    def test_initial_state(self):
        state, snapped = initial_state(0.5, Neutral(), SizeParams("0.3", 5))
        assert state.m_size == round(5 / 0.65)
        assert state.x_freq == pytest.approx(0.5, abs=1 / state.m_size)
        assert snapped == (state.x_freq != 0.5)

    def test_absorbed_start(self, rng):
        tr = simulate_trajectory(0.0, Neutral(), SizeParams("0.3", 5), False, 50, rng)
        assert np.all(tr.x_freq == 0)

    def test_size_codomain(self, rng):
        tr = simulate_trajectory(0.5, Neutral(), SizeParams("0.3", 5), False, 100, rng)
        assert len(tr.gens) == 101
        assert np.all((tr.m_size[1:] >= 5) & (tr.m_size[1:] <= 20))
        counts = tr.x_freq * tr.m_size
        np.testing.assert_allclose(counts, np.round(counts), atol=1e-9)

    def test_record_stride(self):
        assert record_stride(10) == 1
        assert record_stride(250_000) == 3
        tr = simulate_trajectory(0.5, Neutral(), SizeParams("0.3", 5), False, 1000, np.random.default_rng(1),
                                 max_records=100)
        assert tr.meta["stride"] == 10 and len(tr.gens) == 101

    def test_ensemble_shape_and_reproducibility(self):
        args = (0.5, Neutral(), SizeParams("0.3", 5), False, 100, 6, 42)
        a = simulate_ensemble(*args)
        b = simulate_ensemble(*args)
        assert len(a) == 6 and all(len(t.gens) == 101 for t in a)
        for s, t in zip(a, b):
            np.testing.assert_array_equal(s.x_freq, t.x_freq)

    def test_ensemble_worker_independence(self):
        args = (0.5, Neutral(), SizeParams("0.3", 20), False, 30, 2500, 9)
        one = simulate_ensemble(*args, workers=1)
        two = simulate_ensemble(*args, workers=2)
        for s, t in zip(one, two):
            np.testing.assert_array_equal(s.x_freq, t.x_freq)
            np.testing.assert_array_equal(s.m_size, t.m_size)

    def test_endpoint_mean_drifts_down(self):
        ends = endpoint_ensemble(0.5, Neutral(), SizeParams("0.6", 200), False, 200, 4000, 5)
        se = ends.std() / math.sqrt(ends.size)
        assert ends.mean() < 0.5 - 3 * se

    def test_strict_endpoint_mean_is_martingale(self):
        ends = endpoint_ensemble(0.5, Neutral(), SizeParams("0.6", 200), True, 200, 4000, 5)
        se = ends.std() / math.sqrt(ends.size)
        assert abs(ends.mean() - 0.5) <= 3 * se

    def test_step_and_trajectory_use_stream(self):
        tr1 = simulate_trajectory(0.4, Neutral(), SizeParams("0.3", 10), False, 20, stream(1, 1, 0))
        tr2 = simulate_trajectory(0.4, Neutral(), SizeParams("0.3", 10), False, 20, stream(1, 1, 0))
        np.testing.assert_array_equal(tr1.x_freq, tr2.x_freq)
