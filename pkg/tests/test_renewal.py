import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twosize.errors import ConfigError, DivisionAtBoundary, OutOfRange, StateSpaceTooLarge
from twosize.model import SizeParams, mu
from twosize.renewal import (Lattice, estimate_stopping_summand, exact_passage_law, moment_ratio_exact,
                             moment_ratio_theory, renewal_window_mass, sample_passage, sample_passage_strict,
                             sample_passages, stopping_summand_limit)


def atoms(law):
    return {(int(a), int(b)): p for a, b, p in law.rows()}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


class TestReferenceSamplers:
    def test_all_large(self, rng):
        out = sample_passage(0.0, SizeParams("0.3", 5), rng)
        assert (out.tau, out.s_tau, out.xi_tau, out.overshoot) == (5, 5.0, 1.0, 0.0)

    def test_all_small(self, rng):
        out = sample_passage(1.0, SizeParams("0.5", 5), rng)
        assert (out.tau, out.s_tau, out.xi_tau) == (10, 5.0, 0.5)

    def test_strict_all_large(self, rng):
        out = sample_passage_strict(0.0, SizeParams("0.3", 5), rng)
        assert (out.kept, out.s_kept, out.tau_bar) == (5, 5.0, 6)

    def test_strict_all_small(self, rng):
        out = sample_passage_strict(1.0, SizeParams("0.5", 1), rng)
        assert (out.kept, out.s_kept) == (2, 1.0)

    def test_enumerated_law(self, rng):
        params = SizeParams("0.5", 1)
        n = 40_000
        counts = {}
        for _ in range(n):
            o = sample_passage(0.5, params, rng)
            counts[(o.tau, o.xi_tau)] = counts.get((o.tau, o.xi_tau), 0) + 1
        expected = {(1, 1.0): 0.5, (2, 0.5): 0.25, (2, 1.0): 0.25}
        assert set(counts) == set(expected)
        for key, q in expected.items():
            assert abs(counts[key] / n - q) <= 4 * math.sqrt(q * (1 - q) / n)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0, 1), st.sampled_from(["0.3", "0.5", "2/7", 1 / math.sqrt(2)]), st.floats(0.2, 30),
           st.integers(0, 2**32))
    def test_passage_invariants(self, p, theta, R, seed):
        params = SizeParams(theta, R)
        o = sample_passage(p, params, np.random.default_rng(seed))
        assert R <= o.tau <= (R + 1) / params.theta_float + 1e-9
        assert 0 <= o.overshoot < 1 + 1e-12
        assert o.s_tau == pytest.approx(params.theta_float * o.k_small + o.k_large, abs=1e-12)
        assert o.xi_tau in (params.theta_float, 1.0)
        if R >= 1:
            s = sample_passage_strict(p, params, np.random.default_rng(seed))
            assert R - 1 < s.s_kept <= R + 1e-12
            assert s.s_kept + s.xi_rejected > R

    def test_p_range(self, rng):
        with pytest.raises(OutOfRange):
            sample_passage(1.5, SizeParams("0.5", 1), rng)

    def test_strict_needs_R_at_least_one(self, rng):
        with pytest.raises(ConfigError):
            sample_passage_strict(0.5, SizeParams("0.5", 0.5), rng)


class TestExactLaw:
    def test_enumeration(self):
        law = exact_passage_law(0.5, SizeParams("0.5", 1))
        assert atoms(law) == pytest.approx({(0, 1): 0.5, (2, 0): 0.25, (1, 1): 0.25})
        assert law.prob_xi_theta() == pytest.approx(0.25)

    def test_strict_enumeration(self):
        law = exact_passage_law(0.5, SizeParams("0.5", 1), strict=True)
        assert atoms(law) == pytest.approx({(0, 1): 0.5, (1, 0): 0.25, (2, 0): 0.25})

    @pytest.mark.parametrize("p", [0.0, 0.2, 0.7, 1.0])
    def test_small_stop_probability_is_p_squared(self, p):
        assert exact_passage_law(p, SizeParams("0.5", 1)).prob_xi_theta() == pytest.approx(p * p, abs=1e-15)

    @pytest.mark.parametrize("theta", ["0.3", "0.5", "3/7", 1 / math.sqrt(2)])
    @pytest.mark.parametrize("R", [0.4, 1, 2.5, 7.3, 20])
    @pytest.mark.parametrize("strict", [False, True])
    def test_law_invariants(self, theta, R, strict):
        params = SizeParams(theta, R)
        if strict and R < 1:  # a strict generation could be empty
            with pytest.raises(ConfigError):
                exact_passage_law(0.37, params, strict)
            return
        law = exact_passage_law(0.37, params, strict)
        assert law.total == pytest.approx(1.0, abs=1e-12)
        assert np.all(law.prob >= 0)
        assert np.all(law.prob_last_small <= law.prob + 1e-15)
        s = law.s_stop
        if strict:
            assert np.all((s > R - 1 - 1e-12) & (s <= R + 1e-12))
        else:
            assert np.all((s >= R - 1e-12) & (s < R + 1))
            assert np.all((law.tau >= R - 1e-12) & (law.tau <= (R + 1) / params.theta_float))

    def test_matches_vectorized_sampler(self):
        params = SizeParams("0.3", 5)
        law = exact_passage_law(0.5, params)
        n = 1_000_000
        batch = sample_passages(0.5, params, n, np.random.default_rng(5))
        key = batch.k_small * 1000 + batch.k_large
        uniq, counts = np.unique(key, return_counts=True)
        emp = dict(zip(uniq.tolist(), (counts / n).tolist()))
        for ks, kl, q in law.rows():
            f = emp.get(ks * 1000 + kl, 0.0)
            assert abs(f - q) <= 3 * math.sqrt(q * (1 - q) / n) + 1e-12
        assert set(emp) <= {ks * 1000 + kl for ks, kl, _ in law.rows()}
        # stopping summand too
        q = law.prob_xi_theta()
        assert abs(batch.last_small.mean() - q) <= 3 * math.sqrt(q * (1 - q) / n)

    @pytest.mark.parametrize("theta", ["0.5", 1 / math.sqrt(2)])
    def test_strict_sampler_matches(self, theta):
        params = SizeParams(theta, 3.5)
        law = exact_passage_law(0.4, params, strict=True)
        n = 200_000
        batch = sample_passages(0.4, params, n, np.random.default_rng(9), strict=True)
        for ks, kl, q in law.rows():
            f = np.mean((batch.k_small == ks) & (batch.k_large == kl))
            assert abs(f - q) <= 4 * math.sqrt(q * (1 - q) / n) + 1e-12

    def test_guard(self):
        with pytest.raises(StateSpaceTooLarge):
            exact_passage_law(0.5, SizeParams("0.01", 1e5))


class TestStoppingSummand:
    @pytest.mark.parametrize("p, q", [(0, 0.0), (1, 1.0), (0.5, 1 / 3)])
    def test_limit(self, p, q):
        law = stopping_summand_limit(p, 0.5)
        assert law.q_theta == pytest.approx(q)
        assert law.q_one == pytest.approx(1 - q)

    def test_estimate_boundary(self, rng):
        assert estimate_stopping_summand(0.0, SizeParams("0.5", 10), 1000, rng) == (0.0, 0.0)

    def test_estimate_small_R(self, rng):
        q, se = estimate_stopping_summand(0.5, SizeParams("0.5", 1), 100_000, rng)
        assert abs(q - 0.25) <= 3 * se

    def test_estimate_large_R(self, rng):
        params = SizeParams("0.5", 200)
        q, se = estimate_stopping_summand(0.5, params, 100_000, rng)
        exact = exact_passage_law(0.5, params).prob_xi_theta()
        assert abs(q - 1 / 3) <= 0.01
        assert abs(q - exact) <= 3 * se

    def test_uniform_convergence(self):
        grid = np.linspace(0, 1, 21)
        sups = []
        for R in (50, 100, 200, 400):
            params = SizeParams("0.5", R)
            sups.append(max(abs(exact_passage_law(p, params).prob_xi_theta() - p * 0.5 / mu(p, 0.5)) for p in grid))
        assert all(a > b for a, b in zip(sups, sups[1:]))


class TestMoments:
    def test_theory_examples(self):
        assert moment_ratio_theory(0.0, 0.5, 10, 3) == 1.0
        assert moment_ratio_theory(0.5, 0.5, 100, 1) == pytest.approx(0.750625, abs=1e-15)
        assert moment_ratio_theory(0.5, 0.5, 100, 2) == pytest.approx(0.56390625, abs=1e-15)

    def test_exact_examples(self):
        assert moment_ratio_exact(0.5, SizeParams("0.5", 1), 1) == pytest.approx(0.8125, abs=1e-15)
        assert moment_ratio_exact(1.0, SizeParams("0.3", 7), 3) == pytest.approx(0.027, abs=1e-15)

    def test_first_moment_rate(self):
        errs = [abs(R * (moment_ratio_exact(0.5, SizeParams("0.5", R), 1) - 0.75) - 0.0625) for R in (50, 100, 200)]
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] * 200 < errs[0] * 50 * 1.5  # C/R with a stable constant

    def test_wald(self):
        for theta in ("0.3", "0.5", 1 / math.sqrt(2)):
            for R in (1, 3.3, 10, 50):
                params = SizeParams(theta, R)
                for p in np.linspace(0, 1, 11):
                    law = exact_passage_law(p, params)
                    w = mu(p, params.theta) * law.expect(law.tau)
                    assert R - 1e-12 <= w <= R + 1 + 1e-12
                    # Wald: mu E[tau] equals E[S_tau]
                    assert w == pytest.approx(law.expect(law.s_stop), abs=1e-10)

    def test_wald_monte_carlo_large_R(self, rng):
        params = SizeParams("0.3", 5000)
        batch = sample_passages(0.5, params, 20_000, rng)
        w = mu(0.5, 0.3) * batch.size
        assert params.R - 3 * w.std() / math.sqrt(w.size) <= w.mean() <= params.R + 1 + 3 * w.std() / math.sqrt(w.size)

    def test_reverse_martingale(self):
        for theta in ("0.3", "0.5", 1 / math.sqrt(2)):
            for R in (1, 2.5, 5, 10):
                params = SizeParams(theta, R)
                for p in np.linspace(0, 1, 11):
                    law = exact_passage_law(p, params, strict=True)
                    assert law.expect(law.s_stop / law.size) == pytest.approx(mu(p, params.theta), abs=1e-12)

    def test_lm_convergence(self):
        grid = np.linspace(0, 1, 6)
        for m in (1, 2, 3, 4):
            sups = []
            for R in (50, 400):
                params = SizeParams("0.5", R)
                vals = []
                for p in grid:
                    law = exact_passage_law(p, params)
                    vals.append(law.expect(np.abs(R / (mu(p, 0.5) * law.tau) - 1) ** m))
                sups.append(max(vals))
            assert sups[1] < sups[0]


class TestRenewalWindows:
    def test_small_R(self):
        assert renewal_window_mass(0.5, SizeParams("0.5", 1)) == pytest.approx(0.5)

    def test_large_R(self):
        assert abs(renewal_window_mass(0.5, SizeParams("0.5", 200)) - 2 / 3) <= 0.01

    @pytest.mark.parametrize("p", [0.1, 0.5, 0.9])
    @pytest.mark.parametrize("theta", ["0.3", 1 / math.sqrt(2)])
    def test_identity(self, p, theta):
        params = SizeParams(theta, 7.5)
        total = p * renewal_window_mass(p, params, "theta") + (1 - p) * renewal_window_mass(p, params, "one")
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_boundaries(self):
        with pytest.raises(DivisionAtBoundary):
            renewal_window_mass(0.0, SizeParams("0.5", 3), "theta")
        with pytest.raises(DivisionAtBoundary):
            renewal_window_mass(1.0, SizeParams("0.5", 3), "one")
        with pytest.raises(ValueError):
            renewal_window_mass(0.5, SizeParams("0.5", 3), "two")


class TestLattice:
    def test_exact_thresholds(self):
        lat = Lattice.build(SizeParams("0.3", 1.5))
        assert (lat.small, lat.large, lat.threshold) == (3, 10, 15)
        strict = Lattice.build(SizeParams("0.3", 1.5), strict=True)
        assert strict.threshold == 16

    def test_exact_hit_counts_for_nonstrict(self, rng):
        # 0.1 + 0.2 style rounding must not matter: five smalls of 1/5 reach R = 1 exactly
        o = sample_passage(1.0, SizeParams("0.2", 1), rng)
        assert o.tau == 5
