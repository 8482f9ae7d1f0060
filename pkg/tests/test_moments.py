import numpy as np
import pytest

from twosize.errors import StateSpaceTooLarge, UnsupportedOrder
from twosize.model import GenicSelection, Neutral, SizeParams
from twosize.moments import (TestFunction, centered_ratio_moment, discrete_generator, drift_scan, limit_generator,
                             moment_estimate, moment_exact, moment_limit, taylor_generator)

ZERO = lambda x: 0.0 * np.asarray(x)  # noqa: E731


class TestLimits:
    def test_examples(self):
        assert moment_limit(0.5, 1, 0.3, ZERO) == pytest.approx(-0.175)
        assert moment_limit(0.5, 2, 0.3, ZERO) == pytest.approx(0.1625)
        assert moment_limit(0.3, 3, 0.3, ZERO) == 0
        assert moment_limit(0.3, 4, 0.3, ZERO) == 0
        assert moment_limit(0.5, 1, 0.3, ZERO, variant="strict") == 0

    @pytest.mark.parametrize("n", [0, 5])
    def test_unsupported(self, n):
        with pytest.raises(UnsupportedOrder):
            moment_limit(0.5, n, 0.3, ZERO)


class TestExact:
    def test_enumeration(self):
        assert moment_exact(0.5, 1, Neutral(), SizeParams("0.5", 1)) == pytest.approx(-0.125, abs=1e-15)

    @pytest.mark.parametrize("x", [0.0, 0.2, 0.5, 0.9])
    def test_strict_zero(self, x):
        assert abs(moment_exact(x, 1, Neutral(), SizeParams("0.3", 7), strict=True)) <= 1e-12

    def test_fourth_moment_vanishes(self):
        vals = [moment_exact(0.5, 4, Neutral(), SizeParams("0.5", R)) for R in (20, 40, 80)]
        assert vals[0] > vals[1] > vals[2] > 0
        for a, b in zip(vals, vals[1:]):
            assert 1.5 <= a / b <= 2.5

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_centered_identity(self, n):
        params = SizeParams("0.3", 15)
        for x in (0.2, 0.6):
            a = moment_exact(x, n, GenicSelection(2.0), params, center="rho") / params.R
            b = centered_ratio_moment(x, n, GenicSelection(2.0), params)
            assert a == pytest.approx(b, abs=1e-12)

    def test_guard(self):
        with pytest.raises(StateSpaceTooLarge):
            moment_exact(0.5, 1, Neutral(), SizeParams("0.001", 1e5))


class TestGenerator:
    def test_constant(self):
        val, se = discrete_generator(TestFunction.constant(2.0), 0.4, Neutral(), SizeParams("0.3", 10))
        assert val == 0 and se == 0

    def test_identity_is_first_moment(self):
        params = SizeParams("0.3", 10)
        val, _ = discrete_generator(TestFunction.power(1), 0.4, GenicSelection(1), params)
        assert val == pytest.approx(moment_exact(0.4, 1, GenicSelection(1), params), abs=1e-13)

    def test_square_mc(self):
        params = SizeParams("0.3", 1000)
        f = TestFunction.power(2)
        val, se = discrete_generator(f, 0.5, Neutral(), params, method="mc", n_sim=10**6,
                                     rng=np.random.default_rng(8))
        assert limit_generator(f, 0.5, Neutral(), 0.3) == pytest.approx(-0.0125)
        assert abs(val - (-0.0125)) <= 3 * se + 2e-3  # O(1/R) slack

    def test_uniform_convergence(self):
        f = TestFunction.power(2)
        xs = np.linspace(0, 1, 21)
        sups = []
        for R in (20, 40, 80):
            params = SizeParams("0.5", R)
            sups.append(max(abs(discrete_generator(f, x, Neutral(), params)[0] - limit_generator(f, x, Neutral(), 0.5))
                            for x in xs))
        assert sups[0] > sups[1] > sups[2]

    @pytest.mark.parametrize("x", [0.05, 0.5, 0.95])
    def test_taylor_consistency(self, x):
        f = TestFunction(np.exp, np.exp, np.exp, np.exp, np.exp)
        params = SizeParams("0.5", 25)
        direct, _ = discrete_generator(f, x, GenicSelection(1.0), params)
        approx, bound = taylor_generator(f, x, GenicSelection(1.0), params)
        assert abs(direct - approx) <= bound

    def test_methods(self):
        with pytest.raises(ValueError):
            discrete_generator(TestFunction.power(1), 0.5, Neutral(), SizeParams("0.3", 10), method="mc")
        with pytest.raises(ValueError):
            discrete_generator(TestFunction.power(1), 0.5, Neutral(), SizeParams("0.3", 10), method="other")


class TestMonteCarlo:
    def test_absorbing_boundary(self):
        est, se = moment_estimate(0.0, 1, Neutral(), SizeParams("0.3", 100), 1000, np.random.default_rng(1))
        assert (est, se) == (0.0, 0.0)

    def test_neutral_drift(self):
        est, se = moment_estimate(0.5, 1, Neutral(), SizeParams("0.3", 1000), 10**6, np.random.default_rng(2))
        assert abs(est + 0.175) <= 3 * se + 0.005

    def test_genic_drift(self):
        s = 1.0
        est, se = moment_estimate(0.5, 1, GenicSelection(s), SizeParams("0.3", 1000), 10**6, np.random.default_rng(3))
        assert abs(est - (-0.7 + s) * 0.25) <= 3 * se + 0.005

    def test_nsim_precondition(self):
        with pytest.raises(ValueError):
            moment_estimate(0.5, 1, Neutral(), SizeParams("0.3", 10), 1, np.random.default_rng(0))

    def test_report(self):
        rep = drift_scan(np.linspace(0, 1, 5), 2, Neutral(), SizeParams("0.3", 200), 20_000, seed=3)
        rows = list(rep.rows())
        assert len(rows) == 5 and rows[0][5] == "mc"
        assert np.all(rep.std_errs >= 0)
        np.testing.assert_allclose(rep.theory, rep.x_grid * (1 - rep.x_grid) * (1 - 0.7 * rep.x_grid))
        assert rep.within_band(3, 0.02).all()

    def test_report_exact_and_orders(self):
        rep = drift_scan([0.25, 0.5], 3, Neutral(), SizeParams("0.3", 20), 0, seed=None, method="exact")
        assert rep.method == "exact" and np.all(rep.theory == 0) and np.all(rep.std_errs == 0)

    def test_two_seeds_differ_but_cover(self):
        params = SizeParams("0.3", 1000)
        a = drift_scan(np.linspace(0, 1, 11), 1, Neutral(), params, 100_000, seed=1)
        b = drift_scan(np.linspace(0, 1, 11), 1, Neutral(), params, 100_000, seed=2)
        assert not np.array_equal(a.estimates, b.estimates)
        assert a.within_band(3, 0.02).all() and b.within_band(3, 0.02).all()

    def test_workers(self):
        params = SizeParams("0.3", 100)
        a = drift_scan([0.2, 0.7], 1, GenicSelection(1), params, 25_000, seed=5, workers=1)
        b = drift_scan([0.2, 0.7], 1, GenicSelection(1), params, 25_000, seed=5, workers=2)
        np.testing.assert_array_equal(a.estimates, b.estimates)
        np.testing.assert_array_equal(a.std_errs, b.std_errs)
