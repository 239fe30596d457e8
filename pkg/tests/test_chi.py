import math

import numpy as np
import pytest
from scipy import integrate, stats

from chi_extremes.chi import (ChiExperiment, chi_from_paths, clopper_pearson_upper, cluster_grid, estimate_tail,
                              exact_chi_survival, random_directions, simulate_chi, simulate_sup, sphere_check,
                              tail_estimate, wilson_interval)
from chi_extremes.covmodels import NonstationaryModel, StationaryModel, TrendSpec
from chi_extremes.errors import ConfigError
from chi_extremes.samplers import PathBatch, SampleGrid, SeedSpec


def chi_density_tail(n, u):
    # survival of the chi_n law by direct quadrature of its density
    f = lambda x: x ** (n - 1) * math.exp(-x * x / 2) / (2 ** (n / 2 - 1) * math.gamma(n / 2))
    return integrate.quad(f, u, np.inf, epsabs=0, epsrel=1e-12)[0]


class TestExact:
    @pytest.mark.parametrize("n", [1, 2, 3, 4, 7])
    @pytest.mark.parametrize("u", [0.5, 1.0, 2.5, 5.0])
    def test_matches_density_quadrature(self, n, u):
        assert exact_chi_survival(n, u) == pytest.approx(chi_density_tail(n, u), rel=1e-9)

    def test_n2_is_gaussian_factor(self):
        u = np.linspace(0, 8, 17)
        assert np.allclose(exact_chi_survival(2, u), np.exp(-u**2 / 2), rtol=1e-13)

    def test_n1_is_two_sided_normal(self):
        assert exact_chi_survival(1, 1.3) == pytest.approx(2 * stats.norm.sf(1.3), rel=1e-12)

    def test_domain(self):
        with pytest.raises(ConfigError):
            exact_chi_survival(0, 1.0)
        with pytest.raises(ConfigError):
            exact_chi_survival(2, -1.0)


class TestIntervals:
    def test_wilson_reference_value(self):
        # textbook example: 5 successes in 100 trials at 95%
        lo, hi = wilson_interval(5, 100, 0.95)
        assert lo == pytest.approx(0.02154, abs=5e-5)
        assert hi == pytest.approx(0.11175, abs=5e-5)

    def test_wilson_brackets(self):
        for k in (0, 1, 50, 100):
            lo, hi = wilson_interval(k, 100)
            assert lo <= k / 100 <= hi

    def test_clopper_pearson_zero_successes(self):
        assert clopper_pearson_upper(1000, 0.99) == pytest.approx(stats.beta.ppf(0.99, 1, 1000), rel=1e-10)

    def test_zero_exceedances_use_upper_bound(self):
        est = tail_estimate(np.zeros(500), 1.0)
        assert est.k == 0 and est.ci == (0.0, clopper_pearson_upper(500, 0.99))

    def test_strict_exceedance(self):
        assert tail_estimate(np.array([1.0, 2.0]), 1.0).k == 1


class TestExperiments:
    def test_single_point_matches_exact(self):
        exp = ChiExperiment(StationaryModel.exp_power(1.0), 3, [1.0, 2.0], T=0.0, nsim=200_000, seed=4)
        for est, u in zip(estimate_tail(exp), (1.0, 2.0)):
            assert est.ci_lo <= exact_chi_survival(3, u) <= est.ci_hi

    def test_cluster_grid_step(self):
        g = cluster_grid(StationaryModel.exp_power(1.0), 0.0, 1.0, 4.0, 8)
        assert g.step <= 4.0**-2 / 8 + 1e-15
        g = cluster_grid(NonstationaryModel.fbm(0.5), 0.5, 1.0, 4.0, 8)
        assert g.m == 1025

    def test_unresolved_grid_warns(self):
        exp = ChiExperiment(StationaryModel.exp_power(1.0), 2, 4.0, nsim=200, grid=SampleGrid(0.0, 1.0, 5))
        with pytest.warns(UserWarning):
            estimate_tail(exp)

    def test_chi_from_paths(self):
        grid = SampleGrid(0.0, 1.0, 3)
        a = PathBatch(np.array([[3.0, 0.0, 1.0]]), grid, "a", 0, (0, 1))
        b = PathBatch(np.array([[4.0, 2.0, 0.0]]), grid, "b", 0, (0, 1))
        assert np.array_equal(chi_from_paths([a, b]).values, [[5.0, 2.0, 1.0]])

    def test_sup_statistic_agrees_with_paths(self):
        model = StationaryModel.exp_power(1.0)
        grid = SampleGrid(0.0, 1.0, 9)
        tr = TrendSpec.g1(1.0, 1.0)
        chi = simulate_chi(model, 2, grid, 300, SeedSpec(8))
        sups = simulate_sup(model, 2, grid, [tr], 300, SeedSpec(8))[0]
        assert np.allclose(sups, (chi.values - tr(grid.points)).max(axis=1))

    def test_trend_monotone_on_common_noise(self):
        model = StationaryModel.exp_power(1.0)
        grid = SampleGrid(0.0, 1.0, 33)
        trends = [TrendSpec.zero(), TrendSpec.g1(1.0, 1.0), TrendSpec.g1(2.0, 1.0)]
        s = simulate_sup(model, 2, grid, trends, 2000, SeedSpec(1))
        assert np.all(s[0] >= s[1]) and np.all(s[1] >= s[2])


class TestSphere:
    def test_identity_holds(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((200, 3))
        rep = sphere_check(x, random_directions(200, 3, rng))
        assert rep.passed and rep.violations == 0

    def test_rejects_non_unit_directions(self):
        with pytest.raises(ConfigError):
            sphere_check(np.ones((1, 2)), np.ones((1, 2)))
