import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from chi_extremes import asymptotics as asy
from chi_extremes.chi import exact_chi_survival, random_directions, simulate_sup, sphere_check, tail_estimate
from chi_extremes.covmodels import StationaryModel, TrendSpec
from chi_extremes.samplers import SampleGrid, SeedSpec, sample_stationary

FAST = settings(max_examples=40, deadline=None)
levels = st.floats(0.5, 30.0)


@FAST
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_sphere_identity(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((50, n)) * rng.uniform(0.1, 10)
    assert sphere_check(x, random_directions(50, n, rng)).violations == 0


@FAST
@given(st.integers(0, 2**31), st.lists(st.floats(-3, 3), min_size=2, max_size=6))
def test_exceedance_monotone_in_u(seed, us):
    s = np.random.default_rng(seed).standard_normal(500)
    us = sorted(us)
    p = [tail_estimate(s, u).phat for u in us]
    assert all(b <= a for a, b in zip(p, p[1:]))


@FAST
@given(st.integers(0, 500), st.integers(1, 500), st.floats(0.5, 0.999))
def test_interval_brackets_estimate(k, extra, conf):
    est = tail_estimate(np.r_[np.ones(k), np.zeros(extra)], 0.5, conf)
    assert 0 <= est.ci_lo <= est.phat <= est.ci_hi <= 1


@FAST
@given(st.integers(1, 8), levels)
def test_survival_over_upsilon(n, u):
    r = exact_chi_survival(n, u) / asy.upsilon(n, u)
    if n == 2:
        assert math.isclose(r, 1.0, rel_tol=1e-12)
    elif n > 2:
        assert r >= 1 - 1e-12
    else:
        assert r <= 1 + 1e-12


@FAST
@given(st.floats(0.1, 1.9), st.floats(0.5, 2.0), st.floats(0.05, 2.0), st.floats(0.05, 2.0), st.integers(1, 5),
       st.floats(1.0, 20.0), st.floats(0.0, 3.0))
def test_thm23_is_shifted_thm22(nu, mu, A, D, n, u, gT):
    a = asy.thm23_tail(nu, mu, A, D, n, u, gT, mu + 0.1, H=1.3, P=1.7)
    b = asy.thm22_tail(nu, mu, A, D, n, u + gT, H=1.3, P=1.7)
    assert a.value == b.value and a.log_value == b.log_value


@FAST
@given(st.floats(0.1, 2.0), st.floats(0.1, 3.0), st.floats(1.05, 3.0), st.integers(1, 5), levels)
def test_degenerate_weights_and_reassembly(alpha, beta, factor, n, u):
    c = factor * asy.thm21_threshold(alpha, beta)
    a = asy.thm21_tail(alpha, beta, c, n, u, H=1.1, P=1.4)
    g = asy.generalized_chi_tail(asy.GeneralizedChiWeights((1.0,) * n), alpha, beta, c, u, H=1.1, P=1.4)
    assert g.value == a.value
    assert a.exponent == max(2 / alpha - 1 / beta, 0.0)
    if a.value > 1e-300:
        assert math.isclose(a.reassembled(), a.value, rel_tol=1e-12)


@FAST
@given(st.integers(0, 2**31), st.floats(0.01, 3.0), st.floats(0.01, 3.0))
def test_trend_monotone(seed, c1, c2):
    model = StationaryModel.exp_power(1.0)
    grid = SampleGrid(0.0, 1.0, 17)
    lo, hi = sorted((c1, c2))
    s = simulate_sup(model, 2, grid, [TrendSpec.g1(lo, 1.0), TrendSpec.g1(hi, 1.0)], 64, SeedSpec(seed, 16))
    assert np.all(s[1] <= s[0])


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 199), st.sampled_from([8, 32, 64]), st.integers(1, 8))
def test_replications_independent_of_partition(seed, cut, block, threads):
    model = StationaryModel.exp_power(0.6)
    grid = SampleGrid(0.0, 1.0, 12)
    seeds = SeedSpec(seed, block)
    whole = sample_stationary(model, grid, 200, seeds, threads=1).values
    parts = np.vstack([sample_stationary(model, grid, cut, seeds, threads=threads).values,
                       sample_stationary(model, grid, 200 - cut, seeds, first_rep=cut, threads=threads).values])
    assert np.array_equal(whole, parts)
