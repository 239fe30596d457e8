import math

import numpy as np
import pytest

from chi_extremes import asymptotics as asy
from chi_extremes.asymptotics import GeneralizedChiWeights
from chi_extremes.chi import exact_chi_survival
from chi_extremes.constants import ConstantEstimate
from chi_extremes.errors import ConfigError, HypothesisError, MissingConstantError

PHI = lambda u: math.exp(-u * u / 2) / math.sqrt(2 * math.pi)


class TestUpsilon:
    @pytest.mark.parametrize("u", [0.5, 2.0, 7.0])
    def test_small_n(self, u):
        assert asy.upsilon(2, u) == pytest.approx(math.exp(-u * u / 2), rel=1e-14)
        assert asy.upsilon(1, u) == pytest.approx(math.sqrt(2 / math.pi) / u * math.exp(-u * u / 2), rel=1e-14)

    @pytest.mark.parametrize("u", [1.0, 3.0, 10.0])
    def test_n4_ratio(self, u):
        assert exact_chi_survival(4, u) / asy.upsilon(4, u) == pytest.approx(1 + 2 / u**2, rel=1e-12)

    @pytest.mark.parametrize("u", [7.0, 12.0, 30.0])
    def test_ratio_side_by_dimension(self, u):
        # n = 1 approaches 1 from below (Mills ratio), n >= 3 from above
        r1 = exact_chi_survival(1, u) / asy.upsilon(1, u)
        assert 1 - 1 / u**2 < r1 < 1
        for n in (3, 4):
            assert 1 < exact_chi_survival(n, u) / asy.upsilon(n, u) <= 1 + (n - 2) / u**2 + 1e-12

    def test_log_space_at_large_u(self):
        assert asy.log_upsilon(3, 40.0) == pytest.approx(math.log(math.sqrt(2 / math.pi) * 40) - 800, rel=1e-14)


class TestGaussian:
    def test_pickands_alpha2(self):
        a = asy.gaussian_pickands_tail(1.0, 2.0, 1.0, 3.0)
        assert a.value == pytest.approx(PHI(3.0) / math.sqrt(math.pi), rel=1e-13)
        assert a.constants["H_2"]["source"] == "anchor"

    def test_scaling_laws(self):
        base = asy.gaussian_pickands_tail(1.0, 1.0, 1.0, 4.0).value
        assert asy.gaussian_pickands_tail(2.0, 1.0, 1.0, 4.0).value == pytest.approx(2 * base, rel=1e-14)
        assert asy.gaussian_pickands_tail(1.0, 0.5, 2**0.5, 4.0, H=1.3).value == pytest.approx(
            2 * asy.gaussian_pickands_tail(1.0, 0.5, 1.0, 4.0, H=1.3).value, rel=1e-13)

    def test_missing_constant(self):
        with pytest.raises(MissingConstantError):
            asy.gaussian_pickands_tail(1.0, 0.7, 1.0, 3.0)

    def test_local_forms(self):
        assert asy.gaussian_local_tail(0.0, 1.0, 3.0).value == pytest.approx(PHI(3.0) / 3.0, rel=1e-14)
        h = asy.gaussian_local_tail(2.0, 1.0, 3.0, H_window=3.2).value
        p = asy.gaussian_piterbarg_local(2.0, 1.0, 1.0, 3.0, P_window=1.4).value
        assert p <= h
        assert asy.gaussian_local_tail(1.0, 2.0, 3.0).constants["H_2[0,1]"]["value"] == pytest.approx(
            1 + 1 / math.sqrt(math.pi))


class TestStationaryChi:
    def test_prop21_substitution(self):
        a = asy.prop21_tail(1.0, 1.0, 1.0, 2, 3.5)
        assert a.value == pytest.approx(3.5**2 * math.exp(-3.5**2 / 2), rel=1e-13)
        assert a.value == pytest.approx(0.0268, abs=5e-5)

    @pytest.mark.parametrize("n", [1, 2, 3, 5])
    def test_prop21_over_gaussian(self, n):
        u = 4.0
        r = asy.prop21_tail(1.0, 1.0, 1.0, n, u).value / asy.gaussian_pickands_tail(1.0, 1.0, 1.0, u).value
        expect = math.sqrt(2 * math.pi) * u ** (n - 1) * 2 ** ((2 - n) / 2) / math.gamma(n / 2)
        assert r == pytest.approx(expect, rel=1e-12)

    def test_prop22(self):
        assert asy.prop22_local_tail(0.0, 1.0, 1.0, 3, 4.2).value == pytest.approx(asy.upsilon(3, 4.2), rel=1e-14)
        a = asy.prop22_local_tail(2.0, 1.0, 1.0, 2, 4.0, H_window=3.85)
        assert a.value == pytest.approx(3.85 * math.exp(-8), rel=1e-14)

    def test_thm21_regimes(self):
        a = asy.thm21_tail(1.0, 0.25, 3.0, 2, 4.0)
        assert a.regime == "thm21:alpha>2beta" and a.exponent == 0 and a.prefactor == 1
        assert a.value == pytest.approx(asy.upsilon(2, 4.0), rel=1e-14)
        b = asy.thm21_tail(1.0, 1.0, 2.0, 2, 4.0)
        assert b.value == pytest.approx(0.5 * 4.0 * math.exp(-8), rel=1e-13)
        assert b.exponent == 1.0

    def test_thm21_piterbarg_case(self):
        with pytest.raises(MissingConstantError):
            asy.thm21_tail(1.0, 0.5, 2.5, 2, 4.0)
        est = ConstantEstimate(1.37, 0.01, 20.0, 0.02, 1000)
        a = asy.thm21_tail(1.0, 0.5, 2.5, 2, 4.0, P=est)
        assert a.prefactor == 1.37 and a.constants["P^2.5_1,0.5"]["source"] == "estimate"
        c = asy.thm21_tail(2.0, 1.0, 1.5, 2, 4.0)
        assert c.prefactor == pytest.approx(asy.piterbarg_anchor(2.0, 1.0, 1.5))

    def test_thm21_condition(self):
        with pytest.raises(HypothesisError):
            asy.thm21_tail(1.0, 1.0, 1.0, 2, 4.0)
        with pytest.raises(HypothesisError):
            asy.thm21_tail(1.0, 0.25, 2.0, 2, 4.0)

    def test_thm21_d0_rescaling(self):
        # D0 enters through c D0^{-beta/alpha} only
        a = asy.thm21_tail(1.0, 1.0, 8.0, 2, 4.0, D0=4.0)
        b = asy.thm21_tail(1.0, 1.0, 2.0, 2, 4.0)
        assert a.constants["c_eff"] == pytest.approx(2.0)
        assert a.value == pytest.approx(b.value, rel=1e-14)
        with pytest.raises(HypothesisError):
            asy.thm21_tail(1.0, 1.0, 4.0, 2, 4.0, D0=4.0)

    def test_thm21_interior_flag(self):
        a = asy.thm21_tail(1.0, 1.0, 2.0, 2, 4.0, interior=True, g_t0=0.5)
        b = asy.thm21_tail(1.0, 1.0, 2.0, 2, 4.5)
        assert a.value == pytest.approx(2 * b.value, rel=1e-13)
        assert "INTERIOR_MINIMUM" in a.flags
        with pytest.raises(MissingConstantError):
            asy.thm21_tail(2.0, 1.0, 1.5, 2, 4.0, interior=True)

    @pytest.mark.parametrize("alpha,beta", [(0.5, 2.0), (1.0, 1.0), (2.0, 0.25), (1.5, 0.5)])
    def test_exponent_clamp(self, alpha, beta):
        c = 1.1 * asy.thm21_threshold(alpha, beta)
        a = asy.thm21_tail(alpha, beta, c, 2, 3.0, H=1.2, P=1.2)
        assert a.exponent == max(2 / alpha - 1 / beta, 0.0)


class TestGeneralized:
    def test_degenerate_weights(self):
        w = GeneralizedChiWeights((1.0, 1.0, 1.0))
        assert w.k == 3
        a = asy.generalized_chi_tail(w, 1.0, 1.0, 2.0, 4.0)
        assert a.value == pytest.approx(asy.thm21_tail(1.0, 1.0, 2.0, 3, 4.0).value, rel=1e-14)

    def test_zero_weight(self):
        a = asy.generalized_chi_tail(GeneralizedChiWeights((1.0, 0.0)), 1.0, 0.25, 3.0, 4.0)
        assert a.value == pytest.approx(asy.upsilon(1, 4.0), rel=1e-14)

    def test_product(self):
        w = GeneralizedChiWeights((1.0, 2**-0.5, 2**-0.5))
        assert w.k == 1 and w.prefactor == pytest.approx(2.0)

    def test_validation(self):
        with pytest.raises(ConfigError):
            GeneralizedChiWeights((1.0, 1.0), k=1)
        with pytest.raises(ConfigError):
            GeneralizedChiWeights((0.5, 0.2))
        with pytest.raises(ConfigError):
            GeneralizedChiWeights((1.0, 0.2, 0.5))


class TestNonstationaryChi:
    def test_nu_above_mu(self):
        a = asy.thm22_tail(1.5, 1.0, 0.7, 0.3, 3, 4.0)
        assert a.value == pytest.approx(asy.upsilon(3, 4.0), rel=1e-14)

    def test_scaled_fbm_prefactor(self):
        H, T = 0.25, 1.0
        A, D = H / T, 1 / (2 * T ** (2 * H))
        a = asy.thm22_tail(2 * H, 1.0, A, D, 2, 4.0, H=1.1)
        assert a.prefactor == pytest.approx(D ** (1 / (2 * H)) * math.gamma(2) / A * 1.1, rel=1e-14)
        assert a.exponent == pytest.approx(2 / (2 * H) - 2)

    def test_nu_equal_mu(self):
        with pytest.raises(MissingConstantError):
            asy.thm22_tail(1.0, 1.0, 0.5, 0.5, 2, 4.0)
        assert asy.thm22_tail(1.0, 1.0, 0.5, 0.5, 2, 4.0, P=1.9).prefactor == 1.9

    def test_thm23_shift(self):
        for gT in (0.0, 0.5, 1.3):
            a = asy.thm23_tail(0.5, 1.0, 0.25, 0.5, 2, 4.0, gT, 1.0, H=1.1)
            b = asy.thm22_tail(0.5, 1.0, 0.25, 0.5, 2, 4.0 + gT, H=1.1)
            assert a.value == b.value
        c = asy.thm23_tail(1.5, 1.0, 0.3, 0.3, 2, 3.0, 1.0, 2.0)
        assert c.value == pytest.approx(math.exp(-16 / 2), rel=1e-14)

    def test_thm23_ratio_identity(self):
        u, gT = 3.7, 0.8
        a = asy.thm23_tail(0.5, 1.0, 0.25, 0.5, 2, u, gT, 1.0, H=1.0)
        b = asy.thm22_tail(0.5, 1.0, 0.25, 0.5, 2, u, H=1.0)
        expect = math.exp(-gT * u - gT**2 / 2) * ((u + gT) / u) ** b.exponent
        assert a.value / b.value == pytest.approx(expect, rel=1e-12)

    def test_thm23_refuses(self):
        with pytest.raises(HypothesisError):
            asy.thm23_tail(0.5, 1.0, 0.25, 0.5, 2, 4.0, 0.5, 0.5, H=1.0)


class TestFields:
    def test_thm31_no_space(self):
        a = asy.thm31_field_tail(1.0, 0.5, 100.0, 1.0, (), (), 2.0, 2.0, 4.0, P_window=1.0)
        assert a.value == pytest.approx(PHI(4.0) / 4.0, rel=1e-14)

    def test_thm31_assembly(self):
        a = asy.thm31_field_tail(1.0, 0.5, 2.0, 1.0, (1.0,), (1.0,), 2.0, 2.0, 4.0, P_window=1.1, H_windows=[3.2])
        assert a.value == pytest.approx(1.1 * 3.2 * PHI(4.0) / 4.0, rel=1e-14)
        with pytest.raises(MissingConstantError):
            asy.thm31_field_tail(1.0, 0.5, 2.0, 1.0, (1.0,), (1.0,), 2.0, 2.0, 4.0, P_window=1.1)

    def test_thm31_window_invariance(self):
        lam = 3.0
        a = asy.thm31_field_tail(1.0, 0.5, 2.0, 1.0, (2.0,), (1.0,), 2.0, 2.0, 4.0, P_window=1.1)
        b = asy.thm31_field_tail(1.0, 0.5, 2.0 * lam**0.5, lam, (2.0,), (1.0,), 2.0 / lam, 2.0, 4.0, P_window=1.1)
        assert set(a.constants) == set(b.constants)
        assert a.value == pytest.approx(b.value, rel=1e-14)

    def test_thm32(self):
        base = asy.thm32_field_tail(1.0, 1.0, 0.5, 2.0, 1.0, (2.0,), (1.0,), 2.0, 4.0, P_window=1.2)
        assert base.exponent == 0.0
        assert base.value == pytest.approx(1.2 / math.sqrt(math.pi) * math.exp(-8) / math.sqrt(2 * math.pi))
        double = asy.thm32_field_tail(2.0, 1.0, 0.5, 2.0, 1.0, (2.0,), (1.0,), 2.0, 4.0, P_window=1.2)
        assert double.value == pytest.approx(2 * base.value, rel=1e-14)
        none = asy.thm32_field_tail(0.0, 1.0, 0.5, 2.0, 1.0, (), (), 2.0, 4.0, P_window=1.2)
        assert none.exponent == -1 and none.value == pytest.approx(1.2 * PHI(4.0) / 4.0, rel=1e-14)


class TestInvariants:
    def cases(self, u):
        return [
            asy.gaussian_pickands_tail(1.0, 1.0, 1.0, u),
            asy.prop21_tail(1.0, 1.0, 1.0, 3, u),
            asy.thm21_tail(1.0, 1.0, 2.0, 2, u),
            asy.thm21_tail(2.0, 1.0, 1.5, 4, u),
            asy.thm22_tail(0.5, 1.0, 0.25, 0.5, 2, u, H=1.2),
            asy.thm23_tail(0.5, 1.0, 0.25, 0.5, 2, u, 0.5, 1.0, H=1.2),
            asy.thm32_field_tail(1.0, 1.0, 0.5, 2.0, 1.0, (1.0, 0.5), (1.0, 2.0), 2.0, u, P_window=1.1, H=[1.0, 2.0]),
        ]

    @pytest.mark.parametrize("u", [1.5, 4.0, 9.0])
    def test_reassembly(self, u):
        for a in self.cases(u):
            assert a.reassembled() == pytest.approx(a.value, rel=1e-12)
            assert a.value > 0

    def test_decreasing_above_threshold(self):
        for i, a in enumerate(self.cases(1.0)):
            start = a.decreasing_above + 1e-6
            logs = np.array([self.cases(u)[i].log_value for u in np.linspace(start, start + 10, 200)])
            assert np.all(np.diff(logs) < 0)

    def test_log_value_survives_underflow(self):
        a = asy.prop21_tail(1.0, 1.0, 1.0, 2, 40.0)
        assert a.value == 0.0
        assert a.log_value == pytest.approx(2 * math.log(40) - 800, rel=1e-14)
