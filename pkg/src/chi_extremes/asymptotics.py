"""Closed-form tail asymptotics for Gaussian processes, chi-processes and fields.

Each evaluator returns an :class:`AsymptoticEval` whose value reassembles as

    prefactor * level**exponent * marginal * exp(-level**2 / 2)

where ``exponent`` is the theorem exponent (for instance ``(2/alpha - 1/beta)_+``)
and ``marginal`` carries the remaining level dependence of the marginal tail
(``2^{(2-n)/2} u^{n-2} / Gamma(n/2)`` for chi-processes, ``(2 pi)^{-1/2}``
for Gaussian ones).  Everything is accumulated in log space; ``value``
underflows to 0 once ``log_value`` drops below about -745, ``log_value`` does not.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from scipy import special

from .constants import ConstantEstimate, pickands_anchor, piterbarg_anchor
from .errors import ConfigError, HypothesisError, MissingConstantError

LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


@dataclass(frozen=True)
class AsymptoticEval:
    value: float
    log_value: float
    prefactor: float
    exponent: float
    level: float
    marginal: float
    marginal_power: float
    regime: str
    constants: dict = field(default_factory=dict)
    flags: tuple = ()

    @property
    def gaussian_factor(self):
        return math.exp(-self.level**2 / 2)

    @property
    def log_gaussian_factor(self):
        return -self.level**2 / 2

    @property
    def decreasing_above(self):
        """Level beyond which the value is strictly decreasing in the level."""
        return math.sqrt(max(self.exponent + self.marginal_power, 0.0))

    def reassembled(self):
        return self.prefactor * self.level**self.exponent * self.marginal * self.gaussian_factor


def _assemble(prefactor, exponent, level, log_marginal, marginal_power, regime, constants, flags=()):
    if not prefactor > 0:
        raise ConfigError(f"prefactor must be positive, got {prefactor}")
    if not level > 0:
        raise ConfigError("level must be positive")
    log_value = float(math.log(prefactor) + exponent * math.log(level) + log_marginal - level**2 / 2)
    return AsymptoticEval(math.exp(log_value), log_value, float(prefactor), float(exponent), float(level),
                          math.exp(log_marginal), float(marginal_power), regime, dict(constants), tuple(flags))


def _log_upsilon_marginal(n, u):
    # log(2^{(2-n)/2} u^{n-2} / Gamma(n/2))
    return (2 - n) / 2 * math.log(2) + (n - 2) * math.log(u) - float(special.gammaln(n / 2))


def log_upsilon(n, u):
    if n < 1:
        raise ConfigError("n must be at least 1")
    if not u > 0:
        raise ConfigError("u must be positive")
    return _log_upsilon_marginal(n, u) - u * u / 2


def upsilon(n, u):
    """``Upsilon_n(u) = 2^{(2-n)/2} / Gamma(n/2) u^{n-2} exp(-u^2/2)``."""
    return math.exp(log_upsilon(n, u))


def _constant(value, name, lookup, provenance):
    """Resolve a constant from a user value, a ConstantEstimate, or the anchor registry."""
    if isinstance(value, ConstantEstimate):
        provenance[name] = {"source": "estimate", "value": value.value, "stderr": value.stderr, "S": value.S,
                            "delta": value.delta, "flags": list(value.flags)}
        return value.value
    if value is not None:
        provenance[name] = {"source": "user", "value": float(value)}
        return float(value)
    if lookup is None:
        raise MissingConstantError(f"{name} is not anchored; supply a value or an estimate")
    v = lookup()
    provenance[name] = {"source": "anchor", "value": v}
    return v


def pickands_window_anchor(alpha, S):
    """``H_2[0, S] = 1 + S / sqrt(pi)``: the only windowed Pickands constant in closed form."""
    if math.isclose(alpha, 2.0):
        return 1.0 + S / math.sqrt(math.pi)
    raise MissingConstantError(f"no closed form for H_{alpha}[0, S]")


def _window_constant(value, name, alpha, S, provenance):
    if S == 0:
        provenance[name] = {"source": "trivial", "value": 1.0}
        return 1.0
    lookup = (lambda: pickands_window_anchor(alpha, S)) if math.isclose(alpha, 2.0) else None
    return _constant(value, name, lookup, provenance)


def _check_alpha(alpha):
    if not 0 < alpha <= 2:
        raise ConfigError("alpha must lie in (0, 2]")


# ---------------------------------------------------------------------------
# Gaussian processes
# ---------------------------------------------------------------------------


def gaussian_pickands_tail(T, alpha, D0, u, H=None) -> AsymptoticEval:
    """``H_alpha T D0^{1/alpha} (2 pi)^{-1/2} u^{2/alpha - 1} exp(-u^2/2)``."""
    _check_alpha(alpha)
    prov = {}
    h = _constant(H, f"H_{alpha:g}", lambda: pickands_anchor(alpha), prov)
    return _assemble(h * T * D0 ** (1 / alpha), 2 / alpha - 1, u, -LOG_SQRT_2PI, 0.0, "gaussian-pickands", prov)


def gaussian_local_tail(S, alpha, u, H_window=None) -> AsymptoticEval:
    """``H_alpha[0, S] (2 pi)^{-1/2} u^{-1} exp(-u^2/2)`` for the window ``[0, u^{-2/alpha} S]``."""
    _check_alpha(alpha)
    prov = {}
    h = _window_constant(H_window, f"H_{alpha:g}[0,{S:g}]", alpha, S, prov)
    return _assemble(h, -1.0, u, -LOG_SQRT_2PI, 0.0, "gaussian-local", prov)


def gaussian_piterbarg_local(S, alpha, d, u, P_window=None) -> AsymptoticEval:
    """``P^d_{alpha,alpha}[0, S] (2 pi)^{-1/2} u^{-1} exp(-u^2/2)``."""
    _check_alpha(alpha)
    if not d > 0:
        raise ConfigError("d must be positive")
    prov = {}
    if S == 0:
        p = _window_constant(None, "P", alpha, 0, prov)
    else:
        p = _constant(P_window, f"P^{d:g}_{alpha:g},{alpha:g}[0,{S:g}]", None, prov)
    return _assemble(p, -1.0, u, -LOG_SQRT_2PI, 0.0, "gaussian-piterbarg-local", prov)


# ---------------------------------------------------------------------------
# stationary chi-processes
# ---------------------------------------------------------------------------


def prop21_tail(T, alpha, D0, n, u, H=None) -> AsymptoticEval:
    """``T D0^{1/alpha} H_alpha u^{2/alpha} Upsilon_n(u)``."""
    _check_alpha(alpha)
    prov = {}
    h = _constant(H, f"H_{alpha:g}", lambda: pickands_anchor(alpha), prov)
    return _assemble(T * D0 ** (1 / alpha) * h, 2 / alpha, u, _log_upsilon_marginal(n, u), n - 2, "prop21", prov)


def prop22_local_tail(S, alpha, D0, n, f_u, H_window=None) -> AsymptoticEval:
    """``H_alpha[0, D0^{1/alpha} S] Upsilon_n(f(u))`` for the window ``[0, u^{-2/alpha} S]``.

    ``f_u`` is the threshold value itself; ``f(u)/u -> 1`` is the caller's concern.
    """
    _check_alpha(alpha)
    prov = {}
    w = D0 ** (1 / alpha) * S
    h = _window_constant(H_window, f"H_{alpha:g}[0,{w:g}]", alpha, w, prov)
    return _assemble(h, 0.0, f_u, _log_upsilon_marginal(n, f_u), n - 2, "prop22", prov)


def thm21_regime(alpha, beta):
    if math.isclose(alpha, 2 * beta):
        return "alpha=2beta"
    return "alpha<2beta" if alpha < 2 * beta else "alpha>2beta"


def thm21_threshold(alpha, beta):
    """Lower bound on ``c``: ``1/beta`` if ``alpha < 2 beta``, else ``2/alpha``."""
    return 1 / beta if thm21_regime(alpha, beta) == "alpha<2beta" else 2 / alpha


def thm21_tail(alpha, beta, c, n, u, D0=1.0, H=None, P=None, interior=False, g_t0=0.0) -> AsymptoticEval:
    """``M^c_{alpha,beta} u^{(2/alpha - 1/beta)_+} Upsilon_n(u)`` for ``sup (chi_n(t) - g(t))``.

    ``g(t) = c t^beta (1 + o(1))`` near 0.  A covariance coefficient ``D0``
    is absorbed by the time change ``t -> D0^{1/alpha} t``, which turns the
    trend coefficient into ``c D0^{-beta/alpha}``.

    With ``interior=True`` the trend minimum sits at an interior point with
    value ``g_t0``: the level becomes ``u + g_t0``, Gamma doubles and the
    Piterbarg constant is the two-sided one (supply it through ``P``).
    """
    _check_alpha(alpha)
    if not (beta > 0 and c > 0):
        raise ConfigError("beta and c must be positive")
    c_eff = c * D0 ** (-beta / alpha)
    regime = thm21_regime(alpha, beta)
    bound = thm21_threshold(alpha, beta)
    if not c_eff > bound:
        raise HypothesisError(f"asymptotic regime not guaranteed: need c > {bound:g} for {regime}, got {c_eff:g}")
    prov = {"c_eff": c_eff}
    flags = []
    level = u + g_t0 if interior else u
    if interior:
        flags.append("INTERIOR_MINIMUM")
    if regime == "alpha<2beta":
        h = _constant(H, f"H_{alpha:g}", lambda: pickands_anchor(alpha), prov)
        gamma = math.gamma(1 / beta + 1) * (2 if interior else 1)
        M = c_eff ** (-1 / beta) * gamma * h
    elif regime == "alpha=2beta":
        name = f"P~^{c_eff:g}_{alpha:g},{alpha / 2:g}" if interior else f"P^{c_eff:g}_{alpha:g},{alpha / 2:g}"
        lookup = None if interior else (lambda: piterbarg_anchor(alpha, alpha / 2, c_eff))
        M = _constant(P, name, lookup, prov)
    else:
        M = 1.0
    exponent = max(2 / alpha - 1 / beta, 0.0)
    return _assemble(M, exponent, level, _log_upsilon_marginal(n, level), n - 2, f"thm21:{regime}", prov, flags)


@dataclass(frozen=True)
class GeneralizedChiWeights:
    """Weights ``1 = b_1 = ... = b_k > b_{k+1} >= ... >= b_n >= 0``."""

    b: tuple
    k: int | None = None

    def __post_init__(self):
        b = tuple(float(x) for x in self.b)
        object.__setattr__(self, "b", b)
        if not b or b[0] != 1.0:
            raise ConfigError("the leading weight must equal 1")
        if any(x < 0 for x in b) or any(y > x for x, y in zip(b, b[1:])):
            raise ConfigError("weights must be non-negative and non-increasing")
        ones = sum(1 for x in b if x == 1.0)
        if self.k is None:
            object.__setattr__(self, "k", ones)
        elif not 1 <= self.k <= len(b):
            raise ConfigError("k must lie in [1, n]")
        elif ones > self.k:
            raise ConfigError("a weight beyond position k equals 1; the prefactor diverges")
        elif ones < self.k:
            raise ConfigError("the first k weights must equal 1")

    @property
    def n(self):
        return len(self.b)

    @property
    def prefactor(self):
        return math.prod((1 - x * x) ** -0.5 for x in self.b[self.k:])


def generalized_chi_tail(weights: GeneralizedChiWeights, alpha, beta, c, u, D0=1.0, H=None, P=None) -> AsymptoticEval:
    """``prod_{i>k} (1 - b_i^2)^{-1/2}`` times the chi tail with ``n`` replaced by ``k``."""
    base = thm21_tail(alpha, beta, c, weights.k, u, D0, H, P)
    w = weights.prefactor
    prov = dict(base.constants, weights=list(weights.b))
    return _assemble(w * base.prefactor, base.exponent, u, _log_upsilon_marginal(weights.k, u), base.marginal_power,
                     f"generalized:{base.regime}", prov, base.flags)


# ---------------------------------------------------------------------------
# non-stationary chi-processes
# ---------------------------------------------------------------------------


def thm22_regime(nu, mu):
    if math.isclose(nu, mu):
        return "nu=mu"
    return "nu<mu" if nu < mu else "nu>mu"


def thm22_tail(nu, mu, A, D, n, u, H=None, P=None) -> AsymptoticEval:
    """``M_{nu,mu} u^{(2/nu - 2/mu)_+} Upsilon_n(u)`` at a unique variance maximum.

    ``sigma(t) = 1 - A |T - t|^mu (1 + o(1))`` and
    ``1 - r(s, t) = D |t - s|^nu (1 + o(1))`` near ``T``.
    """
    _check_alpha(nu)
    if not (mu > 0 and A > 0 and D > 0):
        raise ConfigError("mu, A and D must be positive")
    regime = thm22_regime(nu, mu)
    prov = {}
    if regime == "nu<mu":
        h = _constant(H, f"H_{nu:g}", lambda: pickands_anchor(nu), prov)
        M = D ** (1 / nu) * math.gamma(1 / mu + 1) / A ** (1 / mu) * h
    elif regime == "nu=mu":
        d = A / D
        M = _constant(P, f"P^{d:g}_{nu:g},{nu:g}", lambda: piterbarg_anchor(nu, nu, d), prov)
    else:
        M = 1.0
    exponent = max(2 / nu - 2 / mu, 0.0)
    return _assemble(M, exponent, u, _log_upsilon_marginal(n, u), n - 2, f"thm22:{regime}", prov)


def thm23_tail(nu, mu, A, D, n, u, gT, beta_tilde, H=None, P=None) -> AsymptoticEval:
    """``thm22_tail`` at ``u* = u + g(T)``, valid when ``mu <= beta_tilde``."""
    if gT < 0:
        raise ConfigError("g(T) must be non-negative")
    if mu > beta_tilde:
        raise HypothesisError(f"outside theorem hypothesis: mu={mu:g} > beta_tilde={beta_tilde:g}")
    base = thm22_tail(nu, mu, A, D, n, u + gT, H, P)
    prov = dict(base.constants, gT=gT, u=u)
    return AsymptoticEval(base.value, base.log_value, base.prefactor, base.exponent, base.level, base.marginal,
                          base.marginal_power, base.regime.replace("thm22", "thm23"), prov, base.flags)


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------


def _space_axes(alphas, Ds):
    alphas, Ds = tuple(alphas), tuple(Ds)
    if len(alphas) != len(Ds):
        raise ConfigError("need one D per space index")
    for a in alphas:
        _check_alpha(a)
    if any(d <= 0 for d in Ds):
        raise ConfigError("space coefficients must be positive")
    return alphas, Ds


def thm31_field_tail(alpha0, beta, c, D0, alphas: Sequence[float], Ds: Sequence[float], S1, S2, f_u, P_window=None,
                     H_windows=None) -> AsymptoticEval:
    """Local field tail with drift-corrected threshold.

    Prefactor ``P^{c D0^{-beta/alpha0}}_{alpha0,beta}[0, D0^{1/alpha0} S1]
    prod_i H_{alpha_i}[0, D_i^{1/alpha_i} S2]``, times ``(2 pi)^{-1/2} f^{-1} exp(-f^2/2)``.
    ``H_windows`` lists one windowed constant per space axis; ``alpha_i = 2``
    axes fall back to the closed form.
    """
    _check_alpha(alpha0)
    alphas, Ds = _space_axes(alphas, Ds)
    prov = {}
    d_eff = c * D0 ** (-beta / alpha0)
    w0 = D0 ** (1 / alpha0) * S1
    p = _constant(P_window, f"P^{d_eff:g}_{alpha0:g},{beta:g}[0,{w0:g}]", None, prov) if w0 > 0 else 1.0
    H_windows = list(H_windows) if H_windows is not None else [None] * len(alphas)
    if len(H_windows) != len(alphas):
        raise ConfigError("need one windowed constant per space axis")
    pref = p
    for a, d, h in zip(alphas, Ds, H_windows):
        w = d ** (1 / a) * S2
        pref *= _window_constant(h, f"H_{a:g}[0,{w:g}]", a, w, prov)
    return _assemble(pref, -1.0, f_u, -LOG_SQRT_2PI, 0.0, "thm31", prov)


def thm32_field_tail(volume, alpha0, beta, c, D0, alphas: Sequence[float], Ds: Sequence[float], S1, u, P_window=None,
                     H=None) -> AsymptoticEval:
    """Field tail over a small set of positive volume.

    ``V P^{c D0^{-beta/alpha0}}_{alpha0,beta}[0, D0^{1/alpha0} S1] prod_i H_{alpha_i} D_i^{1/alpha_i}``
    times ``(2 pi)^{-1/2} u^{sum 2/alpha_i - 1} exp(-u^2/2)``.  Without space
    axes the volume factor is dropped.
    """
    _check_alpha(alpha0)
    alphas, Ds = _space_axes(alphas, Ds)
    if alphas and not volume > 0:
        raise ConfigError("volume must be positive")
    prov = {}
    d_eff = c * D0 ** (-beta / alpha0)
    w0 = D0 ** (1 / alpha0) * S1
    pref = _constant(P_window, f"P^{d_eff:g}_{alpha0:g},{beta:g}[0,{w0:g}]", None, prov) if w0 > 0 else 1.0
    H = list(H) if H is not None else [None] * len(alphas)
    if len(H) != len(alphas):
        raise ConfigError("need one Pickands constant per space axis")
    if alphas:
        pref *= volume
    for a, d, h in zip(alphas, Ds, H):
        pref *= _constant(h, f"H_{a:g}", lambda a=a: pickands_anchor(a), prov) * d ** (1 / a)
    exponent = sum(2 / a for a in alphas) - 1
    return _assemble(pref, exponent, u, -LOG_SQRT_2PI, 0.0, "thm32", prov)
