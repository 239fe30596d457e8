"""Covariance models, trend functions and local expansion parameters.

Stationary models are described by a correlation function ``r`` with
``r(t) = 1 - D0 |t|^alpha (1 + o(1))`` near zero.  Non-stationary models are
normalised so that their standard deviation equals one at the right end point
``T`` of the working interval, and expose the coefficients ``(A, mu, D, nu)`` of

    sigma(t)       = 1 - A (T - t)^mu + o((T - t)^mu),
    1 - Corr(s, t) = D |t - s|^nu + o(|t - s|^nu),      s, t -> T.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import integrate

from .errors import ConfigError, QuadratureError

STATIONARY_KINDS = ("exp_power", "fgn", "lamperti_fbm")
NONSTATIONARY_KINDS = ("fbm", "bifbm", "subfbm", "meanint_fbm")

MEANINT_QUAD_TOL = 1e-10


def _check_alpha(alpha, upper_open=False):
    alpha = float(alpha)
    ok = 0.0 < alpha < 2.0 if upper_open else 0.0 < alpha <= 2.0
    if not ok:
        bound = "(0, 2)" if upper_open else "(0, 2]"
        raise ConfigError(f"alpha must lie in {bound}, got {alpha}")
    return alpha


def _check_finite(t):
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ConfigError("non-finite time argument")
    return t


# ---------------------------------------------------------------------------
# Stationary models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StationaryModel:
    """Unit-variance stationary Gaussian process.

    Use the constructors :meth:`exp_power`, :meth:`fgn` and :meth:`lamperti`.
    ``d0`` is the local coefficient in ``1 - r(t) ~ d0 |t|^alpha``.
    """

    kind: str
    alpha: float
    d0: float = 1.0

    def __post_init__(self):
        if self.kind not in STATIONARY_KINDS:
            raise ConfigError(f"unknown stationary model kind {self.kind!r}")
        _check_alpha(self.alpha, upper_open=self.kind == "fgn")
        if not self.d0 > 0:
            raise ConfigError(f"d0 must be positive, got {self.d0}")
        if self.kind == "fgn" and self.d0 != 1.0:
            raise ConfigError("fractional Gaussian noise has d0 = 1")
        if self.kind == "lamperti_fbm" and self.d0 != 0.5:
            raise ConfigError("the Lamperti transform of fBm has d0 = 1/2")

    @classmethod
    def exp_power(cls, alpha, d0=1.0):
        return cls("exp_power", float(alpha), float(d0))

    @classmethod
    def fgn(cls, alpha):
        """Increments ``B(t+1) - B(t)`` of an fBm with Hurst index alpha/2."""
        return cls("fgn", float(alpha), 1.0)

    @classmethod
    def lamperti(cls, alpha):
        """``exp(-alpha t / 2) B(exp(t))`` for an fBm ``B`` with Hurst index alpha/2."""
        return cls("lamperti_fbm", float(alpha), 0.5)

    @property
    def name(self):
        if self.kind == "exp_power":
            return f"exp_power(alpha={self.alpha:g},d0={self.d0:g})"
        return f"{self.kind}(alpha={self.alpha:g})"

    def cov(self, t):
        """Correlation ``r(|t|)``; vectorised, ``r(0) = 1`` exactly."""
        t = np.abs(_check_finite(t))
        a = self.alpha
        if self.kind == "exp_power":
            out = np.exp(-self.d0 * t**a)
        elif self.kind == "fgn":
            out = 0.5 * ((t + 1.0) ** a + np.abs(t - 1.0) ** a - 2.0 * t**a)
        else:
            # e^{-a t/2} Cov(B(e^t), B(1)) = (e^{a t/2} + e^{-a t/2} - e^{-a t/2}(e^t - 1)^a) / 2
            half = 0.5 * a * t
            out = 0.5 * (np.exp(half) + np.exp(-half) - np.exp(-half) * np.expm1(t) ** a)
        out = np.where(t == 0.0, 1.0, out)
        return out if out.ndim else float(out)


def eval_stationary_cov(model: StationaryModel, t):
    """Correlation of a stationary model at lag ``t``."""
    return model.cov(t)


def check_stationary_assumptions(model: StationaryModel, lags=None, small_lags=None):
    """Numerical check of the local and global correlation conditions.

    Returns a dict with the maximal ``r(t)`` over the positive ``lags`` (must be
    below one) and the local-fit ratios ``(1 - r(t)) / (d0 t^alpha)`` at
    ``small_lags``.
    """
    if lags is None:
        lags = np.linspace(1e-3, 10.0, 2001)
    if small_lags is None:
        small_lags = np.logspace(-6, -3, 7)
    lags = np.asarray(lags, float)
    small_lags = np.asarray(small_lags, float)
    r = model.cov(lags)
    ratios = (1.0 - model.cov(small_lags)) / (model.d0 * small_lags**model.alpha)
    return {
        "r0": model.cov(0.0),
        "max_r": float(np.max(r)),
        "max_abs_r": float(np.max(np.abs(r))),
        "r_below_one": bool(np.all(r < 1.0)),
        "local_ratios": ratios,
        "local_fit_ok": bool(np.all((ratios >= 0.9) & (ratios <= 1.1))),
    }


# ---------------------------------------------------------------------------
# Non-stationary models
# ---------------------------------------------------------------------------


class ExpansionParams(NamedTuple):
    A: float
    mu: float
    D: float
    nu: float


@dataclass(frozen=True)
class NonstationaryModel:
    """Self-similar Gaussian process on ``[0, T]`` normalised to ``sigma(T) = 1``.

    ``params`` holds ``alpha`` for fbm, ``K`` and ``H`` for bifbm and ``H`` for
    subfbm and meanint_fbm.  ``holder`` is the pair ``(G, gamma)`` of an
    increment bound ``E(X(t) - X(s))^2 <= G |t - s|^gamma`` of the normalised
    process (checked on grids only, see :func:`check_holder`).
    """

    kind: str
    T: float
    params: dict = field(default_factory=dict)
    holder: tuple = (1.0, 1.0)

    def __post_init__(self):
        if self.kind not in NONSTATIONARY_KINDS:
            raise ConfigError(f"unknown non-stationary model kind {self.kind!r}")
        if not self.T > 0:
            raise ConfigError(f"horizon T must be positive, got {self.T}")
        p = self.params
        if self.kind == "fbm":
            _check_alpha(p["alpha"])
        elif self.kind == "bifbm":
            if not (0 < p["K"] <= 1 and 0 < p["H"] < 1):
                raise ConfigError("bi-fBm needs K in (0, 1] and H in (0, 1)")
        elif not 0 < p["H"] < 1:
            raise ConfigError(f"{self.kind} needs H in (0, 1)")
        if 2.0 * self._self_similarity() > 2.0:
            raise ConfigError("local index nu > 2 is outside the theorem scope")

    # constructors ---------------------------------------------------------

    @classmethod
    def fbm(cls, alpha, T=1.0):
        alpha = float(alpha)
        return cls("fbm", float(T), {"alpha": alpha}, (T**-alpha, alpha))

    @classmethod
    def bifbm(cls, K, H, T=1.0):
        K, H = float(K), float(H)
        return cls("bifbm", float(T), {"K": K, "H": H}, (2.0 ** (1.0 - K) * T ** (-2 * K * H), 2 * K * H))

    @classmethod
    def subfbm(cls, H, T=1.0):
        H = float(H)
        v = 2.0 - 2.0 ** (2 * H - 1)
        return cls("subfbm", float(T), {"H": H}, (max(1.0, v) / (v * T ** (2 * H)), 2 * H))

    @classmethod
    def meanint_fbm(cls, H, T=1.0):
        H = float(H)
        # only valid away from the origin; checked on [T/2, T]
        return cls("meanint_fbm", float(T), {"H": H}, (8.0 / T, 1.0))

    # covariance -----------------------------------------------------------

    @property
    def name(self):
        args = ",".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.kind}({args},T={self.T:g})"

    def _self_similarity(self):
        p = self.params
        if self.kind == "fbm":
            return p["alpha"] / 2.0
        if self.kind == "bifbm":
            return p["K"] * p["H"]
        return p["H"]

    def raw_cov(self, s, t, method="closed"):
        """Covariance of the un-normalised process."""
        s = _check_finite(s)
        t = _check_finite(t)
        if np.any(s < 0) or np.any(t < 0):
            raise ConfigError("times must be non-negative")
        p = self.params
        if self.kind == "fbm":
            a = p["alpha"]
            return 0.5 * (s**a + t**a - np.abs(t - s) ** a)
        if self.kind == "bifbm":
            K, H = p["K"], p["H"]
            return 2.0**-K * ((t ** (2 * H) + s ** (2 * H)) ** K - np.abs(t - s) ** (2 * K * H))
        if self.kind == "subfbm":
            h2 = 2 * p["H"]
            return s**h2 + t**h2 - 0.5 * ((s + t) ** h2 + np.abs(t - s) ** h2)
        if method == "quadrature":
            return np.vectorize(self._meanint_quad)(s, t)
        return _meanint_cov(p["H"], s, t)

    def _meanint_quad(self, s, t):
        H = self.params["H"]
        if s == 0.0 or t == 0.0:
            return 0.0
        f = lambda y, x: 0.5 * (x ** (2 * H) + y ** (2 * H) - abs(x - y) ** (2 * H))
        # split the inner range at the diagonal kink y = x
        lo, err_lo = integrate.dblquad(f, 0.0, s, 0.0, lambda x: min(x, t), epsabs=MEANINT_QUAD_TOL / 4, epsrel=0.0)
        hi, err_hi = integrate.dblquad(f, 0.0, s, lambda x: min(x, t), t, epsabs=MEANINT_QUAD_TOL / 4, epsrel=0.0)
        err = err_lo + err_hi
        if err > MEANINT_QUAD_TOL:
            raise QuadratureError(err, MEANINT_QUAD_TOL)
        return (2 * H + 2) / (s * t) * (lo + hi)

    @property
    def sigma_T(self):
        return float(np.sqrt(self.raw_cov(self.T, self.T)))

    def cov(self, s, t, method="closed"):
        """Covariance of the process normalised by ``sigma(T)``."""
        out = self.raw_cov(s, t, method) / self.sigma_T**2
        return out if np.ndim(out) else float(out)

    def std(self, t):
        out = np.sqrt(np.maximum(self.cov(t, t), 0.0))
        return out if np.ndim(out) else float(out)

    def corr(self, s, t):
        out = self.cov(s, t) / (self.std(s) * self.std(t))
        return out if np.ndim(out) else float(out)

    def cov_matrix(self, times):
        times = np.asarray(times, float)
        c = self.cov(times[:, None], times[None, :])
        return 0.5 * (c + c.T)


def _meanint_cov(H, s, t):
    # (2H+2)/(s t) * int_0^s int_0^t (x^{2H} + y^{2H} - |x-y|^{2H}) / 2 dy dx, in closed form
    s, t = np.broadcast_arrays(np.asarray(s, float), np.asarray(t, float))
    p = 2 * H
    j = (t * s ** (p + 1) + s * t ** (p + 1)) / (p + 1)
    i = (s ** (p + 2) + t ** (p + 2) - np.abs(t - s) ** (p + 2)) / ((p + 1) * (p + 2))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (p + 2) / (2.0 * s * t) * (j - i)
    return np.where((s == 0) | (t == 0), 0.0, out)


def eval_nonstationary_cov(model: NonstationaryModel, s, t, method="closed"):
    """Covariance of the normalised non-stationary model at ``(s, t)``.

    ``method="quadrature"`` evaluates the mean-integrated fBm covariance by
    adaptive quadrature of its defining double integral (tolerance 1e-10).
    """
    if np.any(np.asarray(s) > model.T * (1 + 1e-12)) or np.any(np.asarray(t) > model.T * (1 + 1e-12)):
        raise ConfigError("times must lie in [0, T]")
    return model.cov(s, t, method)


def local_expansion_params(model: NonstationaryModel, T=None) -> ExpansionParams:
    """Expansion coefficients ``(A, mu, D, nu)`` at the right end point."""
    T = model.T if T is None else float(T)
    p = model.params
    if model.kind == "fbm":
        a = p["alpha"]
        out = ExpansionParams(a / (2 * T), 1.0, 1.0 / (2 * T**a), a)
    elif model.kind == "bifbm":
        K, H = p["K"], p["H"]
        out = ExpansionParams(K * H / T, 1.0, 2.0**-K * T ** (-2 * K * H), 2 * K * H)
    elif model.kind == "subfbm":
        H = p["H"]
        out = ExpansionParams(H / T, 1.0, 1.0 / (2 * (2 - 2 ** (2 * H - 1)) * T ** (2 * H)), 2 * H)
    else:
        H = p["H"]
        out = ExpansionParams(H / T, 1.0, (1 - H**2) / (2 * T**2), 2.0)
    if out.nu > 2:
        raise ConfigError(f"nu = {out.nu} > 2 is outside the theorem scope")
    return out


@dataclass
class ExpansionReport:
    scales: np.ndarray
    sigma_residuals: np.ndarray
    corr_residuals: np.ndarray
    passed: bool
    failures: list

    def summary(self):
        return "PASS" if self.passed else "FAIL: " + "; ".join(self.failures)


def _shrinks(res, decay):
    # strictly decreasing and at least a factor ``decay`` smaller at the finest scale,
    # unless already at round-off level
    if np.all(res < 1e-9):
        return True, None
    for i in range(1, len(res)):
        if not res[i] < res[i - 1]:
            return False, i
    if res[-1] > decay * res[0]:
        return False, len(res) - 1
    return True, None


def verify_expansion(model: NonstationaryModel, claimed, scales=(1e-2, 1e-3, 1e-4), decay=0.75):
    """Relative residuals of the claimed expansion at shrinking distances from ``T``.

    For each scale ``h`` computes ``|sigma(T-h) - (1 - A h^mu)| / h^mu`` and
    ``|1 - Corr(T-h, T) - D h^nu| / h^nu``.  The check passes when both sequences
    decrease strictly and shrink by at least the factor ``decay`` overall; a
    wrong coefficient leaves an O(1) residual and fails.
    """
    A, mu, D, nu = claimed
    scales = np.asarray(scales, float)
    if scales.ndim != 1 or len(scales) < 2:
        raise ConfigError("need at least two scales")
    if np.any(np.diff(scales) >= 0) or np.any(scales <= 0) or np.any(scales >= model.T):
        raise ConfigError("scales must be strictly decreasing in (0, T)")
    T = model.T
    t = T - scales
    sig = model.std(t)
    sig_res = np.abs(sig - (1.0 - A * scales**mu)) / scales**mu
    # 1 - Corr = (sigma_s sigma_t - cov) / (sigma_s sigma_t); the numerator is formed directly
    one_minus_corr = (sig * 1.0 - model.cov(t, T)) / sig
    corr_res = np.abs(one_minus_corr - D * scales**nu) / scales**nu
    failures = []
    for label, res in (("sigma", sig_res), ("corr", corr_res)):
        ok, idx = _shrinks(res, decay)
        if not ok:
            failures.append(f"{label} residual not shrinking at scale {scales[idx]:g}")
    return ExpansionReport(scales, sig_res, corr_res, not failures, failures)


def check_holder(model: NonstationaryModel, times, G=None, gamma=None):
    """Largest ``E(X(t)-X(s))^2 / |t-s|^gamma`` over grid pairs, and whether it is <= G."""
    G0, g0 = model.holder
    G = G0 if G is None else G
    gamma = g0 if gamma is None else gamma
    times = np.asarray(times, float)
    c = model.cov_matrix(times)
    v = np.diag(c)
    inc = v[:, None] + v[None, :] - 2 * c
    dt = np.abs(times[:, None] - times[None, :])
    mask = dt > 0
    ratio = float(np.max(inc[mask] / dt[mask] ** gamma))
    return ratio, ratio <= G * (1 + 1e-9)


# ---------------------------------------------------------------------------
# Trends
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrendSpec:
    """Deterministic trend ``g`` subtracted from the chi-process.

    ``g1``: ``c t^beta`` (minimum 0 at the origin).  ``g2``: ``gT - c_tilde (T - t)^beta_tilde``.
    ``tabulated``: values on a fixed grid.  ``zero``: ``g = 0``.
    """

    form: str
    c: float = 0.0
    beta: float = 1.0
    gT: float = 0.0
    c_tilde: float = 0.0
    beta_tilde: float = 1.0
    T: float = 1.0
    grid: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.form == "g1":
            if not (self.c > 0 and self.beta > 0):
                raise ConfigError("G1 trend needs c > 0 and beta > 0")
        elif self.form == "g2":
            if not (self.gT >= 0 and self.beta_tilde > 0 and self.T > 0):
                raise ConfigError("G2 trend needs gT >= 0, beta_tilde > 0 and T > 0")
            if self.gT - max(self.c_tilde, 0.0) * self.T**self.beta_tilde < -1e-12:
                raise ConfigError("G2 trend would be negative on [0, T]")
        elif self.form == "tabulated":
            if len(self.grid) != len(self.values) or not self.grid:
                raise ConfigError("tabulated trend needs matching non-empty grid and values")
            if min(self.values) < 0 or not np.all(np.isfinite(self.values)):
                raise ConfigError("tabulated trend must be finite and non-negative")
        elif self.form != "zero":
            raise ConfigError(f"unknown trend form {self.form!r}")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def g1(cls, c, beta):
        return cls("g1", c=float(c), beta=float(beta))

    @classmethod
    def g2(cls, gT, c_tilde, beta_tilde, T=1.0):
        return cls("g2", gT=float(gT), c_tilde=float(c_tilde), beta_tilde=float(beta_tilde), T=float(T))

    @classmethod
    def tabulated(cls, grid, values):
        return cls("tabulated", grid=tuple(map(float, grid)), values=tuple(map(float, values)))

    @property
    def experimental(self):
        """Negative ``c_tilde`` in the G2 form is allowed but not covered by examples."""
        return self.form == "g2" and self.c_tilde < 0

    @property
    def name(self):
        if self.form == "g1":
            return f"g1(c={self.c:g},beta={self.beta:g})"
        if self.form == "g2":
            return f"g2(gT={self.gT:g},c_tilde={self.c_tilde:g},beta_tilde={self.beta_tilde:g})"
        return self.form

    def __call__(self, t):
        return eval_trend(self, t)


def eval_trend(spec: TrendSpec, t):
    """Evaluate the trend at time(s) ``t``; exact power forms."""
    t = _check_finite(t)
    if spec.form == "zero":
        out = np.zeros_like(t)
    elif spec.form == "g1":
        if np.any(t < 0):
            raise ConfigError("G1 trend is defined for t >= 0")
        out = spec.c * t**spec.beta
    elif spec.form == "g2":
        if np.any(t > spec.T * (1 + 1e-12)) or np.any(t < 0):
            raise ConfigError("G2 trend is defined on [0, T]")
        out = spec.gT - spec.c_tilde * np.maximum(spec.T - t, 0.0) ** spec.beta_tilde
    else:
        grid = np.asarray(spec.grid)
        idx = np.searchsorted(grid, t)
        idx = np.clip(idx, 0, len(grid) - 1)
        left = np.clip(idx - 1, 0, len(grid) - 1)
        pick = np.where(np.abs(grid[left] - t) < np.abs(grid[idx] - t), left, idx)
        tol = 1e-9 * max(1.0, float(np.max(np.abs(grid))))
        if np.any(np.abs(grid[pick] - t) > tol):
            raise ConfigError("tabulated trend evaluated off its grid")
        out = np.asarray(spec.values)[pick]
    return out if np.ndim(out) else float(out)


def trend_on_grid(spec: TrendSpec, times: Sequence[float]):
    return np.asarray(eval_trend(spec, np.asarray(times, float)), float).reshape(-1)


__all__ = [
    "StationaryModel",
    "NonstationaryModel",
    "ExpansionParams",
    "ExpansionReport",
    "TrendSpec",
    "eval_stationary_cov",
    "eval_nonstationary_cov",
    "local_expansion_params",
    "verify_expansion",
    "eval_trend",
    "trend_on_grid",
    "check_stationary_assumptions",
    "check_holder",
]
