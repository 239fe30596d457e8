"""Chi-processes, supremum statistics and Monte Carlo tail estimates."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special, stats

from .covmodels import NonstationaryModel, StationaryModel, TrendSpec, local_expansion_params, trend_on_grid
from .errors import ConfigError
from .samplers import FieldPlan, PathBatch, SampleGrid, SeedSpec, draw_block, map_blocks, path_plan

# stream tag for the copies of a chi-process: copy i uses stream (CHI_STREAM, i)
CHI_STREAM = 1
FIELD_STREAM = 3


@dataclass
class TailEstimate:
    phat: float
    k: int
    nsim: int
    ci: tuple
    u: float
    confidence: float = 0.99
    meta: dict = field(default_factory=dict)

    @property
    def ci_lo(self):
        return self.ci[0]

    @property
    def ci_hi(self):
        return self.ci[1]


def wilson_interval(k, n, confidence=0.99):
    """Wilson score interval for a binomial proportion."""
    if n <= 0 or not 0 <= k <= n:
        raise ConfigError("need 0 <= k <= n and n > 0")
    z = stats.norm.ppf(0.5 + confidence / 2)
    p = k / n
    denom = 1 + z**2 / n
    centre = (p + z**2 / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z**2 / (4 * n**2)) / denom
    return float(max(0.0, centre - half)), float(min(1.0, centre + half))


def clopper_pearson_upper(n, confidence=0.99):
    """Exact one-sided upper bound for a proportion after zero successes in ``n`` trials."""
    return float(-np.expm1(np.log1p(-confidence) / n))


def tail_estimate(statistics, u, confidence=0.99, meta=None) -> TailEstimate:
    """Exceedance estimate ``P(statistic > u)`` from per-replication statistics."""
    statistics = np.asarray(statistics)
    nsim = statistics.size
    k = int(np.count_nonzero(statistics > u))
    if k == 0:
        ci = (0.0, clopper_pearson_upper(nsim, confidence))
    else:
        ci = wilson_interval(k, nsim, confidence)
    return TailEstimate(k / nsim, k, nsim, ci, float(u), confidence, dict(meta or {}))


def chi_from_paths(batches: Sequence[PathBatch]) -> PathBatch:
    """Pointwise Euclidean norm of ``n`` independent path batches on a common grid."""
    if not batches:
        raise ConfigError("need at least one path batch")
    first = batches[0]
    for b in batches[1:]:
        if b.grid != first.grid:
            raise ConfigError("path batches live on different grids")
        if b.values.shape != first.values.shape:
            raise ConfigError("path batches have different batch sizes")
    sq = np.zeros_like(first.values)
    for b in batches:
        sq += b.values**2
    return PathBatch(np.sqrt(sq), first.grid, f"chi{len(batches)}[{first.model}]", first.seed, first.reps,
                     meta={"n": len(batches)})


def sup_statistic(chi: PathBatch, trend: TrendSpec) -> np.ndarray:
    """Per-replication ``max_t (chi(t) - g(t))`` over the grid."""
    g = trend_on_grid(trend, chi.grid.points)
    return (chi.values - g).max(axis=1)


def exact_chi_survival(n, u):
    """``P(chi_n > u)`` for unit-variance marginals: the regularised upper incomplete gamma ``Q(n/2, u^2/2)``."""
    if n < 1:
        raise ConfigError("n must be at least 1")
    u = np.asarray(u, float)
    if np.any(u < 0):
        raise ConfigError("u must be non-negative")
    out = special.gammaincc(n / 2.0, u**2 / 2.0)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def local_index(model):
    if isinstance(model, StationaryModel):
        return model.alpha
    if isinstance(model, NonstationaryModel):
        return local_expansion_params(model).nu
    raise ConfigError(f"unsupported model {model!r}")


def cluster_grid(model, T1, T, u, points_per_cluster=8):
    """Grid on ``[T1, T]`` with step ``u^(-2/alpha) / points_per_cluster``."""
    if T1 == T:
        return SampleGrid(float(T1), float(T), 1)
    step = float(u) ** (-2.0 / local_index(model)) / points_per_cluster
    return SampleGrid.from_step(T1, T, step)


@dataclass
class ChiExperiment:
    """Monte Carlo setup for ``P(sup_{t in [T1, T]} (chi_n(t) - g(t)) > u)``.

    ``u`` may be a single level or a ladder; the grid resolves the cluster
    scale of the largest level unless an explicit ``grid`` is given.
    """

    model: object
    n: int
    u: object
    T: float = 1.0
    T1: float = 0.0
    trend: TrendSpec = field(default_factory=TrendSpec.zero)
    nsim: int = 100_000
    seed: int = 0
    points_per_cluster: int = 8
    grid: SampleGrid | None = None
    confidence: float = 0.99
    block_size: int = 1024
    threads: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        if np.any(np.asarray(self.u, float) < 0):
            raise ConfigError("u must be non-negative")
        if not self.T >= self.T1 >= 0:
            raise ConfigError("need 0 <= T1 <= T")

    @property
    def levels(self):
        return np.atleast_1d(np.asarray(self.u, float))

    def resolved_grid(self):
        if self.grid is not None:
            return self.grid
        return cluster_grid(self.model, self.T1, self.T, max(self.levels.max(), 1.0), self.points_per_cluster)


def simulate_sup(model, n, grid: SampleGrid, trends: Sequence[TrendSpec], nsim, seeds, threads=None):
    """Supremum statistics of ``chi_n - g`` for each trend on common driving noise.

    Returns an array of shape ``(len(trends), nsim)``.  Copy ``i`` of the
    Gaussian process is driven by stream ``(CHI_STREAM, i)``.
    """
    seeds = seeds if isinstance(seeds, SeedSpec) else SeedSpec(int(seeds))
    plan = path_plan(model, grid)
    gs = np.stack([trend_on_grid(tr, grid.points) for tr in trends])

    def one_block(b, lo, hi):
        sq = None
        for i in range(n):
            x = draw_block(plan, seeds, (CHI_STREAM, i), b, lo, hi)
            if sq is None:
                sq = x * x
            else:
                sq += x * x
        chi = np.sqrt(sq, out=sq)
        return np.stack([(chi - g).max(axis=1) for g in gs])

    parts = map_blocks(one_block, 0, nsim, seeds, threads)
    return np.concatenate(parts, axis=1)


def simulate_chi(model, n, grid: SampleGrid, nsim, seeds, first_rep=0, threads=None) -> PathBatch:
    """Chi paths themselves (for small batches; the tail estimators stream instead)."""
    seeds = seeds if isinstance(seeds, SeedSpec) else SeedSpec(int(seeds))
    plan = path_plan(model, grid)
    batches = []
    for i in range(n):
        parts = map_blocks(lambda b, lo, hi: draw_block(plan, seeds, (CHI_STREAM, i), b, lo, hi), first_rep, nsim,
                           seeds, threads)
        batches.append(PathBatch(np.concatenate(parts), grid, model.name, seeds.master, (first_rep, first_rep + nsim)))
    return chi_from_paths(batches)


def estimate_tail(exp: ChiExperiment):
    """Monte Carlo tail estimate(s); a list when ``exp.u`` is a ladder."""
    if exp.nsim < 100:
        raise ConfigError("nsim must be at least 100")
    grid = exp.resolved_grid()
    if grid.m > 1:
        needed = exp.levels.max() ** (-2.0 / local_index(exp.model))
        if grid.step > needed:
            warnings.warn(f"grid step {grid.step:.3g} does not resolve the cluster scale {needed:.3g}", stacklevel=2)
    seeds = SeedSpec(exp.seed, exp.block_size)
    sups = simulate_sup(exp.model, exp.n, grid, [exp.trend], exp.nsim, seeds, exp.threads)[0]
    meta = {"grid": grid, "seed": exp.seed, "model": exp.model.name, "trend": exp.trend.name, "n": exp.n}
    out = [tail_estimate(sups, u, exp.confidence, meta) for u in exp.levels]
    return out if np.ndim(exp.u) else out[0]


def field_grids(alphas, u, S1, S2, m_time, m_space):
    """Time grid on ``[0, S1]`` and space grids on ``[0, u^{-2/alpha_i} S2]``."""
    return [SampleGrid(0.0, S1, m_time)] + [SampleGrid(0.0, u ** (-2.0 / a) * S2, m_space) for a in alphas]


def simulate_field_sup(alpha0, d0, alphas, ds, c, beta, u, S1, S2, nsim, seeds, m_time=32, m_space=32, threads=None):
    """Per-replication ``max xi_u(t, v) / (1 + c t^beta u^-2)`` over the local window.

    ``xi_u`` has correlation ``exp(-u^-2 d0 t^alpha0 - sum_i ds[i] |v_i|^alphas[i])``.
    """
    seeds = seeds if isinstance(seeds, SeedSpec) else SeedSpec(int(seeds))
    grids = field_grids(alphas, u, S1, S2, m_time, m_space)
    axes = [(alpha0, d0 * u**-2.0, grids[0])] + [(a, d, g) for a, d, g in zip(alphas, ds, grids[1:])]
    plan = FieldPlan(axes)
    t = grids[0].points
    scale = 1.0 / (1.0 + c * t**beta / u**2)
    scale = scale.reshape((-1,) + (1,) * len(alphas))

    def one_block(b, lo, hi):
        x = draw_block(plan, seeds, (FIELD_STREAM,), b, lo, hi) * scale
        return x.reshape(x.shape[0], -1).max(axis=1)

    return np.concatenate(map_blocks(one_block, 0, nsim, seeds, threads))


# ---------------------------------------------------------------------------
# sphere representation
# ---------------------------------------------------------------------------


@dataclass
class SphereReport:
    passed: bool
    violations: int
    worst_replication: int
    worst_excess: float
    max_gap_at_optimum: float

    def summary(self):
        if self.passed:
            return "PASS"
        return f"FAIL: {self.violations} violations, worst replication {self.worst_replication}"


def sphere_check(x, directions, tol=1e-12) -> SphereReport:
    """Check ``max_s <s, X> <= |X|`` over unit directions and equality at ``s = X/|X|``.

    ``x`` has shape (replications, n); ``directions`` has shape (k, n).
    """
    x = np.atleast_2d(np.asarray(x, float))
    s = np.atleast_2d(np.asarray(directions, float))
    if s.shape[1] != x.shape[1]:
        raise ConfigError("directions and paths differ in dimension")
    norms_s = np.linalg.norm(s, axis=1)
    if np.any(np.abs(norms_s - 1) > 1e-12):
        raise ConfigError("directions must lie on the unit sphere")
    chi = np.linalg.norm(x, axis=1)
    best = (x @ s.T).max(axis=1)
    scale = np.maximum(chi, 1.0)
    excess = (best - chi) / scale
    bad = excess > tol
    safe = np.where(chi > 0, chi, 1.0)
    opt = np.einsum("ij,ij->i", x, x / safe[:, None])
    gap = np.abs(opt - chi) / scale
    worst = int(np.argmax(excess)) if len(excess) else -1
    passed = not bad.any() and bool(np.all(gap <= tol))
    return SphereReport(passed, int(bad.sum()), worst, float(excess.max(initial=-np.inf)), float(gap.max(initial=0.0)))


def random_directions(k, n, rng):
    s = rng.standard_normal((k, n))
    return s / np.linalg.norm(s, axis=1, keepdims=True)
