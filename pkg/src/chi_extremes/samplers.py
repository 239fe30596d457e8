"""Exact discrete samplers for Gaussian processes and separable fields.

Every sampler is a pure function of its inputs and a :class:`SeedSpec`.
Replications are grouped in fixed-size blocks; block ``b`` of stream ``s``
draws from its own counter-based generator keyed by ``(master, *s, b)``, so
replication ``r`` receives the same random numbers whatever the number of
worker threads or the way a batch is split into calls.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import fft as sfft
from scipy import linalg

from .covmodels import NonstationaryModel, StationaryModel
from .errors import ConfigError, EmbeddingError, FactorizationError

EMBEDDING_TOL = 1e-9
JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)
CHOLESKY_CAP = 4096
DEFAULT_BLOCK = 1024
THREADS_ENV = "CHI_EXTREMES_THREADS"


def resolve_threads(threads=None):
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    return max(1, int(threads))


@dataclass(frozen=True)
class SampleGrid:
    """``m`` equispaced points from ``start`` to ``end`` (``m = 1`` is ``{start}``)."""

    start: float
    end: float
    m: int

    def __post_init__(self):
        if self.m < 1 or int(self.m) != self.m:
            raise ConfigError(f"grid needs m >= 1 points, got {self.m}")
        if not self.end >= self.start:
            raise ConfigError("grid end must not precede its start")
        if self.m == 1 and self.end != self.start:
            raise ConfigError("a one-point grid must have end == start")

    @classmethod
    def from_step(cls, start, end, step):
        """Finest equispaced grid on ``[start, end]`` with spacing at most ``step``."""
        if end == start:
            return cls(float(start), float(end), 1)
        m = int(np.ceil((end - start) / step - 1e-9)) + 1
        return cls(float(start), float(end), max(m, 2))

    @property
    def step(self):
        return 0.0 if self.m == 1 else (self.end - self.start) / (self.m - 1)

    @property
    def points(self):
        if self.m == 1:
            return np.array([self.start])
        return self.start + self.step * np.arange(self.m)


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus the block size that fixes the replication-to-stream map."""

    master: int
    block_size: int = DEFAULT_BLOCK

    def __post_init__(self):
        if not 0 <= int(self.master) < 2**64:
            raise ConfigError("master seed must be a 64-bit unsigned integer")
        if self.block_size < 1:
            raise ConfigError("block size must be positive")

    def generator(self, stream: Sequence[int], block: int) -> np.random.Generator:
        key = tuple(int(s) for s in stream) + (int(block),)
        ss = np.random.SeedSequence(int(self.master), spawn_key=key)
        return np.random.Generator(np.random.Philox(ss))


@dataclass
class PathBatch:
    """Rows are independent replications on ``grid``."""

    values: np.ndarray
    grid: SampleGrid
    model: str
    seed: int
    reps: tuple
    jitter: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != self.grid.m:
            raise ConfigError("path values must be batch x m")

    @property
    def batch(self):
        return self.values.shape[0]


@dataclass
class FieldBatch:
    """Replications of a field on the tensor product of ``grids``: shape (batch, m_t, m_1, ...)."""

    values: np.ndarray
    grids: tuple
    seed: int
    reps: tuple
    jitter: tuple = ()

    @property
    def batch(self):
        return self.values.shape[0]


# ---------------------------------------------------------------------------
# sampling plans: deterministic maps from standard normals to paths
# ---------------------------------------------------------------------------


class CirculantPlan:
    """Exact sampler of a stationary sequence with covariances ``acov[0..m]``.

    The circulant embedding has size ``2m``.  Paths are generated from a
    Hermitian random spectrum with one real FFT, which uses ``2m`` normals
    per path.
    """

    def __init__(self, acov, m, tol=EMBEDDING_TOL):
        acov = np.asarray(acov, float)
        self.m = int(m)
        if self.m == 1:
            self.scale = float(np.sqrt(acov[0]))
            self.clipped = 0.0
            self.width = 1
            return
        if len(acov) < self.m + 1:
            raise ConfigError("need covariances at lags 0..m")
        M = 2 * self.m
        row = np.concatenate([acov[: self.m + 1], acov[self.m - 1 : 0 : -1]])
        lam = sfft.rfft(row).real
        lmax = lam.max()
        lmin = lam.min()
        if lmin < -tol * lmax:
            raise EmbeddingError(lmin, lmax)
        neg = lam < 0
        # relative spectral mass dropped by clipping; bounds the covariance error
        self.clipped = float(-lam[neg].sum() / lam.sum()) if neg.any() else 0.0
        lam = np.where(neg, 0.0, lam)
        half = M // 2
        amp = np.empty(half + 1)
        amp[0] = np.sqrt(lam[0] / M) * M
        amp[half] = np.sqrt(lam[half] / M) * M
        amp[1:half] = np.sqrt(lam[1:half] / (2 * M)) * M
        self.amp = amp
        self.M = M
        self.width = M

    def transform(self, z):
        if self.m == 1:
            return self.scale * z[:, :1]
        half = self.M // 2
        spec = np.empty((z.shape[0], half + 1), complex)
        spec.real[:, 0] = z[:, 0]
        spec.imag[:, 0] = 0.0
        spec.real[:, half] = z[:, 1]
        spec.imag[:, half] = 0.0
        spec.real[:, 1:half] = z[:, 2 : half + 1]
        spec.imag[:, 1:half] = z[:, half + 1 :]
        spec *= self.amp
        return sfft.irfft(spec, n=self.M, axis=1)[:, : self.m]


class StationaryPlan:
    def __init__(self, model: StationaryModel, grid: SampleGrid):
        self.m = grid.m
        lags = grid.step * np.arange(grid.m + 1)
        self.circ = CirculantPlan(model.cov(lags), grid.m)
        self.width = self.circ.width

    def transform(self, z):
        return self.circ.transform(z)


def fgn_acov(alpha, k):
    k = np.abs(np.asarray(k, float))
    return 0.5 * (np.abs(k + 1) ** alpha + np.abs(k - 1) ** alpha - 2 * k**alpha)


class FbmPlan:
    """Exact fBm ``B_alpha`` (variance ``t^alpha``) on an equispaced grid in ``[0, inf)``.

    Increments are stationary and sampled by circulant embedding.  When the
    grid does not start at 0, the starting value is drawn from its exact
    conditional law given the increments, using one extra normal per path.
    """

    def __init__(self, alpha, grid: SampleGrid, scale=1.0):
        if grid.start < 0:
            raise ConfigError("fBm grids must lie in [0, inf)")
        self.alpha = float(alpha)
        self.m = grid.m
        self.a = grid.start
        self.scale = float(scale)
        n_inc = grid.m - 1
        self.n_inc = n_inc
        d = grid.step
        self.circ = None
        if n_inc >= 1:
            self.circ = CirculantPlan(fgn_acov(alpha, np.arange(n_inc + 1)) * d**alpha, n_inc)
        width = self.circ.width if self.circ else 0
        self.anchor_w = None
        self.anchor_sd = 0.0
        if self.a > 0:
            if n_inc >= 1:
                k = np.arange(1, n_inc + 1)
                a, al = self.a, self.alpha
                # Cov(B(a), B(a+kd) - B(a+(k-1)d))
                c = 0.5 * ((a + k * d) ** al - (a + (k - 1) * d) ** al - (k * d) ** al + ((k - 1) * d) ** al)
                col = fgn_acov(al, np.arange(n_inc)) * d**al
                w = linalg.solve_toeplitz(col, c)
                self.anchor_w = w
                self.anchor_sd = float(np.sqrt(max(a**al - c @ w, 0.0)))
            else:
                self.anchor_sd = self.a ** (self.alpha / 2)
            width += 1
        self.width = max(width, 1)

    def transform(self, z):
        rows = z.shape[0]
        out = np.zeros((rows, self.m))
        if self.circ is not None:
            inc = self.circ.transform(z[:, : self.circ.width])
            np.cumsum(inc, axis=1, out=out[:, 1:])
        if self.a > 0:
            anchor = self.anchor_sd * z[:, -1]
            if self.anchor_w is not None:
                anchor = anchor + inc @ self.anchor_w
            out += anchor[:, None]
        if self.scale != 1.0:
            out *= self.scale
        return out


class CholeskyPlan:
    def __init__(self, cov, cap=CHOLESKY_CAP):
        cov = np.asarray(cov, float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ConfigError("covariance must be a square matrix")
        if cov.shape[0] > cap:
            raise ConfigError(f"matrix size {cov.shape[0]} exceeds the Cholesky cap {cap}")
        if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-12):
            raise ConfigError("covariance must be symmetric")
        self.L, self.jitter = cholesky_with_jitter(cov)
        self.m = cov.shape[0]
        self.width = self.m
        self._LT = np.ascontiguousarray(self.L.T)

    def transform(self, z):
        return z @ self._LT


def cholesky_with_jitter(cov, ladder=JITTER_LADDER):
    """Lower Cholesky factor of ``cov + j I`` for the smallest working ``j`` in the ladder.

    ``j`` runs through ``ladder * trace(cov) / m``.  Returns ``(L, j)``; raises
    :class:`FactorizationError` with the failing leading-minor order otherwise.
    """
    cov = 0.5 * (np.asarray(cov, float) + np.asarray(cov, float).T)
    m = cov.shape[0]
    base = np.trace(cov) / m if m else 0.0
    info = 0
    jitter = 0.0
    for rel in ladder:
        jitter = rel * base
        c, info = linalg.lapack.dpotrf(cov + jitter * np.eye(m), lower=1, clean=1)
        if info == 0:
            return np.tril(c), jitter
    raise FactorizationError(info, jitter)


# ---------------------------------------------------------------------------
# block runner
# ---------------------------------------------------------------------------


def block_segments(first, count, block_size):
    """Split replications ``[first, first+count)`` into ``(block, lo, hi, out_lo)`` pieces."""
    r = first
    end = first + count
    while r < end:
        b = r // block_size
        lo = r - b * block_size
        hi = min(block_size, end - b * block_size)
        yield b, lo, hi, r - first
        r += hi - lo


def draw_block(plan, seeds: SeedSpec, stream, block, lo, hi):
    gen = seeds.generator(stream, block)
    z = gen.standard_normal((hi, plan.width))
    return plan.transform(z[lo:hi])


def map_blocks(fn, first, count, seeds: SeedSpec, threads=None):
    """Apply ``fn(block, lo, hi)`` to each block segment; results in replication order."""
    segs = list(block_segments(first, count, seeds.block_size))
    threads = resolve_threads(threads)
    if threads == 1 or len(segs) == 1:
        return [fn(b, lo, hi) for b, lo, hi, _ in segs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda s: fn(s[0], s[1], s[2]), segs))


def run_plan(plan, batch, seeds: SeedSpec, stream=(0,), first_rep=0, threads=None):
    if batch < 1:
        raise ConfigError("batch must be at least 1")
    parts = map_blocks(lambda b, lo, hi: draw_block(plan, seeds, stream, b, lo, hi), first_rep, batch, seeds, threads)
    return np.concatenate(parts, axis=0)


# ---------------------------------------------------------------------------
# public samplers
# ---------------------------------------------------------------------------


def _seeds(seeds):
    return seeds if isinstance(seeds, SeedSpec) else SeedSpec(int(seeds))


def sample_stationary(model: StationaryModel, grid: SampleGrid, batch, seeds, stream=(0,), first_rep=0, threads=None):
    """Exact draws of a stationary model on ``grid`` by circulant embedding."""
    seeds = _seeds(seeds)
    plan = StationaryPlan(model, grid)
    values = run_plan(plan, batch, seeds, stream, first_rep, threads)
    return PathBatch(values, grid, model.name, seeds.master, (first_rep, first_rep + batch),
                     meta={"clipped": plan.circ.clipped})


def sample_fbm(alpha, grid: SampleGrid, batch, seeds, stream=(0,), first_rep=0, threads=None, scale=1.0):
    """Exact fBm paths ``scale * B_alpha`` on ``grid``."""
    seeds = _seeds(seeds)
    plan = FbmPlan(alpha, grid, scale)
    values = run_plan(plan, batch, seeds, stream, first_rep, threads)
    return PathBatch(values, grid, f"fbm(alpha={alpha:g})", seeds.master, (first_rep, first_rep + batch))


def sample_gaussian_cholesky(cov, batch, seeds, grid=None, stream=(0,), first_rep=0, threads=None, cap=CHOLESKY_CAP):
    """Exact draws of ``N(0, cov + jitter I)``; the applied jitter is reported on the batch."""
    seeds = _seeds(seeds)
    plan = CholeskyPlan(cov, cap)
    if grid is None:
        grid = SampleGrid(0.0, float(plan.m - 1), plan.m)
    values = run_plan(plan, batch, seeds, stream, first_rep, threads)
    return PathBatch(values, grid, "cholesky", seeds.master, (first_rep, first_rep + batch), jitter=plan.jitter)


def path_plan(model, grid: SampleGrid, cap=CHOLESKY_CAP):
    """Sampling plan for any built-in model on ``grid``."""
    if isinstance(model, StationaryModel):
        return StationaryPlan(model, grid)
    if isinstance(model, NonstationaryModel):
        if grid.end > model.T * (1 + 1e-12) or grid.start < 0:
            raise ConfigError("grid must lie in [0, T]")
        if model.kind == "fbm":
            a = model.params["alpha"]
            return FbmPlan(a, grid, scale=model.T ** (-a / 2))
        return CholeskyPlan(model.cov_matrix(grid.points), cap)
    raise ConfigError(f"unsupported model {model!r}")


def sample_model(model, grid: SampleGrid, batch, seeds, stream=(0,), first_rep=0, threads=None):
    """Draw paths of any built-in model (stationary, fBm, or Cholesky for the rest)."""
    seeds = _seeds(seeds)
    plan = path_plan(model, grid)
    values = run_plan(plan, batch, seeds, stream, first_rep, threads)
    return PathBatch(values, grid, model.name, seeds.master, (first_rep, first_rep + batch),
                     jitter=getattr(plan, "jitter", 0.0))


class FieldPlan:
    """Separable stationary field: Kronecker product of per-axis exponential-power correlations."""

    def __init__(self, axes, cap=CHOLESKY_CAP):
        # axes: list of (alpha, coefficient, SampleGrid)
        if len(axes) > 3:
            raise ConfigError("at most two space axes are supported")
        shape = tuple(g.m for _, _, g in axes)
        if int(np.prod(shape)) > cap:
            raise ConfigError(f"field grid has {int(np.prod(shape))} points, cap is {cap}")
        self.shape = shape
        self.factors = []
        self.jitter = []
        for alpha, coef, g in axes:
            p = g.points
            c = np.exp(-coef * np.abs(p[:, None] - p[None, :]) ** alpha)
            L, j = cholesky_with_jitter(c)
            self.factors.append(L)
            self.jitter.append(j)
        self.width = int(np.prod(shape))

    def transform(self, z):
        x = z.reshape((z.shape[0],) + self.shape)
        for axis, L in enumerate(self.factors):
            x = np.moveaxis(np.tensordot(L, x, axes=([1], [axis + 1])), 0, axis + 1)
        return x


def sample_separable_field(alpha0, d0, alphas, ds, u, grids, batch, seeds, stream=(0,), first_rep=0, threads=None,
                           cap=CHOLESKY_CAP):
    """Exact draws of the field with correlation ``exp(-u^-2 d0 |t|^alpha0 - sum_i ds[i] |v_i|^alphas[i])``.

    ``grids`` is ``(time_grid, *space_grids)``.
    """
    seeds = _seeds(seeds)
    alphas = tuple(alphas)
    ds = tuple(ds)
    if len(alphas) != len(ds) or len(grids) != len(alphas) + 1:
        raise ConfigError("need one grid per axis and matching alphas/ds")
    axes = [(alpha0, d0 * u**-2.0, grids[0])] + [(a, d, g) for a, d, g in zip(alphas, ds, grids[1:])]
    plan = FieldPlan(axes, cap)
    parts = map_blocks(lambda b, lo, hi: draw_block(plan, seeds, stream, b, lo, hi), first_rep, batch, seeds, threads)
    return FieldBatch(np.concatenate(parts, axis=0), tuple(grids), seeds.master, (first_rep, first_rep + batch),
                      tuple(plan.jitter))
