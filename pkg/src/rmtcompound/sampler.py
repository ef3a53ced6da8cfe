"""Synthetic data realizing the compound model.

Recipes
-------
* Gaussian data matrix: ``X = C^{1/2} Z D^{1/2}``.
* Algebraic data matrix: ``X = sqrt(aL) C^{1/2} Z W^{-1/2} D^{1/2}`` with
  ``W ~ Wishart_N(2L - K, I)``. Conditioned on a fixed direction g,
  ``g^T W^{-1} g / |g|^2`` is an inverse chi-square with
  ``2L - K - N + 1 = 2 beta`` degrees of freedom, so ``X X^T / N`` carries the
  scale law ``(aL/N) chi2_N / chi2_{2 beta}`` with unit mean. The df is pinned
  by this requirement and checked against the analytic moments in the tests.
* Epoch algebraic amplitudes: ``r = C^{1/2} z sqrt(b / (2 gamma))`` with
  ``gamma ~ Gamma(l - K/2)``; integrating gamma out gives the algebraic
  epoch density.
* Compound draws: ``r = X g / sqrt(N)`` times the epoch factor, which has
  covariance ``X X^T / N`` given X and needs no matrix inverse, so N < K is
  allowed.

Randomness comes from Philox streams keyed by (seed, spawn path). Large
draws are cut into fixed-size chunks, chunk i always using substream i, so
results do not depend on the number of worker threads.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .correlation import SpectralDecomp
from .errors import ParamError, PlanError, ShapeError
from .timeseries_io import ReturnMatrix

CHUNK = 200_000


class SeededRng:
    """Philox generator identified by a 64-bit seed and a spawn path."""

    algorithm = "philox"

    def __init__(self, seed, path=()):
        if seed is None:
            raise ParamError("an explicit seed is required")
        self.seed = int(seed) & (2 ** 64 - 1)
        self.path = tuple(int(i) for i in path)
        seq = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.Philox(seq))
        self.counter = 0
        self._children = 0

    @property
    def generator(self):
        self.counter += 1
        return self._gen

    def child(self, index):
        """Independent substream ``index`` below this one (does not advance it)."""
        return SeededRng(self.seed, self.path + (int(index),))

    def spawn(self, n):
        out = [self.child(self._children + i) for i in range(n)]
        self._children += n
        self.counter += 1
        return out

    def describe(self):
        return {"algorithm": self.algorithm, "seed": self.seed, "path": list(self.path)}


def _as_rng(rng):
    return rng if isinstance(rng, SeededRng) else SeededRng(rng)


def _integer_n(N):
    if int(N) != N or N < 1:
        raise ParamError(f"sampling needs an integer N >= 1, got {N}")
    return int(N)


def _d_sqrt(d_eigs, N):
    if d_eigs is None:
        return np.ones(N)
    d = np.asarray(d_eigs, dtype=float)
    if d.shape != (N,) or np.any(~(d > 0)):
        raise ParamError("d_eigs must hold N positive values")
    return np.sqrt(d)


def _wishart_bartlett(gen, df, N, size):
    """Lower Cholesky factors of Wishart_N(df, I) draws, shape (size, N, N)."""
    L = np.zeros((size, N, N))
    idx = np.arange(N)
    L[:, idx, idx] = np.sqrt(gen.chisquare(df - idx, size=(size, N)))
    rows, cols = np.tril_indices(N, -1)
    if rows.size:
        L[:, rows, cols] = gen.standard_normal((size, rows.size))
    return L


def draw_gaussian_data(sd_C, d_eigs, N, rng):
    """One K x N Gaussian data matrix with row and column correlations C, D."""
    N = _integer_n(N)
    gen = _as_rng(rng).generator
    Z = gen.standard_normal((sd_C.K, N))
    return sd_C.sqrt() @ Z * _d_sqrt(d_eigs, N)


def draw_algebraic_data(sd_C, d_eigs, N, L, rng):
    """One K x N algebraic (matrix-t) data matrix, normalized so <X X^T>/N = C."""
    N = _integer_n(N)
    K = sd_C.K
    aL = 2 * L - K - N - 1
    if not (aL > 0):
        raise ParamError(f"2L - K - N - 1 > 0 violated (L={L})")
    df = 2 * L - K
    if df < N:
        raise ParamError(f"Wishart degrees of freedom 2L - K = {df} must be >= N = {N}")
    gen = _as_rng(rng).generator
    Z = gen.standard_normal((K, N))
    Lw = _wishart_bartlett(gen, df, N, 1)[0]
    w, V = np.linalg.eigh(Lw @ Lw.T)
    w_inv_sqrt = (V / np.sqrt(w)) @ V.T
    return math.sqrt(aL) * sd_C.sqrt() @ Z @ w_inv_sqrt * _d_sqrt(d_eigs, N)


def _epoch_factor(gen, p, n):
    if p.Y == "G":
        return np.ones(n)
    return np.sqrt(p.epoch_scale / (2.0 * gen.gamma(p.alpha, size=n)))


def draw_epoch_amplitudes(sd_Cep, p, n, rng):
    """n amplitude vectors (rows) from the epoch family with matrix C_ep."""
    if n < 1:
        raise ParamError("n >= 1 required")
    if sd_Cep.K != p.K:
        raise ShapeError("K of params and matrix differ")
    gen = _as_rng(rng).generator
    z = gen.standard_normal((n, p.K))
    return (z @ sd_Cep.sqrt()) * _epoch_factor(gen, p, n)[:, None]


def _compound_chunk(p, root, d_half, N, n, rng):
    gen = rng.generator
    K = p.K
    g = gen.standard_normal((n, N)) * d_half
    if p.Yp == "A":
        df = 2 * p.L - K
        if df < N:
            raise ParamError(f"Wishart degrees of freedom 2L - K = {df} must be >= N = {N}")
        Lw = _wishart_bartlett(gen, df, N, n)
        # |L^{-1} g|^2 = g^T W^{-1} g; the Gaussian Z only sees the length of its argument
        g = np.linalg.solve(Lw, g[:, :, None])[:, :, 0] * math.sqrt(p.ensemble_scale)
    Z = gen.standard_normal((n, K, N))
    r = np.einsum("nkj,nj->nk", Z, g) / math.sqrt(N)
    r *= _epoch_factor(gen, p, n)[:, None]
    return r @ root


def draw_compound(p, sd_C, n, rng, workers=1):
    """n long-interval amplitude vectors: ensemble matrix first, then one epoch draw."""
    if n < 1:
        raise ParamError("n >= 1 required")
    if sd_C.K != p.K:
        raise ShapeError("K of params and matrix differ")
    N = _integer_n(p.N)
    d_half = _d_sqrt(p.d_eigs, N)
    root = sd_C.sqrt()
    rng = _as_rng(rng)
    sizes = [CHUNK] * (n // CHUNK) + ([n % CHUNK] if n % CHUNK else [])
    streams = rng.spawn(len(sizes))

    def job(i):
        return _compound_chunk(p, root, d_half, N, sizes[i], streams[i])

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    else:
        parts = [job(i) for i in range(len(sizes))]
    return np.concatenate(parts, axis=0)


def draw_ensemble_scales(p, size, rng):
    """Independent draws of the ensemble scale ``u^T (X X^T / N) u / (u^T C u)``.

    Mean one; chi2_N / N for Yp = G, (aL/N) chi2_N / chi2_{2 beta} for Yp = A.
    """
    gen = _as_rng(rng).generator
    num = gen.chisquare(p.N, size=size)
    if p.Yp == "G":
        return num / p.N
    return p.ensemble_scale / p.N * num / gen.chisquare(2.0 * p.beta, size=size)


@dataclass(frozen=True)
class Regime:
    corr: np.ndarray
    start: int
    stop: int


@dataclass(frozen=True)
class RegimePlan:
    """Population correlation matrices with the epoch spans they govern."""

    regimes: tuple

    @classmethod
    def single(cls, corr, n_epochs):
        return cls((Regime(np.asarray(corr, dtype=float), 0, n_epochs),))

    @classmethod
    def alternating(cls, corrs, n_epochs, span):
        regs = []
        for i, start in enumerate(range(0, n_epochs, span)):
            regs.append(Regime(np.asarray(corrs[i % len(corrs)], dtype=float),
                               start, min(start + span, n_epochs)))
        return cls(tuple(regs))

    def check(self, n_epochs, K):
        spans = sorted((r.start, r.stop) for r in self.regimes)
        pos = 0
        for start, stop in spans:
            if start != pos or stop <= start:
                raise PlanError(f"regime plan has a gap or overlap at epoch {pos}")
            pos = stop
        if pos != n_epochs:
            raise PlanError(f"regime plan covers {pos} epochs, expected {n_epochs}")
        for r in self.regimes:
            if r.corr.shape != (K, K):
                raise PlanError("regime matrix has the wrong size")

    def matrix_for(self, epoch):
        for r in self.regimes:
            if r.start <= epoch < r.stop:
                return r.corr
        raise PlanError(f"no regime covers epoch {epoch}")


def synth_market(n_epochs, epoch_len, K, plan, rng, p=None, labels=None):
    """Return series built epoch by epoch.

    Without ``p`` each epoch is Gaussian with its regime's population
    matrix. With ``p`` each epoch matrix is ``U diag(Lambda * s) U^T`` in
    the eigenbasis of the regime matrix, the K scales s drawn from the
    ensemble scale law of ``p.Yp``, and the returns are drawn from the
    epoch family ``p.Y``. Every rotated component then follows the
    long-interval univariate law exactly.
    """
    if n_epochs < 1 or epoch_len < 2:
        raise ParamError("need n_epochs >= 1 and epoch_len >= 2")
    plan.check(n_epochs, K)
    rng = _as_rng(rng)
    streams = rng.spawn(n_epochs)
    cache = {}
    out = np.empty((K, n_epochs * epoch_len))
    for i in range(n_epochs):
        corr = plan.matrix_for(i)
        key = id(corr)
        if key not in cache:
            cache[key] = SpectralDecomp.from_matrix(corr)
        sd = cache[key]
        gen = streams[i].generator
        if p is None:
            amp = sd.sqrt() @ gen.standard_normal((K, epoch_len))
        else:
            s = draw_ensemble_scales(p, K, streams[i])
            z = gen.standard_normal((K, epoch_len)) * _epoch_factor(gen, p, epoch_len)
            amp = (sd.eigenvectors * np.sqrt(sd.eigenvalues * s)) @ z
        out[:, i * epoch_len:(i + 1) * epoch_len] = amp
    labels = labels or [f"x{k + 1}" for k in range(K)]
    return ReturnMatrix(out, labels)


def block_correlation(K, blocks, rho_in, rho_out=0.0):
    """Correlation matrix with equicorrelated diagonal blocks."""
    C = np.full((K, K), float(rho_out))
    start = 0
    for size in blocks:
        C[start:start + size, start:start + size] = rho_in
        start += size
    if start != K:
        raise ParamError("block sizes must sum to K")
    np.fill_diagonal(C, 1.0)
    if np.linalg.eigvalsh(C)[0] <= 0:
        raise ParamError("block correlation matrix is not positive definite")
    return C
