"""Multiplier-bootstrap approximation of the spurious-fit reference law.

For a fixed design ``X`` and standard normal multipliers ``e``,

    R_n^2(s, p) = ||e||^2 - min_{||beta||_0 <= s} ||e - X beta||^2,

the best ``s``-subset projection of ``e``.  The minimization is done with the
gaussian LAMM solver on a Gram matrix shared across draws.  Draw ``b`` uses
its own generator seeded from ``(seed, b)``, so results do not depend on how
draws are spread over workers.
"""

from __future__ import annotations

import hashlib
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .covariance import CovarianceSpec, make_covariance
from .model import InputError
from .solver import LammConfig, _GramProblem, _lamm

logger = logging.getLogger(__name__)

MAX_DROP_FRACTION = 0.01


class BootstrapError(RuntimeError):
    """Too many bootstrap draws failed."""


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for the draw indexed by ``keys`` under ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def design_hash(X) -> str:
    X = np.ascontiguousarray(X, dtype=float)
    h = hashlib.sha256()
    h.update(np.asarray(X.shape, dtype=np.int64).tobytes())
    h.update(X.tobytes())
    return h.hexdigest()[:16]


@dataclass
class BootstrapDistribution:
    samples: np.ndarray  # sorted draws of R_n^2
    s: int
    p: int
    n: int
    B: int
    seed: int
    solver_config: LammConfig = field(default_factory=LammConfig)
    drops: int = 0

    def quantile(self, alpha: float) -> float:
        return quantile(self, alpha)

    def quantile_sq(self, alpha: float) -> float:
        return quantile(self, alpha) ** 2

    def to_dict(self, include_samples=True):
        out = {
            "s": self.s,
            "p": self.p,
            "n": self.n,
            "B": self.B,
            "seed": self.seed,
            "drops": self.drops,
            "solver_config": self.solver_config.to_dict(),
        }
        if include_samples:
            out["samples"] = self.samples.tolist()
        return out


class _Sampler:
    """Draws ``R_n^2`` for one design and sparsity level."""

    def __init__(self, X, s, config: LammConfig):
        X = np.ascontiguousarray(X, dtype=float)
        n, p = X.shape
        if not 1 <= s <= min(n, p):
            raise InputError(f"s={s} must satisfy 1 <= s <= min(n, p) = {min(n, p)}")
        self.X, self.s, self.config = X, s, config
        self.G = X.T @ X

    def draw(self, rng) -> float:
        e = rng.standard_normal(self.X.shape[0])
        problem = _GramProblem(self.G, self.X.T @ e, e @ e)
        beta = _lamm(problem, self.s, self.config, rng)[0]
        idx = np.flatnonzero(beta)
        r = e - self.X[:, idx] @ beta[idx]
        return max(float(e @ e - r @ r), 0.0)

    def draw_indexed(self, seed, b):
        """Draw ``b``, redrawing from a fresh substream if the value is unusable."""
        for attempt in range(100):
            try:
                value = self.draw(substream(seed, b, attempt))
            except (np.linalg.LinAlgError, FloatingPointError):
                value = math.nan
            if math.isfinite(value):
                return value, attempt
        raise BootstrapError(f"bootstrap draw {b} failed 100 times")


def multiplier_bootstrap_sample(X, s: int, solver_config: LammConfig | None = None,
                                rng: np.random.Generator | None = None) -> float:
    """One draw of ``R_n^2(s, p)`` with multipliers taken from ``rng``."""
    rng = rng if rng is not None else np.random.default_rng()
    return _Sampler(X, s, solver_config or LammConfig()).draw(rng)


def _draw_block(args):
    X, s, config, seed, indices = args
    sampler = _Sampler(X, s, config)
    return [sampler.draw_indexed(seed, b) for b in indices]


def bootstrap_distribution(X, s: int, B: int, solver_config: LammConfig | None = None,
                           seed: int = 0, workers: int = 1) -> BootstrapDistribution:
    """``B`` seeded draws of ``R_n^2(s, p)``, sorted ascending."""
    if B < 1:
        raise InputError("B must be at least 1")
    config = solver_config or LammConfig()
    X = np.ascontiguousarray(X, dtype=float)
    n, p = X.shape
    workers = max(1, int(workers))
    if workers == 1 or B < 2 * workers:
        results = _draw_block((X, s, config, seed, range(B)))
    else:
        blocks = [range(B)[w::workers] for w in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_draw_block, [(X, s, config, seed, blk) for blk in blocks]))
        results = [None] * B
        for blk, part in zip(blocks, parts):
            for b, r in zip(blk, part):
                results[b] = r
    values = np.array([v for v, _ in results])
    drops = int(sum(a for _, a in results))
    if drops > MAX_DROP_FRACTION * B:
        raise BootstrapError(f"{drops} of {B} bootstrap draws failed (> 1%)")
    if drops:
        logger.warning("%d bootstrap draws were redrawn", drops)
    return BootstrapDistribution(np.sort(values), s, p, n, B, seed, config, drops)


def quantile(dist: BootstrapDistribution, alpha: float) -> float:
    """Upper-``alpha`` quantile on the ``R_n`` scale.

    Uses the order statistic of rank ``ceil((1 - alpha) B)`` of the ``R_n^2``
    draws and returns its square root.
    """
    if not 0 < alpha < 1:
        raise InputError("alpha must lie in (0, 1)")
    B = dist.samples.shape[0]
    rank = math.ceil((1.0 - alpha) * B - 1e-9)
    if not 1 <= rank <= B:
        raise InputError(f"quantile rank {rank} outside 1..{B}")
    if B < 100 and alpha >= 0.01:
        logger.warning("quantile from only %d bootstrap draws", B)
    return float(np.sqrt(dist.samples[rank - 1]))


# --------------------------------------------------------------------------
# simulation oracles for R_0
# --------------------------------------------------------------------------


def oracle_r0_isotropic(p: int, s: int, rng: np.random.Generator, size: int | None = None):
    """``R_0^2`` for identity covariance: the sum of the ``s`` largest of ``p`` chi2_1 draws."""
    if not 1 <= s <= p:
        raise InputError("need 1 <= s <= p")
    m = 1 if size is None else int(size)
    g2 = rng.standard_normal((m, p)) ** 2
    top = -np.partition(-g2, s - 1, axis=1)[:, :s]
    out = top.sum(axis=1)
    return float(out[0]) if size is None else out


def _as_matrix(sigma):
    if isinstance(sigma, CovarianceSpec):
        return make_covariance(sigma)
    return np.asarray(sigma, dtype=float)


def _subset_whiteners(S, s):
    subsets = np.array(list(itertools.combinations(range(S.shape[0]), s)), dtype=np.intp)
    blocks = S[subsets[:, :, None], subsets[:, None, :]]
    try:
        L = np.linalg.cholesky(blocks)
    except np.linalg.LinAlgError:
        raise InputError("covariance has a singular principal submatrix") from None
    return subsets, np.linalg.inv(L)


def oracle_r0_general(sigma, s: int, rng: np.random.Generator, size: int | None = None,
                      max_p: int = 15):
    """``R_0^2 = max_S G_S' Sigma_SS^{-1} G_S`` for ``G ~ N(0, Sigma)``, by enumeration."""
    S = _as_matrix(sigma)
    p = S.shape[0]
    if p > max_p:
        raise InputError(f"exhaustive enumeration limited to p <= {max_p}")
    if not 1 <= s <= p:
        raise InputError("need 1 <= s <= p")
    try:
        chol = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise InputError("covariance is singular") from None
    subsets, W = _subset_whiteners(S, s)
    m = 1 if size is None else int(size)
    G = rng.standard_normal((m, p)) @ chol.T
    out = np.empty(m)
    for start in range(0, m, 256):
        Gb = G[start:start + 256][:, subsets]  # (b, nsub, s)
        z = np.einsum("kij,bkj->bki", W, Gb)
        out[start:start + 256] = np.max(np.einsum("bki,bki->bk", z, z), axis=1)
    return float(out[0]) if size is None else out


def sparse_condition_number(sigma, s: int, max_p: int = 15) -> float:
    """``sqrt(lambda_max(s) / lambda_min(s))`` over ``s x s`` principal submatrices."""
    S = _as_matrix(sigma)
    p = S.shape[0]
    if p > max_p:
        raise InputError(f"exhaustive enumeration limited to p <= {max_p}")
    if not 1 <= s <= p:
        raise InputError("need 1 <= s <= p")
    subsets = np.array(list(itertools.combinations(range(p), s)), dtype=np.intp)
    eig = np.linalg.eigvalsh(S[subsets[:, :, None], subsets[:, None, :]])
    lo, hi = float(eig[:, 0].min()), float(eig[:, -1].max())
    if lo <= 0:
        raise InputError("s-sparse minimum eigenvalue is not positive")
    return math.sqrt(hi / lo)


def validity_diagnostic(s: int, p: int, n: int) -> float:
    """Plug-in ``s log(p n) / n^{1/5}``; small values favour the bootstrap approximation."""
    return s * math.log(p * n) / n ** 0.2
