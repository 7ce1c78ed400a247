"""Desk-scale simulation studies.

* :func:`run_null_experiment` compares null draws of ``2 LR_n(s, p)`` with
  draws of the reference law ``scale * R_0^2(s, p)``.
* :func:`run_power_experiment` fits a cross-validated lasso (or the best
  subset of size ``s``) on simulated data and records how often the fit beats
  the bootstrap GOSF quantile; optionally also runs path selection.

Replicate ``i`` draws everything from substreams of ``(seed, i)``, so results
are a pure function of the config and do not depend on ``workers``.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .bootstrap import bootstrap_distribution, oracle_r0_general, oracle_r0_isotropic, substream
from .covariance import CovarianceSpec, make_covariance
from .guard import BootstrapCache, path_select, spurious_test
from .lasso_path import cv_lasso
from .model import Dataset, InputError, LossModel
from .solver import LammConfig, SolverError
from .statistic import gosf_statistic, scale_factor

logger = logging.getLogger(__name__)

PRESETS = {"paper52": (3.0, -1.0, 3.0, -1.0, 3.0)}
STATISTICS = ("cv_lasso", "best_subset")
# stream tags for substream(seed, tag, replicate)
_DATA, _REF, _CV, _BOOT = 1, 2, 3, 4
# exact reference-law scale for the null response generators below
_NULL_SCALE = {"logistic": 1.0, "poisson": 1.0, "gaussian": 1.0,
               "lad": math.sqrt(2.0 * math.pi) / 2.0}


@dataclass
class SimConfig:
    n: int
    p: int
    s: int = 1
    family: str = "logistic"
    covariance: CovarianceSpec | None = None
    beta_star: object = None  # None (null), preset name, or a vector
    n_sims: int = 100
    B: int = 1000
    alpha: float = 0.1
    seed: int = 0
    standardize: bool = True
    folds: int = 5
    statistic: str = "cv_lasso"
    with_path_select: bool = False
    n_ref: int | None = None
    workers: int = 1

    def __post_init__(self):
        if self.covariance is None:
            self.covariance = CovarianceSpec.identity(self.p)
        if self.covariance.p != self.p:
            raise InputError("covariance dimension does not match p")
        if self.statistic not in STATISTICS:
            raise InputError(f"statistic must be one of {STATISTICS}")
        if self.n_sims < 1:
            raise InputError("n_sims must be positive")
        LossModel(self.family)

    def beta_vector(self) -> np.ndarray:
        beta = np.zeros(self.p)
        if self.beta_star is None:
            return beta
        if isinstance(self.beta_star, str):
            if self.beta_star not in PRESETS:
                raise InputError(f"unknown beta preset {self.beta_star!r}")
            head = np.array(PRESETS[self.beta_star])
        else:
            head = np.asarray(self.beta_star, dtype=float).reshape(-1)
        if head.size > self.p:
            raise InputError("beta_star longer than p")
        beta[:head.size] = head
        return beta

    def to_dict(self):
        b = self.beta_star
        return {
            "n": self.n,
            "p": self.p,
            "s": self.s,
            "family": self.family,
            "covariance": self.covariance.to_dict(),
            "beta_star": b if b is None or isinstance(b, str) else np.asarray(b).tolist(),
            "n_sims": self.n_sims,
            "B": self.B,
            "alpha": self.alpha,
            "seed": self.seed,
            "standardize": self.standardize,
            "folds": self.folds,
            "statistic": self.statistic,
            "with_path_select": self.with_path_select,
            "n_ref": self.n_ref,
        }


@dataclass
class SimResult:
    glr_samples: np.ndarray
    gar_samples: np.ndarray
    ks: float | None = None
    power: float | None = None
    s_cv_median: float | None = None
    s_fit_median: float | None = None
    s_cv_rsd: float | None = None
    s_fit_rsd: float | None = None
    s_cv: list = field(default_factory=list)
    s_fit: list = field(default_factory=list)
    failures: int = 0
    flagged: bool = False
    reference: str = ""
    runtime: float = 0.0

    def to_dict(self, include_runtime=False):
        out = {
            "glr_samples": np.asarray(self.glr_samples).tolist(),
            "gar_samples": np.asarray(self.gar_samples).tolist(),
            "ks": self.ks,
            "power": self.power,
            "s_cv_median": self.s_cv_median,
            "s_fit_median": self.s_fit_median,
            "s_cv_rsd": self.s_cv_rsd,
            "s_fit_rsd": self.s_fit_rsd,
            "s_cv": list(self.s_cv),
            "s_fit": list(self.s_fit),
            "failures": self.failures,
            "flagged": self.flagged,
            "reference": self.reference,
        }
        if include_runtime:
            out["runtime"] = self.runtime
        return out


def gen_design(n: int, sigma, seed=0, standardize: bool = False) -> np.ndarray:
    """``n`` i.i.d. rows from ``N(0, Sigma)`` via a Cholesky factor."""
    S = make_covariance(sigma) if isinstance(sigma, CovarianceSpec) else np.asarray(sigma, float)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise InputError("covariance factorization failed") from None
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    X = rng.standard_normal((n, S.shape[0])) @ L.T
    if standardize:
        X = X / np.sqrt(np.mean(X * X, axis=0))
    return X


def gen_response(family: str, eta, rng) -> np.ndarray:
    """Response from the canonical model with linear predictor ``eta``.

    At ``eta = 0`` this gives Bernoulli(1/2), Poisson(1), N(0, 1) and, for
    lad, N(0, 1) errors.
    """
    eta = np.asarray(eta, dtype=float)
    if family == "logistic":
        return (rng.random(eta.shape) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
    if family == "poisson":
        return rng.poisson(np.exp(np.clip(eta, -700, 30))).astype(float)
    return eta + rng.standard_normal(eta.shape)


def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    a, b = np.asarray(a, float).reshape(-1), np.asarray(b, float).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise InputError("ks_distance needs non-empty samples")
    return float(stats.ks_2samp(a, b).statistic)


def rsd(x) -> float:
    """Robust standard deviation: interquartile range / 1.34."""
    q75, q25 = np.percentile(np.asarray(x, dtype=float), [75, 25])
    return float((q75 - q25) / 1.34)


def histogram_data(a, b, bins: int = 40) -> dict:
    """Density histograms of two samples on shared bin edges."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    edges = np.histogram_bin_edges(np.concatenate([a, b]), bins=bins)
    ha, _ = np.histogram(a, edges, density=True)
    hb, _ = np.histogram(b, edges, density=True)
    return {"edges": edges.tolist(), "glr_density": ha.tolist(), "gar_density": hb.tolist()}


def _map(fn, items, workers):
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def _replicate_data(config: SimConfig, i: int, beta):
    rng = substream(config.seed, _DATA, i)
    X = gen_design(config.n, config.covariance, rng, config.standardize)
    y = gen_response(config.family, X @ beta, rng)
    return Dataset(X, y, standardized=config.standardize)


def _null_replicate(args):
    config, i = args
    data = _replicate_data(config, i, np.zeros(config.p))
    try:
        st = gosf_statistic(LossModel(config.family), data, config.s)
    except (SolverError, np.linalg.LinAlgError, FloatingPointError):
        return math.nan, False
    return st.two_lr, st.converged


def reference_samples(config: SimConfig, size: int | None = None):
    """Draws of ``R_0^2(s, p)`` (unscaled) and the method used."""
    m = size or config.n_ref or config.n_sims
    rng = substream(config.seed, _REF, 0)
    cov = config.covariance
    if cov.kind == "identity":
        return oracle_r0_isotropic(config.p, config.s, rng, size=m), "oracle_isotropic"
    if config.p <= 15:
        return oracle_r0_general(cov, config.s, rng, size=m), "oracle_enumeration"
    X = gen_design(config.n, cov, rng, config.standardize)
    dist = bootstrap_distribution(X, config.s, m, seed=config.seed)
    return dist.samples, "multiplier_bootstrap"


def run_null_experiment(config: SimConfig) -> SimResult:
    """Null ``2 LR`` draws against reference-law draws, with their KS distance."""
    t0 = time.perf_counter()
    out = _map(_null_replicate, [(config, i) for i in range(config.n_sims)], config.workers)
    glr = np.array([v for v, _ in out])
    failures = int(np.sum(~np.isfinite(glr)) + sum(not ok for _, ok in out))
    glr = glr[np.isfinite(glr)]
    ref, method = reference_samples(config)
    gar = _NULL_SCALE[config.family] * ref
    flagged = failures > 0.01 * config.n_sims
    if flagged:
        logger.warning("%d of %d null replicates failed", failures, config.n_sims)
    return SimResult(glr, gar, ks=ks_distance(glr, gar), failures=failures, flagged=flagged,
                     reference=method, runtime=time.perf_counter() - t0)


def _power_replicate(args):
    config, i = args
    model = LossModel(config.family)
    data = _replicate_data(config, i, config.beta_vector())
    boot_seed = int(substream(config.seed, _BOOT, i).integers(2**31))
    try:
        if config.statistic == "best_subset":
            st = gosf_statistic(model, data, config.s)
            s_hat, two_lr, scale, points = config.s, st.two_lr, st.scale, None
        else:
            cv_seed = int(substream(config.seed, _CV, i).integers(2**31))
            points, _, sel = cv_lasso(model, data, config.folds, seed=cv_seed)
            s_hat, two_lr = sel.support_size, sel.two_lr_hat
            scale = scale_factor(model, data)
        cache = BootstrapCache()
        if s_hat == 0:
            beats = False
        else:
            dist = cache.get(data.X, min(s_hat, config.n, config.p), config.B, boot_seed,
                             LammConfig())
            s_use = dist.s
            beats = not spurious_test(two_lr, s_use, dist, config.alpha, scale).spurious
        s_fit = None
        if config.with_path_select and points is not None:
            s_fit = path_select(points, data.X, config.alpha, config.B, seed=boot_seed,
                                scale=scale, cache=cache, full_report=False)[0]
    except (SolverError, np.linalg.LinAlgError, FloatingPointError) as exc:
        logger.warning("replicate %d failed: %s", i, exc)
        return None
    return beats, s_hat, s_fit


def run_power_experiment(config: SimConfig) -> SimResult:
    """Fraction of replicates whose fit beats ``q_alpha`` (power, or size under the null)."""
    t0 = time.perf_counter()
    out = _map(_power_replicate, [(config, i) for i in range(config.n_sims)], config.workers)
    ok = [r for r in out if r is not None]
    failures = len(out) - len(ok)
    if not ok:
        raise SolverError("every replicate failed")
    beats = np.array([r[0] for r in ok], dtype=float)
    s_cv = [int(r[1]) for r in ok]
    s_fit = [int(r[2]) for r in ok if r[2] is not None]
    res = SimResult(np.array([]), np.array([]), power=float(beats.mean()),
                    failures=failures, flagged=failures > 0.01 * config.n_sims,
                    reference=config.statistic, s_cv=s_cv, s_fit=s_fit)
    if config.statistic == "cv_lasso":
        res.s_cv_median, res.s_cv_rsd = float(np.median(s_cv)), rsd(s_cv)
    if s_fit:
        res.s_fit_median, res.s_fit_rsd = float(np.median(s_fit)), rsd(s_fit)
    res.runtime = time.perf_counter() - t0
    return res
