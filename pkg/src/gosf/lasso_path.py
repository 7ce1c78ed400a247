"""l1-penalized solution paths and K-fold cross-validation.

The penalized objective is ``(1/n) L_n(beta) + lam * ||beta||_1`` so ``lam``
is on the per-observation scale.  GLM families are solved by accelerated
proximal gradient (soft thresholding) with warm starts along a descending
grid; ``lad`` is solved exactly as a linear program.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .model import Dataset, InputError, LossModel, baseline_value, loss_from_eta

logger = logging.getLogger(__name__)

N_GRID = 100
MIN_RATIO = 0.01
KKT_TOL = 1e-7
MAX_ITER = 20000
LP_ZERO = 1e-10


@dataclass
class PathPoint:
    lam: float
    beta: np.ndarray = field(repr=False)
    support_size: int
    two_lr_hat: float
    cv_error: float | None = None
    converged: bool = True
    iterations: int = 0

    @property
    def support(self):
        return np.flatnonzero(self.beta)

    def to_dict(self):
        return {
            "lambda": self.lam,
            "support_size": self.support_size,
            "two_lr_hat": self.two_lr_hat,
            "cv_error": self.cv_error,
            "converged": self.converged,
            "support": self.support.tolist(),
        }


@dataclass
class CVResult:
    grid: np.ndarray
    mean_error: np.ndarray
    fold_errors: np.ndarray  # (folds, len(grid))
    folds: int
    seed: int

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.mean_error))

    @property
    def lambda_cv(self) -> float:
        return float(self.grid[self.best_index])


def _score_at_zero(model: LossModel, data: Dataset):
    if model.family == "lad":
        return -(data.X.T @ np.sign(data.y))
    return data.X.T @ (model.b_prime(np.zeros(data.n)) - data.y)


def lambda_max(model: LossModel, data: Dataset) -> float:
    """Smallest ``lam`` with the all-zero solution: ``||grad L_n(0)||_inf / n``."""
    lm = float(np.max(np.abs(_score_at_zero(model, data)))) / data.n
    if lm == 0.0:
        warnings.warn("gradient at the origin vanishes; the path is degenerate",
                      RuntimeWarning, stacklevel=2)
    return lm


def auto_grid(model: LossModel, data: Dataset, n_grid=N_GRID, min_ratio=MIN_RATIO):
    lm = lambda_max(model, data)
    if lm == 0.0:
        return np.array([1.0])
    return np.geomspace(lm, min_ratio * lm, n_grid)


def soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def kkt_residual(grad_over_n, beta, lam) -> float:
    """Largest violation of the lasso optimality conditions."""
    g = np.asarray(grad_over_n)
    active = beta != 0
    r_act = np.abs(g[active] + lam * np.sign(beta[active]))
    r_zero = np.maximum(np.abs(g[~active]) - lam, 0.0)
    return float(max(r_act.max(initial=0.0), r_zero.max(initial=0.0)))


class _GlmLasso:
    """Accelerated proximal gradient for one GLM dataset, reused along a grid."""

    def __init__(self, model: LossModel, X, y):
        self.model, self.X, self.y = model, X, y
        self.n = X.shape[0]
        curv = 1.0 if model.family == "gaussian" else 0.25
        self.L0 = curv * np.linalg.norm(X, 2) ** 2 / self.n
        self.global_lipschitz = model.family != "poisson"

    def smooth(self, beta):
        eta = self.X @ beta
        return loss_from_eta(self.model, self.y, eta) / self.n, eta

    def grad(self, eta):
        return self.X.T @ (self.model.b_prime(eta) - self.y) / self.n

    def solve(self, lam, beta0, max_iter=MAX_ITER, tol=KKT_TOL):
        L = self.L0 if self.global_lipschitz else max(self.L0 * 1e-3, 1e-8)
        beta = beta0.copy()
        f_beta, eta = self.smooth(beta)
        z, t = beta.copy(), 1.0
        obj = f_beta + lam * np.abs(beta).sum()
        restarted = False
        for it in range(1, max_iter + 1):
            f_z, eta_z = self.smooth(z)
            g_z = self.grad(eta_z)
            while True:
                cand = soft_threshold(z - g_z / L, lam / L)
                f_c, eta_c = self.smooth(cand)
                d = cand - z
                if f_c <= f_z + g_z @ d + 0.5 * L * (d @ d) + 1e-15 * (1 + abs(f_z)):
                    break
                L *= 2.0
            new_obj = f_c + lam * np.abs(cand).sum()
            if new_obj > obj:
                if restarted:
                    break  # no descent even from the incumbent: numerically stalled
                # restart momentum from the incumbent
                z, t, restarted = beta.copy(), 1.0, True
                continue
            restarted = False
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            z = cand + ((t - 1.0) / t_next) * (cand - beta)
            beta, eta, obj, t = cand, eta_c, new_obj, t_next
            if kkt_residual(self.grad(eta), beta, lam) <= tol:
                return beta, True, it
        return beta, kkt_residual(self.grad(eta), beta, lam) <= 1e-6, it


def _lad_lasso(X, y, lam):
    """Exact ``(1/n) sum |y - X beta| + lam ||beta||_1`` via a linear program."""
    n, p = X.shape
    c = np.concatenate([np.full(2 * p, lam), np.full(2 * n, 1.0 / n)])
    A = np.hstack([X, -X, np.eye(n), -np.eye(n)])
    res = linprog(c, A_eq=A, b_eq=y, bounds=(0, None), method="highs")
    if res.status != 0:
        return np.zeros(p), False
    beta = res.x[:p] - res.x[p:2 * p]
    beta[np.abs(beta) <= LP_ZERO * (1 + np.abs(beta).max())] = 0.0
    return beta, True


def _check_grid(grid):
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if grid.size == 0 or (grid <= 0).any() or (np.diff(grid) > 0).any():
        raise InputError("lambda grid must be non-empty, positive and descending")
    return grid


def _path_betas(model, X, y, grid):
    p = X.shape[1]
    out = []
    if model.family == "lad":
        for lam in grid:
            beta, ok = _lad_lasso(X, y, lam)
            out.append((beta, ok, 1))
        return out
    solver = _GlmLasso(model, X, y)
    beta = np.zeros(p)
    for lam in grid:
        beta, ok, it = solver.solve(lam, beta)
        out.append((beta.copy(), ok, it))
    return out


def solve_path(model: LossModel, data: Dataset, grid=None) -> list[PathPoint]:
    """Warm-started lasso path over a descending grid (``None`` for the auto grid)."""
    grid = auto_grid(model, data) if grid is None else _check_grid(grid)
    base = baseline_value(model, data)
    points = []
    for lam, (beta, ok, it) in zip(grid, _path_betas(model, data.X, data.y, grid)):
        if not ok:
            logger.warning("lasso did not converge at lambda=%.4g", lam)
        two_lr = max(2.0 * (base - loss_from_eta(model, data.y, data.X @ beta)), 0.0)
        points.append(PathPoint(float(lam), beta, int(np.count_nonzero(beta)), two_lr,
                                converged=ok, iterations=it))
    return points


def heldout_error(model: LossModel, y, eta) -> float:
    """Mean held-out deviance (GLM) or absolute error (lad)."""
    if model.family == "gaussian":
        return float(np.mean((y - eta) ** 2))
    if model.family == "lad":
        return float(np.mean(np.abs(y - eta)))
    mu = model.b_prime(eta)
    with np.errstate(divide="ignore", invalid="ignore"):
        if model.family == "logistic":
            mu = np.clip(mu, 1e-15, 1 - 1e-15)
            dev = -2.0 * (y * np.log(mu) + (1 - y) * np.log(1 - mu))
        else:
            ylogy = np.where(y > 0, y * np.log(y / mu), 0.0)
            dev = 2.0 * (ylogy - (y - mu))
    return float(np.mean(dev))


def fold_ids(y, folds: int, rng, stratify=False):
    n = len(y)
    ids = np.empty(n, dtype=int)
    if stratify:
        start = 0
        for cls in np.unique(y):
            idx = rng.permutation(np.flatnonzero(y == cls))
            ids[idx] = (start + np.arange(idx.size)) % folds
            start += idx.size
    else:
        ids[rng.permutation(n)] = np.arange(n) % folds
    return ids


def _single_class(y, ids, folds):
    return any(np.unique(y[ids != k]).size < 2 for k in range(folds))


def cross_validate(model: LossModel, data: Dataset, folds: int = 5, grid=None,
                   seed: int = 0) -> CVResult:
    """K-fold CV error at every grid value, using one fold assignment for all."""
    if folds < 2 or folds > data.n:
        raise InputError(f"folds must lie in [2, n], got {folds}")
    grid = auto_grid(model, data) if grid is None else _check_grid(grid)
    logistic = model.family == "logistic"
    rng = np.random.default_rng(seed)
    ids = fold_ids(data.y, folds, rng, stratify=logistic)
    tries = 0
    while logistic and _single_class(data.y, ids, folds):
        tries += 1
        if tries > 20:
            raise InputError("cannot form folds with both classes in every training set")
        warnings.warn("a training fold has a single class; refolding", RuntimeWarning,
                      stacklevel=2)
        ids = fold_ids(data.y, folds, rng, stratify=False)
    errs = np.empty((folds, grid.size))
    for k in range(folds):
        tr, te = ids != k, ids == k
        betas = _path_betas(model, data.X[tr], data.y[tr], grid)
        for j, (beta, _, _) in enumerate(betas):
            errs[k, j] = heldout_error(model, data.y[te], data.X[te] @ beta)
    return CVResult(grid, errs.mean(axis=0), errs, folds, seed)


def cv_lasso(model: LossModel, data: Dataset, folds: int = 5, grid=None, seed: int = 0):
    """Path with CV errors attached; returns ``(points, cv, selected_point)``."""
    grid = auto_grid(model, data) if grid is None else _check_grid(grid)
    points = solve_path(model, data, grid)
    cv = cross_validate(model, data, folds, grid, seed)
    for pt, e in zip(points, cv.mean_error):
        pt.cv_error = float(e)
    return points, cv, points[cv.best_index]
