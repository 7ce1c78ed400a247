"""Cardinality-constrained loss minimization.

``lamm_minimize`` approximately solves ``min f(beta) s.t. ||beta||_0 <= s``:
a greedy forward-stepwise pass supplies the starting point, then a local
adaptive majorization-minimization loop iterates hard-thresholded gradient
steps

    beta+ = top_s(beta - grad f(beta) / lam)

where the isotropic curvature ``lam`` restarts at ``lambda0`` on every outer
step and is multiplied by ``rho`` until

    f(beta+) <= f(beta) + <grad f(beta), beta+ - beta> + lam/2 ||beta+ - beta||^2.

Each accepted step therefore never increases the objective.  The returned
objective is an upper certificate for the constrained minimum; the l1-ball
relaxation in :func:`lower_certificate` gives a lower one.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import linprog

from .model import (
    Dataset,
    InputError,
    LossModel,
    baseline_value,
    lad_subgradient_signs,
    loss_from_eta,
    loss_value,
)

logger = logging.getLogger(__name__)


class TraceRecorder:
    """Collects every LAMM objective trace while :attr:`enabled` is set."""

    def __init__(self):
        self.enabled = False
        self.traces: list[list[float]] = []

    def violations(self, rtol=0.0):
        """Number of traces that increase anywhere."""
        bad = 0
        for tr in self.traces:
            a = np.asarray(tr)
            if np.any(a[1:] > a[:-1] + rtol * (1.0 + np.abs(a[:-1]))):
                bad += 1
        return bad


trace_recorder = TraceRecorder()

LAD_SMOOTHING = 1e-8
RIDGE = 1e-8


class SolverError(RuntimeError):
    """A numerical solver produced an unusable result."""


@dataclass(frozen=True)
class LammConfig:
    lambda0: float | None = None  # None: 1e-4 * (max column norm)^2
    rho: float = 2.0
    epsilon: float = 1e-5
    max_iter: int = 500
    refit_on_support: bool = True
    seed: int = 0
    max_inflations: int = 100
    # single-coordinate support exchanges after LAMM; None = on for lad only
    swap_refinement: bool | None = None

    def __post_init__(self):
        if not self.rho > 1:
            raise InputError("rho must exceed 1")
        if not self.epsilon > 0:
            raise InputError("epsilon must be positive")
        if self.lambda0 is not None and not self.lambda0 > 0:
            raise InputError("lambda0 must be positive")
        if self.max_iter < 1:
            raise InputError("max_iter must be positive")

    def to_dict(self):
        return {
            "lambda0": self.lambda0,
            "rho": self.rho,
            "epsilon": self.epsilon,
            "max_iter": self.max_iter,
            "refit_on_support": self.refit_on_support,
            "seed": self.seed,
            "max_inflations": self.max_inflations,
            "swap_refinement": self.swap_refinement,
        }


@dataclass
class SparseFit:
    beta: np.ndarray
    support: np.ndarray
    objective: float
    iterations: int
    converged: bool
    upper_certificate: float
    lower_certificate: float | None = None
    raw_objective: float | None = None
    trace: list[float] = field(default_factory=list)
    inflation_cap_hits: int = 0


# --------------------------------------------------------------------------
# hard thresholding
# --------------------------------------------------------------------------


def top_s_support(v, s):
    """Indices of the ``s`` largest-magnitude entries, ties to the lowest index."""
    v = np.asarray(v, dtype=float)
    if not 1 <= s <= v.shape[0]:
        raise InputError(f"s={s} out of range for vector of length {v.shape[0]}")
    order = np.argsort(-np.abs(v), kind="stable")
    return np.sort(order[:s])


def hard_threshold_top_s(v, s, return_support=False):
    """Keep the ``s`` largest entries of ``v`` in magnitude, zero the rest."""
    v = np.asarray(v, dtype=float)
    supp = top_s_support(v, s)
    out = np.zeros_like(v)
    out[supp] = v[supp]
    return (out, supp) if return_support else out


# --------------------------------------------------------------------------
# exact fits restricted to a support (batched over supports of equal size)
# --------------------------------------------------------------------------


def _stack_columns(X, supports):
    # (m, n, k) stack of the column subsets
    return np.ascontiguousarray(np.moveaxis(X[:, supports], 1, 0))


def _glm_batch_loss(model, y, eta):
    return np.sum(model.b(eta), axis=1) - eta @ y


def _newton_batch(model, Xs, y, coef, tol=1e-12, max_iter=100):
    m, n, k = Xs.shape
    eye = np.eye(k) * RIDGE
    eta = np.einsum("mnk,mk->mn", Xs, coef)
    f = _glm_batch_loss(model, y, eta)
    active = np.ones(m, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Xa, eta_a = Xs[idx], eta[idx]
        g = np.einsum("mnk,mn->mk", Xa, model.b_prime(eta_a) - y)
        w = model.b_double_prime(eta_a)
        H = np.einsum("mnk,mn,mnj->mkj", Xa, w, Xa) + eye
        step = np.linalg.solve(H, g[..., None])[..., 0]
        dec = np.einsum("mk,mk->m", g, step)
        dstep = np.einsum("mnk,mk->mn", Xa, step)
        t = np.ones(idx.size)
        new_eta = eta_a - dstep
        new_f = _glm_batch_loss(model, y, new_eta)
        bad = ~(new_f <= f[idx] - 1e-4 * t * dec)
        for _ in range(50):
            if not bad.any():
                break
            t[bad] *= 0.5
            new_eta[bad] = eta_a[bad] - t[bad, None] * dstep[bad]
            new_f[bad] = _glm_batch_loss(model, y, new_eta[bad])
            bad = ~(new_f <= f[idx] - 1e-4 * t * dec)
        moved = ~bad
        upd = idx[moved]
        coef[upd] -= t[moved, None] * step[moved]
        eta[upd] = new_eta[moved]
        f[upd] = new_f[moved]
        done = (0.5 * dec <= tol * (1.0 + np.abs(f[idx]))) | bad
        active[idx[done]] = False
    return f, coef


def _irls_lad_batch(Xs, y, coef, tol=1e-8, max_iter=100):
    # smoothing continues geometrically from the residual scale down to
    # LAD_SMOOTHING; starting at 1e-8 locks IRLS onto the first vertex it meets
    m, n, k = Xs.shape
    eye = np.eye(k) * RIDGE
    r = y - np.einsum("mnk,mk->mn", Xs, coef)
    f = np.abs(r).sum(axis=1)
    best_f, best_coef = f.copy(), coef.copy()
    delta = np.maximum(np.mean(np.abs(r), axis=1), LAD_SMOOTHING)
    active = np.ones(m, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Xa = Xs[idx]
        r = y - np.einsum("mnk,mk->mn", Xa, coef[idx])
        d = delta[idx, None]
        w = 1.0 / np.sqrt(r * r + d * d)
        H = np.einsum("mnk,mn,mnj->mkj", Xa, w, Xa)
        scale = np.trace(H, axis1=1, axis2=2)[:, None, None] / k
        rhs = np.einsum("mnk,mn->mk", Xa, w * y)
        new = np.linalg.solve(H + eye * scale, rhs[..., None])[..., 0]
        new_f = np.abs(y - np.einsum("mnk,mk->mn", Xa, new)).sum(axis=1)
        coef[idx] = new
        better = new_f < best_f[idx]
        best_f[idx[better]] = new_f[better]
        best_coef[idx[better]] = new[better]
        change = np.abs(f[idx] - new_f)
        f[idx] = new_f
        floor = delta[idx] <= LAD_SMOOTHING
        active[idx[floor & (change <= tol * (1.0 + new_f))]] = False
        level_done = change <= 1e-4 * delta[idx]
        delta[idx[level_done]] = np.maximum(delta[idx[level_done]] * 0.1, LAD_SMOOTHING)
    _polish_lad_vertex(Xs, y, best_f, best_coef)
    return best_f, best_coef


def _polish_lad_vertex(Xs, y, best_f, best_coef):
    # an l1 fit with k coefficients has an optimum interpolating k observations:
    # start from the k smallest IRLS residuals and pivot to the optimal vertex
    for i in range(Xs.shape[0]):
        f, coef = _lad_vertex_descent(Xs[i], y, best_coef[i])
        if f < best_f[i]:
            best_f[i], best_coef[i] = f, coef


def _lad_vertex_descent(X, y, coef, max_pivots=200):
    """Exact l1 regression by edge descent between interpolating vertices."""
    n, k = X.shape
    if k > n:
        return np.inf, coef
    r = y - X @ coef
    basis = np.argsort(np.abs(r), kind="stable")[:k]
    try:
        beta = np.linalg.solve(X[basis], y[basis])
    except np.linalg.LinAlgError:
        return np.inf, coef
    r = y - X @ beta
    f = np.abs(r).sum()
    for _ in range(max_pivots):
        try:
            D = np.linalg.inv(X[basis])  # column i moves off observation basis[i]
        except np.linalg.LinAlgError:
            break
        a = X @ D  # a[j, i]: rate of change of fitted value j along edge i
        best = (0.0, None, None, None)
        for i in range(k):
            ai = a[:, i]
            nz = np.abs(ai) > 1e-14
            t = r[nz] / ai[nz]
            w = np.abs(ai[nz])
            order = np.argsort(t, kind="stable")
            cw = np.cumsum(w[order])
            m = int(np.searchsorted(cw, 0.5 * cw[-1]))
            tstar = t[order][m]
            if tstar == 0.0:
                continue
            new_r = r - tstar * ai
            new_f = np.abs(new_r).sum()
            gain = f - new_f
            if gain > best[0]:
                best = (gain, i, int(np.flatnonzero(nz)[order][m]), tstar)
        gain, i, j, tstar = best
        if i is None or gain <= 1e-13 * (1.0 + f):
            break
        new_basis = basis.copy()
        new_basis[i] = j
        try:
            cand = np.linalg.solve(X[new_basis], y[new_basis])
        except np.linalg.LinAlgError:
            break
        cand_r = y - X @ cand
        cand_f = np.abs(cand_r).sum()
        if not cand_f < f:
            break
        basis, beta, r, f = new_basis, cand, cand_r, cand_f
    return f, beta


def restricted_fits(model: LossModel, X, y, supports, coef0=None):
    """Exact convex fits of ``model`` on each row of ``supports``.

    ``supports`` is an ``(m, k)`` integer array; returns objectives ``(m,)``
    and coefficients ``(m, k)``.  Gaussian fits use Cholesky least squares,
    logistic/poisson a damped Newton method, lad iteratively reweighted
    least squares on the smoothed residual ``sqrt(r^2 + 1e-16)``.
    """
    supports = np.atleast_2d(np.asarray(supports, dtype=np.intp))
    m, k = supports.shape
    if k == 0:
        base = loss_from_eta(model, y, np.zeros_like(y))
        return np.full(m, base), np.zeros((m, 0))
    Xs = _stack_columns(X, supports)
    coef = np.zeros((m, k)) if coef0 is None else np.array(coef0, dtype=float, copy=True)
    if model.family == "gaussian":
        G = np.einsum("mnk,mnj->mkj", Xs, Xs) + np.eye(k) * RIDGE
        c = np.einsum("mnk,n->mk", Xs, y)
        coef = np.linalg.solve(G, c[..., None])[..., 0]
        r = y - np.einsum("mnk,mk->mn", Xs, coef)
        return 0.5 * np.einsum("mn,mn->m", r, r), coef
    if model.family == "lad":
        return _irls_lad_batch(Xs, y, coef)
    return _newton_batch(model, Xs, y, coef)


def restricted_fit(model: LossModel, data: Dataset, support):
    """Exact fit on a single support; returns ``(beta in R^p, objective)``."""
    support = np.sort(np.asarray(support, dtype=np.intp))
    beta = np.zeros(data.p)
    if support.size == 0:
        return beta, baseline_value(model, data)
    f, coef = restricted_fits(model, data.X, data.y, support[None, :])
    beta[support] = coef[0]
    return beta, float(f[0])


def exhaustive_best_subset(model: LossModel, data: Dataset, s, batch=512):
    """Minimum over all ``C(p, s)`` supports of the restricted fit (small p only)."""
    best_f, best_supp, best_coef = np.inf, None, None
    combos = itertools.combinations(range(data.p), s)
    while True:
        chunk = list(itertools.islice(combos, batch))
        if not chunk:
            break
        supp = np.array(chunk, dtype=np.intp)
        f, coef = restricted_fits(model, data.X, data.y, supp)
        i = int(np.argmin(f))
        if f[i] < best_f:
            best_f, best_supp, best_coef = float(f[i]), supp[i], coef[i]
    beta = np.zeros(data.p)
    beta[best_supp] = best_coef
    return best_f, best_supp, beta


# --------------------------------------------------------------------------
# problem wrappers: objective, gradient, greedy init, refit
# --------------------------------------------------------------------------


class _GramProblem:
    """Least squares ``0.5 ||y - X beta||^2`` expressed through ``X'X`` and ``X'y``.

    Lets the bootstrap reuse one Gram matrix across many responses.
    """

    def __init__(self, G, c, yy):
        self.G, self.c, self.yy = G, c, float(yy)
        self.p = G.shape[0]

    @classmethod
    def from_data(cls, X, y):
        return cls(X.T @ X, X.T @ y, y @ y)

    def objective(self, beta):
        idx = np.flatnonzero(beta)
        b = beta[idx]
        return 0.5 * self.yy - self.c[idx] @ b + 0.5 * b @ self.G[np.ix_(idx, idx)] @ b

    def gradient(self, beta, rng=None):
        idx = np.flatnonzero(beta)
        return self.G[:, idx] @ beta[idx] - self.c

    def max_col_norm_sq(self):
        return float(np.max(np.diag(self.G)))

    def stepwise(self, s):
        # greedy forward regression via incremental Cholesky of G_SS:
        # A = L^{-1} G_{S,:}, z = L^{-1} c_S; adding j reduces the RSS by
        # (c_j - A_j'z)^2 / (G_jj - ||A_j||^2).
        G, c, p = self.G, self.c, self.p
        diag = np.diag(G).copy()
        A = np.zeros((s, p))
        z = np.zeros(s)
        chosen = []
        resid_norm = diag.copy()
        corr = c.copy()
        for k in range(s):
            d = np.maximum(resid_norm, RIDGE * np.maximum(diag, 1.0))
            gain = corr * corr / d
            gain[chosen] = -np.inf
            t = int(np.argmax(gain))
            dt = d[t]
            row = (G[t] - A[:k, t] @ A[:k]) / np.sqrt(dt)
            zt = corr[t] / np.sqrt(dt)
            A[k], z[k] = row, zt
            chosen.append(t)
            resid_norm = resid_norm - row * row
            corr = corr - row * zt
        U = A[:, chosen]  # transposed Cholesky factor of G_SS, in selection order
        coef = solve_triangular(U, z, lower=False)
        beta = np.zeros(p)
        beta[chosen] = coef
        return beta, np.sort(np.array(chosen, dtype=np.intp))

    def refit_many(self, supports):
        G = self.G[supports[:, :, None], supports[:, None, :]] + np.eye(supports.shape[1]) * RIDGE
        c = self.c[supports]
        coef = np.linalg.solve(G, c[..., None])[..., 0]
        return 0.5 * self.yy - 0.5 * np.einsum("mk,mk->m", c, coef), coef

    def refit(self, support):
        S = np.asarray(support, dtype=np.intp)
        G = self.G[np.ix_(S, S)] + np.eye(S.size) * RIDGE
        coef = np.linalg.solve(G, self.c[S])
        beta = np.zeros(self.p)
        beta[S] = coef
        return beta, self.objective(beta)


class _DataProblem:
    """Generic loss over an explicit design (GLM families and lad)."""

    def __init__(self, model, X, y):
        self.model, self.X, self.y = model, X, y
        self.p = X.shape[1]

    def objective(self, beta):
        idx = np.flatnonzero(beta)
        eta = self.X[:, idx] @ beta[idx]
        return loss_from_eta(self.model, self.y, eta)

    def gradient(self, beta, rng=None):
        idx = np.flatnonzero(beta)
        eta = self.X[:, idx] @ beta[idx]
        if self.model.family == "lad":
            return -(self.X.T @ lad_subgradient_signs(self.y - eta, rng))
        return self.X.T @ (self.model.b_prime(eta) - self.y)

    def max_col_norm_sq(self):
        return float(np.max(np.einsum("ij,ij->j", self.X, self.X)))

    def stepwise(self, s):
        p = self.p
        chosen: list[int] = []
        coef = np.zeros(0)
        for _ in range(s):
            cand = np.array([j for j in range(p) if j not in chosen], dtype=np.intp)
            supports = np.column_stack([np.tile(chosen, (cand.size, 1)).astype(np.intp), cand])
            coef0 = np.column_stack([np.tile(coef, (cand.size, 1)), np.zeros(cand.size)])
            f, coefs = restricted_fits(self.model, self.X, self.y, supports, coef0)
            i = int(np.argmin(f))
            chosen.append(int(cand[i]))
            coef = coefs[i]
        beta = np.zeros(p)
        beta[chosen] = coef
        return beta, np.sort(np.array(chosen, dtype=np.intp))

    def refit_many(self, supports):
        return restricted_fits(self.model, self.X, self.y, supports)

    def refit(self, support):
        S = np.sort(np.asarray(support, dtype=np.intp))
        f, coef = restricted_fits(self.model, self.X, self.y, S[None, :])
        beta = np.zeros(self.p)
        beta[S] = coef[0]
        return beta, float(f[0])


def _make_problem(model, data):
    if model.family == "gaussian":
        return _GramProblem.from_data(data.X, data.y)
    return _DataProblem(model, data.X, data.y)


def _check_s(s, data):
    if not 1 <= s <= min(data.n, data.p):
        raise InputError(f"s={s} must satisfy 1 <= s <= min(n, p) = {min(data.n, data.p)}")


def forward_stepwise_init(model: LossModel, data: Dataset, s: int):
    """Greedy forward selection with an exact restricted refit per candidate.

    Each of the ``s`` steps adds the coordinate whose inclusion gives the
    lowest restricted objective (lowest index on ties) and returns the final
    restricted minimizer embedded in ``R^p``.
    """
    _check_s(s, data)
    beta, _ = _make_problem(model, data).stepwise(s)
    return beta


# --------------------------------------------------------------------------
# LAMM
# --------------------------------------------------------------------------


def _lamm(problem, s, config: LammConfig, rng, init=None):
    if init is None:
        beta, support = problem.stepwise(s)
    else:
        beta, support = hard_threshold_top_s(init, s, return_support=True)
    lam0 = config.lambda0
    if lam0 is None:
        lam0 = 1e-4 * problem.max_col_norm_sq()
    f = problem.objective(beta)
    trace = [f]
    converged = False
    cap_hits = 0
    it = 0
    for it in range(1, config.max_iter + 1):
        g = problem.gradient(beta, rng)
        lam = lam0
        accepted = False
        for _ in range(config.max_inflations):
            cand, cand_supp = hard_threshold_top_s(beta - g / lam, s, return_support=True)
            d = cand - beta
            f_new = problem.objective(cand)
            if f_new <= f + g @ d + 0.5 * lam * (d @ d):
                accepted = True
                break
            lam *= config.rho
        if not accepted:
            cap_hits += 1
            converged = True  # no admissible step left at machine precision
            break
        if f_new > f:
            # the surrogate guarantees descent; only rounding can land here
            converged = True
            break
        beta, support = cand, cand_supp
        f_old, f = f, f_new
        trace.append(f)
        if abs(f_old - f) <= config.epsilon:
            converged = True
            break
    raw = f
    if config.refit_on_support:
        rbeta, rf = problem.refit(support)
        if rf <= f:
            beta, f = rbeta, rf
            trace.append(f)
    swap = config.swap_refinement
    if swap is None:
        swap = getattr(problem, "model", None) is not None and problem.model.family == "lad"
    if swap:
        beta, support, f = _swap_refine(problem, beta, support, f, trace)
    if trace_recorder.enabled:
        trace_recorder.traces.append(list(trace))
    return beta, support, f, raw, it, converged, trace, cap_hits


def _swap_refine(problem, beta, support, f, trace, max_sweeps=100):
    # best-improvement local search over single exchanges i in S <-> j not in S
    p = problem.p
    for _ in range(max_sweeps):
        S = np.sort(support)
        outside = np.setdiff1d(np.arange(p), S)
        if outside.size == 0:
            break
        cand = np.repeat(S[None, :], S.size * outside.size, axis=0)
        pos = np.repeat(np.arange(S.size), outside.size)
        cand[np.arange(cand.shape[0]), pos] = np.tile(outside, S.size)
        cand.sort(axis=1)
        fs, coefs = problem.refit_many(cand)
        i = int(np.argmin(fs))
        if not fs[i] < f - 1e-12 * (1.0 + abs(f)):
            break
        support, f = cand[i], float(fs[i])
        beta = np.zeros(p)
        beta[support] = coefs[i]
        trace.append(f)
    return beta, support, f


def lamm_minimize(model: LossModel, data: Dataset, s: int, config: LammConfig | None = None,
                  init=None) -> SparseFit:
    """Approximate best-subset fit with forward-stepwise start and LAMM iterations."""
    _check_s(s, data)
    config = config or LammConfig()
    rng = np.random.default_rng(config.seed)
    problem = _make_problem(model, data)
    beta, support, f, raw, it, converged, trace, cap_hits = _lamm(problem, s, config, rng, init)
    if cap_hits and model.is_glm:
        logger.warning("LAMM inflation cap reached for %s family", model.family)
    objective = loss_value(model, data, beta)
    return SparseFit(
        beta=beta,
        support=support,
        objective=objective,
        iterations=it,
        converged=converged,
        upper_certificate=objective,
        raw_objective=raw,
        trace=trace,
        inflation_cap_hits=cap_hits,
    )


# --------------------------------------------------------------------------
# lower certificate: min f(beta) s.t. ||beta||_1 <= radius
# --------------------------------------------------------------------------


@dataclass
class L1BallFit:
    value: float
    beta: np.ndarray
    duality_gap: float
    converged: bool
    iterations: int

    @property
    def bound(self) -> float:
        """Certified lower bound ``f(beta) - gap`` on the relaxed minimum."""
        return self.value - self.duality_gap


def project_l1_ball(v, radius):
    """Euclidean projection onto ``{x : ||x||_1 <= radius}`` (sort-based)."""
    v = np.asarray(v, dtype=float)
    if radius <= 0:
        return np.zeros_like(v)
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    rho = np.nonzero(u * k > css - radius)[0][-1]
    theta = (css[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(a - theta, 0.0)


def _lad_l1_ball(data, radius):
    n, p = data.n, data.p
    # variables: [u (p), v (p), r+ (n), r- (n)], beta = u - v
    cost = np.concatenate([np.zeros(2 * p), np.ones(2 * n)])
    A_eq = np.hstack([data.X, -data.X, np.eye(n), -np.eye(n)])
    A_ub = np.concatenate([np.ones(2 * p), np.zeros(2 * n)])[None, :]
    res = linprog(cost, A_ub=A_ub, b_ub=[radius], A_eq=A_eq, b_eq=data.y,
                  bounds=(0, None), method="highs")
    if res.status != 0:
        raise SolverError(f"l1-ball LAD program failed: {res.message}")
    beta = res.x[:p] - res.x[p:2 * p]
    return L1BallFit(float(res.fun), beta, 0.0, True, int(getattr(res, "nit", 0)))


def lower_certificate(model: LossModel, data: Dataset, radius: float, tol: float = 1e-8,
                      max_iter: int = 20000) -> L1BallFit:
    """Solve the l1-ball relaxation; ``.value`` lower-bounds the best-subset minimum.

    GLM families use accelerated projected gradient with backtracking and stop
    once the Frank-Wolfe duality gap ``<grad, beta> + radius ||grad||_inf``
    drops below ``tol * (1 + |f|)`` or the step length below
    ``tol * (1 + ||beta||)``.  ``lad`` is solved exactly as a linear
    program.  On non-convergence the best value is returned with
    ``converged=False``.
    """
    if radius < 0:
        raise InputError("radius must be nonnegative")
    if radius == 0:
        return L1BallFit(baseline_value(model, data), np.zeros(data.p), 0.0, True, 0)
    if model.family == "lad":
        return _lad_l1_ball(data, radius)

    X, y = data.X, data.y

    def fval(b):
        return loss_from_eta(model, y, X @ b)

    def grad(b):
        return X.T @ (model.b_prime(X @ b) - y)

    beta = np.zeros(data.p)
    z = beta.copy()
    tk = 1.0
    curv = float(model.b_double_prime(np.zeros(1))[0])
    L = max(1e-12, curv * float(np.max(np.einsum("ij,ij->j", X, X))))
    fb = fval(beta)
    gap = np.inf
    restarted = False
    it = 0
    for it in range(1, max_iter + 1):
        gz = grad(z)
        fz = fval(z)
        while True:
            cand = project_l1_ball(z - gz / L, radius)
            d = cand - z
            fc = fval(cand)
            if fc <= fz + gz @ d + 0.5 * L * (d @ d) + 1e-12 * abs(fz):
                break
            L *= 2.0
        if fc > fb:
            if restarted:
                # a plain projected step from the incumbent no longer descends
                return L1BallFit(fb, beta, max(gap, 0.0), True, it)
            z, tk, restarted = beta.copy(), 1.0, True
            continue
        restarted = False
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
        z = cand + ((tk - 1.0) / t_next) * (cand - beta)
        beta, fb, tk = cand, fc, t_next
        g = grad(beta)
        gap = float(g @ beta + radius * np.max(np.abs(g)))
        # projected-gradient step length from the incumbent
        step = float(np.linalg.norm(project_l1_ball(beta - g / L, radius) - beta))
        if gap <= tol * (1.0 + abs(fb)) or step <= tol * (1.0 + np.linalg.norm(beta)):
            return L1BallFit(fb, beta, max(gap, 0.0), True, it)
        L *= 0.95
    logger.warning("l1-ball relaxation stopped at max_iter with gap %.3g", gap)
    return L1BallFit(fb, beta, max(gap, 0.0), False, it)


def default_radius(path, s: int) -> float:
    """``2 * ||beta||_1`` of the Lasso-path solution with ``s`` nonzeros.

    ``path`` is a sequence of objects exposing ``support_size`` and ``beta``.
    When several points have exactly ``s`` nonzeros the largest l1 norm is
    used; when none does, the nearest smaller support size is used.
    """
    path = list(path)
    if not path:
        raise InputError("empty Lasso path")
    sizes = np.array([pt.support_size for pt in path])
    eligible = sizes[sizes <= s]
    if eligible.size == 0:
        logger.warning("no path point with support size <= %d; radius 0", s)
        return 0.0
    target = eligible.max()
    norm = max(float(np.abs(pt.beta).sum()) for pt in path if pt.support_size == target)
    if norm == 0:
        logger.warning("default radius is zero (all-zero path point)")
    return 2.0 * norm
