"""Loss families, datasets and baseline (null-fit) values.

Four families are supported.  The three GLM families use the canonical-link
negative log-likelihood ``sum_i b(x_i'beta) - y_i x_i'beta``; ``lad`` uses the
l1 loss ``sum_i |y_i - x_i'beta|``.  The gaussian loss is kept in the
``0.5 * ||y - X beta||^2`` form, which differs from the GLM form with
``b(u) = u^2 / 2`` by the constant ``0.5 * ||y||^2``.

No intercept is fitted anywhere: the null fit is always ``beta = 0``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

FAMILIES = ("gaussian", "logistic", "poisson", "lad")
GLM_FAMILIES = ("gaussian", "logistic", "poisson")

logger = logging.getLogger(__name__)

# Poisson linear predictor is clipped to this range before exp().
ETA_CLIP = 700.0


class InputError(ValueError):
    """Invalid user input (shape mismatch, bad response values, ...)."""


class OverflowCounter:
    """Counts how many times the Poisson linear predictor had to be clipped."""

    def __init__(self):
        self.count = 0

    def reset(self):
        self.count = 0


overflow_clamps = OverflowCounter()


def _clip_eta(eta):
    big = np.abs(eta) > ETA_CLIP
    if big.any():
        overflow_clamps.count += int(big.sum())
        logger.debug("poisson linear predictor clipped at %d observations", int(big.sum()))
        return np.clip(eta, -ETA_CLIP, ETA_CLIP)
    return eta


@dataclass(frozen=True)
class LossModel:
    """A loss family together with its cumulant function ``b``.

    ``dispersion`` is informational; it is 1 for every family except a
    gaussian model built with a known noise variance.  It never enters
    :func:`loss_value`.
    """

    family: str
    dispersion: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InputError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if not self.dispersion > 0:
            raise InputError("dispersion must be positive")

    @property
    def is_glm(self) -> bool:
        return self.family in GLM_FAMILIES

    def b(self, u):
        u = np.asarray(u, dtype=float)
        if self.family == "gaussian":
            return 0.5 * u * u
        if self.family == "logistic":
            return np.logaddexp(0.0, u)
        if self.family == "poisson":
            return np.exp(_clip_eta(u))
        raise InputError("lad has no cumulant function")

    def b_prime(self, u):
        u = np.asarray(u, dtype=float)
        if self.family == "gaussian":
            return u
        if self.family == "logistic":
            return _expit(u)
        if self.family == "poisson":
            return np.exp(_clip_eta(u))
        raise InputError("lad has no cumulant function")

    def b_double_prime(self, u):
        u = np.asarray(u, dtype=float)
        if self.family == "gaussian":
            return np.ones_like(u)
        if self.family == "logistic":
            mu = _expit(u)
            return mu * (1.0 - mu)
        if self.family == "poisson":
            return np.exp(_clip_eta(u))
        raise InputError("lad has no cumulant function")


def _expit(u):
    # numerically stable logistic sigmoid
    out = np.empty_like(u, dtype=float)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    eu = np.exp(u[~pos])
    out[~pos] = eu / (1.0 + eu)
    return out


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    columns: tuple[str, ...] | None = None
    response: str | None = None
    standardized: bool = False
    column_scale: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=float)
        self.y = np.ascontiguousarray(self.y, dtype=float).reshape(-1)
        if self.X.ndim != 2:
            raise InputError(f"X must be 2-d, got shape {self.X.shape}")
        if self.X.shape[0] != self.y.shape[0]:
            raise InputError(
                f"X has {self.X.shape[0]} rows but y has {self.y.shape[0]} entries"
            )
        if not (np.isfinite(self.X).all() and np.isfinite(self.y).all()):
            raise InputError("dataset contains missing or non-finite values")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def validate_for(self, family: str):
        """Check the response is admissible for ``family``."""
        y = self.y
        if family == "logistic" and not np.isin(y, (0.0, 1.0)).all():
            raise InputError("logistic response must be coded 0/1")
        if family == "poisson" and ((y < 0).any() or (y != np.round(y)).any()):
            raise InputError("poisson response must be nonnegative integers")
        return self


def column_second_moments(X):
    return np.mean(np.asarray(X, dtype=float) ** 2, axis=0)


def standardize(X):
    """Scale columns to unit sample second moment ``(1/n) sum_i X_ij^2 = 1``.

    Columns are not centred.  Returns the scaled matrix and the scale factors.
    """
    X = np.asarray(X, dtype=float)
    scale = np.sqrt(column_second_moments(X))
    if (scale == 0).any():
        bad = np.flatnonzero(scale == 0).tolist()
        raise InputError(f"cannot standardize all-zero columns {bad}")
    return X / scale, scale


def make_dataset(X, y, family=None, standardize_columns=True, columns=None, response=None):
    """Build a validated :class:`Dataset`, optionally standardizing columns."""
    X = np.asarray(X, dtype=float)
    scale = None
    if standardize_columns:
        X, scale = standardize(X)
    data = Dataset(X, y, columns=columns, response=response,
                   standardized=standardize_columns, column_scale=scale)
    if family is not None:
        data.validate_for(family)
    return data


def _check_beta(data: Dataset, beta):
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if beta.shape[0] != data.p:
        raise InputError(f"beta has length {beta.shape[0]}, expected p={data.p}")
    return beta


def loss_from_eta(model: LossModel, y, eta) -> float:
    """Loss evaluated at a linear predictor ``eta = X beta``."""
    if model.family == "gaussian":
        r = y - eta
        return 0.5 * float(r @ r)
    if model.family == "lad":
        return float(np.abs(y - eta).sum())
    return float(np.sum(model.b(eta)) - y @ eta)


def loss_value(model: LossModel, data: Dataset, beta) -> float:
    beta = _check_beta(data, beta)
    return loss_from_eta(model, data.y, data.X @ beta)


def lad_subgradient_signs(resid, rng):
    """Sign of each residual, with Uniform[-1, 1] draws where it is exactly zero."""
    signs = np.sign(resid)
    zero = resid == 0
    if zero.any():
        if rng is None:
            raise InputError("lad subgradient needs an rng when residuals vanish")
        signs[zero] = rng.uniform(-1.0, 1.0, size=int(zero.sum()))
    return signs


def loss_gradient(model: LossModel, data: Dataset, beta, rng=None):
    """Gradient of the loss, or a stochastic subgradient for ``lad``.

    For ``lad`` the subgradient is ``-X' s`` with ``s_i = sign(r_i)`` for
    nonzero residuals and ``s_i ~ Uniform[-1, 1]`` for exactly-zero ones, so
    ``rng`` is consumed only when some residual vanishes.
    """
    beta = _check_beta(data, beta)
    eta = data.X @ beta
    if model.family == "lad":
        return -(data.X.T @ lad_subgradient_signs(data.y - eta, rng))
    return data.X.T @ (model.b_prime(eta) - data.y)


def baseline_value(model: LossModel, data: Dataset) -> float:
    """Loss of the null fit ``beta = 0``."""
    n = data.n
    if model.family == "logistic":
        return n * float(np.log(2.0))
    if model.family == "poisson":
        return float(n)
    if model.family == "gaussian":
        return 0.5 * float(data.y @ data.y)
    return float(np.abs(data.y).sum())
