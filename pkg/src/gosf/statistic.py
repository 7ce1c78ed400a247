"""The goodness-of-spurious-fit statistic ``2 * LR_n(s, p)`` and its scale.

``LR_n(s, p) = L_n(0) - min_{||beta||_0 <= s} L_n(beta)``.  Under the null,
``2 LR_n`` is approximately ``scale * R_0^2(s, p)`` where ``scale`` is 1 for
logistic/poisson, the noise variance for gaussian and ``1 / (2 f_eps(0))``
for lad.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .model import Dataset, InputError, LossModel, baseline_value
from .solver import LammConfig, lamm_minimize

logger = logging.getLogger(__name__)

# rule-of-thumb constant for the Epanechnikov kernel
ROT_CONSTANT = 2.34


@dataclass
class GosfStatistic:
    two_lr: float
    s: int
    p: int
    n: int
    scale: float
    family: str
    converged: bool = True
    baseline: float | None = None
    objective: float | None = None
    raw_objective: float | None = None
    support: tuple[int, ...] = ()

    @property
    def sqrt_two_lr(self) -> float:
        return float(np.sqrt(self.two_lr))

    @property
    def scaled(self) -> float:
        """``2 LR / scale``, comparable with draws of ``R_0^2``."""
        return self.two_lr / self.scale

    def to_dict(self):
        return {
            "family": self.family,
            "n": self.n,
            "p": self.p,
            "s": self.s,
            "two_lr": self.two_lr,
            "sqrt_two_lr": self.sqrt_two_lr,
            "scale": self.scale,
            "scaled_two_lr": self.scaled,
            "baseline": self.baseline,
            "objective": self.objective,
            "raw_objective": self.raw_objective,
            "support": list(self.support),
            "converged": self.converged,
        }


def sigma0_hat(y) -> float:
    """Null plug-in variance ``n^{-1} sum (y_i - ybar)^2`` (divisor n).

    Despite the name this is the variance, not the standard deviation.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size < 2:
        raise InputError("need at least two observations")
    v = float(np.mean((y - y.mean()) ** 2))
    if v == 0.0:
        warnings.warn("constant response: sigma0_hat is 0", RuntimeWarning, stacklevel=2)
    return v


def epanechnikov(u):
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


def rot_bandwidth(y) -> float:
    y = np.asarray(y, dtype=float).reshape(-1)
    return ROT_CONSTANT * np.sqrt(sigma0_hat(y)) * y.size ** (-0.2)


def f_hat_zero(y) -> float:
    """Epanechnikov kernel density estimate of the response density at 0.

    ``(n h)^{-1} sum_i K(y_i / h)`` with ``h = 2.34 * sigma0 * n^{-1/5}``.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size < 2:
        raise InputError("need at least two observations")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        h = rot_bandwidth(y)
    if h <= 0:
        raise InputError("constant response: kernel bandwidth is zero")
    return float(epanechnikov(y / h).sum() / (y.size * h))


def scale_factor(model: LossModel, data: Dataset, sigma2: float | None = None) -> float:
    """Multiplier linking ``2 LR_n`` to ``R_0^2`` for the model's family.

    ``sigma2`` overrides the gaussian null variance estimate.
    """
    if model.family in ("logistic", "poisson"):
        return 1.0
    if model.family == "gaussian":
        if sigma2 is not None:
            if not sigma2 > 0:
                raise InputError("sigma2 must be positive")
            return float(sigma2)
        return sigma0_hat(data.y)
    f0 = f_hat_zero(data.y)
    assert f0 > 0, "kernel density at zero must be positive"
    return 1.0 / (2.0 * f0)


def gosf_statistic(model: LossModel, data: Dataset, s: int,
                   solver_config: LammConfig | None = None,
                   sigma2: float | None = None) -> GosfStatistic:
    """Best-subset likelihood ratio ``2 (L_n(0) - L_n(beta_hat(s)))`` via LAMM."""
    fit = lamm_minimize(model, data, s, solver_config)
    base = baseline_value(model, data)
    two_lr = 2.0 * (base - fit.objective)
    if two_lr < 0:
        logger.info("clamping negative 2LR %.3g to zero", two_lr)
        two_lr = 0.0
    if not fit.converged:
        logger.warning("LAMM did not converge for s=%d", s)
    return GosfStatistic(
        two_lr=two_lr,
        s=s,
        p=data.p,
        n=data.n,
        scale=scale_factor(model, data, sigma2),
        family=model.family,
        converged=fit.converged,
        baseline=base,
        objective=fit.objective,
        raw_objective=fit.raw_objective,
        support=tuple(int(j) for j in fit.support),
    )
