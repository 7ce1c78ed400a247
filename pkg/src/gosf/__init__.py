"""Goodness of spurious fit (GOSF).

Best-subset likelihood-ratio statistics, multiplier-bootstrap quantiles of
their null law, and a guard that checks lasso fits against those quantiles.
"""

__version__ = "0.1.0"

from .bootstrap import (
    BootstrapDistribution,
    BootstrapError,
    bootstrap_distribution,
    multiplier_bootstrap_sample,
    oracle_r0_general,
    oracle_r0_isotropic,
    quantile,
    sparse_condition_number,
)
from .covariance import CovarianceSpec, make_covariance
from .guard import GuardDecision, GuardReport, guard_report_emit, path_select, spurious_test
from .lasso_path import PathPoint, cross_validate, cv_lasso, lambda_max, solve_path
from .model import Dataset, InputError, LossModel, baseline_value, loss_value, make_dataset
from .solver import LammConfig, SolverError, SparseFit, lamm_minimize, lower_certificate
from .statistic import GosfStatistic, f_hat_zero, gosf_statistic, scale_factor, sigma0_hat

__all__ = [name for name in dir() if not name.startswith("_")]
