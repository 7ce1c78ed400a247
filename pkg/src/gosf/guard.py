"""Spurious-discovery guard: compare fitted likelihood ratios with GOSF quantiles.

A fit of size ``s_hat`` with statistic ``2 LR`` is declared spurious when it
does not beat the bootstrap benchmark, ``2 LR < scale * q_alpha(s_hat)^2``.
A tie counts as beating the benchmark.  ``scale`` is 1 for logistic/poisson
and comes from :func:`gosf.statistic.scale_factor` for gaussian and lad.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .bootstrap import BootstrapDistribution, bootstrap_distribution, design_hash
from .lasso_path import PathPoint
from .model import InputError
from .solver import LammConfig

logger = logging.getLogger(__name__)

SCALE_NOTE = "spurious iff 2LR < scale * q^2; ties beat GOSF"


@dataclass
class GuardDecision:
    sqrt_two_lr: float
    q_alpha: float
    alpha: float
    scale: float
    spurious: bool
    s_hat: int = 0

    def to_dict(self):
        return {
            "s_hat": self.s_hat,
            "alpha": self.alpha,
            "sqrt_two_lr": self.sqrt_two_lr,
            "two_lr": self.sqrt_two_lr ** 2,
            "q_alpha": self.q_alpha,
            "q_alpha_sq": self.q_alpha ** 2,
            "scale": self.scale,
            "spurious": self.spurious,
        }


def _is_spurious(two_lr, q, scale) -> bool:
    return bool(two_lr < scale * q * q)


def spurious_test(two_lr: float, s_hat: int, dist: BootstrapDistribution, alpha: float,
                  scale: float = 1.0) -> GuardDecision:
    """Decision for one fitted model of size ``s_hat``."""
    if dist.s != s_hat:
        raise InputError(f"distribution built for s={dist.s}, fit has s_hat={s_hat}")
    if not scale > 0:
        raise InputError("scale must be positive")
    two_lr = max(float(two_lr), 0.0)
    q = dist.quantile(alpha)
    return GuardDecision(math.sqrt(two_lr), q, alpha, scale, _is_spurious(two_lr, q, scale), s_hat)


class BootstrapCache:
    """Bootstrap distributions keyed by ``(X hash, s, B, seed, solver config)``."""

    def __init__(self, workers: int = 1):
        self.workers = workers
        self._store: dict = {}
        self.builds = 0

    def get(self, X, s, B, seed, config: LammConfig, xhash=None):
        xhash = xhash or design_hash(X)
        key = (xhash, s, B, seed, tuple(sorted(config.to_dict().items())))
        if key not in self._store:
            self.builds += 1
            self._store[key] = bootstrap_distribution(X, s, B, config, seed, self.workers)
        return self._store[key]

    def __len__(self):
        return len(self._store)


@dataclass
class GuardRow:
    lam: float
    s_hat: int
    two_lr: float
    q: dict = field(default_factory=dict)  # alpha -> q on the R_n scale
    cv_error: float | None = None
    beats: bool | None = None  # at the primary alpha; None when not evaluated

    @property
    def sqrt_two_lr(self) -> float:
        return math.sqrt(self.two_lr)


@dataclass
class GuardReport:
    rows: list
    s_fit: int
    lambda_fit: float | None
    alphas: list
    alpha: float
    scale: float = 1.0
    all_spurious: bool = False
    stop_index: int | None = None
    B: int = 0
    seed: int = 0
    lambda_constrained_cv: float | None = None
    s_constrained_cv: int | None = None

    def to_dict(self):
        return {
            "decision_rule": SCALE_NOTE,
            "alpha": self.alpha,
            "alphas": list(self.alphas),
            "scale": self.scale,
            "B": self.B,
            "seed": self.seed,
            "s_fit": self.s_fit,
            "lambda_fit": self.lambda_fit,
            "all_spurious": self.all_spurious,
            "stop_index": self.stop_index,
            "lambda_constrained_cv": self.lambda_constrained_cv,
            "s_constrained_cv": self.s_constrained_cv,
            "rows": guard_report_emit(self),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _q_key(alpha) -> str:
    return f"q_{alpha:g}"


def guard_report_emit(report: GuardReport, alphas=None) -> list[dict]:
    """Table rows: lambda, s_hat, sqrt(2LR), q per alpha, cv error."""
    alphas = report.alphas if alphas is None else list(alphas)
    out = []
    for row in report.rows:
        rec = {"lambda": row.lam, "s_hat": row.s_hat, "sqrt_2lr": row.sqrt_two_lr}
        for a in alphas:
            rec[_q_key(a)] = row.q.get(a)
        rec["cv_error"] = row.cv_error
        rec["beats_gosf"] = row.beats
        out.append(rec)
    return out


def format_table(report: GuardReport, alphas=None) -> str:
    """Aligned plain-text rendering of :func:`guard_report_emit`."""
    rows = guard_report_emit(report, alphas)
    if not rows:
        return ""
    cols = list(rows[0])

    def fmt(v):
        if v is None:
            return "-"
        if isinstance(v, bool):
            return "yes" if v else "no"
        if isinstance(v, float):
            return f"{v:.4f}"
        return str(v)

    cells = [cols] + [[fmt(r[c]) for c in cols] for r in rows]
    widths = [max(len(line[i]) for line in cells) for i in range(len(cols))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(line, widths)) for line in cells)


def path_select(path: list[PathPoint], X, alpha: float = 0.1, B: int = 1000,
                solver_config: LammConfig | None = None, seed: int = 0, *,
                scale: float = 1.0, alphas=None, cache: BootstrapCache | None = None,
                full_report: bool = True, workers: int = 1) -> tuple[int, float | None, GuardReport]:
    """Stop the path at the first positive-to-negative sign change of ``2LR - scale q^2``.

    Walking from the largest ``lam``, ``lambda_fit`` is the last point that beats
    GOSF before the first point that fails after some success.  ``s_fit = 0``
    and ``all_spurious`` is set when no point beats GOSF.  With
    ``full_report=False`` quantiles past the stopping point are not computed.
    """
    if not path:
        raise InputError("empty path")
    lams = np.array([pt.lam for pt in path])
    if (np.diff(lams) > 0).any():
        raise InputError("path must be ordered by descending lambda")
    config = solver_config or LammConfig()
    alphas = sorted(set([alpha] + list(alphas or [])), reverse=True)
    cache = cache if cache is not None else BootstrapCache(workers)
    X = np.ascontiguousarray(X, dtype=float)
    xhash = design_hash(X)
    s_max = min(X.shape)

    rows, last_beat, stop = [], None, None
    for i, pt in enumerate(path):
        row = GuardRow(pt.lam, pt.support_size, max(pt.two_lr_hat, 0.0), cv_error=pt.cv_error)
        rows.append(row)
        if stop is not None and not full_report:
            continue
        if pt.support_size == 0:
            beats = False  # 2LR is 0 for the null fit
        else:
            s = min(pt.support_size, s_max)
            if s < pt.support_size:
                logger.warning("support size %d capped at %d for the bootstrap",
                               pt.support_size, s)
            dist = cache.get(X, s, B, seed, config, xhash)
            row.q = {a: dist.quantile(a) for a in alphas}
            beats = not _is_spurious(row.two_lr, row.q[alpha], scale)
        row.beats = beats
        if stop is None:
            if beats:
                last_beat = i
            elif last_beat is not None:
                stop = i

    if last_beat is None:
        s_fit, lambda_fit, all_spurious = 0, None, True
    else:
        s_fit, lambda_fit, all_spurious = path[last_beat].support_size, path[last_beat].lam, False

    lam_ccv = s_ccv = None
    end = len(path) if stop is None else stop
    cands = [r for r in rows[:end] if r.beats and r.cv_error is not None]
    if cands:
        best = min(cands, key=lambda r: r.cv_error)
        lam_ccv, s_ccv = best.lam, best.s_hat

    report = GuardReport(rows, s_fit, lambda_fit, alphas, alpha, scale, all_spurious,
                         stop, B, seed, lam_ccv, s_ccv)
    return s_fit, lambda_fit, report
