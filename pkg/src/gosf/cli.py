"""Command-line interface: ``gosf {quantile,gosf,guard,path-select,simulate}``.

Every subcommand writes one JSON record (schema versioned) holding the tool
version, the resolved config and seed, the result and failure counters.
Wall time is written to stderr and only embedded with ``--timing`` so that
repeated runs give byte-identical JSON.

Exit codes: 0 success, 2 input error, 3 solver or bootstrap failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .bootstrap import BootstrapError, bootstrap_distribution, validity_diagnostic
from .covariance import CovarianceSpec
from .guard import BootstrapCache, format_table, path_select, spurious_test
from .lasso_path import cv_lasso
from .model import (FAMILIES, Dataset, InputError, LossModel, baseline_value, loss_value,
                    make_dataset, overflow_clamps)
from .simlab import SimConfig, histogram_data, run_null_experiment, run_power_experiment
from .solver import LammConfig, SolverError
from .statistic import gosf_statistic, scale_factor

SCHEMA_VERSION = 1
EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 2, 3

logger = logging.getLogger("gosf")


class StageError(Exception):
    """Wraps a failure with the name of the stage that raised it."""

    def __init__(self, stage, exc):
        super().__init__(f"{stage}: {exc}")
        self.stage, self.exc = stage, exc


# --------------------------------------------------------------------------
# CSV io
# --------------------------------------------------------------------------


def load_csv(path, response_column: str | None = None) -> Dataset:
    """Read a numeric CSV with a header row.

    ``X`` takes every non-response column in header order.  Without a
    response column ``y`` is all zeros (enough for design-only commands).
    """
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path} is empty") from None
        if response_column is not None and response_column not in header:
            raise InputError(f"response column {response_column!r} not in header {header}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise InputError(f"line {lineno}: expected {len(header)} cells, got {len(rec)}")
            vals = []
            for j, cell in enumerate(rec):
                try:
                    v = float(cell)
                except ValueError:
                    v = math.nan
                if not math.isfinite(v):
                    raise InputError(
                        f"line {lineno}, column {header[j]!r} (#{j + 1}): "
                        f"cannot use value {cell!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise InputError(f"{path} has no data rows")
    M = np.array(rows)
    if response_column is None:
        return Dataset(M, np.zeros(M.shape[0]), columns=tuple(header))
    k = header.index(response_column)
    cols = tuple(h for i, h in enumerate(header) if i != k)
    return Dataset(np.delete(M, k, axis=1), M[:, k], columns=cols, response=response_column)


def write_csv(path, data: Dataset, response_column="y"):
    """Write a dataset so that :func:`load_csv` reads it back bit-exactly."""
    cols = data.columns or tuple(f"x{j + 1}" for j in range(data.p))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([response_column, *cols])
        for yi, xi in zip(data.y, data.X):
            w.writerow([repr(float(yi)), *(repr(float(v)) for v in xi)])


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------


def parse_s_list(text: str) -> list[int]:
    """``"3"``, ``"1-5"`` or ``"1,2,4"``."""
    out = []
    try:
        for part in text.split(","):
            if "-" in part:
                lo, hi = part.split("-")
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
    except ValueError:
        raise InputError(f"cannot parse s value {text!r}") from None
    if not out or min(out) < 1:
        raise InputError("s values must be positive integers")
    return sorted(set(out))


def _alphas(args):
    alphas = args.alpha or [0.1, 0.05]
    for a in alphas:
        if not 0 < a < 1:
            raise InputError(f"alpha must lie in (0, 1), got {a}")
    return sorted(set(alphas), reverse=True)


def _load(args, need_response=True):
    if need_response and not args.response:
        raise InputError("--response is required")
    raw = load_csv(args.data, args.response)
    if need_response:
        raw.validate_for(args.family)
    return make_dataset(raw.X, raw.y, None, args.standardize, raw.columns, raw.response)


def _stage(name, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except (InputError, SolverError, BootstrapError, np.linalg.LinAlgError) as exc:
        raise StageError(name, exc) from exc


def _config_dict(args):
    skip = {"func", "output", "timing", "table"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k not in skip:
            out[k] = v
    return out


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_quantile(args):
    data = _stage("load", _load, args, need_response=False)
    alphas = _alphas(args)
    out = []
    for s in parse_s_list(args.s):
        dist = _stage("bootstrap", bootstrap_distribution, data.X, s, args.B, LammConfig(),
                      args.seed, args.workers)
        rec = {
            "s": s,
            "B": args.B,
            "drops": dist.drops,
            "validity_diagnostic": validity_diagnostic(s, data.p, data.n),
            "quantiles": [{"alpha": a, "q": dist.quantile(a), "q_sq": dist.quantile_sq(a)}
                          for a in alphas],
        }
        if args.samples:
            rec["samples"] = dist.samples.tolist()
        out.append(rec)
    return {"n": data.n, "p": data.p, "distributions": out}, None


def cmd_gosf(args):
    data = _stage("load", _load, args)
    model = LossModel(args.family)
    out = []
    for s in parse_s_list(args.s):
        st = _stage("solve", gosf_statistic, model, data, s, LammConfig(), args.sigma2)
        out.append(st.to_dict())
    return {"statistics": out}, None


def _read_beta(path, p):
    try:
        beta = np.loadtxt(path, delimiter=",", ndmin=1)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read coefficients from {path}: {exc}") from None
    if beta.shape != (p,):
        raise InputError(f"coefficient file has {beta.size} values, expected p={p}")
    return beta


def cmd_guard(args):
    data = _stage("load", _load, args)
    model = LossModel(args.family)
    alphas = _alphas(args)
    base = {"source": None}
    if args.beta:
        beta = _read_beta(args.beta, data.p)
        two_lr = max(2.0 * (baseline_value(model, data) - loss_value(model, data, beta)), 0.0)
        s_hat = int(np.count_nonzero(beta))
        base["source"] = "supplied_coefficients"
    elif args.two_lr is not None:
        if args.s_hat is None:
            raise StageError("config", InputError("--two-lr needs --s-hat"))
        two_lr, s_hat = args.two_lr, args.s_hat
        base["source"] = "supplied_statistic"
    else:
        _, cv, sel = _stage("lasso", cv_lasso, model, data, args.folds, None, args.seed)
        two_lr, s_hat = sel.two_lr_hat, sel.support_size
        base.update(source="cv_lasso", lambda_cv=sel.lam, support=sel.support.tolist())
    scale = _stage("scale", scale_factor, model, data, args.sigma2)
    decisions = []
    if s_hat == 0:
        decisions = [{"alpha": a, "s_hat": 0, "two_lr": two_lr, "spurious": True,
                      "q_alpha": None} for a in alphas]
    else:
        dist = _stage("bootstrap", bootstrap_distribution, data.X, s_hat, args.B, LammConfig(),
                      args.seed, args.workers)
        for a in alphas:
            decisions.append(_stage("decide", spurious_test, two_lr, s_hat, dist, a, scale).to_dict())
    base.update(two_lr=two_lr, s_hat=s_hat, scale=scale, decisions=decisions)
    return base, None


def cmd_path_select(args):
    data = _stage("load", _load, args)
    model = LossModel(args.family)
    alphas = _alphas(args)
    alpha = args.stop_alpha if args.stop_alpha is not None else max(alphas)
    points, cv, sel = _stage("lasso", cv_lasso, model, data, args.folds, None, args.seed)
    scale = _stage("scale", scale_factor, model, data, args.sigma2)
    cache = BootstrapCache(args.workers)
    _, _, report = _stage("guard", path_select, points, data.X, alpha, args.B, LammConfig(),
                          args.seed, scale=scale, alphas=alphas, cache=cache,
                          full_report=not args.stop_early)
    rec = report.to_dict()
    rec.update(lambda_cv=sel.lam, s_cv=sel.support_size, bootstrap_builds=cache.builds)
    return rec, format_table(report)


def cmd_simulate(args):
    cov = _stage("config", CovarianceSpec.parse, args.covariance, args.p)
    cfg = _stage("config", SimConfig, n=args.n, p=args.p, s=args.s_sim, family=args.family,
                 covariance=cov, beta_star=args.beta_star, n_sims=args.n_sims, B=args.B,
                 alpha=(args.alpha or [0.1])[0], seed=args.seed,
                 standardize=args.standardize, folds=args.folds, statistic=args.statistic,
                 with_path_select=args.path_select, n_ref=args.n_ref, workers=args.workers)
    if args.experiment == "null":
        res = _stage("simulate", run_null_experiment, cfg)
    else:
        res = _stage("simulate", run_power_experiment, cfg)
    rec = {"sim_config": cfg.to_dict(), "result": res.to_dict()}
    if args.experiment == "null":
        rec["histogram"] = histogram_data(res.glr_samples, res.gar_samples, args.bins)
    return rec, None


# --------------------------------------------------------------------------
# argument parsing and dispatch
# --------------------------------------------------------------------------


def _common(sp, data=True, family=True):
    if data:
        sp.add_argument("--data", required=True, help="CSV file with a header row")
        sp.add_argument("--response", help="name of the response column")
        sp.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=True,
                        help="scale columns to unit second moment")
    if family:
        sp.add_argument("--family", choices=FAMILIES, default="logistic")
    sp.add_argument("--alpha", type=float, action="append",
                    help="significance level; repeatable (default 0.1 and 0.05)")
    sp.add_argument("--B", type=int, default=1000, help="bootstrap replications")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=None,
                    help="worker processes (default $GOSF_WORKERS or 1)")
    sp.add_argument("--output", help="write JSON here instead of stdout")
    sp.add_argument("--timing", action="store_true", help="embed wall time in the JSON")


def build_parser():
    ap = argparse.ArgumentParser(prog="gosf", description="Guarding against spurious discoveries")
    ap.add_argument("--version", action="version", version=f"gosf {__version__}")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    sp = sub.add_parser("quantile", help="bootstrap GOSF quantiles q_alpha(s, p) for a design")
    _common(sp, family=False)
    sp.add_argument("--s", required=True, help="sparsity: 3, 1-5 or 1,2,4")
    sp.add_argument("--samples", action="store_true", help="include the R_n^2 draws")
    sp.set_defaults(func=cmd_quantile)

    sp = sub.add_parser("gosf", help="best-subset statistic 2 LR_n(s, p)")
    _common(sp)
    sp.add_argument("--s", required=True, help="sparsity: 3, 1-5 or 1,2,4")
    sp.add_argument("--sigma2", type=float, help="known gaussian noise variance")
    sp.set_defaults(func=cmd_gosf)

    sp = sub.add_parser("guard", help="is a fitted model better than GOSF?")
    _common(sp)
    sp.add_argument("--beta", help="CSV line of fitted coefficients (length p)")
    sp.add_argument("--two-lr", type=float, help="fitted 2 LR, used with --s-hat")
    sp.add_argument("--s-hat", type=int, help="fitted model size")
    sp.add_argument("--folds", type=int, default=10, help="CV folds when fitting internally")
    sp.add_argument("--sigma2", type=float, help="known gaussian noise variance")
    sp.set_defaults(func=cmd_guard)

    sp = sub.add_parser("path-select", help="stop the lasso path at s_fit")
    _common(sp)
    sp.add_argument("--folds", type=int, default=10)
    sp.add_argument("--stop-alpha", type=float, help="alpha for the stopping rule")
    sp.add_argument("--stop-early", action="store_true",
                    help="skip quantiles past the stopping point")
    sp.add_argument("--table", help="also write the aligned table to this file")
    sp.add_argument("--sigma2", type=float, help="known gaussian noise variance")
    sp.set_defaults(func=cmd_path_select)

    sp = sub.add_parser("simulate", help="null or power simulation")
    _common(sp, data=False)
    sp.add_argument("--experiment", choices=("null", "power"), default="null")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--s", dest="s_sim", type=int, default=1)
    sp.add_argument("--covariance", default="identity", help="identity, ar1:RHO, long_memory:RHO")
    sp.add_argument("--beta-star", default=None, help="preset name, e.g. paper52")
    sp.add_argument("--n-sims", type=int, default=100)
    sp.add_argument("--n-ref", type=int, default=None, help="reference-law draws")
    sp.add_argument("--statistic", choices=("cv_lasso", "best_subset"), default="cv_lasso")
    sp.add_argument("--path-select", action="store_true")
    sp.add_argument("--folds", type=int, default=5)
    sp.add_argument("--bins", type=int, default=40)
    sp.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=True)
    sp.set_defaults(func=cmd_simulate)
    return ap


def _resolve_workers(args):
    if args.workers is None:
        env = os.environ.get("GOSF_WORKERS", "1")
        try:
            args.workers = int(env)
        except ValueError:
            raise InputError(f"GOSF_WORKERS must be an integer, got {env!r}") from None
    if args.workers < 1:
        raise InputError("workers must be at least 1")


def _dump(record) -> str:
    return json.dumps(record, indent=2, sort_keys=True, allow_nan=False) + "\n"


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=os.environ.get("GOSF_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    t0 = time.perf_counter()
    overflow_clamps.reset()
    try:
        _resolve_workers(args)
        if args.alpha is None:
            args.alpha = [0.1] if args.subcommand == "simulate" else [0.1, 0.05]
        if getattr(args, "B", 1) < 1:
            raise InputError("--B must be at least 1")
        result, table = args.func(args)
    except StageError as err:
        code = EXIT_INPUT if isinstance(err.exc, InputError) else EXIT_SOLVER
        print(f"gosf {args.subcommand}: {err}", file=sys.stderr)
        return code
    except InputError as exc:
        print(f"gosf {args.subcommand}: input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, BootstrapError, np.linalg.LinAlgError) as exc:
        print(f"gosf {args.subcommand}: solver: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    wall = time.perf_counter() - t0
    config = _config_dict(args)
    config.pop("workers", None)  # results do not depend on it
    record = {
        "schema_version": SCHEMA_VERSION,
        "tool": "gosf",
        "version": __version__,
        "subcommand": args.subcommand,
        "config": config,
        "seed": args.seed,
        "counters": {"poisson_clamps": overflow_clamps.count},
        "result": result,
    }
    if args.timing:
        record["wall_time"] = wall
    text = _dump(record)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if table is not None:
        if getattr(args, "table", None):
            with open(args.table, "w") as fh:
                fh.write(table + "\n")
        elif args.output:
            print(table)
    print(f"gosf {args.subcommand}: done in {wall:.2f}s", file=sys.stderr)
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
