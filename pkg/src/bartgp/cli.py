"""Command-line front end: fit/predict/gp-predict, causal variants, bench.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Every failure prints a single ``error: <kind>: <reason>`` line to stderr.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from .bench import run_experiment
from .causal import (CausalConfig, fit_xbcf, load_causal, predict_cate, predict_cate_gp,
                     save_causal)
from .conformal import cv_plus, ensemble_regressor, jackknife_plus
from .data import CausalDataset, read_csv, write_csv
from .ensemble import FitConfig, fit, load, predict, save
from .errors import DataError, ModelFormatError, NumericalError
from .gpx import GPConfig, predict_gp
from .rng import RngStream
from .tree import TreePrior

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so main() owns exit codes."""

    def error(self, message):
        raise UsageError(message)


class UsageError(Exception):
    pass


def _add_fit_flags(p):
    p.add_argument("--trees", type=int, default=20, help="trees per forest")
    p.add_argument("--sweeps", type=int, default=100, help="posterior sweeps")
    p.add_argument("--burnin", type=int, default=15, help="sweeps discarded at prediction")
    p.add_argument("--nmin", type=int, default=20, help="smallest node that may split")


def _add_gp_flags(p):
    p.add_argument("--theta", type=float, default=0.1, help="kernel smoothness")
    p.add_argument("--tau-gp", type=float, default=None, help="kernel scale (default Var(y)/trees)")
    p.add_argument("--gp-subsample", type=int, default=100, help="max training rows per leaf GP")
    p.add_argument("--cube-coverage", type=float, default=0.95,
                   help="leaf hypercube quantile coverage")


def build_parser() -> _Parser:
    parser = _Parser(prog="bartgp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a regression ensemble")
    p.add_argument("--train", required=True)
    p.add_argument("--response-col", required=True)
    p.add_argument("--model", required=True, help="output model JSON path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help="parallelism cap (informational)")
    _add_fit_flags(p)

    p = sub.add_parser("predict", help="predict with constant-leaf extrapolation")
    p.add_argument("--model")
    p.add_argument("--test", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--baseline", choices=["jackknife+", "cv+"],
                   help="conformal baseline instead of a fitted model (needs --train)")
    p.add_argument("--train")
    p.add_argument("--response-col")
    p.add_argument("--folds", type=int, default=10)
    _add_fit_flags(p)

    p = sub.add_parser("gp-predict", help="predict with leaf-local GP extrapolation")
    p.add_argument("--model", required=True)
    p.add_argument("--train", help="training CSV; the GP conditions on it (required)")
    p.add_argument("--response-col", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    _add_gp_flags(p)

    p = sub.add_parser("causal-fit", help="fit the two-forest treatment-effect model")
    p.add_argument("--train", required=True)
    p.add_argument("--response-col", required=True)
    p.add_argument("--treatment-col", required=True)
    p.add_argument("--pihat-col", help="column with propensity scores (estimated when absent)")
    p.add_argument("--model", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--lmu", type=int, default=20, help="prognostic trees")
    p.add_argument("--ltau", type=int, default=20, help="treatment trees")
    p.add_argument("--sweeps", type=int, default=100)
    p.add_argument("--burnin", type=int, default=15)
    p.add_argument("--nmin-arm", type=int, default=20,
                   help="min treated and control rows per treatment-tree child")

    p = sub.add_parser("causal-predict", help="treatment-effect prediction")
    p.add_argument("--model", required=True)
    p.add_argument("--train", help="training CSV (required for --gp)")
    p.add_argument("--response-col")
    p.add_argument("--treatment-col")
    p.add_argument("--pihat-col")
    p.add_argument("--test", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--gp", action="store_true", help="extrapolate outside overlap with leaf GPs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    _add_gp_flags(p)

    p = sub.add_parser("bench", help="run a JSON experiment spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--seed", type=int, default=None, help="overrides the spec's seed")
    p.add_argument("--threads", type=int, default=1)

    sub.add_parser("version", help="print the package version")
    return parser


def _response_col(value):
    return int(value) if value is not None and value.lstrip("-").isdigit() else value


def _fit_config(args) -> FitConfig:
    return FitConfig(num_trees=args.trees, num_sweeps=args.sweeps, burn_in=args.burnin,
                     tree_prior=TreePrior(n_min=args.nmin))


def _gp_config(args) -> GPConfig:
    return GPConfig(theta=args.theta, tau_gp=args.tau_gp, subsample=args.gp_subsample,
                    hypercube_coverage=args.cube_coverage)


def _cmd_fit(args) -> int:
    data = read_csv(args.train, response_col=_response_col(args.response_col))
    draws = fit(data, _fit_config(args), RngStream(args.seed))
    save(draws, args.model)
    print(f"fitted {args.trees} trees x {args.sweeps} sweeps -> {args.model}")
    return EXIT_OK


def _write_prediction(path, res, exterior=None):
    table = {"point_id": np.arange(res.mean.shape[0], dtype=float),
             "mean": res.mean, "lo": res.lo, "hi": res.hi}
    if exterior is not None:
        table["exterior_any_leaf"] = exterior
    write_csv(path, table)


def _cmd_predict(args) -> int:
    test = read_csv(args.test, response_col=None)
    if args.baseline:
        if not args.train or args.response_col is None:
            raise UsageError("--baseline needs --train and --response-col to refit per fold")
        train = read_csv(args.train, response_col=_response_col(args.response_col))
        reg = ensemble_regressor(_fit_config(args))
        rng = RngStream(args.seed)
        if args.baseline == "jackknife+":
            res = jackknife_plus(reg, train, test, args.alpha, rng)
        else:
            res = cv_plus(reg, train, test, args.folds, args.alpha, rng)
        write_csv(args.out, {"point_id": np.arange(test.n, dtype=float),
                             "mean": res.point, "lo": res.lo, "hi": res.hi})
        print(f"{args.baseline} intervals for {test.n} points -> {args.out}")
        return EXIT_OK
    if not args.model:
        raise UsageError("predict needs --model (or --baseline)")
    draws = load(args.model)
    res = predict(draws, test, args.alpha, RngStream(args.seed))
    _write_prediction(args.out, res)
    print(f"predicted {test.n} points -> {args.out}")
    return EXIT_OK


def _cmd_gp_predict(args) -> int:
    if not args.train:
        raise UsageError("gp-predict requires --train: the leaf GPs condition on the "
                         "training data, which is not stored in the model file")
    draws = load(args.model)
    train = read_csv(args.train, response_col=_response_col(args.response_col))
    test = read_csv(args.test, response_col=None)
    res = predict_gp(draws, train, test, args.alpha, _gp_config(args), RngStream(args.seed))
    _write_prediction(args.out, res, exterior=res.exterior_frac)
    print(f"gp-predicted {test.n} points ({res.n_gp_leaves} leaf GPs, "
          f"{res.n_singular} singular fallbacks) -> {args.out}")
    return EXIT_OK


def _read_causal(args) -> CausalDataset:
    resp = _response_col(args.response_col)
    treat = _response_col(args.treatment_col)
    full = read_csv(args.train, response_col=None).X
    names = _header_names(args.train)
    idx = {}
    for label, value in (("response", resp), ("treatment", treat), ("pihat", _response_col(args.pihat_col) if args.pihat_col else None)):
        if value is None:
            continue
        if isinstance(value, str):
            if names is None or value not in names:
                raise DataError(f"no column named {value!r} in {args.train}")
            idx[label] = names.index(value)
        else:
            idx[label] = int(value)
    y = full[:, idx["response"]]
    z = full[:, idx["treatment"]]
    pihat = full[:, idx["pihat"]] if "pihat" in idx else None
    drop = sorted(idx.values())
    X = np.delete(full, drop, axis=1)
    return CausalDataset(X, z, y, pihat)


def _header_names(path):
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
    parts = [c.strip() for c in first.split(",")]
    try:
        [float(c) for c in parts]
        return None
    except ValueError:
        return parts


def _cmd_causal_fit(args) -> int:
    data = _read_causal(args)
    cfg = CausalConfig(num_prognostic_trees=args.lmu, num_treatment_trees=args.ltau,
                       num_sweeps=args.sweeps, burn_in=args.burnin, n_min_arm=args.nmin_arm)
    draws = fit_xbcf(data, cfg, RngStream(args.seed))
    save_causal(draws, args.model)
    print(f"fitted causal model ({args.lmu}+{args.ltau} trees x {args.sweeps} sweeps) "
          f"-> {args.model}")
    return EXIT_OK


def _cmd_causal_predict(args) -> int:
    draws = load_causal(args.model)
    test = read_csv(args.test, response_col=None)
    if args.gp:
        if not args.train or not args.response_col or not args.treatment_col:
            raise UsageError("--gp requires --train/--response-col/--treatment-col: "
                             "overlap GPs condition on the training data")
        train = _read_causal(args)
        res = predict_cate_gp(draws, train, test, args.alpha, _gp_config(args),
                              RngStream(args.seed))
        table = {"point_id": np.arange(test.n, dtype=float), "cate_mean": res.mean,
                 "lo": res.lo, "hi": res.hi, "nonoverlap_any_leaf": res.nonoverlap_frac}
    else:
        res = predict_cate(draws, test, args.alpha)
        table = {"point_id": np.arange(test.n, dtype=float), "cate_mean": res.mean,
                 "lo": res.lo, "hi": res.hi}
    write_csv(args.out, table)
    iv = res.ate_interval
    print(f"ate_mean {res.ate_mean!r} ate_lo {iv.lo!r} ate_hi {iv.hi!r} -> {args.out}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    rng = RngStream(args.seed) if args.seed is not None else None
    rows = run_experiment(args.spec, rng)
    print(f"bench wrote {len(rows)} report rows")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "version":
            print(__version__)
            return EXIT_OK
        handler = {
            "fit": _cmd_fit,
            "predict": _cmd_predict,
            "gp-predict": _cmd_gp_predict,
            "causal-fit": _cmd_causal_fit,
            "causal-predict": _cmd_causal_predict,
            "bench": _cmd_bench,
        }[args.command]
        return handler(args)
    except UsageError as e:
        print(f"error: usage: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ModelFormatError, OSError) as e:
        print(f"error: data: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as e:
        print(f"error: numerical: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
