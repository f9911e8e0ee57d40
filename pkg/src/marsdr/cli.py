"""Command-line entry point: ``marsdr {fit,predict,sdr,simulate,classify}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import drmars, mars, simbench
from .data import fit_standardization, load_csv, load_features, write_csv
from .errors import DataError, DimensionError, ModelFormatError, NumericalError
from .serialize import MARS, ModelFile, load_model, save_model

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3

log = logging.getLogger("marsdr")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dim(text: str):
    if text == "auto":
        return "auto"
    try:
        d = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a positive integer, got {text!r}")
    if d < 1:
        raise argparse.ArgumentTypeError("dimension must be at least 1")
    return d


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _response(text: str):
    return int(text) if text.lstrip("-").isdigit() else text


def _add_mars_flags(p: argparse.ArgumentParser):
    p.add_argument("--degree", type=_positive, default=2, help="maximum interaction degree")
    p.add_argument("--max-terms", type=_positive, default=None,
                   help="forward-pass term limit, intercept included (default 21)")
    p.add_argument("--penalty", type=float, default=None,
                   help="GCV cost per knot (default 3, or 2 when --degree 1)")


def _config(args) -> mars.MarsConfig:
    if args.penalty is not None and args.penalty < 0:
        raise UsageError("--penalty must be non-negative")
    return mars.MarsConfig(max_terms=args.max_terms, max_degree=args.degree,
                           gcv_penalty=args.penalty)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="marsdr", description="MARS with OPG dimension reduction")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit a model and write it as JSON")
    p.add_argument("--data", required=True)
    p.add_argument("--response", type=_response, default=-1,
                   help="response column name or 0-based index (default: last)")
    p.add_argument("--mode", choices=(drmars.REDUCED, drmars.COMBINED, MARS), default=drmars.REDUCED)
    p.add_argument("--dim", type=_dim, default="auto", help="'auto' or a fixed dimension")
    p.add_argument("--d-max", type=_positive, default=drmars.DEFAULT_D_MAX)
    p.add_argument("--folds", type=_positive, default=10)
    _add_mars_flags(p)
    p.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=True,
                   help="scale covariates to mean 0, sd 1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=_positive, default=1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("predict", help="predict from a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--response", type=_response, default=None,
                   help="drop this column before predicting")
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")

    p = sub.add_parser("sdr", help="OPG directions, eigenvalues and CV table")
    p.add_argument("--data", required=True)
    p.add_argument("--response", type=_response, default=-1)
    p.add_argument("--dim", type=_dim, default="auto")
    p.add_argument("--d-max", type=_positive, default=drmars.DEFAULT_D_MAX)
    p.add_argument("--folds", type=_positive, default=10)
    _add_mars_flags(p)
    p.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=True,
                   help="scale covariates to mean 0, sd 1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=_positive, default=1)
    p.add_argument("--out", required=True,
                   help="prefix for <out>_directions.csv, <out>_eigenvalues.csv, <out>_cv.csv")

    p = sub.add_parser("simulate", help="replicated simulation benchmark")
    p.add_argument("--model-id", choices=simbench.MODELS, required=True)
    p.add_argument("--p", type=_positive, default=50)
    p.add_argument("--n", type=_positive, default=500)
    p.add_argument("--n-test", type=_positive, default=1000)
    p.add_argument("--dist", choices=simbench.DISTRIBUTIONS, default="uniform")
    p.add_argument("--noise-sd", type=float, default=0.5)
    p.add_argument("--reps", type=_positive, default=20)
    p.add_argument("--methods", default=",".join(simbench.METHODS),
                   help="comma-separated subset of " + ",".join(simbench.METHODS))
    _add_mars_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=_positive, default=1)
    p.add_argument("--timing", action="store_true", help="add a wall-time column")
    p.add_argument("--out", required=True)

    p = sub.add_parser("classify", help="0/1 labels from a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--response", type=_response, default=None,
                   help="label column; when given, the misclassification rate is printed")
    p.add_argument("--out", default=None)
    return parser


def _cmd_fit(args) -> int:
    ds = load_csv(args.data, args.response)
    cfg = _config(args)
    meta = {"n": ds.n, "p": ds.p, "seed": args.seed, "data": str(args.data),
            "column_names": list(ds.column_names) if ds.column_names else None,
            "response_name": ds.response_name}
    if args.mode == MARS:
        params = fit_standardization(ds.X) if args.standardize else None
        X = ds.X if params is None else params.apply(ds.X)
        model = mars.fit(X, ds.y, cfg)
        save_model(args.out, ModelFile(model, params, meta))
        log.info("MARS: %d terms, GCV %.6g", len(model.terms), model.gcv)
        return EXIT_OK
    fit = drmars.fit_drmars if args.mode == drmars.REDUCED else drmars.fit_combined
    model = fit(ds.X, ds.y, args.dim, cfg, seed=args.seed, standardize=args.standardize,
                d_max=min(args.d_max, ds.p), folds=args.folds, threads=args.threads)
    save_model(args.out, ModelFile(model, None, meta))
    log.info("%s: d=%d, %d inner terms", args.mode, model.sdr.chosen_d, len(model.inner.terms))
    return EXIT_OK


def _features(mf: ModelFile, path, response) -> np.ndarray:
    return load_features(path, mf.input_dim, drop_column=response)


def _write_column(path, name, values):
    if path is None:
        sys.stdout.write(name + "\n")
        for v in values:
            sys.stdout.write(f"{v:.17g}\n")
    else:
        write_csv(path, {name: values})


def _cmd_predict(args) -> int:
    mf = load_model(args.model)
    X = _features(mf, args.data, args.response)
    _write_column(args.out, "prediction", mf.predict(X))
    return EXIT_OK


def _cmd_classify(args) -> int:
    mf = load_model(args.model)
    X = _features(mf, args.data, args.response)
    labels = drmars.classify(mf, X, args.threshold)
    _write_column(args.out, "label", labels)
    if args.response is not None:
        truth = load_csv(args.data, args.response).y
        print(f"misclassification rate: {simbench.mcr(labels, truth):.6f}", file=sys.stderr)
    return EXIT_OK


def _cmd_sdr(args) -> int:
    ds = load_csv(args.data, args.response)
    cfg = _config(args)
    model = drmars.fit_drmars(ds.X, ds.y, args.dim, cfg, seed=args.seed,
                              standardize=args.standardize, d_max=min(args.d_max, ds.p),
                              folds=args.folds, threads=args.threads)
    sdr = model.sdr
    names = ds.column_names or tuple(f"x{j}" for j in range(ds.p))
    cols = {"variable": np.arange(ds.p)}
    cols.update({f"beta{k + 1}": sdr.directions[:, k] for k in range(sdr.chosen_d)})
    write_csv(f"{args.out}_directions.csv", cols)
    write_csv(f"{args.out}_eigenvalues.csv",
              {"index": np.arange(1, sdr.eigenvalues.size + 1), "eigenvalue": sdr.eigenvalues})
    if sdr.cv_table is not None:
        write_csv(f"{args.out}_cv.csv", {"d": [d for d, _ in sdr.cv_table],
                                         "cv_r2": [v for _, v in sdr.cv_table]})
    print(f"chosen d = {sdr.chosen_d}; variables: {', '.join(names)}", file=sys.stderr)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    bad = [m for m in methods if m not in simbench.METHODS]
    if bad or not methods:
        raise UsageError(f"unknown method(s) {bad}; choose from {', '.join(simbench.METHODS)}")
    if args.noise_sd < 0:
        raise UsageError("--noise-sd must be non-negative")
    try:
        spec = simbench.SimSpec(args.model_id, args.p, args.n, args.n_test, args.dist,
                                args.noise_sd, args.seed, args.reps)
    except (ValueError, DimensionError) as exc:
        raise UsageError(str(exc)) from exc
    report = simbench.run_replications(spec, methods, _config(args), threads=args.threads)
    report.to_csv(args.out, timing=args.timing)
    print(report.summary(), file=sys.stderr)
    return EXIT_OK


COMMANDS = {"fit": _cmd_fit, "predict": _cmd_predict, "sdr": _cmd_sdr,
            "simulate": _cmd_simulate, "classify": _cmd_classify}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help or a usage error
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"marsdr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DimensionError, ModelFormatError, OSError) as exc:
        print(f"marsdr: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"marsdr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"marsdr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
