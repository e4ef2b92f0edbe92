"""Command-line interface: ``mrfa fit | predict | ci | bench``.

Exit codes are a stable contract: 0 success, 2 user or input error,
3 numeric failure, 4 capacity.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings

import numpy as np

from .config import CI_VARIANTS, RunConfig
from .errors import (
    CapacityError,
    ConvergenceError,
    DegeneratePointError,
    IllConditionedError,
    MRFAError,
    NumericError,
    SchemaError,
)
from .model import ExtrapolationWarning, FitResult, FittedModel, dumps

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_CAPACITY = 4


class InputError(MRFAError):
    """Malformed user input detected by the CLI itself."""


# -- CSV ingestion -----------------------------------------------------------

def read_csv(path):
    """Read a headed numeric CSV into ``(names, matrix)``.

    Empty cells, NaN and non-numeric text are rejected with the row and
    column that caused it; row numbers count the header as row 1.
    """
    try:
        fh = sys.stdin if path == "-" else open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc.strerror}") from None
    try:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: file is empty; a header row is required") from None
        names = [h.strip() for h in header]
        if not names or any(not h for h in names):
            raise InputError(f"{path}: header has an empty column name")
        if len(set(names)) != len(names):
            raise InputError(f"{path}: duplicate column names in header")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names):
                raise InputError(
                    f"{path}: row {lineno} has {len(row)} fields, expected {len(names)}")
            values = []
            for name, cell in zip(names, row):
                text = cell.strip()
                try:
                    v = float(text)
                except ValueError:
                    raise InputError(
                        f"{path}: row {lineno}, column {name!r}: {cell!r} is not a number"
                    ) from None
                if not math.isfinite(v):
                    raise InputError(
                        f"{path}: row {lineno}, column {name!r}: missing or non-finite value")
                values.append(v)
            rows.append(values)
    finally:
        if fh is not sys.stdin:
            fh.close()
    data = np.array(rows, dtype=float).reshape(len(rows), len(names))
    return names, data


def select_columns(names, data, wanted, path):
    """Columns ``wanted`` by name, in that order."""
    index = {n: j for j, n in enumerate(names)}
    missing = [w for w in wanted if w not in index]
    if missing:
        raise InputError(f"{path}: missing input columns {', '.join(missing)}")
    return data[:, [index[w] for w in wanted]]


def _fmt(v):
    return format(float(v), ".17g")


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline="", encoding="utf-8"), True


def _write_table(path, header, rows, footer=()):
    fh, own = _open_out(path)
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        for line in footer:
            fh.write(f"# {line}\n")
    finally:
        if own:
            fh.close()


def _group_label(g):
    return "{" + ",".join(map(str, g.u)) + "}@" + str(g.r)


def path_report_rows(result):
    header = ["step", "lambda", "rss", "s", "n_columns", "stable", "selected",
              "active_groups", "entered"]
    rows = []
    for i, pt in enumerate(result.path.points):
        rows.append([i, _fmt(pt.lam), _fmt(pt.rss), pt.s, pt.n_columns, int(pt.stable),
                     int(i == result.report.chosen),
                     " ".join(_group_label(g) for g in sorted(pt.active,
                                                              key=lambda g: (len(g.u), g.u, g.r))),
                     " ".join(_group_label(g) for g in pt.entered)])
    return header, rows


# -- configuration -------------------------------------------------------------

_FLAG_FIELDS = {
    "dmax": "d_max", "rmax": "r_max", "rho": "rho", "criterion": "criterion",
    "alpha": "alpha", "ci_variant": "ci_variant", "seed": "seed", "threads": "threads",
    "out": "out",
}


def build_config(args, base=None):
    """Defaults, then the config file (or ``base``), then explicit flags."""
    if getattr(args, "config", None):
        try:
            config = RunConfig.load(args.config)
        except OSError as exc:
            raise InputError(f"cannot read config file {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"config file {args.config} is not valid JSON: {exc}") from None
        except TypeError as exc:
            raise InputError(f"config file {args.config}: {exc}") from None
    else:
        config = base or RunConfig()
    overrides = {field: getattr(args, flag) for flag, field in _FLAG_FIELDS.items()
                 if getattr(args, flag, None) is not None}
    return config.with_overrides(**overrides)


def _load_model(path):
    """Model plus the run configuration stored alongside it, if any."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot open model file {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"model file is not valid JSON: {exc}") from None
    model = FittedModel.from_dict(data)
    stored = data.get("run_config") if isinstance(data, dict) else None
    config = RunConfig.from_dict(stored) if isinstance(stored, dict) else None
    return model, config


def _model_inputs(model):
    if model.input_names:
        return list(model.input_names)
    return [f"x{j}" for j in range(1, model.d + 1)]


# -- subcommands -----------------------------------------------------------------

def cmd_fit(args):
    config = build_config(args)
    names, data = read_csv(args.train)
    if args.response is None:
        raise InputError("no response column given; pass --response NAME")
    if args.response not in names:
        raise InputError(f"--response {args.response!r} is not a column of {args.train}")
    if data.shape[0] < 2:
        raise InputError(f"{args.train}: need at least two data rows")
    inputs = [n for n in names if n != args.response]
    if not inputs:
        raise InputError(f"{args.train}: no input columns besides the response")
    X = select_columns(names, data, inputs, args.train)
    y = data[:, names.index(args.response)]
    from .model import fit

    result = fit(X, y, config, input_names=inputs, response_name=args.response)
    out = config.out or "model.json"
    payload = result.model.to_dict()
    payload["run_config"] = config.to_dict()
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(dumps(payload))
    report = args.report or (os.path.splitext(out)[0] + "_path.csv")
    header, rows = path_report_rows(result)
    _write_table(report, header, rows)
    m = result.model
    print(f"fitted {len(result.path)} path points ({result.path.stop_reason}); "
          f"selected lambda={m.lam:.6g} s={m.s} by {m.criterion}; "
          f"wrote {out} and {report}", file=sys.stderr)
    return EXIT_OK


def cmd_predict(args):
    model, _ = _load_model(args.model)
    names, data = read_csv(args.test)
    inputs = _model_inputs(model)
    allowed = set(inputs) | {model.response_name, args.truth} - {None}
    extra = [n for n in names if n not in allowed]
    if extra:
        raise InputError(f"{args.test}: columns {', '.join(extra)} are not model inputs")
    X = select_columns(names, data, inputs, args.test)
    if X.shape[0]:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ExtrapolationWarning)
            y_hat, extrapolated = model.predict(X, return_extrapolation=True)
    else:
        y_hat, extrapolated = np.zeros(0), np.zeros(0, dtype=bool)
    rows = [[_fmt(v), int(e)] for v, e in zip(y_hat, extrapolated)]
    _write_table(args.out, ["y_hat", "extrapolated"], rows)
    return EXIT_OK


def cmd_ci(args):
    from .bench import coverage_metrics
    from .inference import intervals

    model, stored = _load_model(args.model)
    # the stored output path belongs to the fit run, never to this one
    config = build_config(args, base=stored.with_overrides(out="") if stored else None)
    inputs = _model_inputs(model)
    response = args.response or model.response_name
    if response is None:
        raise InputError("the model has no response name; pass --response NAME")
    tr_names, tr_data = read_csv(args.train)
    if response not in tr_names:
        raise InputError(f"--response {response!r} is not a column of {args.train}")
    Xtr = select_columns(tr_names, tr_data, inputs, args.train)
    ytr = tr_data[:, tr_names.index(response)]
    if Xtr.shape[0] != model.n:
        raise InputError(f"{args.train} has {Xtr.shape[0]} rows but the model was fitted "
                         f"on {model.n}")
    te_names, te_data = read_csv(args.test)
    if args.truth is not None and args.truth not in te_names:
        raise InputError(f"--truth {args.truth!r} is not a column of {args.test}")
    allowed = set(inputs) | {response, args.truth} - {None}
    extra = [n for n in te_names if n not in allowed]
    if extra:
        raise InputError(f"{args.test}: columns {', '.join(extra)} are not model inputs")
    Xte = select_columns(te_names, te_data, inputs, args.test)
    Xs_tr, _ = model.scale(Xtr)
    result = FitResult(model, None, None, np.clip(Xs_tr, 0.0, 1.0), ytr, config)
    rows, footer = [], []
    if Xte.shape[0]:
        Xs_te, _ = model.scale(Xte)
        ci = intervals(result, Xs_te, config.alpha, config.ci_variant, seed=config.seed)
        for yh, lo, hi, bad in zip(ci.y_hat, ci.lower, ci.upper, ci.flagged):
            rows.append([_fmt(yh), _fmt(lo), _fmt(hi), int(bad)])
        footer.append(f"variant={ci.variant} alpha={config.alpha:g} sigma2={ci.sigma2:.10g}"
                      + (" conservative=1" if ci.conservative else ""))
        if args.truth is not None:
            truth = te_data[:, te_names.index(args.truth)]
            ok = ~ci.flagged
            cov, width, score = coverage_metrics(ci.lower[ok], ci.upper[ok], truth[ok],
                                                 config.alpha)
            footer.append(f"coverage={cov:.6g}")
            footer.append(f"avg_width={width:.10g}")
            footer.append(f"avg_interval_score={score:.10g}")
            footer.append(f"flagged={int(ci.flagged.sum())}")
    _write_table(config.out or None, ["y_hat", "lower", "upper", "flagged"], rows, footer)
    return EXIT_OK


def cmd_bench(args):
    from .bench import format_table, run_benchmark, write_results

    config = build_config(args)
    results = [run_benchmark(args.name, args.n, args.n_test, seed, config, d=args.d,
                             with_ci=args.with_ci)
               for seed in range(config.seed, config.seed + args.repeats)]
    write_results(results, config.out or sys.stdout)
    print(format_table(results), file=sys.stderr)
    return EXIT_OK


# -- argument parsing --------------------------------------------------------------

def _add_common(p, fit_flags=True):
    p.add_argument("--config", help="JSON run configuration; explicit flags take precedence")
    if fit_flags:
        p.add_argument("--dmax", type=int, help="highest interaction order")
        p.add_argument("--rmax", type=int, help="highest resolution level")
        p.add_argument("--rho", type=float, help="geometric lambda ratio")
        p.add_argument("--criterion", help="det, aic, bic or cv:K")
        p.add_argument("--threads", type=int, help="worker threads (default: MRFA_THREADS or 1)")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--out", help="output path (default: stdout, or model.json for fit)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mrfa",
        description="Fit, predict and quantify uncertainty with multi-resolution "
                    "functional ANOVA emulators.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a model to a training CSV")
    p.add_argument("train", help="training CSV with a header row")
    p.add_argument("--response", help="name of the response column")
    p.add_argument("--report", help="path-report CSV (default: <out>_path.csv)")
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict at the rows of a test CSV")
    p.add_argument("model", help="model JSON written by 'fit'")
    p.add_argument("test", help="test CSV; columns matched by name")
    p.add_argument("--truth", help="optional column to ignore (for example a true response)")
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("ci", help="pointwise confidence intervals at test rows")
    p.add_argument("model", help="model JSON written by 'fit'")
    p.add_argument("train", help="the training CSV the model was fitted on")
    p.add_argument("test", help="test CSV; columns matched by name")
    p.add_argument("--response", help="response column of the training CSV "
                                      "(default: the name stored in the model)")
    p.add_argument("--truth", help="test column holding true values; adds a metrics footer")
    p.add_argument("--alpha", type=float, help="1 - nominal level (default 0.05)")
    p.add_argument("--ci-variant", choices=CI_VARIANTS, help="nuisance weights or correction")
    _add_common(p)
    p.set_defaults(func=cmd_ci)

    p = sub.add_parser("bench", help="run a built-in test function benchmark")
    p.add_argument("name", help="test function name")
    p.add_argument("--n", type=int, default=1000, help="training size")
    p.add_argument("--n-test", type=int, default=10_000, help="test size")
    p.add_argument("--d", type=int, help="input dimension (borehole only: pad with noise inputs)")
    p.add_argument("--repeats", type=int, default=1, help="seeds seed, seed+1, ...")
    p.add_argument("--with-ci", action="store_true", help="also score confidence intervals")
    p.add_argument("--alpha", type=float, help="1 - nominal level (default 0.05)")
    p.add_argument("--ci-variant", choices=CI_VARIANTS, help="nuisance weights or correction")
    _add_common(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CapacityError as exc:
        where = f" at {exc.group}" if exc.group is not None else ""
        print(f"mrfa: capacity limit{where}: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (ConvergenceError, NumericError, IllConditionedError, DegeneratePointError,
            np.linalg.LinAlgError) as exc:
        print(f"mrfa: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, SchemaError, MRFAError, ValueError) as exc:
        print(f"mrfa: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"mrfa: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
