"""Command-line entry point: ``spectest {test,simulate,bench}``.

Exit codes: 0 ok, 1 usage error, 2 degenerate data, 3 solver non-convergence.
"""
import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from .baselines import BASELINES, run_baseline
from .errors import ConvergenceError, DegenerateDataError
from .model import Dataset
from .simulation import DGP_IDS, TESTS, DgpSpec, McConfig, run_mc, table1_cells, time_profile
from .svm import SvmConfig
from .testing import MULTIPLIERS, BootstrapConfig, SplitPlan, run_test

EXIT_OK, EXIT_USAGE, EXIT_DEGENERATE, EXIT_CONVERGENCE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def load_csv(path, response_column):
    """Read a headered numeric CSV; the named column becomes the response."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    if response_column not in header:
        raise ValueError(f"{path}: response column {response_column!r} not found in {header}")
    if len(rows) < 2:
        raise ValueError(f"{path}: no data rows")
    values = np.empty((len(rows) - 1, len(header)))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}: row {i} has {len(row)} fields, expected {len(header)}")
        for j, cell in enumerate(row):
            try:
                values[i - 2, j] = float(cell)
            except ValueError:
                raise ValueError(
                    f"{path}: non-numeric value {cell!r} at row {i}, column {header[j]!r}") from None
    k = header.index(response_column)
    X = np.delete(values, k, axis=1)
    return Dataset(X, values[:, k])


def write_csv(path, data, response_column="y", names=None):
    """Write a Dataset as CSV (covariates then response), full float precision."""
    names = names or [f"x{j + 1}" for j in range(data.q)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(names) + [response_column])
        for xi, yi in zip(data.X, data.y):
            w.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])


def _levels(text):
    try:
        levels = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise UsageError(f"--levels must be comma-separated numbers, got {text!r}") from None
    if not levels or any(not 0 < a < 1 for a in levels):
        raise UsageError("--levels must lie in (0, 1)")
    return levels


def _sigma(text):
    if text == "median":
        return "median"
    try:
        s = float(text)
    except ValueError:
        raise UsageError(f"--sigma must be 'median' or a positive number, got {text!r}") from None
    if not (np.isfinite(s) and s > 0):
        raise UsageError("--sigma must be positive")
    return s


def _seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("SPECTEST_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"SPECTEST_SEED must be an integer, got {env!r}") from None


def _emit(text, output):
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(output, "w") as fh:
            fh.write(text)


def _rows_to_csv(rows, columns):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _add_common(p):
    p.add_argument("--estimator", choices=("ols", "lasso"), default="ols")
    p.add_argument("--nu", type=float, default=0.5)
    p.add_argument("--sigma", default="median", help="'median' or a fixed bandwidth")
    p.add_argument("--bootstrap", type=int, default=500, metavar="B")
    p.add_argument("--multiplier", choices=MULTIPLIERS, default="mammen")
    p.add_argument("--levels", default="0.10,0.05,0.01")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", default=None)
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser():
    parser = _Parser(prog="spectest", description="SVM-direction specification tests")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("test", help="test a linear model on a CSV file")
    t.add_argument("--input", required=True)
    t.add_argument("--response", required=True)
    t.add_argument("--variant", choices=("nusvm", "ocsvm") + BASELINES, default="nusvm")
    t.add_argument("--train-frac", type=float, default=0.6)
    t.add_argument("--intercept", action="store_true")
    _add_common(t)

    s = sub.add_parser("simulate", help="Monte-Carlo size/power table")
    s.add_argument("--dgp", default="1", help=f"comma-separated ids from {DGP_IDS}")
    s.add_argument("--q", type=int, default=10)
    s.add_argument("--n", default="400", help="comma-separated sample sizes")
    s.add_argument("--c", type=float, default=0.25)
    s.add_argument("--reps", type=int, default=1000)
    s.add_argument("--variant", default="nusvm,ocsvm", help=f"comma-separated from {TESTS}")
    s.add_argument("--train-frac", type=float, default=0.1)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--preset", choices=("table1", "table2"), default=None)
    _add_common(s)

    b = sub.add_parser("bench", help="bootstrap running-time profile")
    b.add_argument("--variant", default="nusvm,ocsvm,kcm")
    b.add_argument("--n-grid", default="200,400,800")
    b.add_argument("--reps", type=int, default=5)
    b.add_argument("--q", type=int, default=10)
    b.add_argument("--stage", choices=("bootstrap", "total"), default="bootstrap")
    _add_common(b)
    return parser


def _ints(text, flag):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{flag} must be comma-separated integers") from None
    if not vals or any(v < 1 for v in vals):
        raise UsageError(f"{flag} values must be positive")
    return vals


def _tests(text):
    tests = tuple(t.strip() for t in text.split(",") if t.strip())
    bad = [t for t in tests if t not in TESTS]
    if not tests or bad:
        raise UsageError(f"unknown variant(s) {bad}; choose from {TESTS}")
    return tests


def _check_common(args):
    if not 0 < args.nu <= 1:
        raise UsageError("--nu must lie in (0, 1]")
    if args.bootstrap < 1:
        raise UsageError("--bootstrap must be at least 1")
    if hasattr(args, "train_frac") and not 0 < args.train_frac < 1:
        raise UsageError("--train-frac must lie in (0, 1)")


def cmd_test(args):
    _check_common(args)
    levels = _levels(args.levels)
    sigma = _sigma(args.sigma)
    seed = _seed(args)
    data = load_csv(args.input, args.response)
    if args.intercept:
        data = Dataset(data.X, data.y, intercept=True)
    boot = BootstrapConfig(args.bootstrap, args.multiplier, seed, levels)
    if args.variant in BASELINES:
        res = run_baseline(data, args.variant, args.estimator, boot,
                           None if sigma == "median" else sigma)
    else:
        res = run_test(data, args.variant, args.estimator, sigma, SvmConfig(nu=args.nu), boot,
                       SplitPlan(args.train_frac, seed))
    d = res.to_dict()
    if args.format == "json":
        text = json.dumps(d, indent=2) + "\n"
    else:
        flat = {k: (json.dumps(v) if isinstance(v, dict) else v) for k, v in d.items()}
        text = _rows_to_csv([flat], list(flat))
    _emit(text, args.output)
    return EXIT_OK


def cmd_simulate(args):
    _check_common(args)
    levels = _levels(args.levels)
    sigma = _sigma(args.sigma)
    tests = _tests(args.variant)
    if args.reps < 1:
        raise UsageError("--reps must be at least 1")
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    ns = _ints(args.n, "--n")
    if args.preset:
        # OLS tables: DGP1-5 at n = 200 and 400, all five tests
        dgps = table1_cells(10 if args.preset == "table1" else 20, (200, 400))
        tests = TESTS
    else:
        ids = [i.strip() for i in args.dgp.split(",") if i.strip()]
        bad = [i for i in ids if i not in DGP_IDS]
        if bad or not ids:
            raise UsageError(f"unknown DGP id(s) {bad}; choose from {DGP_IDS}")
        try:
            dgps = [DgpSpec(i, args.q, n, args.c) for i in ids for n in ns]
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    mc = McConfig(R=args.reps, levels=levels, B=args.bootstrap, tests=tests, workers=args.workers,
                  base_seed=_seed(args), estimator=args.estimator,
                  train_fraction=args.train_frac, nu=args.nu, multiplier=args.multiplier,
                  sigma=sigma)
    report = run_mc(mc, dgps)
    _emit(report.to_csv() if args.format == "csv" else report.to_json() + "\n", args.output)
    return EXIT_OK


def cmd_bench(args):
    _check_common(args)
    tests = _tests(args.variant)
    grid = _ints(args.n_grid, "--n-grid")
    if len(grid) < 2:
        raise UsageError("--n-grid needs at least two sizes")
    if args.reps < 1:
        raise UsageError("--reps must be at least 1")
    rows, exps = time_profile(tests, tuple(grid), args.reps, args.q, args.bootstrap,
                              _seed(args), args.stage)
    if args.format == "csv":
        text = _rows_to_csv(rows, ["test", "n", "seconds", "reps", "exponent"])
    else:
        text = json.dumps({"rows": rows, "exponents": exps}, indent=2) + "\n"
    _emit(text, args.output)
    return EXIT_OK


COMMANDS = {"test": cmd_test, "simulate": cmd_simulate, "bench": cmd_bench}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"spectest: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateDataError as exc:
        print(f"spectest: degenerate data: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ConvergenceError as exc:
        print(f"spectest: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ValueError, OSError) as exc:
        print(f"spectest: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
