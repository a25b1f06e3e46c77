"""Command-line experiment runner.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure (including failed diagnostics).
"""

from __future__ import annotations

import argparse
import contextlib
import json
import sys
from pathlib import Path

import numpy as np

from epkr import __version__
from epkr.centers import STRATEGY_ALIASES, poly_dim
from epkr.data import Dataset, gen_toy, load_csv, normalize_ball, rmse
from epkr.diagnostics import check_eig_bound, check_norm_equivalence
from epkr.errors import ConfigError, DataError, DimensionError, EpkrError, NumericalError
from epkr.estimators import Model
from epkr.experiments import (
    SWEEP_COLUMNS,
    TOY_METHODS,
    loglog_slope,
    reports_to_csv,
    run_toy_table,
    sweep_lambda,
    sweep_m,
    sweep_s,
    toy_grid,
    toy_replicate,
    write_csv,
)
from epkr.selection import (
    CenterOptions,
    SelectionGrid,
    default_s_grid,
    delta_grid,
    fit_candidate,
    holdout_select,
    kfold_cv,
    lambda_grid,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _open_out(path):
    if path in (None, "-"):
        return contextlib.nullcontext(sys.stdout)
    return open(path, "w", newline="")


def _load_training_data(args) -> Dataset:
    if args.toy is not None:
        m, sigma_sq = args.toy
        return gen_toy(int(m), float(sigma_sq), args.seed)
    if args.data is None:
        raise ConfigError("give a data file or --toy M SIGMA2")
    data = load_csv(args.data, has_header=args.header)
    if not args.no_normalize:
        data, _ = normalize_ball(data)
    return data


def cmd_fit(args) -> int:
    data = _load_training_data(args)
    method = args.method
    centers = CenterOptions(strategy=STRATEGY_ALIASES[args.centers])
    if args.select:
        if method == "gkr":
            grid = SelectionGrid(lambda_values=tuple(lambda_grid(args.lambda_grid)), delta_values=tuple(delta_grid()))
        else:
            s_values = (args.s,) if args.s else tuple(default_s_grid(data.m, data.d, cap=args.s_cap))
            lams = (args.lam,) if args.lam is not None else tuple(lambda_grid(args.lambda_grid))
            grid = SelectionGrid(s_values=s_values, lambda_values=() if method == "epkr" else lams)
        if args.select == "cv":
            result = kfold_cv(data, grid, method, k=args.folds, seed=args.seed, centers=centers)
        else:
            result = holdout_select(data, grid, method, seed=args.seed, centers=centers)
        model = result.model
        print(f"Selected: {json.dumps(result.params, sort_keys=True)}")
    else:
        params = {}
        if method in ("epkr", "cbr-epkr", "pkr"):
            if args.s is None:
                raise ConfigError(f"{method} needs --s (or --select)")
            params["s"] = args.s
            if method in ("epkr", "cbr-epkr"):
                n = poly_dim(args.s, data.d)
                if n > data.m and not args.force:
                    raise ConfigError(f"n = {n} centers exceed m = {data.m} samples (use --force)")
        if method != "epkr":
            if args.lam is None:
                raise ConfigError(f"{method} needs --lam (or --select)")
            params["lam"] = args.lam
        if method == "gkr":
            if args.delta is None:
                raise ConfigError("gkr needs --delta (or --select)")
            params["delta"] = args.delta
        model = fit_candidate(method, data, params, args.seed, centers, force=args.force)

    train_rmse = rmse(model.predict(data.inputs), data.targets)
    if args.output:
        Path(args.output).write_text(json.dumps(model.to_dict(), indent=2, sort_keys=True) + "\n")
    print(f"TrainRMSE: {train_rmse:.17g}")
    return 0


def _read_model(path) -> Model:
    try:
        return Model.from_dict(json.loads(Path(path).read_text()))
    except FileNotFoundError as exc:
        raise DataError(f"{path}: no such model file") from exc
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, EpkrError):
            raise
        raise DataError(f"{path}: corrupt model file ({exc})") from exc


def cmd_predict(args) -> int:
    model = _read_model(args.model)
    values = load_csv(args.data, has_header=args.header, target=False)
    d = model.dimension
    if values.shape[1] == d + 1:
        x, y = values[:, :-1], values[:, -1]
    elif values.shape[1] == d:
        x, y = values, None
    else:
        raise DimensionError(f"data has {values.shape[1]} columns; model expects {d} inputs (+ optional target)")
    if model.normalization is not None:
        x = model.normalization.apply(x)
    pred = model.predict(x, clipped=not args.no_clip)
    report = sys.stdout if args.output else sys.stderr
    with _open_out(args.output) as fh:
        fh.write("prediction\n")
        for p in pred:
            fh.write(f"{p:.17g}\n")
    if y is not None:
        print(f"TestRMSE: {rmse(pred, y):.17g}", file=report)
    return 0


def cmd_toy_table(args) -> int:
    methods = [m.strip() for m in args.methods.split(",")]
    reports = run_toy_table(
        args.replicates,
        args.seed,
        m=args.m,
        m_test=args.m_test,
        sigma_sq=args.sigma2,
        k=args.folds,
        methods=methods,
        lambda_kind=args.lambda_grid,
    )
    with _open_out(args.output) as fh:
        reports_to_csv(reports, fh)
    if args.json:
        detail = [{**r.row(), "per_replicate": r.per_replicate} for r in reports]
        Path(args.json).write_text(json.dumps(detail, indent=2, sort_keys=True, default=float) + "\n")
    return 0


def _parse_values(text: str | None, cast):
    if text is None:
        return None
    return [cast(v) for v in text.split(",") if v.strip()]


def cmd_sweep(args) -> int:
    common = dict(replicates=args.replicates, seed=args.seed, sigma_sq=args.sigma2)
    if args.over == "lambda":
        lams = _parse_values(args.grid, float) or lambda_grid(args.lambda_grid)
        s = args.s
        if s is None:
            train, _ = toy_replicate(args.seed, 0, args.m, args.m_test, args.sigma2)
            s = kfold_cv(train, toy_grid("EPKR", args.m), "epkr", k=3, seed=args.seed).params["s"]
            print(f"CV-selected s = {s}", file=sys.stderr)
        rows = sweep_lambda(args.method, s, lams, m=args.m, m_test=args.m_test, **common)
    elif args.over == "s":
        s_values = _parse_values(args.grid, int) or list(range(1, 51))
        rows = sweep_s(
            args.method, s_values, lam=args.lam or 0.0, m=args.m, m_test=args.m_test,
            strategy=STRATEGY_ALIASES[args.centers], **common,
        )
    else:
        if args.method != "epkr":
            raise ConfigError("m sweeps run EPKR at the theoretical degree")
        m_values = _parse_values(args.grid, int) or [250, 500, 1000, 2000, 4000]
        rows = sweep_m(m_values, r=args.r, m_test=args.m_test, **common)
        print(
            f"log-log slope: rmse {loglog_slope(m_values, [r['mean_test_rmse'] for r in rows]):.4f}, "
            f"mse {loglog_slope(m_values, [r['mean_test_mse'] for r in rows]):.4f}",
            file=sys.stderr,
        )
    with _open_out(args.output) as fh:
        write_csv(rows, SWEEP_COLUMNS, fh)
    return 0


def _kv(items: list[str] | None) -> dict[str, int]:
    out = {}
    for item in items or []:
        key, _, value = item.partition("=")
        if not value:
            raise ConfigError(f"expected key=value, got {item!r}")
        out[key.strip()] = int(value)
    return out


def eig_battery(d: int, s: int, seeds: int) -> dict:
    reports = [check_eig_bound(s, d, seed) for seed in range(seeds)]
    failing = [r.seed for r in reports if not r.passed]
    return {
        "d": d,
        "s": s,
        "n": reports[0].n,
        "bound": reports[0].bound,
        "trials": seeds,
        "violations": len(failing),
        "min_observed": min(r.observed for r in reports),
        "failing_seeds": failing,
        "passed": not failing,
    }


def norm_battery(s: int, m: int | None, seeds: int, min_fraction: float = 0.9) -> dict:
    m = m if m is not None else 100 * (s + 1)
    reports = [check_norm_equivalence(s, m, seed) for seed in range(seeds)]
    in_bounds = [r.passed for r in reports]
    fraction = float(np.mean(in_bounds))
    rank_ok = all(r.full_rank for r in reports if r.passed)
    return {
        "s": s,
        "m": m,
        "trials": seeds,
        "fraction_in_bounds": fraction,
        "full_rank_when_passing": rank_ok,
        "ratios": [r.ratio for r in reports],
        "failing_seeds": [r.seed for r in reports if not r.passed],
        "passed": fraction >= min_fraction and rank_ok,
    }


def cmd_diagnostics(args) -> int:
    eig_cases, norm_cases = [], []
    if args.eig is None and args.norm_equiv is None:
        eig_cases = [(d, s, args.seeds) for d in (2, 3) for s in (1, 2, 3)]
        norm_cases = [(s, None, args.seeds) for s in (1, 2, 3)]
    if args.eig is not None:
        kv = _kv(args.eig)
        eig_cases = [(kv.get("d", 2), kv.get("s", 1), kv.get("seeds", args.seeds))]
    if args.norm_equiv is not None:
        kv = _kv(args.norm_equiv)
        norm_cases = [(kv.get("s", 1), kv.get("m"), kv.get("seeds", args.seeds))]

    report = {
        "eig_bound": [eig_battery(d, s, n) for d, s, n in eig_cases],
        "norm_equivalence": [norm_battery(s, m, n) for s, m, n in norm_cases],
    }
    report["passed"] = all(c["passed"] for c in report["eig_bound"] + report["norm_equivalence"])
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.output:
        Path(args.output).write_text(text + "\n")
    else:
        print(text)
    for c in report["eig_bound"]:
        if not c["passed"]:
            print(f"FAIL eig_bound d={c['d']} s={c['s']}: {c['violations']}/{c['trials']} violations", file=sys.stderr)
    for c in report["norm_equivalence"]:
        if not c["passed"]:
            print(
                f"FAIL norm_equivalence s={c['s']} m={c['m']}: {c['fraction_in_bounds']:.2f} in bounds",
                file=sys.stderr,
            )
    return 0 if report["passed"] else NumericalError.exit_code


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="epkr", description="Efficient polynomial kernel regression experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="fit one model and write it as JSON")
    src = f.add_mutually_exclusive_group()
    src.add_argument("--data", help="CSV file, last column is the target")
    src.add_argument("--toy", nargs=2, type=float, metavar=("M", "SIGMA2"), help="generate toy data")
    f.add_argument("--header", action="store_true", help="skip the first CSV line")
    f.add_argument("--no-normalize", action="store_true", help="use raw CSV inputs")
    f.add_argument("--method", choices=("epkr", "pkr", "cbr-epkr", "gkr"), default="epkr")
    f.add_argument("--s", type=int)
    f.add_argument("--lam", type=float)
    f.add_argument("--delta", type=float)
    f.add_argument("--select", choices=("cv", "holdout"))
    f.add_argument("--folds", type=int, default=3)
    f.add_argument("--s-cap", type=int, default=50)
    f.add_argument("--lambda-grid", choices=("log", "arithmetic"), default="log")
    f.add_argument("--centers", choices=tuple(STRATEGY_ALIASES), default="uniform")
    f.add_argument("--force", action="store_true", help="allow more centers than samples")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("-o", "--output")
    f.set_defaults(func=cmd_fit)

    pr = sub.add_parser("predict", help="apply a model file to a CSV file")
    pr.add_argument("model")
    pr.add_argument("data")
    pr.add_argument("--header", action="store_true")
    pr.add_argument("--no-clip", action="store_true")
    pr.add_argument("-o", "--output")
    pr.set_defaults(func=cmd_predict)

    t = sub.add_parser("toy-table", help="compare GKR, PKR, EPKR, EPKR1 on toy data")
    t.add_argument("--replicates", type=int, default=10)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--m", type=int, default=1000)
    t.add_argument("--m-test", type=int, default=1000)
    t.add_argument("--sigma2", type=float, default=0.1)
    t.add_argument("--folds", type=int, default=3)
    t.add_argument("--methods", default=",".join(TOY_METHODS))
    t.add_argument("--lambda-grid", choices=("log", "arithmetic"), default="log")
    t.add_argument("-o", "--output")
    t.add_argument("--json", help="also write per-replicate details as JSON")
    t.set_defaults(func=cmd_toy_table)

    sw = sub.add_parser("sweep", help="test error against lambda, s or m")
    sw.add_argument("over", choices=("lambda", "s", "m"))
    sw.add_argument("--method", choices=("epkr", "cbr-epkr", "pkr"), default="epkr")
    sw.add_argument("--grid", help="comma-separated values of the swept variable")
    sw.add_argument("--lambda-grid", choices=("log", "arithmetic"), default="log")
    sw.add_argument("--s", type=int, help="fixed degree for lambda sweeps (default: CV-selected)")
    sw.add_argument("--lam", type=float, help="fixed lambda for s sweeps")
    sw.add_argument("--r", type=float, default=4, help="smoothness for the theoretical degree")
    sw.add_argument("--centers", choices=tuple(STRATEGY_ALIASES), default="uniform")
    sw.add_argument("--replicates", type=int, default=10)
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--m", type=int, default=1000)
    sw.add_argument("--m-test", type=int, default=1000)
    sw.add_argument("--sigma2", type=float, default=0.1)
    sw.add_argument("-o", "--output")
    sw.set_defaults(func=cmd_sweep)

    dg = sub.add_parser("diagnostics", help="eigenvalue-bound and norm-equivalence batteries")
    dg.add_argument("--eig", nargs="*", metavar="KEY=VALUE", help="e.g. d=2 s=2 seeds=100")
    dg.add_argument("--norm-equiv", nargs="*", metavar="KEY=VALUE", help="e.g. s=2 m=600 seeds=100")
    dg.add_argument("--seeds", type=int, default=100)
    dg.add_argument("-o", "--output")
    dg.set_defaults(func=cmd_diagnostics)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return args.func(args)
    except EpkrError as exc:
        print(f"epkr: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"epkr: error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
