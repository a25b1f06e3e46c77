"""Toy-data experiment protocols: method comparison table, parameter sweeps,
center-strategy comparison and learning-rate scaling.

Every replicate ``r`` of an experiment with master seed ``seed`` draws its
training set, test set and selection randomness from independent streams
``derive_seed(seed, r, 0 | 1 | 2)``, so results do not depend on execution
order or on the number of worker threads.
"""

from __future__ import annotations

import csv
import io
import os
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from epkr import linalg
from epkr.centers import build_fundamental_system
from epkr.data import Dataset, derive_seed, gen_toy, gen_toy_test, rmse
from epkr.errors import ConfigError
from epkr.estimators import fit_cbr_epkr, fit_epkr
from epkr.kernel import PolyKernel, clip, kernel_matrix
from epkr.selection import (
    CenterOptions,
    SelectionGrid,
    delta_grid,
    default_s_grid,
    kfold_cv,
    lambda_grid,
    theoretical_degree,
)

TOY_METHODS = ("GKR", "PKR", "EPKR", "EPKR1")
_METHOD_SPECS = {
    "GKR": ("gkr", "uniform-ball"),
    "PKR": ("pkr", "uniform-ball"),
    "EPKR": ("epkr", "uniform-ball"),
    "EPKR1": ("epkr", "first-samples"),
    "EPKRF": ("epkr", "equispaced-1d"),
    "EPKRG": ("epkr", "gaussian"),
    "CBR-EPKR": ("cbr-epkr", "uniform-ball"),
}


@dataclass
class ExperimentReport:
    """One row of a method-comparison table, averaged over replicates."""

    method: str
    param_s: int | None
    param_lambda: float | None
    param_delta: float | None
    train_rmse: float
    test_rmse: float
    train_seconds: float
    test_seconds: float
    sparsity: float
    replicates: int
    seed: int
    per_replicate: list[dict[str, Any]] = field(default_factory=list, repr=False)

    COLUMNS = (
        "method",
        "param_s",
        "param_lambda",
        "param_delta",
        "train_rmse",
        "test_rmse",
        "train_seconds",
        "test_seconds",
        "sparsity",
        "replicates",
        "seed",
    )

    def row(self) -> dict[str, Any]:
        return {c: getattr(self, c) for c in self.COLUMNS}


def _workers() -> int:
    return max(1, int(os.environ.get("EPKR_THREADS", "1")))


def _map(fn: Callable, items: Sequence, workers: int | None = None) -> list:
    n = workers or _workers()
    if n > 1 and len(items) > 1:
        with ThreadPoolExecutor(n) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def toy_replicate(seed: int, r: int, m: int, m_test: int, sigma_sq: float) -> tuple[Dataset, Dataset]:
    train = gen_toy(m, sigma_sq, derive_seed(seed, r, 0))
    test = gen_toy_test(m_test, derive_seed(seed, r, 1))
    return train, test


def toy_grid(method: str, m: int, d: int = 1, lambda_kind: str = "log", s_cap: int = 50) -> SelectionGrid:
    """The candidate grid the toy protocol uses for ``method``."""
    kind = _METHOD_SPECS[method][0] if method in _METHOD_SPECS else method
    s_values = default_s_grid(m, d, cap=s_cap)
    if kind == "epkr":
        return SelectionGrid(s_values=tuple(s_values))
    if kind == "gkr":
        return SelectionGrid(lambda_values=tuple(lambda_grid(lambda_kind)), delta_values=tuple(delta_grid()))
    return SelectionGrid(s_values=tuple(s_values), lambda_values=tuple(lambda_grid(lambda_kind)))


def _mode(values: Iterable[tuple]) -> tuple:
    counts = Counter(values)
    top = max(counts.values())
    return min(v for v, c in counts.items() if c == top)


def evaluate_method(
    method: str,
    train: Dataset,
    test: Dataset,
    grid: SelectionGrid,
    seed: int,
    k: int = 3,
) -> dict[str, Any]:
    """Select parameters by k-fold CV, refit, and time training and testing."""
    kind, strategy = _METHOD_SPECS[method]
    start = time.perf_counter()
    result = kfold_cv(train, grid, kind, k=k, seed=seed, centers=CenterOptions(strategy=strategy))
    train_seconds = time.perf_counter() - start
    model = result.model
    start = time.perf_counter()
    test_pred = model.predict(test.inputs)
    test_seconds = time.perf_counter() - start
    return {
        "params": result.params,
        "train_rmse": rmse(model.predict(train.inputs), train.targets),
        "test_rmse": rmse(test_pred, test.targets),
        "train_seconds": train_seconds,
        "fit_seconds": model.fit_seconds,
        "test_seconds": test_seconds,
        "sparsity": model.sparsity,
        "failures": len(result.failures),
    }


def run_toy_table(
    replicates: int = 10,
    seed: int = 0,
    *,
    m: int = 1000,
    m_test: int = 1000,
    sigma_sq: float = 0.1,
    k: int = 3,
    methods: Sequence[str] = TOY_METHODS,
    lambda_kind: str = "log",
    s_cap: int = 50,
    workers: int | None = None,
) -> list[ExperimentReport]:
    """Compare methods on the toy regression problem, one report per method.

    Training time includes the whole cross-validated grid search plus the
    final refit.
    """
    if replicates < 1:
        raise ConfigError("replicates must be at least 1")
    unknown = set(methods) - set(_METHOD_SPECS)
    if unknown:
        raise ConfigError(f"unknown toy methods: {sorted(unknown)}")
    grids = {meth: toy_grid(meth, m, 1, lambda_kind, s_cap) for meth in methods}

    def one(r: int) -> dict[str, dict[str, Any]]:
        train, test = toy_replicate(seed, r, m, m_test, sigma_sq)
        cv_seed = derive_seed(seed, r, 2)
        return {meth: evaluate_method(meth, train, test, grids[meth], cv_seed, k) for meth in methods}

    runs = _map(one, list(range(replicates)), workers)
    reports = []
    for meth in methods:
        rows = [run[meth] for run in runs]
        params = _mode(
            (row["params"].get("s"), row["params"].get("lam"), row["params"].get("delta")) for row in rows
        )
        reports.append(
            ExperimentReport(
                method=meth,
                param_s=params[0],
                param_lambda=params[1],
                param_delta=params[2],
                train_rmse=float(np.mean([row["train_rmse"] for row in rows])),
                test_rmse=float(np.mean([row["test_rmse"] for row in rows])),
                train_seconds=float(np.mean([row["train_seconds"] for row in rows])),
                test_seconds=float(np.mean([row["test_seconds"] for row in rows])),
                sparsity=float(np.mean([row["sparsity"] for row in rows])),
                replicates=replicates,
                seed=seed,
                per_replicate=rows,
            )
        )
    return reports


SWEEP_COLUMNS = (
    "variable",
    "value",
    "method",
    "s",
    "lambda",
    "mean_test_rmse",
    "std_test_rmse",
    "mean_test_mse",
    "verified_fraction",
    "replicates",
    "seed",
)


def _epkr_test_errors(
    train: Dataset,
    test: Dataset,
    s: int,
    lambdas: Sequence[float],
    center_seed: int,
    strategy: str = "uniform-ball",
    strict: bool = True,
) -> tuple[list[float], bool]:
    centers = build_fundamental_system(
        s, train.d, strategy, source=train.inputs, seed=center_seed, strict=strict
    )
    errs = []
    for lam in lambdas:
        model = fit_cbr_epkr(train, s, centers, lam, allow_unverified=not strict)
        errs.append(rmse(model.predict(test.inputs), test.targets))
    return errs, centers.verified


def _pkr_test_errors(train: Dataset, test: Dataset, s: int, lambdas: Sequence[float]) -> list[float]:
    kern = PolyKernel(s)
    lams = np.asarray(lambdas, dtype=np.float64)
    coefs = linalg.ridge_path(kernel_matrix(kern, train.inputs), train.m * lams, train.targets)
    preds = clip(kernel_matrix(kern, test.inputs, train.inputs) @ coefs, float(np.max(np.abs(train.targets))))
    return np.sqrt(np.mean((preds - test.targets[:, None]) ** 2, axis=0)).tolist()


def _sweep_rows(variable, values, method, s_of, lam_of, errors, verified, replicates, seed) -> list[dict]:
    errors = np.asarray(errors)  # (replicates, grid)
    verified = np.asarray(verified, dtype=float)
    rows = []
    for j, v in enumerate(values):
        rows.append(
            {
                "variable": variable,
                "value": v,
                "method": method,
                "s": s_of(v),
                "lambda": lam_of(v),
                "mean_test_rmse": float(np.mean(errors[:, j])),
                "std_test_rmse": float(np.std(errors[:, j])),
                "mean_test_mse": float(np.mean(errors[:, j] ** 2)),
                "verified_fraction": float(np.mean(verified[:, j])),
                "replicates": replicates,
                "seed": seed,
            }
        )
    return rows


def sweep_lambda(
    method: str,
    s: int,
    lambdas: Sequence[float],
    replicates: int = 10,
    seed: int = 0,
    *,
    m: int = 1000,
    m_test: int = 1000,
    sigma_sq: float = 0.1,
    workers: int | None = None,
) -> list[dict[str, Any]]:
    """Mean test RMSE against the regularization parameter at fixed degree ``s``.

    ``method`` is ``"cbr-epkr"`` (one center set per replicate, shared by all
    lambdas) or ``"pkr"``.
    """
    if method not in ("cbr-epkr", "pkr"):
        raise ConfigError("lambda sweeps support cbr-epkr and pkr")

    def one(r: int):
        train, test = toy_replicate(seed, r, m, m_test, sigma_sq)
        if method == "pkr":
            return _pkr_test_errors(train, test, s, lambdas), [True] * len(lambdas)
        errs, ok = _epkr_test_errors(train, test, s, lambdas, derive_seed(seed, r, 2))
        return errs, [ok] * len(lambdas)

    out = _map(one, list(range(replicates)), workers)
    return _sweep_rows(
        "lambda", list(lambdas), method, lambda v: s, lambda v: v,
        [o[0] for o in out], [o[1] for o in out], replicates, seed,
    )


def sweep_s(
    method: str,
    s_values: Sequence[int],
    replicates: int = 10,
    seed: int = 0,
    *,
    lam: float = 0.0,
    m: int = 1000,
    m_test: int = 1000,
    sigma_sq: float = 0.1,
    strategy: str = "uniform-ball",
    workers: int | None = None,
) -> list[dict[str, Any]]:
    """Mean test RMSE against the degree.

    EPKR centers for degrees beyond double-precision reach cannot pass the
    rank check; those points are fit on the last drawn (unverified) center set
    and reported with ``verified_fraction < 1``.
    """
    if method not in ("epkr", "cbr-epkr", "pkr"):
        raise ConfigError("s sweeps support epkr, cbr-epkr and pkr")
    if method == "pkr" and lam <= 0:
        raise ConfigError("pkr s sweeps need lam > 0")

    def one(r: int):
        train, test = toy_replicate(seed, r, m, m_test, sigma_sq)
        errs, oks = [], []
        for s in s_values:
            if method == "pkr":
                errs.append(_pkr_test_errors(train, test, s, [lam])[0])
                oks.append(True)
            else:
                e, ok = _epkr_test_errors(
                    train, test, s, [lam], derive_seed(seed, r, 2, s), strategy, strict=False
                )
                errs.append(e[0])
                oks.append(ok)
        return errs, oks

    out = _map(one, list(range(replicates)), workers)
    return _sweep_rows(
        "s", list(s_values), method, lambda v: v, lambda v: lam,
        [o[0] for o in out], [o[1] for o in out], replicates, seed,
    )


def sweep_m(
    m_values: Sequence[int],
    r: float = 4,
    replicates: int = 10,
    seed: int = 0,
    *,
    m_test: int = 1000,
    sigma_sq: float = 0.1,
    workers: int | None = None,
) -> list[dict[str, Any]]:
    """EPKR at the theoretical degree ``theoretical_degree(m, 1, r)`` for growing ``m``."""

    def one(rep: int):
        errs, oks = [], []
        for m in m_values:
            train, test = toy_replicate(seed, rep, m, m_test, sigma_sq)
            s = theoretical_degree(m, 1, r)
            e, ok = _epkr_test_errors(train, test, s, [0.0], derive_seed(seed, rep, 2, m))
            errs.append(e[0])
            oks.append(ok)
        return errs, oks

    out = _map(one, list(range(replicates)), workers)
    return _sweep_rows(
        "m", list(m_values), "epkr", lambda v: theoretical_degree(v, 1, r), lambda v: 0.0,
        [o[0] for o in out], [o[1] for o in out], replicates, seed,
    )


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def compare_centers(
    s: int,
    strategies: Sequence[str] = ("uniform-ball", "first-samples", "equispaced-1d", "gaussian"),
    replicates: int = 10,
    seed: int = 0,
    *,
    m: int = 1000,
    m_test: int = 1000,
    sigma_sq: float = 0.1,
    workers: int | None = None,
) -> dict[str, float]:
    """Mean EPKR test RMSE at degree ``s`` for each center strategy."""

    def one(r: int):
        train, test = toy_replicate(seed, r, m, m_test, sigma_sq)
        return [
            _epkr_test_errors(train, test, s, [0.0], derive_seed(seed, r, 2, i), strat)[0][0]
            for i, strat in enumerate(strategies)
        ]

    out = np.asarray(_map(one, list(range(replicates)), workers))
    return {strat: float(v) for strat, v in zip(strategies, out.mean(axis=0))}


def span_invariance_rms(data: Dataset, s: int, seeds: tuple[int, int] = (1, 2)) -> float:
    """RMS difference between EPKR training fits built on two independent center sets."""
    fits = []
    for sd in seeds:
        centers = build_fundamental_system(s, data.d, "uniform-ball", seed=sd)
        fits.append(fit_epkr(data, s, centers).decision(data.inputs))
    return rmse(fits[0], fits[1])


def write_csv(rows: Iterable[dict[str, Any]], columns: Sequence[str], fh=None) -> str | None:
    """Write rows with a fixed header to ``fh`` (or return the CSV text)."""
    target = fh if fh is not None else io.StringIO()
    writer = csv.DictWriter(target, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({c: ("" if row.get(c) is None else row.get(c)) for c in columns})
    return None if fh is not None else target.getvalue()


def reports_to_csv(reports: Sequence[ExperimentReport], fh=None) -> str | None:
    return write_csv((r.row() for r in reports), ExperimentReport.COLUMNS, fh)
