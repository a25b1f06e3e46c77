"""Parameter rules, candidate grids, k-fold cross-validation and hold-out selection."""

from __future__ import annotations

import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from epkr import linalg
from epkr.linalg import RIDGE_RESIDUAL_RTOL
from epkr.centers import build_fundamental_system, poly_dim
from epkr.data import Dataset, derive_seed, rmse, split
from epkr.errors import ConfigError, EpkrError, NumericalError
from epkr.estimators import Model, fit_cbr_epkr, fit_epkr, fit_gkr, fit_pkr
from epkr.kernel import GaussKernel, PolyKernel, clip, kernel_matrix

METHODS = ("epkr", "cbr-epkr", "pkr", "gkr")

# stream labels for derive_seed
_FOLDS, _SPLIT, _CENTERS = 1, 2, 3


def _ceil_root(m: int, p: float) -> int:
    """Smallest integer ``s >= 1`` with ``s**p >= m``, i.e. ``ceil(m ** (1/p))``."""
    if m <= 1:
        return 1
    s = max(1, math.ceil(m ** (1.0 / p)))
    if float(p).is_integer():
        k = int(p)
        while s > 1 and (s - 1) ** k >= m:
            s -= 1
        while s**k < m:
            s += 1
    return s


def theoretical_degree(m: int, d: int, r: float) -> int:
    """Degree ``ceil(m ** (1 / (d + 2r)))`` that is rate-optimal for smoothness ``r``."""
    if m < 1 or d < 1 or r < 0:
        raise ConfigError("theoretical_degree needs m >= 1, d >= 1, r >= 0")
    return _ceil_root(m, d + 2 * r)


def lambda_upper_bound(m: int, d: int, r: float) -> float:
    """Largest ridge parameter that keeps the optimal rate at ``s = theoretical_degree``."""
    if m < 1 or d < 1 or r <= 0:
        raise ConfigError("lambda_upper_bound needs m >= 1, d >= 1, r > 0")
    return m ** (-2.0 * r / (2.0 * r + d)) * (4.0 * d) ** (-1.0 / (d + 2.0 * r))


def default_s_grid(m: int, d: int, cap: int | None = 50) -> list[int]:
    """Degrees ``1..min(ceil(m^(1/d)), cap)`` with at most ``m`` centers each."""
    if m < 1 or d < 1:
        raise ConfigError("default_s_grid needs m >= 1 and d >= 1")
    top = _ceil_root(m, d)
    if cap is not None:
        top = min(top, cap)
    grid = [s for s in range(1, top + 1) if poly_dim(s, d) <= m]
    dropped = top - len(grid)
    if dropped:
        warnings.warn(
            f"dropped {dropped} degree(s) with more centers than the {m} samples", RuntimeWarning, stacklevel=2
        )
    if not grid:
        raise ConfigError(f"no admissible degree for m={m}, d={d}")
    return grid


def lambda_grid(kind: str = "log", count: int = 50) -> list[float]:
    """Ridge candidates: ``count`` log-spaced values in [1e-5, 1], or the arithmetic grid
    ``1e-5 + k * 1e-2``."""
    if kind == "log":
        return np.logspace(-5.0, 0.0, count).tolist()
    if kind == "arithmetic":
        return (1e-5 + 1e-2 * np.arange(count)).tolist()
    raise ConfigError(f"unknown lambda grid {kind!r}")


def delta_grid(count: int = 40) -> list[float]:
    """Gaussian widths ``0.01 + k * 0.025``."""
    return (0.01 + 0.025 * np.arange(count)).tolist()


@dataclass(frozen=True)
class SelectionGrid:
    s_values: tuple[int, ...] = ()
    lambda_values: tuple[float, ...] = ()
    delta_values: tuple[float, ...] = ()

    def __post_init__(self):
        for name in ("s_values", "lambda_values", "delta_values"):
            vals = tuple(sorted(getattr(self, name)))
            if len(set(vals)) != len(vals):
                raise ConfigError(f"{name} contains duplicates")
            object.__setattr__(self, name, vals)
        if any(int(s) != s or s < 1 for s in self.s_values):
            raise ConfigError("s_values must be positive integers")
        if any(lam < 0 for lam in self.lambda_values):
            raise ConfigError("lambda_values must be nonnegative")
        if any(dl <= 0 for dl in self.delta_values):
            raise ConfigError("delta_values must be positive")

    def candidates(self, method: str) -> list[dict[str, float]]:
        need = {
            "epkr": ("s_values",),
            "cbr-epkr": ("s_values", "lambda_values"),
            "pkr": ("s_values", "lambda_values"),
            "gkr": ("delta_values", "lambda_values"),
        }
        if method not in need:
            raise ConfigError(f"unknown method {method!r}")
        for name in need[method]:
            if not getattr(self, name):
                raise ConfigError(f"{method} selection needs a nonempty {name}")
        if method == "epkr":
            return [{"s": int(s)} for s in self.s_values]
        if method == "gkr":
            return [{"delta": dl, "lam": lam} for dl in self.delta_values for lam in self.lambda_values]
        return [{"s": int(s), "lam": lam} for s in self.s_values for lam in self.lambda_values]


@dataclass
class SelectionResult:
    method: str
    params: dict[str, float]
    scores: list[tuple[dict[str, float], float]]
    model: Model
    seed: int
    failures: dict[str, str] = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def best_score(self) -> float:
        return min(score for _, score in self.scores if np.isfinite(score))


@dataclass(frozen=True)
class CenterOptions:
    strategy: str = "uniform-ball"
    domain: str = "ball"
    max_retries: int = 20


def _key(params: dict[str, Any]) -> str:
    return ",".join(f"{k}={v:g}" for k, v in params.items())


def fit_candidate(
    method: str,
    data: Dataset,
    params: dict[str, float],
    seed: int,
    centers: CenterOptions = CenterOptions(),
    *,
    force: bool = False,
) -> Model:
    """Fit one parameter combination; EPKR centers are drawn from the ``(seed, s)`` stream."""
    if method in ("epkr", "cbr-epkr"):
        s = int(params["s"])
        cs = build_fundamental_system(
            s,
            data.d,
            centers.strategy,
            source=data.inputs,
            seed=derive_seed(seed, _CENTERS, s),
            max_retries=centers.max_retries,
            domain=centers.domain,
        )
        if method == "epkr":
            return fit_epkr(data, s, cs, force=force)
        return fit_cbr_epkr(data, s, cs, params["lam"], force=force)
    if method == "pkr":
        return fit_pkr(data, int(params["s"]), params["lam"])
    if method == "gkr":
        return fit_gkr(data, params["delta"], params["lam"])
    raise ConfigError(f"unknown method {method!r}")


def _validation_rmse(
    method: str,
    train: Dataset,
    val: Dataset,
    candidates: list[dict[str, float]],
    seed: int,
    centers: CenterOptions,
    bound: float,
) -> tuple[np.ndarray, dict[str, str]]:
    """Validation RMSE, predictions clipped at ``bound``, of every candidate fitted on
    ``train`` (NaN on failure)."""
    scores = np.full(len(candidates), np.nan)
    failures: dict[str, str] = {}

    # group candidates sharing a kernel so one factorization serves every lambda
    groups: dict[tuple, list[int]] = {}
    for i, p in enumerate(candidates):
        kparam = ("s", int(p["s"])) if "s" in p else ("delta", p["delta"])
        groups.setdefault(kparam, []).append(i)

    for (kind, value), idx in groups.items():
        try:
            if method in ("epkr", "cbr-epkr"):
                if poly_dim(value, train.d) > train.m:
                    raise ConfigError(f"n = {poly_dim(value, train.d)} centers exceed m = {train.m}")
                cs = build_fundamental_system(
                    value,
                    train.d,
                    centers.strategy,
                    source=train.inputs,
                    seed=derive_seed(seed, _CENTERS, value),
                    max_retries=centers.max_retries,
                    domain=centers.domain,
                )
                kern = PolyKernel(value)
                a = kernel_matrix(kern, train.inputs, cs.points)
                b = kernel_matrix(kern, val.inputs, cs.points)
                for i in idx:
                    lam = candidates[i].get("lam", 0.0)
                    shifted = a + lam * np.eye(*a.shape) if lam > 0 else a
                    c = linalg.pinv(shifted) @ train.targets
                    scores[i] = rmse(clip(b @ c, bound), val.targets)
            else:
                kern = PolyKernel(value) if kind == "s" else GaussKernel(value)
                k = kernel_matrix(kern, train.inputs)
                kv = kernel_matrix(kern, val.inputs, train.inputs)
                lams = np.array([candidates[i]["lam"] for i in idx])
                pos = lams > 0
                if np.any(pos):
                    lam_eff = train.m * lams[pos]
                    coefs = linalg.ridge_path(k, lam_eff, train.targets)
                    # same acceptance test the direct solver applies at refit time
                    resid = np.linalg.norm(k @ coefs + coefs * lam_eff - train.targets[:, None], axis=0)
                    solvable = resid <= RIDGE_RESIDUAL_RTOL * np.linalg.norm(train.targets)
                    preds = clip(kv @ coefs, bound)
                    errs = np.sqrt(np.mean((preds - val.targets[:, None]) ** 2, axis=0))
                    for i, e, good, r in zip(np.asarray(idx)[pos], errs, solvable, resid):
                        if good:
                            scores[i] = e
                        else:
                            failures[_key(candidates[i])] = f"ridge residual {r:.3e} too large"
                if not np.all(pos):
                    c = linalg.pinv(k) @ train.targets
                    e = rmse(clip(kv @ c, bound), val.targets)
                    for i in np.asarray(idx)[~pos]:
                        scores[i] = e
        except EpkrError as exc:
            for i in idx:
                failures[_key(candidates[i])] = str(exc)
    bad = ~np.isfinite(scores)
    for i in np.flatnonzero(bad):
        failures.setdefault(_key(candidates[i]), "non-finite validation error")
    scores[bad] = np.nan
    return scores, failures


def _choose(candidates, scores, tie_atol, tie_rtol) -> int:
    finite = np.isfinite(scores)
    best = np.min(scores[finite])
    tied = [i for i in np.flatnonzero(finite) if scores[i] <= best + tie_atol + tie_rtol * best]
    return min(
        tied,
        key=lambda i: (candidates[i].get("s", 0), candidates[i].get("lam", 0.0), candidates[i].get("delta", 0.0)),
    )


def _workers(workers: int | None) -> int:
    if workers is not None:
        return max(1, workers)
    return max(1, int(os.environ.get("EPKR_THREADS", "1")))


def _selection_bound(data: Dataset) -> float:
    # the clipping level M belongs to the problem, so every fold shares the full-data value
    return float(np.max(np.abs(data.targets))) or 1.0


def fold_labels(m: int, k: int, seed: int) -> np.ndarray:
    """Random assignment of ``m`` indices to ``k`` folds of near-equal size."""
    perm = np.random.default_rng(derive_seed(seed, _FOLDS)).permutation(m)
    labels = np.empty(m, dtype=int)
    labels[perm] = np.arange(m) % k
    return labels


def kfold_cv(
    data: Dataset,
    grid: SelectionGrid,
    method: str,
    k: int = 3,
    seed: int = 0,
    *,
    centers: CenterOptions = CenterOptions(),
    folds: np.ndarray | None = None,
    tie_atol: float = 1e-10,
    tie_rtol: float = 1e-9,
    workers: int | None = None,
) -> SelectionResult:
    """k-fold cross-validation over ``grid``; the winner is refit on all of ``data``.

    The score of a candidate is its validation RMSE averaged over folds.
    Scores within ``tie_atol + tie_rtol * best`` of the best count as ties,
    resolved toward smaller ``s``, then smaller ``lam``, then smaller ``delta``.
    EPKR candidates draw fresh centers in every fold from a stream derived from
    ``seed`` and the fold index. Candidates that fail in any fold are recorded in
    ``failures`` and excluded. Validation predictions are clipped at
    ``max |y|`` over all of ``data``.
    """
    start = time.perf_counter()
    candidates = grid.candidates(method)
    if k < 2 or data.m < k:
        raise ConfigError(f"k-fold CV needs 2 <= k <= m, got k={k}, m={data.m}")
    labels = fold_labels(data.m, k, seed) if folds is None else np.asarray(folds)
    bound = _selection_bound(data)
    if labels.shape != (data.m,):
        raise ConfigError("fold labels must have one entry per sample")

    def run(f: int):
        mask = labels == f
        return _validation_rmse(
            method, data.subset(~mask), data.subset(mask), candidates, derive_seed(seed, f + 1), centers, bound
        )

    n_workers = _workers(workers)
    if n_workers > 1:
        with ThreadPoolExecutor(n_workers) as pool:
            results = list(pool.map(run, range(k)))
    else:
        results = [run(f) for f in range(k)]

    failures: dict[str, str] = {}
    for _, fails in results:
        for key, msg in fails.items():
            failures.setdefault(key, msg)
    scores = np.mean([r[0] for r in results], axis=0)
    return _finish(method, data, candidates, scores, failures, seed, centers, tie_atol, tie_rtol, start)


def holdout_select(
    data: Dataset,
    grid: SelectionGrid,
    method: str,
    split_fraction: float = 2.0 / 3.0,
    seed: int = 0,
    *,
    centers: CenterOptions = CenterOptions(),
    refit_all: bool = False,
    tie_atol: float = 1e-10,
    tie_rtol: float = 1e-9,
) -> SelectionResult:
    """Hold-out selection: fit every candidate on the first part, score on the second.

    The returned model is fit on the first part only unless ``refit_all``.
    """
    start = time.perf_counter()
    candidates = grid.candidates(method)
    z1, z2 = split(data, split_fraction, derive_seed(seed, _SPLIT))
    scores, failures = _validation_rmse(
        method, z1, z2, candidates, derive_seed(seed, 1), centers, _selection_bound(data)
    )
    return _finish(
        method, data if refit_all else z1, candidates, scores, failures, seed, centers, tie_atol, tie_rtol, start
    )


def _finish(method, data, candidates, scores, failures, seed, centers, tie_atol, tie_rtol, start):
    if not np.any(np.isfinite(scores)):
        detail = "; ".join(f"{k}: {v}" for k, v in failures.items())
        raise NumericalError(f"every {method} candidate failed: {detail}")
    scores = scores.copy()
    while True:
        best = _choose(candidates, scores, tie_atol, tie_rtol)
        params = dict(candidates[best])
        try:
            model = fit_candidate(method, data, params, seed, centers)
            break
        except EpkrError as exc:
            # the winner cannot be refit on the full data; fall back to the runner-up
            failures[_key(params)] = f"refit: {exc}"
            scores[best] = np.nan
            if not np.any(np.isfinite(scores)):
                raise NumericalError(f"no {method} candidate could be refit: {exc}") from exc
    return SelectionResult(
        method=method,
        params=params,
        scores=[(dict(c), float(s)) for c, s in zip(candidates, scores)],
        model=model,
        seed=seed,
        failures=failures,
        seconds=time.perf_counter() - start,
    )
