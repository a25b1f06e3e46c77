"""Polynomial and Gaussian kernels, kernel matrices and clipping."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from epkr.errors import ConfigError, DimensionError


def int_power(base: NDArray[np.float64] | float, exponent: int):
    """``base ** exponent`` by repeated squaring (no exp/log round trip)."""
    if exponent < 0:
        raise ConfigError("exponent must be nonnegative")
    result = np.ones_like(base, dtype=np.float64) if isinstance(base, np.ndarray) else 1.0
    square = base
    e = exponent
    while e:
        if e & 1:
            result = result * square
        e >>= 1
        if e:
            square = square * square
    return result


@dataclass(frozen=True)
class PolyKernel:
    """``K_s(x, y) = (1 + x.y)^s``."""

    degree: int

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 1:
            raise ConfigError(f"polynomial degree must be a positive integer, got {self.degree}")

    def from_inner(self, inner):
        return int_power(1.0 + inner, int(self.degree))

    def __call__(self, x: ArrayLike, y: ArrayLike) -> float:
        return poly_eval(self, x, y)


@dataclass(frozen=True)
class GaussKernel:
    """``K(x, y) = exp(-||x - y||^2 / width^2)``."""

    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ConfigError(f"Gaussian width must be positive, got {self.width}")

    def __call__(self, x: ArrayLike, y: ArrayLike) -> float:
        return gauss_eval(self, x, y)


Kernel = Union[PolyKernel, GaussKernel]


def _pair(x: ArrayLike, y: ArrayLike):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise DimensionError(f"points have different dimensions: {x.size} and {y.size}")
    return x, y


def poly_eval(k: PolyKernel, x: ArrayLike, y: ArrayLike) -> float:
    x, y = _pair(x, y)
    return float(k.from_inner(float(x @ y)))


def gauss_eval(k: GaussKernel, x: ArrayLike, y: ArrayLike) -> float:
    x, y = _pair(x, y)
    diff = x - y
    return float(np.exp(-(diff @ diff) / (k.width * k.width)))


def as_points(points: ArrayLike, name: str = "points") -> NDArray[np.float64]:
    """Validate a point list as an (count, d) array."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be a 2-D (count, d) array, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise DimensionError(f"{name} is empty")
    return arr


def kernel_matrix(kernel: Kernel, rows: ArrayLike, cols: ArrayLike | None = None) -> NDArray[np.float64]:
    """Matrix with entries ``kernel(rows[i], cols[j])``.

    Passing ``cols=None`` (or the same array object as ``rows``) builds the
    symmetric Gram matrix, symmetrized exactly.
    """
    symmetric = cols is None or cols is rows
    rows = as_points(rows, "rows")
    cols = rows if symmetric else as_points(cols, "cols")
    if rows.shape[1] != cols.shape[1]:
        raise DimensionError(
            f"row points have dimension {rows.shape[1]}, column points {cols.shape[1]}"
        )
    if isinstance(kernel, PolyKernel):
        out = kernel.from_inner(rows @ cols.T)
    elif isinstance(kernel, GaussKernel):
        sq = (
            np.sum(rows * rows, axis=1)[:, None]
            + np.sum(cols * cols, axis=1)[None, :]
            - 2.0 * (rows @ cols.T)
        )
        out = np.exp(-np.maximum(sq, 0.0) / (kernel.width * kernel.width))
    else:
        raise TypeError(f"unsupported kernel {kernel!r}")
    if symmetric:
        upper = np.triu(out)
        out = upper + np.triu(out, 1).T
        if isinstance(kernel, GaussKernel):
            np.fill_diagonal(out, 1.0)
    return out


def clip(value, bound: float):
    """Truncate to ``[-bound, bound]``: ``min(bound, |t|) * sign(t)``."""
    if not bound > 0:
        raise ConfigError("clip bound must be positive")
    if np.ndim(value) == 0:
        return float(min(bound, max(-bound, float(value))))
    return np.clip(np.asarray(value, dtype=np.float64), -bound, bound)
