"""Kernel regression estimators.

Four variants share one :class:`Model` representation
``f(x) = sum_j c_j K(basis_j, x)``:

* ``EPKR``: least squares over ``span{(1 + eta_j . x)^s}`` for a verified
  center set, ``c = pinv(A) y`` with ``A_ij = (1 + x_i . eta_j)^s``.
* ``CBR-EPKR``: ``c = pinv(A + lam * I_{m,n}) y`` where ``I_{m,n}`` is the
  rectangular matrix with ones on its main diagonal.
* ``PKR``: regularized least squares in the polynomial-kernel RKHS, whose
  representer solution solves ``(K + m lam I) c = y``.
* ``GKR``: the same with a Gaussian kernel.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from epkr import linalg
from epkr.centers import CenterSet
from epkr.data import Dataset, NormalizationRecord
from epkr.errors import ConfigError, DimensionError
from epkr.kernel import GaussKernel, Kernel, PolyKernel, clip, kernel_matrix

VARIANTS = ("EPKR", "PKR", "CBR-EPKR", "GKR")


@dataclass(frozen=True)
class Model:
    variant: str
    basis: NDArray[np.float64]
    coefficients: NDArray[np.float64]
    clip_bound: float
    degree: int | None = None
    width: float | None = None
    lam: float = 0.0
    fit_seconds: float = 0.0
    center_strategy: str | None = None
    normalization: NormalizationRecord | None = None
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown model variant {self.variant!r}")
        if self.coefficients.shape != (self.basis.shape[0],):
            raise DimensionError("coefficient count must equal basis size")

    @property
    def kernel(self) -> Kernel:
        if self.variant == "GKR":
            return GaussKernel(self.width)
        return PolyKernel(self.degree)

    @property
    def dimension(self) -> int:
        return self.basis.shape[1]

    @property
    def sparsity(self) -> int:
        """Number of basis functions in the expansion."""
        return self.basis.shape[0]

    def decision(self, x: ArrayLike) -> NDArray[np.float64]:
        """Unclipped predictions for an (q, d) array of points."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dimension:
            raise DimensionError(
                f"expected points of dimension {self.dimension}, got array of shape {x.shape}"
            )
        return kernel_matrix(self.kernel, x, self.basis) @ self.coefficients

    def predict(self, x: ArrayLike, clipped: bool = True) -> NDArray[np.float64]:
        f = self.decision(x)
        return clip(f, self.clip_bound) if clipped else f

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready representation; timing is left out so files are reproducible."""
        return {
            "variant": self.variant,
            "degree": self.degree,
            "width": self.width,
            "lambda": self.lam,
            "clip_bound": self.clip_bound,
            "center_strategy": self.center_strategy,
            "basis": self.basis.tolist(),
            "coefficients": self.coefficients.tolist(),
            "normalization": None if self.normalization is None else self.normalization.to_dict(),
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Model:
        norm = d.get("normalization")
        basis = np.asarray(d["basis"], dtype=np.float64)
        if basis.ndim != 2:
            raise DimensionError("model basis must be a list of points")
        return cls(
            variant=d["variant"],
            basis=basis,
            coefficients=np.asarray(d["coefficients"], dtype=np.float64).reshape(-1),
            clip_bound=float(d["clip_bound"]),
            degree=d.get("degree"),
            width=d.get("width"),
            lam=float(d.get("lambda", 0.0)),
            center_strategy=d.get("center_strategy"),
            normalization=None if norm is None else NormalizationRecord.from_dict(norm),
            notes=tuple(d.get("notes", ())),
        )


def _clip_bound(data: Dataset, clip_bound: float | None) -> float:
    if clip_bound is not None:
        if not clip_bound > 0:
            raise ConfigError("clip bound must be positive")
        return float(clip_bound)
    bound = float(np.max(np.abs(data.targets)))
    return bound if bound > 0 else 1.0


def _check_centers(data: Dataset, s: int, centers: CenterSet, force: bool, allow_unverified: bool) -> list[str]:
    notes = []
    if centers.degree != s:
        raise ConfigError(f"centers were built for degree {centers.degree}, not {s}")
    if centers.dimension != data.d:
        raise DimensionError(f"centers have dimension {centers.dimension}, data has {data.d}")
    if not centers.verified:
        if not allow_unverified:
            raise ConfigError("centers failed the fundamental-system rank check")
        notes.append("unverified centers")
    if centers.n > data.m:
        msg = f"n = {centers.n} centers exceed m = {data.m} samples"
        if not force:
            raise ConfigError(msg)
        warnings.warn(msg + "; fitting the least-norm solution", RuntimeWarning, stacklevel=4)
        notes.append(msg)
    return notes


def fit_epkr(
    data: Dataset,
    s: int,
    centers: CenterSet,
    *,
    clip_bound: float | None = None,
    force: bool = False,
    allow_unverified: bool = False,
) -> Model:
    """Least squares over the span of ``(1 + eta_j . x)^s`` via the pseudo-inverse."""
    return _fit_on_centers("EPKR", data, s, centers, 0.0, clip_bound, force, allow_unverified)


def fit_cbr_epkr(
    data: Dataset,
    s: int,
    centers: CenterSet,
    lam: float,
    *,
    clip_bound: float | None = None,
    force: bool = False,
    allow_unverified: bool = False,
) -> Model:
    """EPKR with the rectangular diagonal shift ``lam * I_{m,n}`` added before pseudo-inversion.

    ``lam = 0`` is exactly :func:`fit_epkr`.
    """
    return _fit_on_centers("CBR-EPKR", data, s, centers, lam, clip_bound, force, allow_unverified)


def _fit_on_centers(variant, data, s, centers, lam, clip_bound, force, allow_unverified) -> Model:
    if lam < 0:
        raise ConfigError("lambda must be nonnegative")
    notes = _check_centers(data, s, centers, force, allow_unverified)
    start = time.perf_counter()
    a = kernel_matrix(PolyKernel(s), data.inputs, centers.points)
    if lam > 0:
        a = a + lam * np.eye(*a.shape)
    c = linalg.pinv(a) @ data.targets
    elapsed = time.perf_counter() - start
    return Model(
        variant=variant,
        basis=centers.points,
        coefficients=c,
        clip_bound=_clip_bound(data, clip_bound),
        degree=s,
        lam=float(lam),
        fit_seconds=elapsed,
        center_strategy=centers.strategy,
        normalization=data.normalization,
        notes=tuple(notes),
    )


def _fit_kernel_ridge(data: Dataset, kernel: Kernel, lam: float) -> NDArray[np.float64]:
    if lam < 0:
        raise ConfigError("lambda must be nonnegative")
    k = kernel_matrix(kernel, data.inputs)
    if lam == 0:
        return linalg.pinv(k) @ data.targets
    return linalg.solve_ridge(k, data.m * lam, data.targets)


def fit_pkr(data: Dataset, s: int, lam: float, *, clip_bound: float | None = None) -> Model:
    """Polynomial kernel ridge regression, ``(K + m lam I) c = y``."""
    start = time.perf_counter()
    c = _fit_kernel_ridge(data, PolyKernel(s), lam)
    elapsed = time.perf_counter() - start
    return Model(
        variant="PKR",
        basis=data.inputs,
        coefficients=c,
        clip_bound=_clip_bound(data, clip_bound),
        degree=s,
        lam=float(lam),
        fit_seconds=elapsed,
        normalization=data.normalization,
    )


def fit_gkr(data: Dataset, delta: float, lam: float, *, clip_bound: float | None = None) -> Model:
    """Gaussian kernel ridge regression, ``(K + m lam I) c = y``."""
    start = time.perf_counter()
    c = _fit_kernel_ridge(data, GaussKernel(delta), lam)
    elapsed = time.perf_counter() - start
    return Model(
        variant="GKR",
        basis=data.inputs,
        coefficients=c,
        clip_bound=_clip_bound(data, clip_bound),
        width=float(delta),
        lam=float(lam),
        fit_seconds=elapsed,
        normalization=data.normalization,
    )


def predict(model: Model, x: ArrayLike, clipped: bool = True):
    """Evaluate ``model`` at one point (returns a float) or at a (q, d) array."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if x.shape[0] != model.dimension:
            raise DimensionError(f"point has dimension {x.shape[0]}, model expects {model.dimension}")
        return float(model.predict(x[None, :], clipped=clipped)[0])
    return model.predict(x, clipped=clipped)


def classify_plugin(model: Model, x: ArrayLike):
    """Plug-in classifier: 1 where the unclipped prediction is at least 1/2."""
    f = predict(model, x, clipped=False)
    if np.ndim(f) == 0:
        return int(f >= 0.5)
    return (f >= 0.5).astype(int)
