"""Datasets: toy generator, CSV ingestion, unit-ball normalization, splits, RMSE."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from epkr.errors import (
    ConfigError,
    DataError,
    DimensionError,
    EmptyFileError,
    MissingFileError,
    NonNumericCellError,
    RaggedRowsError,
)


@dataclass(frozen=True)
class NormalizationRecord:
    """Affine per-coordinate map to ``[-1, 1]`` followed by a radial rescale.

    ``normalized = ((raw - shift) / scale) / radial``. Constant coordinates
    get ``scale = 1`` and therefore map to 0.
    """

    shift: NDArray[np.float64]
    scale: NDArray[np.float64]
    radial: float
    invertible: bool = True

    def apply(self, raw: ArrayLike) -> NDArray[np.float64]:
        raw = np.asarray(raw, dtype=np.float64)
        if raw.shape[-1] != self.shift.size:
            raise DimensionError(
                f"inputs have dimension {raw.shape[-1]}, normalization expects {self.shift.size}"
            )
        return (raw - self.shift) / self.scale / self.radial

    def invert(self, normalized: ArrayLike) -> NDArray[np.float64]:
        z = np.asarray(normalized, dtype=np.float64)
        return z * self.radial * self.scale + self.shift

    def to_dict(self) -> dict[str, Any]:
        return {
            "shift": self.shift.tolist(),
            "scale": self.scale.tolist(),
            "radial": self.radial,
            "invertible": self.invertible,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> NormalizationRecord:
        return cls(
            shift=np.asarray(d["shift"], dtype=np.float64),
            scale=np.asarray(d["scale"], dtype=np.float64),
            radial=float(d["radial"]),
            invertible=bool(d.get("invertible", True)),
        )


@dataclass(frozen=True)
class Dataset:
    """Inputs of shape (m, d) and targets of shape (m,)."""

    inputs: NDArray[np.float64]
    targets: NDArray[np.float64]
    provenance: dict[str, Any] = field(default_factory=dict)
    normalization: NormalizationRecord | None = None

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=np.float64)
        y = np.asarray(self.targets, dtype=np.float64)
        if x.ndim != 2:
            raise DimensionError(f"inputs must be 2-D (m, d), got shape {x.shape}")
        if y.ndim != 1 or y.shape[0] != x.shape[0]:
            raise DimensionError(f"targets shape {y.shape} does not match {x.shape[0]} inputs")
        if x.shape[0] < 1:
            raise DataError("dataset must contain at least one sample")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DataError("dataset contains non-finite values")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)

    @property
    def m(self) -> int:
        return self.inputs.shape[0]

    @property
    def d(self) -> int:
        return self.inputs.shape[1]

    def subset(self, index: ArrayLike) -> Dataset:
        index = np.asarray(index)
        return Dataset(self.inputs[index], self.targets[index], self.provenance, self.normalization)


def derive_seed(*keys: int) -> int:
    """Deterministic 63-bit seed for an independent stream labelled by integer ``keys``."""
    state = np.random.SeedSequence([int(k) for k in keys]).generate_state(2, np.uint32)
    return int(state[0]) << 31 | int(state[1]) >> 1


def toy_target(t):
    """``(1 - 2t)_+^5 (32 t^2 + 10 t + 1)``; in W^4 but not W^5 on [0, 1]."""
    t = np.asarray(t, dtype=np.float64)
    out = np.maximum(1.0 - 2.0 * t, 0.0) ** 5 * (32.0 * t * t + 10.0 * t + 1.0)
    return float(out) if out.ndim == 0 else out


def gen_toy(m: int, sigma_sq: float, seed=None) -> Dataset:
    """Uniform inputs on [0, 1] with targets ``toy_target(x) + N(0, sigma_sq)`` noise."""
    if m < 1:
        raise ConfigError("m must be at least 1")
    if sigma_sq < 0:
        raise ConfigError("sigma_sq must be nonnegative")
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, size=(m, 1))
    noise = rng.normal(0.0, 1.0, size=m)
    y = toy_target(x[:, 0])
    if sigma_sq > 0:
        y = y + math.sqrt(sigma_sq) * noise
    seed_repr = seed if isinstance(seed, (int, type(None))) else repr(seed)
    return Dataset(x, y, {"source": "toy", "m": m, "sigma_sq": sigma_sq, "seed": seed_repr})


def gen_toy_test(m: int, seed=None) -> Dataset:
    """Noiseless toy test set."""
    data = gen_toy(m, 0.0, seed)
    return Dataset(data.inputs, data.targets, {**data.provenance, "source": "toy-test"})


def load_csv(path, has_header: bool = False, target: bool = True) -> Dataset | NDArray[np.float64]:
    """Read comma-separated decimal floats; the last column is the target.

    With ``target=False`` every column is an input and the (m, d) array is
    returned instead of a :class:`Dataset`.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"{path}: no such file")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(cell.strip() for cell in r)]
    if has_header and rows:
        rows = rows[1:]
    if not rows:
        raise EmptyFileError(f"{path}: no data rows")
    width = len(rows[0])
    min_width = 2 if target else 1
    if width < min_width:
        raise RaggedRowsError(f"{path}: need at least {min_width} columns, found {width}")
    values = np.empty((len(rows), width))
    offset = 2 if has_header else 1
    for i, row in enumerate(rows):
        if len(row) != width:
            raise RaggedRowsError(
                f"{path}: row {i + offset} has {len(row)} columns, expected {width}"
            )
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                v = math.nan
            if not math.isfinite(v):
                raise NonNumericCellError(
                    f"{path}: row {i + offset}, column {j + 1}: cannot parse {cell!r} as a number"
                )
            values[i, j] = v
    if not target:
        return values
    return Dataset(values[:, :-1], values[:, -1], {"source": "file", "path": str(path)})


def fit_normalization(inputs: ArrayLike) -> NormalizationRecord:
    x = np.asarray(inputs, dtype=np.float64)
    lo = x.min(axis=0)
    hi = x.max(axis=0)
    shift = (lo + hi) / 2.0
    scale = (hi - lo) / 2.0
    scale[scale == 0] = 1.0
    z = (x - shift) / scale
    radial = max(1.0, float(np.max(np.linalg.norm(z, axis=1))))
    return NormalizationRecord(shift=shift, scale=scale, radial=radial)


def normalize_ball(data: Dataset) -> tuple[Dataset, NormalizationRecord]:
    """Map inputs into the closed unit ball.

    Each coordinate is sent affinely onto ``[-1, 1]`` by its min/max, then all
    points are divided by the largest resulting norm when it exceeds 1.
    """
    record = fit_normalization(data.inputs)
    z = record.apply(data.inputs)
    prov = {**data.provenance, "normalized": True}
    return Dataset(z, data.targets, prov, record), record


def split(data: Dataset, fraction: float, seed=None) -> tuple[Dataset, Dataset]:
    """Random partition into parts of size ``round(fraction * m)`` and the rest."""
    if not 0 < fraction < 1:
        raise ConfigError("fraction must lie strictly between 0 and 1")
    first = int(round(fraction * data.m))
    if first < 1 or first > data.m - 1:
        raise ConfigError(f"split of {data.m} samples at fraction {fraction} leaves an empty part")
    perm = np.random.default_rng(seed).permutation(data.m)
    return data.subset(np.sort(perm[:first])), data.subset(np.sort(perm[first:]))


def rmse(predictions: ArrayLike, targets: ArrayLike) -> float:
    p = np.asarray(predictions, dtype=np.float64).reshape(-1)
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    if p.shape != y.shape or p.size == 0:
        raise DimensionError(f"rmse needs equal nonempty lengths, got {p.size} and {y.size}")
    return float(np.sqrt(np.mean((p - y) ** 2)))
