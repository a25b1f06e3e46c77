"""Center sets spanning the degree-s polynomials (fundamental systems).

A set of ``n = C(s+d, d)`` centers ``eta_j`` is a fundamental system for the
kernel ``(1 + x.y)^s`` when the functions ``(1 + eta_j . x)^s`` are linearly
independent, i.e. span every polynomial of degree at most ``s`` in ``d``
variables. Almost every configuration qualifies, so random draws are
verified by a rank check and redrawn on the (rare) failures.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from epkr import linalg
from epkr.errors import CenterVerificationError, ConfigError
from epkr.kernel import PolyKernel, kernel_matrix

STRATEGIES = ("uniform-ball", "first-samples", "equispaced-1d", "gaussian")
STRATEGY_ALIASES = {
    "uniform": "uniform-ball",
    "first": "first-samples",
    "equispaced": "equispaced-1d",
    "gaussian": "gaussian",
}
_COUNT_MAX = np.iinfo(np.int64).max


def poly_dim(s: int, d: int) -> int:
    """Dimension ``C(s+d, d)`` of the polynomials of degree <= s on R^d."""
    if s < 0 or d < 1:
        raise ConfigError(f"poly_dim needs s >= 0 and d >= 1, got s={s}, d={d}")
    k = min(s, d)
    n = 1
    for j in range(1, k + 1):
        # exact: n * (s + d - k + j) is divisible by j at every step
        n = n * (s + d - k + j) // j
        if n > _COUNT_MAX:
            raise OverflowError(f"C({s}+{d}, {d}) does not fit in a 64-bit count")
    return n


def sample_uniform_ball(d: int, count: int, seed=None) -> NDArray[np.float64]:
    """``count`` i.i.d. uniform points in the closed unit ball of R^d."""
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal((count, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    radius = rng.uniform(0.0, 1.0, size=(count, 1)) ** (1.0 / d)
    return direction * radius


def sample_sphere(d: int, count: int, seed=None) -> NDArray[np.float64]:
    """``count`` i.i.d. uniform points on the unit sphere S^{d-1}."""
    if d < 2:
        raise ConfigError("sphere sampling needs d >= 2")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((count, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _project_to_ball(points: NDArray[np.float64]) -> NDArray[np.float64]:
    norms = np.linalg.norm(points, axis=1, keepdims=True)
    return np.where(norms > 1.0, points / np.where(norms > 0, norms, 1.0), points)


@dataclass(frozen=True)
class CenterSet:
    degree: int
    dimension: int
    points: NDArray[np.float64]
    verified: bool
    strategy: str
    rank: int
    condition: float
    attempts: int = 1

    @property
    def n(self) -> int:
        return self.points.shape[0]


def gram_rank(points: NDArray[np.float64], s: int) -> tuple[int, float]:
    """Rank (at the pinv tolerance) and ``sigma_min / sigma_max`` of the center Gram matrix."""
    gram = kernel_matrix(PolyKernel(s), points)
    sv = linalg.svd(gram).singulars
    cutoff = linalg.default_tolerance(gram.shape, sv[0])
    cond = float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0
    return int(np.count_nonzero(sv > cutoff)), cond


def _draw(strategy: str, d: int, n: int, rng: np.random.Generator, domain: str) -> NDArray[np.float64]:
    if strategy == "gaussian":
        return _project_to_ball(rng.normal(0.5, 1.0, size=(n, d)))
    if domain == "cube":
        return _project_to_ball(rng.uniform(0.0, 1.0, size=(n, d)))
    return sample_uniform_ball(d, n, rng)


def _weakest(points: NDArray[np.float64], s: int, count: int) -> NDArray[np.intp]:
    """Indices of the ``count`` centers contributing least to the Gram rank."""
    gram = kernel_matrix(PolyKernel(s), points)
    _, _, piv = scipy.linalg.qr(gram, pivoting=True, mode="economic")
    return np.sort(piv[len(piv) - count :])


def build_fundamental_system(
    s: int,
    d: int,
    strategy: str = "uniform-ball",
    source: ArrayLike | None = None,
    seed=None,
    max_retries: int = 20,
    domain: str = "ball",
    strict: bool = True,
) -> CenterSet:
    """Draw ``C(s+d, d)`` centers and verify that their Gram matrix has full rank.

    Parameters
    ----------
    strategy : str
        ``"uniform-ball"`` (i.i.d. uniform), ``"first-samples"`` (the first n
        rows of ``source``), ``"equispaced-1d"`` (n equally spaced points in
        [0, 1], d = 1 only) or ``"gaussian"`` (i.i.d. N(1/2, 1) per coordinate,
        points outside the ball scaled back onto the unit sphere). The short
        names ``uniform``, ``first`` and ``equispaced`` are accepted too.
    domain : {"ball", "cube"}
        Sampling domain of the uniform strategy; cube draws from [0, 1]^d are
        projected into the ball like Gaussian draws.
    max_retries : int
        Redraws (uniform, gaussian) or replacements of the weakest centers by
        uniform draws (first-samples) after a failed rank check.
    strict : bool
        If False, return the last attempt with ``verified=False`` instead of
        raising. Useful only for exploring degrees beyond what double
        precision can represent.

    Raises
    ------
    CenterVerificationError
        The rank check kept failing; carries the best rank reached.
    """
    strategy = STRATEGY_ALIASES.get(strategy, strategy)
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown center strategy {strategy!r}")
    if domain not in ("ball", "cube"):
        raise ConfigError(f"unknown center domain {domain!r}")
    if s < 1:
        raise ConfigError("degree s must be at least 1")
    n = poly_dim(s, d)
    rng = np.random.default_rng(seed)

    if strategy == "first-samples":
        if source is None:
            raise ConfigError("first-samples strategy needs source points")
        src = np.asarray(source, dtype=np.float64)
        if src.ndim != 2 or src.shape[1] != d or src.shape[0] < n:
            raise ConfigError(f"first-samples needs at least {n} source points of dimension {d}")
        points = _project_to_ball(src[:n].copy())
    elif strategy == "equispaced-1d":
        if d != 1:
            raise ConfigError("equispaced-1d centers exist only for d = 1")
        points = np.linspace(0.0, 1.0, n).reshape(n, 1)
    else:
        points = _draw(strategy, d, n, rng, domain)

    best_rank = -1
    attempts = 0
    while True:
        attempts += 1
        r, cond = gram_rank(points, s)
        best_rank = max(best_rank, r)
        if r == n:
            return CenterSet(s, d, points, True, strategy, r, cond, attempts)
        if strategy == "equispaced-1d" or attempts > max_retries:
            break
        if strategy == "first-samples":
            bad = _weakest(points, s, n - r)
            points = points.copy()
            points[bad] = _draw("uniform-ball", d, len(bad), rng, domain)
        else:
            points = _draw(strategy, d, n, rng, domain)

    if not strict:
        return CenterSet(s, d, points, False, strategy, r, cond, attempts)
    raise CenterVerificationError(
        f"no verified {strategy} center set for s={s}, d={d} after {attempts} attempts: "
        f"rank {best_rank} < {n}",
        achieved_rank=best_rank,
        required_rank=n,
    )
