"""Empirical checks of the matrix bounds behind the estimators.

* Minimal-eigenvalue bound ``s! Gamma(d/2) / (2^s Gamma(s + d/2))`` for
  polynomial-kernel Gram matrices of points on the sphere S^{d-1}.
* Sampling norm equivalence in d = 1: the empirical quadratic form
  ``(1/m) |A c|^2`` against the Chebyshev-weighted L2 norm of
  ``sum_j c_j (1 + eta_j x)^s``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from epkr import linalg
from epkr.centers import build_fundamental_system, poly_dim, sample_sphere
from epkr.errors import ConfigError
from epkr.kernel import PolyKernel, kernel_matrix

MAX_DENSE_N = 2000


def gamma_half_integer(two_a: int) -> float:
    """``Gamma(two_a / 2)`` from the integer and half-integer closed forms."""
    if two_a < 1:
        raise ConfigError("gamma_half_integer needs two_a >= 1")
    if two_a % 2 == 0:
        return float(math.factorial(two_a // 2 - 1))
    k = (two_a - 1) // 2
    return math.factorial(2 * k) * math.sqrt(math.pi) / (4**k * math.factorial(k))


def eig_bound(s: int, d: int) -> float:
    """``s! Gamma(d/2) / (2^s Gamma(s + d/2))``."""
    return math.factorial(s) * gamma_half_integer(d) / (2**s * gamma_half_integer(2 * s + d))


@dataclass(frozen=True)
class EigBoundReport:
    s: int
    d: int
    n: int
    observed: float
    bound: float
    passed: bool
    seed: int | None = None

    def to_dict(self):
        return asdict(self)


def check_eig_bound(s: int, d: int, seed=None, slack: float = 1e-9) -> EigBoundReport:
    """Smallest eigenvalue of ``((1 + xi_i . xi_j)^s)`` for ``C(s+d, d)`` random sphere points."""
    if d < 2 or s < 1:
        raise ConfigError("check_eig_bound needs d >= 2 and s >= 1")
    n = poly_dim(s, d)
    if n > MAX_DENSE_N:
        raise ConfigError(f"n = {n} exceeds the dense eigensolver guard {MAX_DENSE_N}")
    xi = sample_sphere(d, n, seed)
    mu = linalg.min_eig_sym(kernel_matrix(PolyKernel(s), xi))
    bound = eig_bound(s, d)
    return EigBoundReport(s, d, n, mu, bound, bool(mu >= bound - slack), seed)


def sphere_harmonic_dim(s: int, d: int) -> int:
    """Dimension of the polynomials of degree <= s restricted to S^{d-1}."""
    return poly_dim(s, d - 1) + (poly_dim(s - 1, d - 1) if s >= 1 else 0)


def operator_min_eigenvalue(s: int, d: int, samples: int = 3000, seed=None) -> float:
    """Monte Carlo estimate of the smallest nonzero eigenvalue of the integral operator
    of ``(1 + x.y)^s`` on S^{d-1} under normalized surface measure.

    Uses the Nystrom approximation: the top ``sphere_harmonic_dim(s, d)``
    eigenvalues of ``G / N`` for ``N`` uniform sphere points.
    """
    xi = sample_sphere(d, samples, seed)
    w = np.linalg.eigvalsh(kernel_matrix(PolyKernel(s), xi) / samples)
    k = sphere_harmonic_dim(s, d)
    return float(np.sort(w)[-k])


def chebyshev_quadrature(node_count: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Chebyshev rule for ``int_{-1}^{1} g(x) dx / sqrt(1 - x^2)``.

    Exact for polynomials of degree up to ``2 * node_count - 1``.
    """
    if node_count < 1:
        raise ConfigError("node_count must be at least 1")
    k = np.arange(1, node_count + 1)
    nodes = np.cos((2 * k - 1) * np.pi / (2 * node_count))
    weights = np.full(node_count, np.pi / node_count)
    return nodes, weights


@dataclass(frozen=True)
class NormEquivReport:
    s: int
    m: int
    n: int
    weighted_norm: float
    quadratic_form: float
    ratio: float
    ratio_unnormalized: float
    full_rank: bool
    passed: bool
    seed: int | None = None

    def to_dict(self):
        return asdict(self)


def check_norm_equivalence(
    s: int,
    m: int,
    seed=None,
    *,
    slack: float = 0.2,
    coefficients: np.ndarray | None = None,
) -> NormEquivReport:
    """Compare ``Q = (1/m) |A c|^2`` with the Chebyshev-weighted norm ``I`` (d = 1).

    Samples ``x_i`` follow the arcsine law on [-1, 1]; ``I`` is computed exactly
    with an (s+1)-node Gauss-Chebyshev rule. ``ratio`` divides ``Q`` by the
    weighted norm taken against the probability-normalized weight
    ``dx / (pi sqrt(1 - x^2))``; ``ratio_unnormalized`` uses the raw weight.
    The check passes when ``ratio`` lies in ``[1 - slack, 3 + slack]``.
    """
    if s < 1:
        raise ConfigError("s must be at least 1")
    n = poly_dim(s, 1)
    if m < n:
        raise ConfigError(f"need m >= n = {n}")
    rng = np.random.default_rng(seed)
    centers = build_fundamental_system(s, 1, "uniform-ball", seed=rng)
    c = rng.standard_normal(n) if coefficients is None else np.asarray(coefficients, dtype=np.float64)
    if c.shape != (n,):
        raise ConfigError(f"coefficients must have length {n}")
    x = np.cos(np.pi * rng.uniform(size=(m, 1)))

    kern = PolyKernel(s)
    nodes, weights = chebyshev_quadrature(s + 1)
    f_nodes = kernel_matrix(kern, nodes[:, None], centers.points) @ c
    weighted = float(weights @ f_nodes**2)
    a = kernel_matrix(kern, x, centers.points)
    q = float(np.sum((a @ c) ** 2) / m)
    full_rank = linalg.rank(a) == n

    if weighted == 0.0 and q == 0.0:
        ratio = ratio_raw = 1.0
    else:
        ratio = q / (weighted / np.pi) if weighted > 0 else math.inf
        ratio_raw = q / weighted if weighted > 0 else math.inf
    passed = bool(1.0 - slack <= ratio <= 3.0 + slack)
    return NormEquivReport(s, m, n, weighted, q, ratio, ratio_raw, bool(full_rank), passed, seed)
