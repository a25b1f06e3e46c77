"""Dense linear algebra: SVD, pseudo-inverse, ridge solves, eigenvalues, rank.

The production routines delegate the heavy factorizations to LAPACK through
numpy/scipy and add the tolerance conventions, validation and failure
reporting the estimators rely on. Two independent from-scratch Jacobi
routines (:func:`jacobi_svd`, :func:`jacobi_eigvalsh`) are provided as
alternative backends and as cross-checks.

Matrices are plain 2-D ``float64`` numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from epkr.errors import ConvergenceError, DimensionError, NumericalError

RIDGE_RESIDUAL_RTOL = 1e-6
EPS = np.finfo(np.float64).eps
TINY = np.finfo(np.float64).tiny


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``a = left @ diag(singulars) @ right.T``.

    ``left`` is (m, k), ``right`` is (n, k) with ``k = min(m, n)``; singular
    values are nonnegative and sorted in nonincreasing order.
    """

    left: NDArray[np.float64]
    singulars: NDArray[np.float64]
    right: NDArray[np.float64]

    def reconstruct(self) -> NDArray[np.float64]:
        return (self.left * self.singulars) @ self.right.T


def as_matrix(a: ArrayLike, name: str = "matrix") -> NDArray[np.float64]:
    """Validate ``a`` as a nonempty, finite, 2-D float array."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionError(f"{name} is empty (shape {arr.shape})")
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"{name} of shape {arr.shape} has non-finite entries")
    return arr


def _check_symmetric(a: NDArray[np.float64], name: str = "matrix", atol: float = 1e-10) -> None:
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > atol * scale:
        raise DimensionError(f"{name} of shape {a.shape} is not symmetric")


def default_tolerance(shape: tuple[int, int], sigma_max: float) -> float:
    """Rank cutoff ``max(m, n) * sigma_max * eps``."""
    return max(shape) * sigma_max * EPS


def svd(a: ArrayLike, method: str = "lapack") -> SvdFactors:
    """Thin singular value decomposition.

    Parameters
    ----------
    a : array_like, shape (m, n)
    method : {"lapack", "jacobi"}
        ``"lapack"`` uses the divide-and-conquer driver; ``"jacobi"`` uses the
        one-sided Jacobi iteration in :func:`jacobi_svd`.

    Raises
    ------
    ConvergenceError
        If the factorization does not converge.
    """
    a = as_matrix(a)
    if method == "jacobi":
        return jacobi_svd(a)
    if method != "lapack":
        raise ValueError(f"unknown svd method {method!r}")
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        try:
            u, s, vt = scipy.linalg.svd(a, full_matrices=False, lapack_driver="gesvd")
        except np.linalg.LinAlgError:
            raise ConvergenceError(f"SVD did not converge for matrix of shape {a.shape}") from exc
    return SvdFactors(u, s, vt.T)


def jacobi_svd(a: ArrayLike, tol: float = EPS, max_sweeps: int = 80) -> SvdFactors:
    """One-sided (Hestenes) Jacobi SVD.

    Columns of a working copy of ``a`` are rotated pairwise until every pair is
    orthogonal to relative precision ``tol``; the column norms are then the
    singular values. Slow (pure Python pair loop) but simple and accurate.
    """
    a = as_matrix(a)
    m, n = a.shape
    if m < n:
        f = jacobi_svd(a.T, tol=tol, max_sweeps=max_sweeps)
        return SvdFactors(f.right, f.singulars, f.left)

    u = a.copy()
    v = np.eye(n)
    negligible = (EPS * np.linalg.norm(a)) ** 2
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                up, uq = u[:, p], u[:, q]
                alpha = up @ up
                beta = uq @ uq
                gamma = up @ uq
                if min(alpha, beta) <= negligible or abs(gamma) <= tol * np.sqrt(alpha) * np.sqrt(beta):
                    continue
                rotated = True
                t = _rotation_tangent(beta - alpha, gamma)
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                new_p = c * up - s * uq
                u[:, q] = s * up + c * uq
                u[:, p] = new_p
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
        if not rotated:
            break
    else:
        raise ConvergenceError(
            f"Jacobi SVD did not converge in {max_sweeps} sweeps for matrix of shape {a.shape}"
        )

    sing = np.linalg.norm(u, axis=0)
    order = np.argsort(-sing, kind="stable")
    sing = sing[order]
    u = u[:, order]
    v = v[:, order]
    nonzero = sing > 0.0
    left = np.zeros_like(u)
    left[:, nonzero] = u[:, nonzero] / sing[nonzero]
    if not np.all(nonzero):
        left = _complete_orthonormal(left, nonzero)
    return SvdFactors(left, sing, v)


def _rotation_tangent(diff: float, off: float) -> float:
    """Smaller root ``t`` of ``t^2 + 2 zeta t - 1 = 0`` with ``zeta = diff / (2 off)``."""
    zeta = diff / (2.0 * off)
    if abs(zeta) > 1e150:
        return 0.5 / zeta
    return (1.0 if zeta >= 0 else -1.0) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))


def _complete_orthonormal(cols: NDArray[np.float64], keep: NDArray[np.bool_]) -> NDArray[np.float64]:
    """Fill the columns not in ``keep`` with an orthonormal completion."""
    m = cols.shape[0]
    basis = [cols[:, j] for j in np.flatnonzero(keep)]
    out = cols.copy()
    candidates = iter(np.eye(m))
    for j in np.flatnonzero(~keep):
        while True:
            w = next(candidates).copy()
            for _ in range(2):
                for b in basis:
                    w -= (b @ w) * b
            norm = np.linalg.norm(w)
            if norm > 1e-8:
                break
        w /= norm
        basis.append(w)
        out[:, j] = w
    return out


def pinv(a: ArrayLike, tol: float | None = None) -> NDArray[np.float64]:
    """Moore-Penrose pseudo-inverse via the SVD.

    Singular values ``<= tol`` are treated as zero. The default cutoff is
    ``max(m, n) * sigma_max * eps``. Subnormal singular values are always
    dropped since their reciprocals overflow.
    """
    a = as_matrix(a)
    if tol is not None and tol < 0:
        raise ValueError("tol must be nonnegative")
    f = svd(a)
    cutoff = default_tolerance(a.shape, f.singulars[0]) if tol is None else tol
    keep = f.singulars > max(cutoff, TINY)
    inv = np.zeros_like(f.singulars)
    inv[keep] = 1.0 / f.singulars[keep]
    return (f.right * inv) @ f.left.T


def rank(a: ArrayLike, tol: float | None = None) -> int:
    """Number of singular values above the pseudo-inverse cutoff."""
    a = as_matrix(a)
    s = svd(a).singulars
    cutoff = default_tolerance(a.shape, s[0]) if tol is None else tol
    return int(np.count_nonzero(s > max(cutoff, TINY)))


def condition_ratio(a: ArrayLike) -> float:
    """``sigma_min / sigma_max`` (0 for the zero matrix)."""
    s = svd(a).singulars
    return float(s[-1] / s[0]) if s[0] > 0 else 0.0


def solve_ridge(a: ArrayLike, lambda_eff: float, y: ArrayLike) -> NDArray[np.float64]:
    """Solve ``(a + lambda_eff * I) c = y`` for symmetric ``a``.

    ``lambda_eff`` is the already-scaled shift: a ``(1/m)``-normalized ridge
    objective with parameter ``lam`` gives ``lambda_eff = m * lam``.

    With ``lambda_eff == 0`` and singular ``a`` the least-squares solution
    ``pinv(a) @ y`` is returned; the residual check is then skipped since
    ``y`` need not lie in the range of ``a``.

    Raises
    ------
    DimensionError
        Non-square or non-symmetric ``a``, or mismatched ``y``.
    NumericalError
        Residual ``||(a + lambda_eff I) c - y||`` above ``1e-6 ||y||``.
    """
    a = as_matrix(a)
    _check_symmetric(a)
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] != a.shape[0]:
        raise DimensionError(f"y has shape {y.shape}, expected ({a.shape[0]},)")
    if lambda_eff < 0:
        raise ValueError("lambda_eff must be nonnegative")

    shifted = a + lambda_eff * np.eye(a.shape[0])
    try:
        if lambda_eff > 0:
            try:
                c = scipy.linalg.cho_solve(scipy.linalg.cho_factor(shifted), y)
            except np.linalg.LinAlgError:
                c = scipy.linalg.solve(shifted, y, assume_a="sym")
        else:
            if rank(shifted) < a.shape[0]:
                return pinv(a) @ y
            c = scipy.linalg.solve(shifted, y, assume_a="sym")
    except np.linalg.LinAlgError as exc:
        if lambda_eff == 0:
            return pinv(a) @ y
        raise NumericalError(f"ridge system of shape {a.shape} is singular") from exc

    residual = np.linalg.norm(shifted @ c - y)
    if residual > RIDGE_RESIDUAL_RTOL * np.linalg.norm(y):
        raise NumericalError(
            f"ridge solve residual {residual:.3e} exceeds 1e-6 * ||y|| for shape {a.shape}"
        )
    return c


def ridge_path(a: ArrayLike, lambdas_eff: ArrayLike, y: ArrayLike) -> NDArray[np.float64]:
    """Ridge solutions for many shifts from one eigendecomposition.

    Returns an (m, L) array whose column ``l`` solves
    ``(a + lambdas_eff[l] I) c = y``. Eigenvalues of ``a`` are clamped at zero,
    which is exact for the positive semidefinite kernel matrices this is used
    with.
    """
    a = as_matrix(a)
    _check_symmetric(a)
    lams = np.atleast_1d(np.asarray(lambdas_eff, dtype=np.float64))
    if np.any(lams <= 0):
        raise ValueError("ridge_path requires strictly positive shifts")
    try:
        w, q = scipy.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigendecomposition failed for matrix of shape {a.shape}") from exc
    w = np.maximum(w, 0.0)
    qty = q.T @ np.asarray(y, dtype=np.float64)
    return q @ (qty[:, None] / (w[:, None] + lams[None, :]))


def min_eig_sym(a: ArrayLike) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    a = as_matrix(a)
    _check_symmetric(a)
    try:
        return float(scipy.linalg.eigvalsh(a, subset_by_index=[0, 0])[0])
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigenvalue solver failed for matrix of shape {a.shape}") from exc


def jacobi_eigvalsh(a: ArrayLike, tol: float = 1e-14, max_sweeps: int = 100) -> NDArray[np.float64]:
    """Eigenvalues of a symmetric matrix by the cyclic Jacobi method, ascending."""
    a = as_matrix(a)
    _check_symmetric(a)
    w = (a + a.T) / 2.0
    n = w.shape[0]
    scale = np.linalg.norm(w)
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = w[p, q]
                if apq == 0.0 or abs(apq) <= tol * max(np.sqrt(abs(w[p, p] * w[q, q])), EPS * scale):
                    continue
                rotated = True
                t = _rotation_tangent(w[q, q] - w[p, p], apq)
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rp = w[p, :].copy()
                rq = w[q, :].copy()
                w[p, :] = c * rp - s * rq
                w[q, :] = s * rp + c * rq
                cp = w[:, p].copy()
                cq = w[:, q].copy()
                w[:, p] = c * cp - s * cq
                w[:, q] = s * cp + c * cq
        if not rotated:
            return np.sort(np.diag(w))
    raise ConvergenceError(f"Jacobi eigenvalue iteration did not converge for shape {a.shape}")
