"""Dense complex matrix kernel shared by every other module.

Matrices are plain 2-D ``numpy.ndarray`` of ``complex128``. All checks use a
single zero-test predicate so every verifier in the package agrees on what
"numerically zero" means. Matrices in this package are small (at most ~20x20)
and well conditioned, so exactness of the algebraic identities matters more
than speed; the PD inverse square root goes through a full Hermitian
eigendecomposition rather than an iteration.
"""

from __future__ import annotations

import numpy as np

# Relative zero tolerance with an absolute floor, used package-wide.
REL_TOL = 1e-9
ABS_FLOOR = 1e-12


def as_cmatrix(m) -> np.ndarray:
    """Coerce to a 2-D complex128 array, validating shape and finiteness."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def zero_threshold(scale: float) -> float:
    """The package-wide zero test: |z| < REL_TOL * (1 + scale)."""
    return REL_TOL * (1.0 + float(scale))


def is_zero(z, scale: float = 0.0) -> bool:
    """True if |z| is numerically zero relative to the given magnitude scale."""
    return bool(np.max(np.abs(z)) < zero_threshold(scale)) if np.ndim(z) else \
        abs(z) < zero_threshold(scale)


def herm(m: np.ndarray) -> np.ndarray:
    """Hermitian (conjugate) transpose."""
    return np.conj(np.swapaxes(np.asarray(m), -1, -2))


def is_hermitian(m: np.ndarray, tol: float | None = None) -> bool:
    a = as_cmatrix(m)
    if a.shape[0] != a.shape[1]:
        return False
    if tol is None:
        tol = zero_threshold(float(np.max(np.abs(a))) if a.size else 0.0)
    return bool(np.max(np.abs(a - herm(a))) <= tol) if a.size else True


def inv_sqrt_pd(m: np.ndarray) -> np.ndarray:
    """Inverse square root of a Hermitian positive-definite matrix.

    Returns the Hermitian X with X @ m @ X = I. Used for the whitening
    filters (noise covariance and the channel-dependent relay Gram matrix).

    Raises:
        ValueError: input not Hermitian to tolerance.
        numpy.linalg.LinAlgError: smallest eigenvalue <= 0 (singular or
            indefinite input).
    """
    a = as_cmatrix(m)
    if not is_hermitian(a):
        raise ValueError("inv_sqrt_pd: input is not Hermitian")
    w, v = np.linalg.eigh(a)
    scale = float(w[-1]) if a.size else 0.0
    if a.size and w[0] <= zero_threshold(scale):
        raise np.linalg.LinAlgError(
            f"inv_sqrt_pd: matrix is not positive definite (min eig {w[0]:.3e})")
    x = (v * (1.0 / np.sqrt(w))) @ herm(v)
    # symmetrize to kill roundoff skew; X is Hermitian by construction
    return 0.5 * (x + herm(x))


def sqrt_pd(m: np.ndarray) -> np.ndarray:
    """Hermitian square root of a Hermitian positive-semidefinite matrix."""
    a = as_cmatrix(m)
    if not is_hermitian(a):
        raise ValueError("sqrt_pd: input is not Hermitian")
    w, v = np.linalg.eigh(a)
    w = np.clip(w, 0.0, None)
    x = (v * np.sqrt(w)) @ herm(v)
    return 0.5 * (x + herm(x))


def det(m: np.ndarray) -> complex:
    """Determinant of a square matrix (pivoted LU under the hood)."""
    a = as_cmatrix(m)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"det: matrix is not square ({a.shape[0]}x{a.shape[1]})")
    return complex(np.linalg.det(a))


def rank(m: np.ndarray, tol: float | None = None) -> int:
    """Numerical rank via SVD."""
    a = as_cmatrix(m)
    return int(np.linalg.matrix_rank(a, tol=tol))
