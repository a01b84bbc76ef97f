"""Dense complex linear algebra used by the superoperator machinery.

All operators are plain ``numpy`` arrays of dtype ``complex128``. Vectorization
is column-stacking throughout the package, so that

    vec(A @ X @ B) == kron(B.T, A) @ vec(X)

Left multiplication by ``H`` is therefore ``kron(I, H)`` and right
multiplication is ``kron(H.T, I)``.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import DimensionError

__all__ = [
    "as_operator",
    "kron",
    "vectorize",
    "unvectorize",
    "expm",
    "dag",
    "trace",
    "frobenius_distance",
    "is_hermitian",
    "hermitize",
    "commutator",
    "identity",
]


def as_operator(a, name: str = "operator") -> np.ndarray:
    """Return ``a`` as a 2-D complex128 array with finite entries."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _square(a, name: str = "operator") -> np.ndarray:
    arr = as_operator(a, name)
    if arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {arr.shape}")
    return arr


def identity(d: int) -> np.ndarray:
    return np.eye(d, dtype=np.complex128)


def kron(a, b) -> np.ndarray:
    """Kronecker product ``a ⊗ b``."""
    return np.kron(as_operator(a, "a"), as_operator(b, "b"))


def vectorize(m) -> np.ndarray:
    """Stack the columns of a square matrix into a vector of length d**2."""
    arr = _square(m, "matrix")
    return arr.reshape(-1, order="F").copy()


def unvectorize(v, d: int | None = None) -> np.ndarray:
    """Inverse of :func:`vectorize`.

    Args:
        v: Vector of length ``d**2``.
        d: Matrix dimension. Inferred from ``len(v)`` when omitted.

    Raises:
        DimensionError: If ``len(v)`` is not ``d**2``.
    """
    vec = np.asarray(v, dtype=np.complex128)
    if vec.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {vec.shape}")
    if d is None:
        d = int(round(np.sqrt(vec.size)))
    if d * d != vec.size:
        raise DimensionError(f"vector of length {vec.size} cannot be reshaped to {d}x{d}")
    return vec.reshape((d, d), order="F").copy()


def expm(a) -> np.ndarray:
    """Matrix exponential by scaling and squaring with Padé approximants.

    The no-jump generator is non-normal, so no eigendecomposition is used.
    """
    arr = _square(a, "matrix")
    return scipy.linalg.expm(arr)


def dag(a) -> np.ndarray:
    """Conjugate transpose."""
    return as_operator(a).conj().T


def trace(a) -> complex:
    arr = _square(a, "matrix")
    return complex(np.trace(arr))


def frobenius_distance(a, b) -> float:
    a = as_operator(a, "a")
    b = as_operator(b, "b")
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def is_hermitian(a, tol: float = 1e-10) -> bool:
    """True when the largest entry of ``a - a^†`` is at most ``tol`` in modulus."""
    arr = as_operator(a)
    if arr.shape[0] != arr.shape[1]:
        return False
    return bool(np.max(np.abs(arr - arr.conj().T), initial=0.0) <= tol)


def hermitize(a) -> np.ndarray:
    arr = np.asarray(a, dtype=np.complex128)
    return 0.5 * (arr + arr.conj().swapaxes(-1, -2))


def commutator(a, b) -> np.ndarray:
    return a @ b - b @ a
