"""Dense complex matrix primitives used everywhere else.

Matrices are plain ``numpy.ndarray`` objects with dtype complex128. Two
module-wide default tolerances govern validation:

* ``TOL_HERM = 1e-12``: max-abs of ``M - M.conj().T`` for Hermiticity checks.
* ``TOL_PSD = 1e-9``: eigenvalue floor for positive semidefiniteness.

Both are scaled by the magnitude of the matrix once it exceeds unit scale, so
well-conditioned large matrices are not rejected for harmless rounding dust.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatchError,
    NotPositiveDefiniteError,
    NotPositiveSemidefiniteError,
)

TOL_HERM = 1e-12
TOL_PSD = 1e-9

__all__ = [
    "TOL_HERM",
    "TOL_PSD",
    "as_complex_matrix",
    "hermitian_defect",
    "hermitize",
    "is_psd",
    "validate_psd",
    "nearest_psd",
    "psd_sqrt",
    "matrix_exp",
    "resolvent",
    "solve_lyapunov",
]


def as_complex_matrix(m, name: str = "matrix") -> np.ndarray:
    """Return ``m`` as a square C-contiguous complex128 array."""
    a = np.ascontiguousarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"{name} must be square, got shape {a.shape}")
    return a


def hermitian_defect(m) -> float:
    """Max-abs entry of ``M - M.conj().T``."""
    a = np.asarray(m, dtype=np.complex128)
    return float(np.abs(a - a.conj().T).max()) if a.size else 0.0


def hermitize(m) -> np.ndarray:
    """Hermitian part ``(M + M.conj().T) / 2``."""
    a = np.asarray(m, dtype=np.complex128)
    return (a + a.conj().T) / 2.0


def _scale(a: np.ndarray) -> float:
    # unit floor so tolerances never shrink below their absolute defaults
    return max(1.0, float(np.abs(a).max())) if a.size else 1.0


def is_psd(m, tol: float = TOL_PSD, herm_tol: float | None = None) -> bool:
    """True iff ``m`` is Hermitian and has no eigenvalue below ``-tol``.

    ``tol`` bounds both the Hermitian defect and the eigenvalue floor unless a
    separate ``herm_tol`` is given. Tolerances scale with the matrix magnitude
    above unit scale.
    """
    a = as_complex_matrix(m)
    s = _scale(a)
    if hermitian_defect(a) > (tol if herm_tol is None else herm_tol) * s:
        return False
    w = np.linalg.eigvalsh(hermitize(a))
    return bool(w.min(initial=0.0) >= -tol * s)


def validate_psd(
    m,
    tol: float = TOL_PSD,
    herm_tol: float = TOL_HERM,
    name: str = "matrix",
) -> np.ndarray:
    """Return ``m`` validated Hermitian-PSD, raising with a witness otherwise."""
    a = as_complex_matrix(m, name=name)
    s = _scale(a)
    defect = hermitian_defect(a)
    if defect > herm_tol * s:
        raise NotPositiveSemidefiniteError(
            f"{name} is not Hermitian: max |M - M^H| = {defect:.3e}"
        )
    w = np.linalg.eigvalsh(hermitize(a))
    lo = float(w.min(initial=0.0))
    if lo < -tol * s:
        raise NotPositiveSemidefiniteError(
            f"{name} is not PSD: min eigenvalue = {lo:.6e}", witness=lo
        )
    return a


def nearest_psd(m) -> np.ndarray:
    """Nearest (Frobenius) PSD matrix to ``m``.

    Hermitizes, then clips negative eigenvalues to zero. Idempotent, and a
    no-op up to rounding on matrices that are already PSD.
    """
    a = hermitize(as_complex_matrix(m))
    w, u = np.linalg.eigh(a)
    if w.size and w[0] >= 0.0:
        return a
    w = np.clip(w, 0.0, None)
    return hermitize((u * w) @ u.conj().T)


def psd_sqrt(m, tol: float = TOL_PSD) -> np.ndarray:
    """Hermitian PSD square root of a PSD matrix.

    Eigenvalues in ``[-tol*scale, 0)`` are treated as zero; anything lower
    raises NotPositiveSemidefiniteError.
    """
    a = as_complex_matrix(m)
    s = _scale(a)
    if hermitian_defect(a) > tol * s:
        raise NotPositiveSemidefiniteError(
            f"psd_sqrt requires a Hermitian matrix, defect {hermitian_defect(a):.3e}"
        )
    w, u = np.linalg.eigh(hermitize(a))
    lo = float(w.min(initial=0.0))
    if lo < -tol * s:
        raise NotPositiveSemidefiniteError(
            f"psd_sqrt input is not PSD: min eigenvalue = {lo:.6e}", witness=lo
        )
    w = np.sqrt(np.clip(w, 0.0, None))
    return hermitize((u * w) @ u.conj().T)


def matrix_exp(m) -> np.ndarray:
    """Matrix exponential (scaling-and-squaring via scipy)."""
    return np.asarray(scipy.linalg.expm(as_complex_matrix(m)), dtype=np.complex128)


def resolvent(gamma, nu: float) -> np.ndarray:
    """``(Gamma - 2*pi*i*nu*I)^{-1}`` for Hermitian positive definite Gamma.

    Frequencies are cycles, never angular. Singular only if Gamma itself is
    singular and nu == 0.
    """
    g = as_complex_matrix(gamma, name="gamma")
    if hermitian_defect(g) > TOL_HERM * _scale(g):
        raise NotPositiveDefiniteError("resolvent requires Hermitian gamma")
    shifted = g - 2j * np.pi * float(nu) * np.eye(g.shape[0])
    try:
        return np.linalg.solve(shifted, np.eye(g.shape[0], dtype=np.complex128))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(
            f"resolvent is singular at nu={nu}; gamma is not positive definite"
        ) from exc


def solve_lyapunov(gamma, s) -> np.ndarray:
    """Solve ``Gamma @ M + M @ Gamma = S`` for Hermitian positive definite Gamma.

    Eigendecomposes Gamma, divides the rotated right-hand side entrywise by
    eigenvalue sums, and rotates back. For PSD ``S`` the solution
    ``M = integral_0^inf exp(-Gamma u) S exp(-Gamma u) du`` is PSD.
    """
    g = as_complex_matrix(gamma, name="gamma")
    rhs = as_complex_matrix(s, name="s")
    if g.shape != rhs.shape:
        raise DimensionMismatchError(
            f"gamma {g.shape} and s {rhs.shape} must have equal shapes"
        )
    if hermitian_defect(g) > TOL_HERM * _scale(g):
        raise NotPositiveDefiniteError("solve_lyapunov requires Hermitian gamma")
    w, u = np.linalg.eigh(hermitize(g))
    if w.min(initial=np.inf) <= 0.0:
        raise NotPositiveDefiniteError(
            f"solve_lyapunov requires positive definite gamma; min eigenvalue {w.min():.6e}"
        )
    rotated = u.conj().T @ rhs @ u
    m = u @ (rotated / (w[:, None] + w[None, :])) @ u.conj().T
    if hermitian_defect(rhs) <= TOL_HERM * _scale(rhs):
        m = hermitize(m)
    return m
