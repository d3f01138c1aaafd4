"""Dense complex linear-algebra helpers.

Thin, deterministic wrappers over LAPACK (through numpy) that enforce the
conventions the precoders rely on: descending singular values, ascending
eigenvalues, QR with a nonnegative real diagonal and a relative rank tolerance.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, NumericError


def _as_matrix(A) -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2:
        raise ContractError(f"expected a 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NumericError("matrix has non-finite entries")
    return A


def default_rank_tol(A: np.ndarray, sigma_max: float) -> float:
    return max(A.shape) * np.finfo(float).eps * sigma_max


def svd(A):
    """Full SVD ``A = U diag(s) V^H`` with ``s`` sorted descending.

    Returns ``(U, s, V)``; note ``V`` (not ``V^H``).
    """
    A = _as_matrix(A)
    U, s, Vh = np.linalg.svd(A, full_matrices=True)
    return U, s, Vh.conj().T


def singular_values(A) -> np.ndarray:
    return np.linalg.svd(_as_matrix(A), compute_uv=False)


def eig_hermitian(A, tol: float = 1e-10):
    A = _as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ContractError("eig_hermitian needs a square matrix")
    scale = np.linalg.norm(A)
    if np.linalg.norm(A - A.conj().T) > tol * max(scale, 1e-300):
        raise ContractError("matrix is not Hermitian")
    w, V = np.linalg.eigh((A + A.conj().T) / 2)
    return w, V


def qr_decompose(A):
    """Thin QR with ``R`` upper triangular and a nonnegative real diagonal."""
    A = _as_matrix(A)
    if A.shape[0] < A.shape[1]:
        raise ContractError("qr_decompose needs rows >= cols")
    Q, R = np.linalg.qr(A, mode="reduced")
    d = np.diag(R)
    phase = np.ones_like(d)
    nz = np.abs(d) > 0
    phase[nz] = d[nz] / np.abs(d[nz])
    # A = (Q D)(D^* R) with D unitary diagonal
    Q = Q * phase[None, :]
    R = phase.conj()[:, None] * R
    R[np.diag_indices(R.shape[1])] = np.abs(np.diag(R))
    return Q, R


def numerical_rank(A, tol: float | None = None) -> int:
    s = singular_values(A)
    if s.size == 0:
        return 0
    tol = default_rank_tol(np.asarray(A), s[0]) if tol is None else tol
    return int(np.sum(s > tol))


def null_space_basis(A, tol: float | None = None) -> np.ndarray:
    """Orthonormal basis (columns) of the right null space of ``A``.

    ``tol`` is an absolute singular-value threshold; by default
    ``max(shape) * eps * sigma_max``.
    """
    A = _as_matrix(A)
    m, n = A.shape
    if m == 0:
        return np.eye(n, dtype=np.result_type(A, complex))
    U, s, V = svd(A)
    smax = s[0] if s.size else 0.0
    tol = default_rank_tol(A, smax) if tol is None else tol
    rank = int(np.sum(s > tol))
    return V[:, rank:]


def realify(A) -> np.ndarray:
    """Real ``2n x 2n`` embedding ``[[Re A, -Im A], [Im A, Re A]]``."""
    A = _as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ContractError("realify needs a square matrix")
    return np.block([[A.real, -A.imag], [A.imag, A.real]])


def pinv(A, tol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudo-inverse with the package rank tolerance."""
    A = _as_matrix(A)
    m, n = A.shape
    if min(m, n) == 0:
        return np.zeros((n, m), dtype=A.dtype)
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    tol = default_rank_tol(A, s[0]) if tol is None else tol
    keep = s > tol
    inv_s = np.zeros_like(s)
    inv_s[keep] = 1.0 / s[keep]
    return (Vh.conj().T * inv_s[None, :]) @ U.conj().T
