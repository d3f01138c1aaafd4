"""Receivers: exhaustive MLD, QR-rotated tree searches, linear combining.

Candidate vectors are enumerated row-major over per-stream constellation
indices (stream 0 varies slowest).  Equal metrics are resolved toward the
lowest enumeration index.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .constellation import Constellation, build_constellation, demap
from .errors import BudgetError, ContractError, DegenerateChannelError
from .linalg import numerical_rank, qr_decompose

DEFAULT_BUDGET = 10**7


@dataclass(frozen=True, eq=False)
class EffectiveChannel:
    """Matrix multiplying a user's own symbols in its noiseless receive vector."""

    M: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.M, dtype=complex)
        if M.ndim != 2 or not np.all(np.isfinite(M)):
            raise ContractError("effective channel must be a finite 2-D matrix")
        object.__setattr__(self, "M", M)

    @classmethod
    def from_precoder(cls, H_k, P_k, K: int = 1) -> "EffectiveChannel":
        """``K H_k P_k``: use ``K = 1`` for block diagonalization and the number
        of users for symbol-level schemes, whose precoder satisfies ``P s = K P_k s_k``."""
        return cls(K * np.asarray(H_k) @ np.asarray(P_k))

    @property
    def rank(self) -> int:
        return numerical_rank(self.M)


@dataclass(frozen=True, eq=False)
class DetectionResult:
    symbols: np.ndarray
    metric: float
    candidates_explored: int
    indices: np.ndarray | None = None


def _matrix(M):
    return M.M if isinstance(M, EffectiveChannel) else np.asarray(M, dtype=complex)


@lru_cache(maxsize=8)
def candidate_indices(order: int, L: int) -> np.ndarray:
    """``(order**L, L)`` table of per-stream indices in row-major order."""
    grid = np.indices((order,) * L).reshape(L, -1).T
    grid.setflags(write=False)
    return grid


@lru_cache(maxsize=8)
def _candidate_symbols(order: int, L: int) -> np.ndarray:
    """``(L, order**L)`` matrix whose columns are the candidate vectors."""
    S = np.ascontiguousarray(build_constellation(order).points[candidate_indices(order, L)].T)
    S.setflags(write=False)
    return S


def _check_budget(c: Constellation, L: int, budget: int) -> int:
    count = c.order ** L
    if count > budget:
        raise BudgetError(f"{c.order}^{L} = {count} candidates exceed the budget {budget}")
    return count


def mld_decide(Y, M, c: Constellation, budget: int = DEFAULT_BUDGET):
    """Exhaustive ML decisions for the columns of ``Y`` (shape ``N_R x B``).

    Returns ``(indices, metrics)`` with ``indices`` of shape ``(B, L)``.
    """
    M = _matrix(M)
    L = M.shape[1]
    _check_budget(c, L, budget)
    Y = np.asarray(Y, dtype=complex)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] != M.shape[0]:
        raise ContractError("receive vector length does not match the channel")
    table = candidate_indices(c.order, L)
    MS = M @ _candidate_symbols(c.order, L)
    energy = np.sum(MS.real ** 2 + MS.imag ** 2, axis=0)
    metric = energy[None, :] - 2 * (Y.conj().T @ MS).real
    best = np.argmin(metric, axis=1)
    floor = np.sum(np.abs(Y) ** 2, axis=0)
    return table[best], metric[np.arange(best.size), best] + floor


def mld_detect(y_k, M_k, c: Constellation, L: int | None = None,
               budget: int = DEFAULT_BUDGET) -> DetectionResult:
    """Argmin of ``|y - M s|^2`` over all ``order**L`` candidate vectors."""
    M = _matrix(M_k)
    if L is not None and M.shape[1] != L:
        raise ContractError("L does not match the channel width")
    count = _check_budget(c, M.shape[1], budget)
    idx, metric = mld_decide(np.asarray(y_k).reshape(-1), M, c, budget)
    return DetectionResult(c.points[idx[0]], float(metric[0]), count, idx[0])


def _tree_search(y, M, c: Constellation, beam: int | None):
    """Breadth-first search over ``Q^H y = R s`` from the last row of ``R`` up.

    ``beam=None`` keeps every branch.
    """
    Q, R = qr_decompose(M)
    L = R.shape[1]
    z = Q.conj().T @ y
    floor = float(np.vdot(y, y).real - np.vdot(z, z).real)
    pts = c.points
    n = c.order
    paths = np.zeros((1, 0), dtype=int)  # columns hold streams l..L-1
    metric = np.zeros(1)
    explored = 0
    for l in range(L - 1, -1, -1):
        tail = R[l, l + 1:] @ pts[paths].T if paths.shape[1] else np.zeros(paths.shape[0])
        resid = z[l] - tail[:, None] - R[l, l] * pts[None, :]
        child = (metric[:, None] + np.abs(resid) ** 2).reshape(-1)
        explored += child.size
        paths = np.hstack([np.repeat(np.arange(n)[None, :], paths.shape[0], axis=0)
                           .reshape(-1, 1),
                           np.repeat(paths, n, axis=0)])
        metric = child
        if beam is not None and l > 0 and metric.size > beam:
            keep = np.argsort(metric, kind="stable")[:beam]
            paths, metric = paths[keep], metric[keep]
    # lowest row-major index among the best leaves
    weights = n ** np.arange(L - 1, -1, -1)
    rank = paths @ weights
    best_val = metric.min()
    ties = np.flatnonzero(metric <= best_val)
    pick = ties[np.argmin(rank[ties])]
    return paths[pick], float(metric[pick] + floor), explored


def qr_mld_detect(y_k, M_k, c: Constellation, L: int | None = None,
                  budget: int = DEFAULT_BUDGET) -> DetectionResult:
    """Full (unpruned) tree search on the QR-rotated system; same decisions as MLD."""
    M = _matrix(M_k)
    y = np.asarray(y_k, dtype=complex).reshape(-1)
    _check_budget(c, M.shape[1], budget)
    if M.shape[0] < M.shape[1] or numerical_rank(M) < M.shape[1]:
        warnings.warn("effective channel is rank deficient; using exhaustive MLD",
                      RuntimeWarning, stacklevel=2)
        return mld_detect(y, M, c, L, budget)
    idx, metric, explored = _tree_search(y, M, c, None)
    return DetectionResult(c.points[idx], metric, explored, idx)


def qrm_mld_detect(y_k, M_k, c: Constellation, L: int | None = None, M: int = 16) -> DetectionResult:
    """M-algorithm: keep the ``M`` best partial candidates after each stage.

    The reported metric is the full ``|y - M_k s|^2`` of the returned vector.
    """
    if M < 1:
        raise ContractError("M must be at least 1")
    H = _matrix(M_k)
    if L is not None and H.shape[1] != L:
        raise ContractError("L does not match the channel width")
    y = np.asarray(y_k, dtype=complex).reshape(-1)
    idx, metric, explored = _tree_search(y, H, c, M)
    return DetectionResult(c.points[idx], metric, explored, idx)


def combine_and_demod(y_k, W_k, c: Constellation, gain: float = 1.0) -> DetectionResult:
    """Slice ``W_k y_k / gain`` stream by stream."""
    if gain <= 0:
        raise DegenerateChannelError("combiner gain must be positive")
    s_hat = np.asarray(W_k) @ np.asarray(y_k).reshape(-1) / gain
    symbols, _ = demap(s_hat, c)
    return DetectionResult(symbols, float(np.sum(np.abs(s_hat - symbols) ** 2)), s_hat.size * c.order,
                           c.index_of(symbols))


def von_neumann_bound(S_tilde, M_tilde, tol: float = 1e-9) -> float:
    """Lower bound ``sum_n lam_n(A) lam_{N-n+1}(B)`` on ``Tr(A B)`` for PSD ``A, B``."""
    A = np.asarray(S_tilde, dtype=complex)
    B = np.asarray(M_tilde, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape != B.shape:
        raise ContractError("both matrices must be square and of equal size")
    out = []
    for X in (A, B):
        scale = max(np.linalg.norm(X), 1.0)
        if np.linalg.norm(X - X.conj().T) > tol * scale:
            raise ContractError("matrix is not Hermitian")
        w = np.linalg.eigvalsh((X + X.conj().T) / 2)
        if w[0] < -tol * scale:
            raise ContractError("matrix is not positive semidefinite")
        out.append(w)
    a_desc = out[0][::-1]
    b_asc = out[1]
    return float(a_desc @ b_asc)
