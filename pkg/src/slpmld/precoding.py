"""Transmit-side schemes and structural diagnostics.

Schemes
-------
* :func:`slp_closed_form` -- closed-form CI precoder for a fixed receive
  matrix ``G``; always rank one.
* :func:`optimal_combiner` / :func:`joint_design_ao` -- per-user receive
  combiner and the alternating transmit/receive design.
* :func:`ssvmp_precoder` -- maximizes the smallest eigenvalue of the leading
  square block under CI rows and per-user alignment.
* :func:`sdp_precoder` -- the same objective without CI rows; needs only the
  symbols.
* :func:`bd_precoder` -- block diagonalization baseline.

Real components of a symbol vector are interleaved: entry ``2i`` is the real
part of symbol ``i`` and ``2i + 1`` its imaginary part.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet
from .constellation import Constellation, build_index_partition, scalable_mask
from .errors import (
    ConfigurationError,
    ContractError,
    ConvergenceError,
    DegenerateChannelError,
    InfeasibleError,
    InvalidSymbolError,
)
from .linalg import null_space_basis, pinv, singular_values, svd
from .solvers import CiRows, MinEigProblem, SimplexQp, solve_min_eig, solve_simplex_qp

DEFAULT_KAPPA = 1e-5
AO_MAX_ITER = 200
RANK_RTOL = 1e-9


@dataclass(eq=False)
class PrecodeOutcome:
    """Precoder for one symbol slot.

    ``gamma`` and ``t`` are the component scalings and the CI margin when the
    scheme imposes CI rows (``None`` otherwise); ``z`` is the smallest
    eigenvalue of the leading block for the eigenvalue-based schemes.
    """

    P: np.ndarray
    gamma: np.ndarray | None = None
    t: float | None = None
    iterations: int = 0
    sigma: np.ndarray = field(default=None)
    z: float | None = None
    P1: np.ndarray | None = None

    def __post_init__(self):
        if self.sigma is None:
            self.sigma = singular_values(self.P)


@dataclass(eq=False)
class CombinerSet:
    """Unit-norm receive combiners ``W_k`` (``L x N_R``).

    ``gains[k]`` is the noiseless amplitude of user ``k``'s inner components
    after combining, used to rescale before slicing.
    """

    per_user: tuple[np.ndarray, ...]
    gains: tuple[float, ...] = ()

    @property
    def block_diagonal(self) -> np.ndarray:
        L, N_R = self.per_user[0].shape
        K = len(self.per_user)
        W = np.zeros((K * L, K * N_R), dtype=complex)
        for k, Wk in enumerate(self.per_user):
            W[k * L:(k + 1) * L, k * N_R:(k + 1) * N_R] = Wk
        return W


@dataclass(eq=False)
class CiGeometry:
    """Quantities that define the CI rows ``G x = U diag(Gamma) s_bar``."""

    G: np.ndarray
    s: np.ndarray
    s_bar: np.ndarray
    s_hat: np.ndarray
    U: np.ndarray
    T: np.ndarray
    E: np.ndarray
    V: np.ndarray
    V_tilde: np.ndarray
    n_outer: int
    outer_mask: np.ndarray

    @property
    def g_rows(self) -> np.ndarray:
        return self.G

    @property
    def B(self) -> np.ndarray:
        """``U diag(s_bar)``: maps component scalings to the scaled symbol vector."""
        return self.U * self.s_bar[None, :]


def pair_sum_matrix(n: int) -> np.ndarray:
    """``I_n`` Kronecker ``[1, 1]``."""
    return np.kron(np.eye(n), np.ones((1, 2)))


def symbol_basis(s) -> np.ndarray:
    """Interleaved basis vector ``[Re s_1, j Im s_1, Re s_2, ...]``."""
    s = np.asarray(s, dtype=complex).reshape(-1)
    out = np.empty(2 * s.size, dtype=complex)
    out[0::2] = s.real
    out[1::2] = 1j * s.imag
    return out


def selector_combiner(K: int, L: int, N_R: int) -> CombinerSet:
    """Combiners that keep the first ``L`` receive antennas of every user."""
    if L > N_R:
        raise ConfigurationError("L cannot exceed N_R")
    Wk = np.hstack([np.eye(L), np.zeros((L, N_R - L))]).astype(complex)
    return CombinerSet(tuple(Wk for _ in range(K)), tuple(1.0 for _ in range(K)))


def _gram_inverse(G):
    Gram = G @ G.conj().T
    smax = np.linalg.norm(Gram, 2)
    if smax == 0:
        raise DegenerateChannelError("effective matrix G is zero")
    return pinv(Gram, tol=RANK_RTOL * smax)


def build_ci_geometry(W, H: ChannelSet, s, c: Constellation) -> CiGeometry:
    """Assemble ``G = W H`` and the CI matrices for symbol vector ``s``.

    ``W`` is a :class:`CombinerSet`, or directly the ``KL x N_T`` matrix ``G``.
    """
    s = np.asarray(s, dtype=complex).reshape(-1)
    if np.any(np.abs(s) == 0):
        raise InvalidSymbolError("symbols must be nonzero")
    if isinstance(W, CombinerSet):
        if len(W.per_user) != H.K:
            raise ContractError("one combiner per user is required")
        G = np.vstack([Wk @ Hk for Wk, Hk in zip(W.per_user, H.per_user)])
    else:
        G = np.asarray(W, dtype=complex)
    n = s.size
    if G.shape != (n, H.N_T):
        raise ContractError(f"G has shape {G.shape}, expected {(n, H.N_T)}")
    part = build_index_partition(s, c)
    s_bar = symbol_basis(s)
    U = pair_sum_matrix(n)
    B = U * s_bar[None, :]
    T = B.conj().T @ _gram_inverse(G) @ B
    V = T.real
    V = (V + V.T) / 2
    E = part.permutation
    return CiGeometry(G=G, s=s, s_bar=s_bar, s_hat=1.0 / s, U=U, T=T, E=E, V=V,
                      V_tilde=E @ V @ E.T, n_outer=part.n_outer,
                      outer_mask=scalable_mask(s, c))


def _consistency_basis(geom: CiGeometry) -> np.ndarray | None:
    """Basis of scalings ``Gamma`` whose scaled symbol vector lies in ``range(G)``.

    Returns ``None`` when ``G`` has full row rank (every ``Gamma`` qualifies).
    """
    G = geom.G
    smax = np.linalg.norm(G, 2)
    left_null = null_space_basis(G.conj().T, tol=RANK_RTOL * smax)
    if left_null.shape[1] == 0:
        return None
    C = left_null.conj().T @ geom.B
    return null_space_basis(np.vstack([C.real, C.imag]), tol=1e-10 * max(np.abs(C).max(), 1.0))


def _dual_weight(geom: CiGeometry) -> np.ndarray:
    """Weight matrix of the dual QP in the permuted (outer-first) order."""
    Vt = geom.V_tilde
    dim = Vt.shape[0]
    Z = _consistency_basis(geom)
    if Z is None:
        eps = 1e-10 * np.trace(Vt) / dim
        Q = np.linalg.inv(Vt + eps * np.eye(dim))
    else:
        if Z.shape[1] == 0:
            raise InfeasibleError("no CI scaling is reachable through G")
        ZE = geom.E @ Z
        R = ZE.T @ Vt @ ZE
        R = (R + R.T) / 2
        Q = ZE @ np.linalg.solve(R, ZE.T)
    return (Q + Q.T) / 2


def slp_closed_form(geometry: CiGeometry, p: float) -> PrecodeOutcome:
    """Closed-form max-margin CI precoder for fixed ``G``.

    The dual weights ``u`` solve ``min u'Qu`` over the simplex with the outer
    components nonnegative; ``Gamma = sqrt(p / u'Qu) E' Q u`` and the margin is
    ``sqrt(p u'Qu)``.  The transmit vector ``x = G^+ U diag(Gamma) s_bar`` is
    spread over the symbols as ``P = x (1/KL) [1/s_1 ... 1/s_KL]`` so ``P s = x``.

    When ``G`` is row-rank deficient, ``Q`` is the pseudo-inverse of the
    quadratic form restricted to the reachable scalings.
    """
    if p < 0:
        raise ContractError("power must be nonnegative")
    Q = _dual_weight(geometry)
    dual = solve_simplex_qp(SimplexQp(Q, geometry.n_outer))
    obj = dual.objective
    if obj <= 1e-14 * max(np.abs(Q).max(), 1.0):
        raise InfeasibleError("CI margin is unbounded or undefined for this G")
    gamma = np.sqrt(p / obj) * (geometry.E.T @ (Q @ dual.u))
    t = float(np.sqrt(p * obj))
    x = geometry.G.conj().T @ _gram_inverse(geometry.G) @ (geometry.B @ gamma)
    n = geometry.s.size
    P = np.outer(x, geometry.s_hat) / n
    return PrecodeOutcome(P=P, gamma=gamma, t=t, iterations=dual.iterations)


def user_block(s, k: int, L: int) -> np.ndarray:
    return np.asarray(s).reshape(-1)[k * L:(k + 1) * L]


def optimal_combiner(H_k, P, s, s_k, c: Constellation):
    """Max-margin unit-norm combiner for one user given the precoder.

    Every row of the result is a multiple of ``r_k^H`` with ``r_k = H_k P s``.
    Returns ``(W_k, gamma_k)``; the user's margin is ``gamma_k.min()``.
    """
    r = np.asarray(H_k) @ np.asarray(P) @ np.asarray(s).reshape(-1)
    rr = float(np.vdot(r, r).real)
    if rr <= 0 or not np.isfinite(rr):
        raise DegenerateChannelError("received noiseless signal is zero")
    s_k = np.asarray(s_k, dtype=complex).reshape(-1)
    part = build_index_partition(s_k, c)
    s_bar = symbol_basis(s_k)
    v1 = np.abs(s_bar) ** 2
    E = part.permutation
    Q1 = np.diag(1.0 / (E @ v1))
    dual = solve_simplex_qp(SimplexQp(Q1, part.n_outer))
    gamma = np.sqrt(rr / dual.objective) * (E.T @ (Q1 @ dual.u))
    a = pair_sum_matrix(s_k.size) @ (gamma * s_bar)
    W = np.outer(a, r.conj()) / rr
    return W, gamma


def combiner_margin_weight(s_k, c: Constellation) -> float:
    """``u_1' Q_1 u_1`` for one user: its best margin is ``sqrt(weight) |H_k x|``."""
    s_k = np.asarray(s_k, dtype=complex).reshape(-1)
    part = build_index_partition(s_k, c)
    v1 = np.abs(symbol_basis(s_k)) ** 2
    return solve_simplex_qp(SimplexQp(np.diag(1.0 / (part.permutation @ v1)), part.n_outer)).objective


def balanced_init(H: ChannelSet, s, c: Constellation, p: float, max_iter: int = 200) -> np.ndarray:
    """Starting precoder aimed at ``max_x min_k w_k |H_k x|^2`` with ``|x|^2 = p``.

    With the combiner chosen optimally, user ``k``'s margin is
    ``sqrt(w_k) |H_k x|``, so the joint problem reduces to this max-min.  The
    start is the dominant eigenvector of ``sum_k lam_k w_k H_k^H H_k`` with the
    weights ``lam`` on the simplex driven toward the min-max by exponentiated
    subgradient steps; the best eigenvector seen is kept.  Returned as
    ``P = x (1/KL) [1/s_1 ... 1/s_KL]``.
    """
    s = np.asarray(s, dtype=complex).reshape(-1)
    K = H.K
    L = s.size // K
    grams = [combiner_margin_weight(user_block(s, k, L), c) * (Hk.conj().T @ Hk)
             for k, Hk in enumerate(H.per_user)]
    lam = np.full(K, 1.0 / K)
    best_val, best_x = -np.inf, None
    for _ in range(max_iter):
        w, V = np.linalg.eigh(sum(l * Gk for l, Gk in zip(lam, grams)))
        v = V[:, -1]
        gains = np.array([np.vdot(v, Gk @ v).real for Gk in grams])
        if gains.min() > best_val:
            best_val, best_x = gains.min(), v
        if w[-1] - gains.min() <= 1e-10 * w[-1] or K == 1:
            break
        lam = lam * np.exp(-0.5 * (gains - gains.mean()) / w[-1])
        lam /= lam.sum()
    if best_val <= 0:
        raise DegenerateChannelError("channel gives no signal to some user")
    return np.outer(best_x * np.sqrt(p), 1.0 / s) / s.size


def joint_design_ao(H: ChannelSet, s, c: Constellation, p: float, kappa: float = DEFAULT_KAPPA,
                    max_iter: int = AO_MAX_ITER):
    """Alternate combiner and precoder updates until the margin settles.

    The combiner step gives each user its own margin ``t_k``; before the
    precoder step every combiner is shrunk by ``min_k t_k / t_k`` so the
    current precoder stays feasible with a common margin, which makes the
    margin sequence nondecreasing.  The returned combiners are the unit-norm
    ones.  The starting precoder comes from :func:`balanced_init`.

    Returns ``(outcome, combiners, trace)`` with ``trace[0] = 0`` and one entry
    per precoder update.
    """
    if kappa <= 0:
        raise ConfigurationError("kappa must be positive")
    s = np.asarray(s, dtype=complex).reshape(-1)
    K = H.K
    if s.size % K:
        raise ContractError("symbol vector length must be a multiple of K")
    L = s.size // K
    if L > H.N_R or H.N_T < K * L:
        raise ConfigurationError("need L <= N_R and N_T >= K*L")
    P = balanced_init(H, s, c, p)
    trace = [0.0]
    outcome = None
    for it in range(1, max_iter + 1):
        steps = [optimal_combiner(Hk, P, s, user_block(s, k, L), c)
                 for k, Hk in enumerate(H.per_user)]
        margins = np.array([g.min() for _, g in steps])
        common = margins.min()
        G = np.vstack([(common / mk) * Wk @ Hk
                       for (Wk, _), mk, Hk in zip(steps, margins, H.per_user)])
        outcome = slp_closed_form(build_ci_geometry(G, H, s, c), p)
        P = outcome.P
        trace.append(outcome.t)
        combiners = CombinerSet(tuple(Wk for Wk, _ in steps),
                                tuple(float(outcome.t * mk / common) for mk in margins))
        if abs(trace[-1] - trace[-2]) <= kappa:
            outcome.iterations = it
            return outcome, combiners, np.array(trace)
    raise ConvergenceError(f"joint design did not settle within {max_iter} iterations",
                           best=outcome, trace=np.array(trace))


def selector_matrix(H: ChannelSet, L: int) -> np.ndarray:
    return np.vstack([Hk[:L] for Hk in H.per_user])


def ssvmp_precoder(H: ChannelSet, s, c: Constellation, p: float, G_source=None) -> PrecodeOutcome:
    """Max smallest-eigenvalue precoder with CI rows.

    ``G_source`` is a :class:`CombinerSet` or a ``KL x N_T`` matrix; by default
    the first ``L`` antennas of each user.
    """
    s = np.asarray(s, dtype=complex).reshape(-1)
    K = H.K
    L = s.size // K
    if H.N_T < K * L:
        raise ConfigurationError("need N_T >= K*L")
    if G_source is None:
        G = selector_matrix(H, L)
    elif isinstance(G_source, CombinerSet):
        G = np.vstack([Wk @ Hk for Wk, Hk in zip(G_source.per_user, H.per_user)])
    else:
        G = np.asarray(G_source, dtype=complex)
    sol = solve_min_eig(MinEigProblem(s, K, L, p, CiRows(G, scalable_mask(s, c))))
    P = np.vstack([sol.P1, sol.P2]) if sol.P2 is not None and sol.P2.size else sol.P1
    return PrecodeOutcome(P=P, gamma=sol.gamma, t=sol.t, iterations=sol.iterations,
                          z=sol.z, P1=sol.P1)


def sdp_precoder(s, c: Constellation, p: float, K: int, L: int, N_T: int) -> PrecodeOutcome:
    """Max smallest-eigenvalue precoder from the symbols alone; bottom block is zero."""
    s = np.asarray(s, dtype=complex).reshape(-1)
    if s.size != K * L:
        raise ContractError("symbol vector length must equal K*L")
    if N_T < K * L:
        raise ConfigurationError("need N_T >= K*L")
    c.index_of(s)
    sol = solve_min_eig(MinEigProblem(s, K, L, p))
    P = np.zeros((N_T, K * L), dtype=complex)
    P[:K * L] = sol.P1
    return PrecodeOutcome(P=P, iterations=sol.iterations, z=sol.z, P1=sol.P1)


def bd_precoder(H: ChannelSet, p: float, L: int | None = None) -> list[np.ndarray]:
    """Block diagonalization with ``L`` equal-power streams per user.

    ``P_k`` spans the top-``L`` right singular directions of ``H_k`` inside the
    null space of the other users' channels, and ``sum_k |P_k|_F^2 = p``.  If
    ``N_T < K N_R`` the other users are represented by their ``L`` strongest
    receive directions only (with a warning).
    """
    K, N_R, N_T = H.K, H.N_R, H.N_T
    L = N_R if L is None else L
    if L > N_R:
        raise ConfigurationError("L cannot exceed N_R")
    if N_T < K * L:
        raise ConfigurationError(f"BD needs N_T >= K*L ({N_T} < {K * L})")
    reduced = N_T < K * N_R
    if reduced:
        warnings.warn("N_T < K*N_R: nulling only the other users' strongest L directions",
                      RuntimeWarning, stacklevel=2)
        rows = []
        for Hk in H.per_user:
            Uk, _, _ = svd(Hk)
            rows.append(Uk[:, :L].conj().T @ Hk)
    else:
        rows = list(H.per_user)
    scale = np.sqrt(p / (K * L))
    out = []
    for k, Hk in enumerate(H.per_user):
        others = np.vstack([rows[i] for i in range(K) if i != k]) if K > 1 \
            else np.zeros((0, N_T), dtype=complex)
        N = null_space_basis(others) if K > 1 else np.eye(N_T, dtype=complex)
        if N.shape[1] < L:
            raise ConfigurationError("null space too small for L streams")
        _, _, Vk = svd(Hk @ N)
        out.append(N @ Vk[:, :L] * scale)
    return out


@dataclass(frozen=True)
class RankReport:
    sigma_ratio: float
    proportionality_deviation: float
    sigma_min: float


def verify_rank_structure(P, s) -> RankReport:
    """Rank-one diagnostics: ``sigma_2 / sigma_1`` and spread of the columns ``p_i s_i``."""
    P = np.asarray(P, dtype=complex)
    s = np.asarray(s, dtype=complex).reshape(-1)
    sig = singular_values(P)
    ratio = float(sig[1] / sig[0]) if sig.size > 1 and sig[0] > 0 else 0.0
    cols = P * s[None, :]
    ref = np.linalg.norm(cols[:, 0])
    dev = float(np.max(np.linalg.norm(cols - cols[:, :1], axis=0)) / ref) if ref > 0 else np.inf
    return RankReport(ratio, dev, float(sig[-1]) if P.shape[0] >= P.shape[1] else 0.0)
