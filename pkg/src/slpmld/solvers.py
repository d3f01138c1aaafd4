"""Small dense optimizers used by the precoders.

* :func:`active_set_qp` -- primal active-set method for convex QPs with
  equality constraints and sign constraints on a subset of the variables.
* :func:`solve_simplex_qp` -- ``min u^T Q u`` over ``1^T u = 1`` with the
  leading ``nonneg_count`` entries nonnegative (the dual problems of the
  closed-form precoder and combiner).
* :func:`solve_min_eig` -- largest smallest eigenvalue of a Hermitian
  precoding block under a power budget, the alignment constraints that let
  every user decode on its own, and optionally constructive-interference rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ConvergenceError, InfeasibleError, NumericError
from .linalg import realify

MAX_OUTER_ITER = 500


# --------------------------------------------------------------------------
# generic active-set QP
# --------------------------------------------------------------------------
def _null_basis(A, n):
    if A.shape[0] == 0:
        return np.eye(n)
    _, sv, Vh = np.linalg.svd(A, full_matrices=True)
    rank = int(np.sum(sv > max(A.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)))
    return Vh[rank:].T


def _eqp_step(H, g, A, free, gtol):
    """Step on the free variables staying inside ``A p = 0``.

    Null-space method: with ``Z`` spanning ``null(A_free)`` the step minimizes
    the reduced model ``1/2 d'(Z'HZ)d + (Z'g)'d``.  If the reduced gradient has
    a component along a zero-curvature direction the model is unbounded below
    and that direction is returned with ``ray=True``.
    Returns ``(p_free, ray)``.
    """
    Z = _null_basis(A[:, free], free.size)
    if Z.shape[1] == 0:
        return np.zeros(free.size), False
    Hr = Z.T @ H[np.ix_(free, free)] @ Z
    gr = Z.T @ g[free]
    w, V = np.linalg.eigh((Hr + Hr.T) / 2)
    flat = w <= 1e-12 * max(w[-1], 1.0)
    coef = V.T @ gr
    if np.linalg.norm(coef[flat]) > gtol:
        return Z @ (-(V[:, flat] @ coef[flat])), True
    d = -(V[:, ~flat] @ (coef[~flat] / w[~flat]))
    return Z @ d, False


def _multipliers(A, g, working):
    """Least-squares equality multipliers ``y`` and bound multipliers ``lam``."""
    free = ~working
    if A.shape[0]:
        y = np.linalg.lstsq(A[:, free].T, g[free], rcond=None)[0]
    else:
        y = np.zeros(0)
    lam = g - A.T @ y
    lam[free] = 0.0
    return y, lam


def active_set_qp(H, c, A, b, nonneg, x0, max_iter: int = MAX_OUTER_ITER, tol: float = 1e-12):
    """Minimize ``1/2 x'Hx + c'x`` s.t. ``A x = b`` and ``x[nonneg] >= 0``.

    ``H`` must be positive semidefinite and ``x0`` feasible.  Returns
    ``(x, y, lam, iterations)`` where ``y`` are the equality multipliers and
    ``lam`` the bound multipliers (zero off the active set), with the sign
    convention ``H x + c = A' y + lam``.
    """
    H = np.asarray(H, dtype=float)
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float).reshape(-1, c.size)
    n = c.size
    bounded = np.zeros(n, dtype=bool)
    bounded[np.asarray(nonneg, dtype=int)] = True
    x = np.array(x0, dtype=float)
    if np.any(x[bounded] < -1e-9):
        raise ContractError("active_set_qp needs a feasible starting point")
    x[bounded] = np.maximum(x[bounded], 0.0)
    working = bounded & (x <= tol)
    x[working] = 0.0
    scale = 1.0 + np.abs(H).max(initial=0.0) * (1.0 + np.abs(x).max(initial=0.0)) \
        + np.abs(c).max(initial=0.0)
    gtol = 1e-12 * scale

    for it in range(1, max_iter + 1):
        g = H @ x + c
        free = np.flatnonzero(~working)
        p_free, ray = _eqp_step(H, g, A, free, gtol)
        p = np.zeros(n)
        p[free] = p_free
        if not ray and np.linalg.norm(p) <= 1e-13 * (1.0 + np.linalg.norm(x)):
            y, lam = _multipliers(A, g, working)
            if not np.any(working) or lam[working].min() >= -1e-11 * scale:
                return x, y, lam, it
            drop = np.flatnonzero(working)[np.argmin(lam[working])]
            working[drop] = False
            continue
        alpha, block = (np.inf, -1) if ray else (1.0, -1)
        cand = np.flatnonzero(bounded & ~working & (p < 0))
        if cand.size:
            ratios = -x[cand] / p[cand]
            j = np.argmin(ratios)
            if ratios[j] < alpha:
                alpha, block = max(ratios[j], 0.0), cand[j]
        if not np.isfinite(alpha):
            raise NumericError("QP objective is unbounded below")
        x = x + alpha * p
        if block >= 0:
            x[block] = 0.0
            working[block] = True
    raise ConvergenceError("active-set QP did not converge", best=x)


# --------------------------------------------------------------------------
# simplex-constrained QP
# --------------------------------------------------------------------------
@dataclass(eq=False)
class SimplexQp:
    """``min u^T Q u`` s.t. ``sum(u) = 1`` and ``u[:nonneg_count] >= 0``."""

    Q: np.ndarray
    nonneg_count: int

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float)
        n = self.Q.shape[0]
        if self.Q.shape != (n, n):
            raise ContractError("Q must be square")
        if not 0 <= self.nonneg_count <= n:
            raise ContractError("nonneg_count out of range")
        if np.linalg.norm(self.Q - self.Q.T) > 1e-10 * max(np.linalg.norm(self.Q), 1.0):
            raise ContractError("Q must be symmetric")

    @property
    def dim(self) -> int:
        return self.Q.shape[0]


@dataclass(eq=False)
class DualVector:
    """Minimizer ``u`` with its objective ``u^T Q u`` and equality multiplier."""

    u: np.ndarray
    objective: float
    multiplier: float = 0.0
    iterations: int = 0


def solve_simplex_qp(prob: SimplexQp) -> DualVector:
    Q = (prob.Q + prob.Q.T) / 2
    n = prob.dim
    if n == 0:
        raise ContractError("empty QP")
    emin = np.linalg.eigvalsh(Q)[0]
    if emin < -1e-8 * max(np.abs(Q).max(), 1e-300):
        raise NumericError(f"Q is not positive semidefinite (min eigenvalue {emin:.3e})")
    u0 = np.full(n, 1.0 / n)
    # equality-constrained minimizer; taken directly when it already satisfies the signs
    try:
        w = np.linalg.solve(Q, np.ones(n))
        if np.all(np.isfinite(w)) and abs(w.sum()) > 0:
            cand = w / w.sum()
            if np.all(cand[:prob.nonneg_count] >= 0):
                u0 = cand
    except np.linalg.LinAlgError:
        pass
    u, y, lam, it = active_set_qp(2 * Q, np.zeros(n), np.ones((1, n)), np.array([1.0]),
                                  np.arange(prob.nonneg_count), u0)
    # polish tiny sign and normalization drift
    u[:prob.nonneg_count] = np.maximum(u[:prob.nonneg_count], 0.0)
    u = u / u.sum()
    return DualVector(u=u, objective=float(u @ Q @ u), multiplier=float(y[0]), iterations=it)


@dataclass
class KktReport:
    stationarity: float
    primal: float
    dual: float
    complementarity: float
    extra: dict = field(default_factory=dict)

    def max(self) -> float:
        return max(self.stationarity, self.primal, self.dual, self.complementarity)


def _simplex_kkt(prob: SimplexQp, u) -> KktReport:
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size != prob.dim:
        raise ContractError("solution length does not match the problem")
    m = prob.nonneg_count
    grad = 2 * prob.Q @ u
    # pick the equality multiplier minimizing the stationarity/complementarity misfit
    a = np.concatenate([np.ones(prob.dim - m), u[:m]])
    r0 = np.concatenate([grad[m:], u[:m] * grad[:m]])
    lam = float(a @ r0 / (a @ a)) if a @ a > 0 else float(grad.mean())
    mu = grad[:m] - lam
    return KktReport(
        stationarity=float(np.linalg.norm(grad[m:] - lam)),
        primal=float(abs(u.sum() - 1.0) + np.linalg.norm(np.minimum(u[:m], 0.0))),
        dual=float(np.linalg.norm(np.minimum(mu, 0.0))),
        complementarity=float(np.linalg.norm(u[:m] * mu)),
        extra={"multiplier": lam},
    )


# --------------------------------------------------------------------------
# smallest-eigenvalue maximization
# --------------------------------------------------------------------------
@dataclass(eq=False)
class CiRows:
    """Constructive-interference rows ``G P s = U diag(Gamma) s_bar``.

    ``outer_mask`` marks the scalable components (length ``2 n``, real part of
    symbol ``i`` at ``2i``).
    """

    G: np.ndarray
    outer_mask: np.ndarray


@dataclass(eq=False)
class MinEigProblem:
    s: np.ndarray
    K: int
    L: int
    p: float
    ci: CiRows | None = None

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=complex).reshape(-1)
        if self.p < 0:
            raise ContractError("power budget must be nonnegative")
        if self.s.size != self.K * self.L:
            raise ContractError("symbol vector length must equal K*L")
        if np.any(self.s == 0):
            raise ContractError("symbols must be nonzero")
        if self.ci is not None:
            G = np.asarray(self.ci.G)
            if G.shape[0] != self.n or G.shape[1] < self.n:
                raise ContractError("CI matrix must be KL x N_T with N_T >= KL")
            if np.asarray(self.ci.outer_mask).size != 2 * self.n:
                raise ContractError("outer mask must have 2KL entries")

    @property
    def n(self) -> int:
        return self.K * self.L


@dataclass(eq=False)
class MinEigSolution:
    P1: np.ndarray
    z: float
    P2: np.ndarray | None = None
    t: float | None = None
    gamma: np.ndarray | None = None
    iterations: int = 0


def user_vectors(s, K: int, L: int) -> np.ndarray:
    """Columns ``s^(k)``: the symbol vector zeroed outside user ``k``'s block."""
    n = K * L
    S = np.zeros((n, K), dtype=complex)
    for k in range(K):
        S[k * L:(k + 1) * L, k] = s[k * L:(k + 1) * L]
    return S


def admissible_basis(s, K: int, L: int):
    """Orthonormal bases of the forced null space and of its complement.

    Alignment (``P s = K P_k s_k`` for all ``k``) forces ``P (s^(k) - s^(1)) = 0``;
    a Hermitian block therefore vanishes on ``N = span{s^(k) - s^(1)}`` and
    can only be positive definite on the orthogonal complement.
    Returns ``(N, B)`` with ``N`` of shape ``(n, K-1)`` and ``B`` ``(n, n-K+1)``.
    """
    S = user_vectors(s, K, L)
    n = K * L
    D = S[:, 1:] - S[:, :1]
    Qf, _ = np.linalg.qr(np.hstack([D, np.eye(n, dtype=complex)]))
    return Qf[:, :K - 1], Qf[:, K - 1:n]


def alignment_projector(s, K: int, L: int) -> np.ndarray:
    N, _ = admissible_basis(s, K, L)
    return np.eye(K * L) - N @ N.conj().T


def _ci_basis(s, outer_mask):
    """``B C``: maps cone coordinates ``theta = (t, delta_O) >= 0`` to ``U diag(Gamma) s_bar``."""
    n = s.size
    outer = np.flatnonzero(outer_mask)
    C = np.zeros((2 * n, 1 + outer.size))
    C[:, 0] = 1.0
    C[outer, 1 + np.arange(outer.size)] = 1.0
    B = np.zeros((n, 2 * n), dtype=complex)
    B[np.arange(n), 2 * np.arange(n)] = s.real
    B[np.arange(n), 2 * np.arange(n) + 1] = 1j * s.imag
    return B, C


def _realify_vec(v):
    return np.concatenate([v.real, v.imag])


def _realify_rect(M):
    return np.block([[M.real, -M.imag], [M.imag, M.real]])


def solve_min_eig(prob: MinEigProblem) -> MinEigSolution:
    """Maximize ``z`` with ``P1`` Hermitian, ``B^H P1 B >= z I``, power and alignment.

    ``B`` spans the complement of the null space forced by alignment (see
    :func:`admissible_basis`); with a single user it is the identity.  Among the
    maximizers the minimum-Frobenius-norm block ``P1 = z * Pi`` is returned,
    ``Pi`` being the orthogonal projector onto that complement.

    With CI rows, the remaining ``N_T - KL`` rows (``P2``) must place the
    noiseless receive vector ``G P s`` in the constructive region; the
    minimum-power ``P2 s`` is found by an active-set QP and ``P2`` is the
    minimum-Frobenius-norm matrix realizing it under alignment.
    """
    s, K, L, n = prob.s, prob.K, prob.L, prob.n
    Pi = alignment_projector(s, K, L)
    w = Pi @ s
    w_norm2 = float(np.vdot(w, w).real)
    if prob.ci is None:
        z = np.sqrt(prob.p / w_norm2)
        return MinEigSolution(P1=z * Pi, z=float(z), P2=None)

    G = np.asarray(prob.ci.G, dtype=complex)
    N_T = G.shape[1]
    G1, G2 = G[:, :n], G[:, n:]
    Bm, C = _ci_basis(s, np.asarray(prob.ci.outer_mask, dtype=bool))
    g0 = G1 @ w
    m2 = N_T - n
    q = C.shape[1]
    # unit-z problem: min |x2|^2  s.t.  G2 x2 - B C theta = -g0,  theta >= 0
    BCr = np.vstack([(Bm @ C).real, (Bm @ C).imag])
    A = np.hstack([_realify_rect(G2), -BCr]) if m2 else -BCr
    b = -_realify_vec(g0)
    nv = 2 * m2 + q
    bounds = np.arange(2 * m2, nv)
    # phase 1: any point of the constraint set.  x2 is eliminated by least
    # squares, leaving a small nonnegative least-squares problem in theta
    G2r = _realify_rect(G2) if m2 else np.zeros((b.size, 0))
    G2_pinv = np.linalg.pinv(G2r, rcond=1e-10)
    R = np.eye(b.size) - G2r @ G2_pinv
    Mr = R @ BCr
    rb = R @ b
    theta1, _, _, it1 = active_set_qp(2 * Mr.T @ Mr, 2 * Mr.T @ rb, np.zeros((0, q)), np.zeros(0),
                                      np.arange(q), np.zeros(q))
    x1 = np.concatenate([G2_pinv @ (b + BCr @ theta1), theta1])
    resid = A @ x1 - b
    if np.abs(resid).max() > 1e-8 * (1.0 + np.abs(b).max()):
        raise InfeasibleError("constructive-interference rows cannot be met",
                              row=int(np.argmax(np.abs(resid))))
    H = np.zeros((nv, nv))
    H[:2 * m2, :2 * m2] = 2 * np.eye(2 * m2)
    v, _, _, it2 = active_set_qp(H, np.zeros(nv), A, b, bounds, x1)
    x2 = v[:m2] + 1j * v[m2:2 * m2]
    theta = v[2 * m2:]
    phi = float(np.vdot(x2, x2).real)
    z = float(np.sqrt(prob.p / (w_norm2 + phi)))
    S = user_vectors(s, K, L)
    norms = np.sum(np.abs(S) ** 2, axis=0)
    # min-Frobenius P2 with P2 s^(k) = x2 / K for every user
    P2 = np.outer(z * x2 / K, (S / norms[None, :]).sum(axis=1).conj())
    gamma = z * (C @ theta)
    return MinEigSolution(P1=z * Pi, z=z, P2=P2, t=float(z * theta[0]), gamma=gamma,
                          iterations=it1 + it2)


def _min_eig_kkt(prob: MinEigProblem, sol: MinEigSolution) -> KktReport:
    n, K, L = prob.n, prob.K, prob.L
    P1 = np.asarray(sol.P1)
    if P1.shape != (n, n):
        raise ContractError("P1 shape does not match the problem")
    _, B = admissible_basis(prob.s, K, L)
    herm = float(np.linalg.norm(P1 - P1.conj().T))
    A = B.conj().T @ ((P1 + P1.conj().T) / 2) @ B
    lmi_gap = float(np.linalg.eigvalsh(realify(A))[0] - sol.z)
    P = P1 if sol.P2 is None else np.vstack([P1, sol.P2])
    x = P @ prob.s
    power = float(np.vdot(x, x).real)
    S = user_vectors(prob.s, K, L)
    align = max(float(np.linalg.norm(x - K * P @ S[:, k])) for k in range(K))
    w = alignment_projector(prob.s, K, L) @ prob.s
    extra = {"lmi_gap": lmi_gap, "power": power, "alignment": align, "hermitian": herm}
    if prob.ci is None:
        # certificate: z <= sqrt(p) / |Pi s| for every feasible block
        extra["optimality_gap"] = float(np.sqrt(prob.p) / np.linalg.norm(w) - sol.z)
    return KktReport(
        stationarity=abs(extra.get("optimality_gap", 0.0)),
        primal=max(0.0, power - prob.p) + align + max(0.0, -lmi_gap) + herm,
        dual=0.0,
        complementarity=abs(power - prob.p) if sol.z > 0 else 0.0,
        extra=extra,
    )


def kkt_residuals(prob, solution) -> KktReport:
    """Residual norms of a QP or min-eigenvalue solution against its problem."""
    if isinstance(prob, SimplexQp):
        u = solution.u if isinstance(solution, DualVector) else solution
        return _simplex_kkt(prob, u)
    if isinstance(prob, MinEigProblem):
        return _min_eig_kkt(prob, solution)
    raise ContractError(f"unsupported problem type {type(prob).__name__}")
