"""Hankel-based realization of the deterministic and stochastic parts.

The deterministic part comes straight from Ho-Kalman on the input-output
covariance Hankels. The stochastic part runs Ho-Kalman on the output
covariance Hankels, rescales the state matrices, and then iterates the
innovation-form recursion for the gains K, the innovation variances Q and
the state second moments P.
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import IndefiniteError, LyapunovError, RealizationError, ShapeError, ValidationError
from .hankel import (
    build_hankel,
    build_input_hankel,
    build_output_hankel,
    build_shifted_hankel,
    required_words,
)
from .model import LpvSsaModel, as_weights, stability_radius
from .words import EMPTY

logger = logging.getLogger(__name__)

COND_MAX = 1e10
COND_WARN = 1e6
RANK_TOL = 1e-8
RECURSION_TOL = 1e-9
PD_TOL = 1e-10


@dataclass(frozen=True)
class DeterministicRealization:
    """({A_sigma, B_sigma}, C, D) together with Hankel diagnostics."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    singular_values: np.ndarray = field(default=None, compare=False)
    condition: float = field(default=float("nan"), compare=False)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise ShapeError(f"A must be (n_mu, n, n), got {A.shape}")
        n_mu, n = A.shape[:2]
        if B.ndim != 3 or B.shape[:2] != (n_mu, n):
            raise ShapeError(f"B must be ({n_mu}, {n}, n_u), got {B.shape}")
        if C.shape[1] != n or D.shape != (C.shape[0], B.shape[2]):
            raise ShapeError("C/D shapes do not match A/B")
        for name, arr in (("A", A), ("B", B), ("C", C), ("D", D)):
            object.__setattr__(self, name, arr)

    @property
    def n_x(self):
        return self.A.shape[1]

    @property
    def n_mu(self):
        return self.A.shape[0]

    def as_model(self, p):
        return LpvSsaModel.deterministic(self.A, self.B, self.C, self.D, p)


@dataclass(frozen=True)
class StochasticRealization:
    """Innovation-form realization of the noise-driven output component.

    ``G`` is the Ho-Kalman input matrix of the output-covariance Hankel.
    ``increments`` holds max_sigma ||P^{i+1} - P^i||_F per iteration,
    ``min_eig_P`` and ``min_eig_Q`` the smallest eigenvalues seen in each
    iterate. ``degenerate`` marks a zero-dimensional block produced from
    negligible covariances.
    """

    A_s: np.ndarray
    G: np.ndarray
    C_s: np.ndarray
    K: np.ndarray
    Q: np.ndarray
    P: np.ndarray
    iterations_used: int
    converged: bool
    increments: tuple = ()
    min_eig_P: tuple = ()
    min_eig_Q: tuple = ()
    degenerate: bool = False
    singular_values: np.ndarray = field(default=None, compare=False)
    condition: float = field(default=float("nan"), compare=False)

    @property
    def n_x(self):
        return self.A_s.shape[1]


def _family(x, name):
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 3:
        raise ShapeError(f"{name} must be stacked per scheduling channel")
    return arr


def ho_kalman(H, H_shift, H_in, H_out, M_eps, cond_max=COND_MAX, rank_tol=RANK_TOL, order=None):
    """Realize (A_sigma, B_sigma, C, D) from Hankel blocks.

    A_sigma solves H A_sigma = H_shift[sigma], B_sigma solves
    H B_sigma = H_in[sigma], C = H_out and D = M_eps. The solves use an LU
    factorization of H. With ``order`` set, H is replaced by its rank-``order``
    SVD truncation and the realization is expressed in the balanced
    coordinates of that truncation, which also accepts non-square H.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    H_shift = _family(H_shift, "H_shift")
    H_in = _family(H_in, "H_in")
    H_out = np.atleast_2d(np.asarray(H_out, dtype=float))
    M_eps = np.atleast_2d(np.asarray(M_eps, dtype=float))
    if H_shift.shape[1:] != H.shape or H_in.shape[1] != H.shape[0] or H_out.shape[1] != H.shape[1]:
        raise ShapeError("Hankel blocks have inconsistent shapes")
    sv = np.linalg.svd(H, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        raise RealizationError("Hankel matrix is zero", sv_ratio=0.0, singular_values=sv)
    if order is None:
        if H.shape[0] != H.shape[1]:
            raise ShapeError(f"Hankel matrix must be square, got {H.shape}; pass order= to truncate")
        ratio = sv[-1] / sv[0]
        cond = np.inf if ratio == 0 else 1.0 / ratio
        if ratio <= rank_tol or cond > cond_max:
            raise RealizationError(
                f"Hankel matrix is rank deficient or ill-conditioned (sigma_min/sigma_max = {ratio:.3e})",
                sv_ratio=ratio,
                singular_values=sv,
            )
        if cond > COND_WARN:
            warnings.warn(f"Hankel condition number {cond:.2e} is large", RuntimeWarning, stacklevel=2)
        lu = scipy.linalg.lu_factor(H)
        A = np.array([scipy.linalg.lu_solve(lu, h) for h in H_shift])
        B = np.array([scipy.linalg.lu_solve(lu, h) for h in H_in])
        C = H_out.copy()
    else:
        if not 1 <= order <= min(H.shape):
            raise ValidationError(f"order must be in [1, {min(H.shape)}]")
        U, s, Vt = np.linalg.svd(H)
        ratio = s[order - 1] / s[0]
        cond = 1.0 / ratio if ratio > 0 else np.inf
        if ratio <= rank_tol:
            raise RealizationError(
                f"truncated Hankel has sigma ratio {ratio:.3e}", sv_ratio=ratio, singular_values=sv
            )
        U, s, V = U[:, :order], s[:order], Vt[:order].T
        left = U.T / np.sqrt(s)[:, None]
        right = V / np.sqrt(s)[None, :]
        A = np.array([left @ h @ right for h in H_shift])
        B = np.array([left @ h for h in H_in])
        C = H_out @ right
    return DeterministicRealization(A, B, C, M_eps, singular_values=sv, condition=cond)


def hankel_blocks(series, sel, n_mu, M_eps=None):
    """The four Hankel inputs of :func:`ho_kalman` built from ``series``."""
    H = build_hankel(series, sel)
    H_shift = np.array([build_shifted_hankel(series, sel, s) for s in range(1, n_mu + 1)])
    H_in = np.array([build_input_hankel(series, sel, s) for s in range(1, n_mu + 1)])
    H_out = build_output_hankel(series, sel)
    if M_eps is None:
        M_eps = series[EMPTY]
    return H, H_shift, H_in, H_out, M_eps


def realize_deterministic(series, sel, n_mu, cond_max=COND_MAX, rank_tol=RANK_TOL, order=None):
    """Deterministic realization from the input-output covariance series."""
    return ho_kalman(*hankel_blocks(series, sel, n_mu), cond_max=cond_max, rank_tol=rank_tol, order=order)


def stationary_state_covariance(A, p, W):
    """Solve S = sum_i p_i A_i S A_i^T + W by vectorization."""
    A = np.asarray(A, dtype=float)
    W = np.atleast_2d(np.asarray(W, dtype=float))
    n = A.shape[1]
    if n == 0:
        return np.zeros((0, 0))
    M = sum(pi * np.kron(a, a) for pi, a in zip(p, A))
    rho = float(np.max(np.abs(np.linalg.eigvals(M))))
    if rho >= 1.0:
        raise LyapunovError(f"no unique stationary solution: spectral radius {rho:.4f} >= 1")
    # row-major vec: vec(A S A^T) = (A kron A) vec(S)
    S = np.linalg.solve(np.eye(n * n) - M, W.reshape(-1)).reshape(n, n)
    return 0.5 * (S + S.T)


def solve_stationary_lyapunov(A, B, Lambda_u, p):
    """Per-channel state moments P_sigma for the stationary covariance equation.

    Solves P_sigma = p_sigma sum_j (A_j P_j A_j^T + B_j Lambda_u B_j^T) by
    writing P_sigma = p_sigma S, where S solves the single equation
    S = sum_j (p_j A_j S A_j^T + B_j Lambda_u B_j^T).
    """
    A = _family(A, "A")
    B = _family(B, "B")
    p = as_weights(p, A.shape[0])
    L = np.atleast_2d(np.asarray(Lambda_u, dtype=float))
    W = sum(b @ L @ b.T for b in B)
    S = stationary_state_covariance(A, p, W)
    return np.array([pi * S for pi in p])


def lyapunov_residual(P, A, B, Lambda_u, p):
    """Relative residual of the stationary covariance equation at P."""
    L = np.atleast_2d(np.asarray(Lambda_u, dtype=float))
    rhs_sum = sum(a @ Pj @ a.T + b @ L @ b.T for a, b, Pj in zip(A, B, P))
    rhs = np.array([pi * rhs_sum for pi in p])
    scale = max(np.linalg.norm(rhs), np.linalg.norm(P), np.finfo(float).tiny)
    return float(np.linalg.norm(np.asarray(P) - rhs) / scale)


def stochastic_recursion(A_s, G, C_s, second_moments, p, max_iter=50, tol=RECURSION_TOL, pd_tol=None):
    """Iterate the gain/innovation/state-moment recursion from P = 0.

    For each sigma:

        Q^i = p_sigma T_sigma - C P^i_sigma C^T
        K^i = (sqrt(p_sigma) G_sigma - A_sigma P^i_sigma C^T) (Q^i)^{-1}
        P^{i+1}_sigma = p_sigma sum_j (A_j P^i_j A_j^T + K^i_j Q^i_j K^i_j^T)

    Stops after ``max_iter`` updates or once max_sigma ||P^{i+1} - P^i||_F
    < ``tol``. Returns a dict with K, Q, P, iterations, converged and the
    per-iteration increment and eigenvalue traces.
    """
    A_s = _family(A_s, "A_s")
    G = _family(G, "G")
    C = np.atleast_2d(np.asarray(C_s, dtype=float))
    T = _family(second_moments, "second_moments")
    p = as_weights(p, A_s.shape[0])
    if max_iter < 1:
        raise ValidationError("max_iter must be positive")
    if not np.allclose(T, np.swapaxes(T, 1, 2), atol=1e-10 * max(1.0, np.max(np.abs(T)))):
        raise ValidationError("second moments must be symmetric")
    T = 0.5 * (T + np.swapaxes(T, 1, 2))
    n_mu, n = A_s.shape[:2]
    sq = np.sqrt(p)
    if pd_tol is None:
        pd_tol = PD_TOL * max(np.trace(pi * t) for pi, t in zip(p, T))
    P = np.zeros((n_mu, n, n))
    increments, min_p, min_q = [], [], []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        Q = np.array([p[s] * T[s] - C @ P[s] @ C.T for s in range(n_mu)])
        Q = 0.5 * (Q + np.swapaxes(Q, 1, 2))
        eigs = [np.linalg.eigvalsh(q)[0] for q in Q]
        min_q.append(float(min(eigs)))
        for s, e in enumerate(eigs):
            if e <= pd_tol:
                raise IndefiniteError(s + 1, it - 1, float(e))
        K = np.array(
            [np.linalg.solve(Q[s].T, (sq[s] * G[s] - A_s[s] @ P[s] @ C.T).T).T for s in range(n_mu)]
        )
        total = sum(A_s[j] @ P[j] @ A_s[j].T + K[j] @ Q[j] @ K[j].T for j in range(n_mu))
        P_next = np.array([p[s] * total for s in range(n_mu)])
        P_next = 0.5 * (P_next + np.swapaxes(P_next, 1, 2))
        min_p.append(float(min(np.linalg.eigvalsh(x)[0] for x in P_next)) if n else 0.0)
        inc = float(max(np.linalg.norm(P_next[s] - P[s]) for s in range(n_mu)))
        increments.append(inc)
        P = P_next
        if inc < tol:
            converged = True
            break
    # gains and innovation variances consistent with the returned P
    Q = np.array([p[s] * T[s] - C @ P[s] @ C.T for s in range(n_mu)])
    Q = 0.5 * (Q + np.swapaxes(Q, 1, 2))
    for s, q in enumerate(Q):
        e = np.linalg.eigvalsh(q)[0]
        if e <= pd_tol:
            raise IndefiniteError(s + 1, it, float(e))
    K = np.array([np.linalg.solve(Q[s].T, (sq[s] * G[s] - A_s[s] @ P[s] @ C.T).T).T for s in range(n_mu)])
    if not converged:
        logger.warning("recursion stopped after %d iterations, last increment %.3e", it, increments[-1])
    return {
        "K": K,
        "Q": Q,
        "P": P,
        "iterations": it,
        "converged": converged,
        "increments": tuple(increments),
        "min_eig_P": tuple(min_p),
        "min_eig_Q": tuple(min_q),
    }


def is_negligible(series, sel, second_moments, n_mu, threshold):
    """True when every covariance the stochastic Hankels read is below ``threshold``."""
    words = [w for w in required_words(sel, n_mu) if w]
    peak = max(float(np.max(np.abs(series[w]))) for w in words)
    return peak < threshold and float(np.max(np.abs(second_moments))) < threshold


def realize_stochastic(
    series,
    second_moments,
    sel,
    p,
    max_iter=50,
    tol=RECURSION_TOL,
    cond_max=COND_MAX,
    rank_tol=RANK_TOL,
    order=None,
    degenerate_threshold=None,
):
    """Innovation-form realization from output covariances.

    ``series`` holds E[y^s(t) z^{y^s}_w(t)^T] for nonempty words; the value
    at the empty word is taken as the identity. When every covariance is
    below ``degenerate_threshold`` (default 10 * rank_tol) the result is a
    zero-dimensional block.
    """
    p = as_weights(p)
    n_mu = p.size
    T = _family(second_moments, "second_moments")
    n_y = series.rows
    threshold = 10 * rank_tol if degenerate_threshold is None else degenerate_threshold
    if is_negligible(series, sel, T, n_mu, threshold):
        logger.info("stochastic covariances are negligible; using a zero-dimensional noise model")
        Q = np.array([p[s] * T[s] for s in range(n_mu)])
        Q = 0.5 * (Q + np.swapaxes(Q, 1, 2))
        return StochasticRealization(
            A_s=np.zeros((n_mu, 0, 0)),
            G=np.zeros((n_mu, 0, n_y)),
            C_s=np.zeros((n_y, 0)),
            K=np.zeros((n_mu, 0, n_y)),
            Q=Q,
            P=np.zeros((n_mu, 0, 0)),
            iterations_used=0,
            converged=True,
            degenerate=True,
        )
    blocks = hankel_blocks(series, sel, n_mu, M_eps=np.eye(n_y))
    hk = ho_kalman(*blocks, cond_max=cond_max, rank_tol=rank_tol, order=order)
    A_s = hk.A / np.sqrt(p)[:, None, None]
    rec = stochastic_recursion(A_s, hk.B, hk.C, T, p, max_iter=max_iter, tol=tol)
    return StochasticRealization(
        A_s=A_s,
        G=hk.B,
        C_s=hk.C,
        K=rec["K"],
        Q=rec["Q"],
        P=rec["P"],
        iterations_used=rec["iterations"],
        converged=rec["converged"],
        increments=rec["increments"],
        min_eig_P=rec["min_eig_P"],
        min_eig_Q=rec["min_eig_Q"],
        singular_values=hk.singular_values,
        condition=hk.condition,
    )


def compose(det, stoch, p):
    """Block-diagonal joint model: deterministic states first, then stochastic ones."""
    p = as_weights(p)
    n_mu = p.size
    A_d, B_d = np.asarray(det.A), np.asarray(det.B)
    C_d, D_d = np.atleast_2d(det.C), np.atleast_2d(det.D)
    A_s, K_s, C_s = np.asarray(stoch.A_s), np.asarray(stoch.K), np.atleast_2d(stoch.C_s)
    if A_d.shape[0] != n_mu or A_s.shape[0] != n_mu:
        raise ShapeError("scheduling dimension differs between parts")
    if C_d.shape[0] != C_s.shape[0]:
        raise ShapeError(f"output dimension differs: {C_d.shape[0]} vs {C_s.shape[0]}")
    nd, ns = A_d.shape[1], A_s.shape[1]
    n_y, n_u = C_d.shape[0], D_d.shape[1]
    A = np.zeros((n_mu, nd + ns, nd + ns))
    A[:, :nd, :nd] = A_d
    A[:, nd:, nd:] = A_s
    B = np.zeros((n_mu, nd + ns, n_u))
    B[:, :nd] = B_d
    K = np.zeros((n_mu, nd + ns, n_y))
    K[:, nd:] = K_s
    C = np.hstack([C_d, C_s.reshape(n_y, ns)])
    return LpvSsaModel(A, B, K, stoch.Q, C, D_d, p)


def is_stable(A, p):
    return stability_radius(A, p) < 1.0
