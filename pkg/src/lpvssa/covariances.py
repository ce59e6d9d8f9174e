"""Lagged scheduling-weighted products and covariance estimators.

For a path r and a nonempty word w of length k the "past of r along w" is

    z_w(t) = r(t - k) * mu_w(t - 1) / sqrt(p_w),

defined for 1-based t = k+1 .. N. Every empirical average below sums over
that range and divides by N.
"""

import logging

import numpy as np

from .errors import MissingWordError, ShapeError, ValidationError
from .model import simulate_deterministic, sub_markov
from .words import EMPTY, format_word, p_of_word, parse_word, word_key, word_matrix_product

logger = logging.getLogger(__name__)


class MatrixSeries:
    """Finite map from words to equally shaped matrices.

    Lookups of absent words raise :class:`MissingWordError`; nothing is
    silently treated as zero.
    """

    def __init__(self, rows, cols, entries=None):
        self.rows = int(rows)
        self.cols = int(cols)
        self._entries = {}
        for w, m in (entries or {}).items():
            self[w] = m

    def __setitem__(self, w, m):
        m = np.array(m, dtype=float).reshape(self.rows, self.cols) if np.size(m) == self.rows * self.cols else np.asarray(m)
        if m.shape != (self.rows, self.cols):
            raise ShapeError(f"expected {self.rows}x{self.cols} matrix for word {format_word(w)}, got {m.shape}")
        self._entries[tuple(w)] = m

    def __getitem__(self, w):
        try:
            return self._entries[tuple(w)]
        except KeyError:
            raise MissingWordError(w) from None

    def __contains__(self, w):
        return tuple(w) in self._entries

    def __len__(self):
        return len(self._entries)

    def __call__(self, w):
        return self[w]

    def words(self):
        return sorted(self._entries, key=word_key)

    def items(self):
        return [(w, self._entries[w]) for w in self.words()]

    @property
    def shape(self):
        return (self.rows, self.cols)

    @classmethod
    def from_function(cls, fn, words):
        words = list(words)
        first = np.atleast_2d(fn(words[0]))
        out = cls(*first.shape)
        for w in words:
            out[w] = fn(w)
        return out

    def combine(self, other, a=1.0, b=1.0):
        """a * self + b * other over the words both contain."""
        out = MatrixSeries(self.rows, self.cols)
        for w in self._entries:
            if w in other:
                out[w] = a * self[w] + b * other[w]
        return out

    def to_dict(self):
        return {format_word(w): m.tolist() for w, m in self.items()}

    @classmethod
    def from_dict(cls, d):
        items = [(parse_word(k), np.atleast_2d(np.asarray(v, dtype=float))) for k, v in d.items()]
        if not items:
            raise ValidationError("empty series")
        out = cls(*items[0][1].shape)
        for w, m in items:
            out[w] = m
        return out


def _as_path(r):
    r = np.asarray(r, dtype=float)
    return r[:, None] if r.ndim == 1 else r


def mu_word_path(mu, w):
    """mu_w(t - 1) for t = |w|+1 .. N, as a vector of length N - |w|."""
    N, k = mu.shape[0], len(w)
    out = np.ones(N - k)
    for j, s in enumerate(w):
        out = out * mu[j : N - k + j, s - 1]
    return out


def z_path(r, mu, w, p):
    """Rows of z_w for t = |w|+1 .. N (row j is time |w|+1+j).

    For the empty word this is r itself.
    """
    r = _as_path(r)
    mu = np.asarray(mu, dtype=float)
    w = tuple(w)
    k = len(w)
    if k == 0:
        return r.copy()
    if r.shape[0] <= k:
        raise IndexError(f"path of length {r.shape[0]} too short for word of length {k}")
    return r[: r.shape[0] - k] * (mu_word_path(mu, w) / np.sqrt(p_of_word(w, p)))[:, None]


def lagged_average(a, r, mu, w, p):
    """(1/N) sum_t a(t) z^r_w(t)^T over t = |w|+1 .. N."""
    a = _as_path(a)
    k = len(tuple(w))
    return a[k:].T @ z_path(r, mu, w, p) / a.shape[0]


def _solve_right(M, L):
    """M L^{-1} without forming the inverse."""
    return np.linalg.solve(L.T, M.T).T


def _check_input_covariance(L, n_u):
    L = np.atleast_2d(np.asarray(L, dtype=float))
    if L.shape != (n_u, n_u):
        raise ShapeError(f"Lambda_u must be {n_u}x{n_u}, got {L.shape}")
    if not np.allclose(L, L.T, atol=1e-10):
        raise ValidationError("Lambda_u must be symmetric")
    w = np.linalg.eigvalsh(L)
    if w[0] <= 0:
        raise ValidationError(f"Lambda_u must be positive definite (min eigenvalue {w[0]:.3e})")
    return L


def estimate_input_stats(data):
    """Sample input covariance and scheduling second moments (p[0] pinned to 1)."""
    N = len(data)
    L = data.u.T @ data.u / N
    p = np.mean(data.mu**2, axis=0)
    p[0] = 1.0
    return L, p


def empirical_psi_uy(data, words, p, Lambda_u):
    """Normalized input-output cross-covariances Psi^N_{u,y}(w).

    Psi(w) = (1/sqrt(p_w)) [(1/N) sum y(t) z^u_w(t)^T] Lambda_u^{-1}, with
    z^u_e(t) = u(t) for the empty word.
    """
    L = _check_input_covariance(Lambda_u, data.n_u)
    out = MatrixSeries(data.n_y, data.n_u)
    for w in sorted({tuple(w) for w in words}, key=word_key):
        avg = lagged_average(data.y, data.u, data.mu, w, p)
        out[w] = _solve_right(avg / np.sqrt(p_of_word(w, p)), L)
    return out


def output_moments(y, mu, words, p):
    """Output auto-covariances keyed by nonempty word, plus T_sigma for every sigma.

    Works on any path ``y`` (measured output or a residual).
    """
    y = _as_path(y)
    n_mu = mu.shape[1]
    series = MatrixSeries(y.shape[1], y.shape[1])
    for w in sorted({tuple(w) for w in words}, key=word_key):
        if not w:
            raise ValidationError("output covariances are defined for nonempty words only")
        series[w] = lagged_average(y, y, mu, w, p)
    T = np.empty((n_mu, y.shape[1], y.shape[1]))
    for s in range(1, n_mu + 1):
        z = z_path(y, mu, (s,), p)
        T[s - 1] = z.T @ z / y.shape[0]
    return series, T


def empirical_output_moments(data, words, p):
    """Lambda^{y,N}_w = (1/N) sum y(t) z^y_w(t)^T and T^{y,N}_sigma = (1/N) sum z^y_sigma z^y_sigma^T."""
    return output_moments(data.y, data.mu, words, p)


def exact_psi_uy(model, words):
    """Exact Psi_{u,y}: the sub-Markov function of the deterministic part."""
    return MatrixSeries.from_function(lambda w: sub_markov(model, w), words)


def _stationary_output_moments(A, G, C, F, W, p, words):
    """Second moments of y = C x + F n, x+ = sum_i (A_i x + G_i n) mu_i.

    ``W[i]`` is E[n n^T mu_i^2]. Returns the lagged covariance series
    E[y(t) z^y_w(t)^T] over ``words`` and T_sigma = E[z^y_sigma z^y_sigma^T].
    """
    from .realization import stationary_state_covariance

    A, G, W = (np.asarray(a, dtype=float) for a in (A, G, W))
    C = np.atleast_2d(C)
    F = np.atleast_2d(F)
    p = np.asarray(p, dtype=float)
    S = stationary_state_covariance(A, p, sum(g @ w @ g.T for g, w in zip(G, W)))
    n_y = C.shape[0]
    # E[x(t+1) y(t)^T mu_sigma(t)] per sigma
    cross = [p[s] * A[s] @ S @ C.T + G[s] @ W[s] @ F.T for s in range(len(p))]
    series = MatrixSeries(n_y, n_y)
    for w in words:
        w = tuple(w)
        if not w:
            raise ValidationError("output covariances are defined for nonempty words only")
        s, rest = w[0], w[1:]
        scale = np.sqrt(p_of_word(rest, p) / p[s - 1])
        series[w] = scale * C @ word_matrix_product(rest, A) @ cross[s - 1]
    T = np.array([(p[s] * C @ S @ C.T + F @ W[s] @ F.T) / p[s] for s in range(len(p))])
    return series, T


def exact_deterministic_moments(det, Lambda_u, words, p):
    """Output covariances contributed by a deterministic subsystem driven by white u.

    Returns (Lambda_S, T_S) with Lambda_S(w) = E[y^d(t) z^{y^d}_w(t)^T] and
    T_S[sigma] = E[z^{y^d}_sigma z^{y^d}_sigma^T]. The state moment comes from
    :func:`~lpvssa.realization.solve_stationary_lyapunov`.
    """
    from .realization import solve_stationary_lyapunov

    A = np.asarray(det.A, dtype=float)
    B = np.asarray(det.B, dtype=float)
    C = np.atleast_2d(det.C)
    D = np.atleast_2d(det.D)
    p = np.asarray(p, dtype=float)
    L = _check_input_covariance(Lambda_u, D.shape[1])
    # E[u u^T mu_s^2] = p_s Lambda_u, hence the sqrt(p) on B
    P = solve_stationary_lyapunov(A, np.sqrt(p)[:, None, None] * B, L, p)
    n_y = C.shape[0]
    series = MatrixSeries(n_y, n_y)
    for w in words:
        w = tuple(w)
        if not w:
            raise ValidationError("output covariances are defined for nonempty words only")
        s, rest = w[0], w[1:]
        head = A[s - 1] @ P[s - 1] @ C.T + p[s - 1] * B[s - 1] @ L @ D.T
        series[w] = np.sqrt(p_of_word(rest, p) / p[s - 1]) * C @ word_matrix_product(rest, A) @ head
    T = np.array([(C @ P[s] @ C.T + p[s] * D @ L @ D.T) / p[s] for s in range(len(p))])
    return series, T


def exact_psi_ys(model, words):
    """Exact Psi_{y^s} and E[z^{y^s}_sigma z^{y^s}_sigma^T] of a model's noise-driven part."""
    n_y = model.n_y
    series, T = _stationary_output_moments(model.A, model.K, model.C, np.eye(n_y), model.Q, model.p, words)
    return series, T


def deterministic_residual(data, det):
    """y - yhat^d where yhat^d is the noise-free response of ``det`` from x = 0."""
    return data.y - simulate_deterministic(det, data.u, data.mu)


def residual_psi_ys(data, det, words, p):
    """Empirical Psi^N_{y^s} and T^N from the residual of a deterministic model."""
    ys = deterministic_residual(data, det)
    return output_moments(ys, data.mu, words, p)


def cross_covariance(a, r, mu, w, p):
    """(1/N) sum a(t) z^r_w(t)^T, exposed for orthogonality diagnostics."""
    return lagged_average(a, r, mu, tuple(w), p)
