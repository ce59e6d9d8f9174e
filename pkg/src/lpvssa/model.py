"""Affine LPV state-space models, datasets, simulation and I/O.

The model is

    x(t+1) = sum_i (A_i x(t) + B_i u(t) + K_i v(t)) mu_i(t)
    y(t)   = C x(t) + D u(t) + v(t)

with scheduling channel 1 fixed to one. Matrices are stacked along a
leading scheduling axis, so ``A`` has shape (n_mu, n_x, n_x).
"""

import csv
import json
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DivergenceError, ParseError, ShapeError, ValidationError
from .words import word_matrix_product

logger = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e12
SYMMETRY_TOL = 1e-10


def as_weights(p, n_mu=None):
    """Validate scheduling second moments: positive, with p[0] == 1."""
    p = np.asarray(p, dtype=float).reshape(-1)
    if n_mu is not None and p.size != n_mu:
        raise ShapeError(f"expected {n_mu} scheduling weights, got {p.size}")
    if p.size == 0 or p[0] != 1.0:
        raise ValidationError("weight of the constant scheduling channel must be exactly 1")
    if not np.all(p > 0) or not np.all(np.isfinite(p)):
        raise ValidationError("scheduling weights must be finite and strictly positive")
    return p


def _stack(mats, rows, cols, name):
    arr = np.asarray(mats, dtype=float)
    if arr.ndim == 2 and arr.size == 0:
        arr = arr.reshape(arr.shape[0], rows, cols)
    if arr.ndim != 3 or arr.shape[1:] != (rows, cols):
        raise ShapeError(f"{name}: expected (n_mu, {rows}, {cols}), got {arr.shape}")
    return arr


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class LpvSsaModel:
    """Matrix family ({A_i, B_i, K_i, Q_i}, C, D) plus scheduling weights p."""

    A: np.ndarray
    B: np.ndarray
    K: np.ndarray
    Q: np.ndarray
    C: np.ndarray
    D: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        p = as_weights(self.p)
        n_mu = p.size
        n_y, n_x = C.shape
        if D.shape[0] != n_y:
            raise ShapeError(f"D has {D.shape[0]} rows, C has {n_y}")
        n_u = D.shape[1]
        A = _stack(self.A, n_x, n_x, "A")
        B = _stack(self.B, n_x, n_u, "B")
        K = _stack(self.K, n_x, n_y, "K")
        Q = _stack(self.Q, n_y, n_y, "Q")
        for name, arr in (("A", A), ("B", B), ("K", K), ("Q", Q)):
            if arr.shape[0] != n_mu:
                raise ShapeError(f"{name} has {arr.shape[0]} scheduling slices, p has {n_mu}")
        for name, arr in (("A", A), ("B", B), ("K", K), ("Q", Q), ("C", C), ("D", D)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} contains non-finite entries")
        if not np.allclose(Q, np.swapaxes(Q, 1, 2), rtol=0, atol=SYMMETRY_TOL):
            raise ValidationError("every Q_i must be symmetric")
        for name, arr in (("A", A), ("B", B), ("K", K), ("Q", Q), ("C", C), ("D", D), ("p", p)):
            object.__setattr__(self, name, _frozen(arr))

    @property
    def n_x(self):
        return self.C.shape[1]

    @property
    def n_y(self):
        return self.C.shape[0]

    @property
    def n_u(self):
        return self.D.shape[1]

    @property
    def n_mu(self):
        return self.p.size

    @classmethod
    def deterministic(cls, A, B, C, D, p):
        """Model with K = 0 and Q = 0."""
        A = np.asarray(A, dtype=float)
        C = np.atleast_2d(np.asarray(C, dtype=float))
        n_mu, n_x = A.shape[0], A.shape[1]
        n_y = C.shape[0]
        return cls(A, B, np.zeros((n_mu, n_x, n_y)), np.zeros((n_mu, n_y, n_y)), C, D, p)

    def deterministic_part(self):
        return LpvSsaModel.deterministic(self.A, self.B, self.C, self.D, self.p)

    def to_dict(self):
        return {
            "n_x": self.n_x,
            "n_y": self.n_y,
            "n_u": self.n_u,
            "n_mu": self.n_mu,
            "p": self.p.tolist(),
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "K": self.K.tolist(),
            "Q": self.Q.tolist(),
            "C": self.C.tolist(),
            "D": self.D.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        missing = [k for k in ("p", "A", "B", "C", "D") if k not in d]
        if missing:
            raise ParseError(f"missing field(s) {missing}", location="model")
        try:
            p = np.asarray(d["p"], dtype=float)
            C = np.atleast_2d(np.asarray(d["C"], dtype=float))
            n_mu, (n_y, n_x) = p.size, C.shape
            K = d.get("K", np.zeros((n_mu, n_x, n_y)))
            Q = d.get("Q", np.zeros((n_mu, n_y, n_y)))
            model = cls(d["A"], d["B"], K, Q, C, d["D"], p)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, (ShapeError, ValidationError)):
                raise
            raise ParseError(str(exc), location="model") from exc
        for key in ("n_x", "n_y", "n_u", "n_mu"):
            if key in d and int(d[key]) != getattr(model, key):
                raise ParseError(f"declared {d[key]}, matrices imply {getattr(model, key)}", location=key)
        return model


@dataclass(frozen=True)
class Dataset:
    """Aligned sample paths; row 0 is time t = 1."""

    y: np.ndarray
    u: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        arrays = {}
        for name in ("y", "u", "mu"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.ndim == 1:
                a = a[:, None]
            if a.ndim != 2:
                raise ShapeError(f"{name} must be 2-D (samples x channels)")
            if not np.all(np.isfinite(a)):
                raise ValidationError(f"{name} contains non-finite entries")
            arrays[name] = a
        n = {a.shape[0] for a in arrays.values()}
        if len(n) != 1:
            raise ShapeError(f"paths have different lengths: {sorted(n)}")
        if arrays["mu"].shape[1] < 1 or not np.all(arrays["mu"][:, 0] == 1.0):
            raise ValidationError("scheduling channel 1 must be identically 1")
        for name, a in arrays.items():
            object.__setattr__(self, name, _frozen(a))

    def __len__(self):
        return self.y.shape[0]

    @property
    def n_y(self):
        return self.y.shape[1]

    @property
    def n_u(self):
        return self.u.shape[1]

    @property
    def n_mu(self):
        return self.mu.shape[1]


@dataclass(frozen=True)
class SignalSpec:
    """Distributions of the generated input, scheduling and noise signals.

    ``*_dist`` is ``"uniform"`` (``scale`` is the half-width) or ``"normal"``
    (``scale`` is the standard deviation). Noise defaults to a Gaussian with
    covariance Q_1 of the model, multiplied by ``noise_scale`` (0 gives
    noise-free data).
    """

    input_dist: str = "uniform"
    input_scale: float = 1.5
    sched_dist: str = "uniform"
    sched_scale: float = 1.5
    noise_dist: str = "normal"
    noise_scale: float = 1.0

    @staticmethod
    def _variance(dist, scale):
        if dist == "uniform":
            return scale**2 / 3.0
        if dist == "normal":
            return scale**2
        raise ValidationError(f"unknown distribution {dist!r}")

    def weights(self, n_mu):
        """Scheduling second moments implied by the distribution."""
        p = np.full(n_mu, self._variance(self.sched_dist, self.sched_scale))
        p[0] = 1.0
        return p

    def input_covariance(self, n_u):
        return self._variance(self.input_dist, self.input_scale) * np.eye(n_u)

    def draw(self, rng, dist, scale, shape):
        if dist == "uniform":
            return rng.uniform(-scale, scale, size=shape)
        if dist == "normal":
            return rng.normal(0.0, scale, size=shape)
        raise ValidationError(f"unknown distribution {dist!r}")


def stream(seed, *path):
    """Independent counter-based generator for one stage of a seeded run.

    ``path`` is a tuple of small integers naming the stage, so that
    ``stream(seed, 0)`` and ``stream(seed, 1)`` never overlap.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in path))
    return np.random.Generator(np.random.Philox(ss))


def stability_radius(model_or_A, p=None):
    """Spectral radius of sum_i p_i (A_i kron A_i); the model is stable iff < 1."""
    if p is None:
        A, p = model_or_A.A, model_or_A.p
    else:
        A = np.asarray(model_or_A, dtype=float)
    A = np.asarray(A, dtype=float)
    n = A.shape[1]
    if n == 0:
        return 0.0
    M = sum(pi * np.kron(a, a) for pi, a in zip(p, A))
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def sub_markov(model, w):
    """M(e) = D, M(sigma s) = C A_s B_sigma."""
    w = tuple(w)
    if not w:
        return np.array(model.D, dtype=float)
    return model.C @ word_matrix_product(w[1:], model.A) @ model.B[w[0] - 1]


def sub_markov_levels(A, B, C, max_len):
    """Sub-Markov values for all nonempty words up to ``max_len``, by length.

    Returns a list whose entry k-1 has shape (n_mu**k, n_y, n_u), words of
    length k in lexicographic order. Cheap enough for |w| around 10.
    """
    A, B, C = (np.asarray(a, dtype=float) for a in (A, B, C))
    n_mu = A.shape[0]
    reach = B.copy()
    levels = []
    for k in range(1, max_len + 1):
        levels.append(np.einsum("ij,wjk->wik", C, reach))
        if k < max_len:
            reach = np.einsum("aij,wjk->waik", A, reach).reshape(-1, *reach.shape[1:])
    assert all(lv.shape[0] == n_mu ** (k + 1) for k, lv in enumerate(levels))
    return levels


def _warn_if_unstable(model):
    rho = stability_radius(model)
    if rho >= 1.0:
        warnings.warn(f"model is not stable (spectral radius {rho:.4f} >= 1)", RuntimeWarning, stacklevel=3)


def _check_paths(model, u, mu):
    u = np.asarray(u, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if mu.ndim == 1:
        mu = mu[:, None]
    if u.shape[1] != model.n_u or mu.shape[1] != model.n_mu:
        raise ShapeError(
            f"paths have {u.shape[1]} inputs / {mu.shape[1]} scheduling channels, "
            f"model expects {model.n_u} / {model.n_mu}"
        )
    if u.shape[0] != mu.shape[0]:
        raise ShapeError("input and scheduling paths differ in length")
    if not np.all(mu[:, 0] == 1.0):
        raise ValidationError("scheduling channel 1 must be identically 1")
    return u, mu


def simulate(model, u, mu, v=None, burn_in=0):
    """Run the stochastic recursion from x = 0 on given paths.

    ``v`` is the noise path (zero when omitted). The first ``burn_in``
    samples are dropped from the returned dataset.
    """
    u, mu = _check_paths(model, u, mu)
    T = u.shape[0]
    if v is None:
        v = np.zeros((T, model.n_y))
    v = np.asarray(v, dtype=float).reshape(T, model.n_y)
    if burn_in >= T:
        raise ValidationError(f"burn_in={burn_in} leaves no samples out of {T}")
    _warn_if_unstable(model)
    y, status = kernels.run_simulate(model.A, model.B, model.K, model.C, model.D, u, mu, v, DIVERGENCE_LIMIT)
    if status >= 0:
        raise DivergenceError(status, DIVERGENCE_LIMIT)
    return Dataset(y[burn_in:], u[burn_in:], mu[burn_in:])


def generate(model, n, seed, signals=SignalSpec(), burn_in=1000):
    """Draw input, scheduling and noise paths and simulate ``n`` samples.

    Returns ``(dataset, v)`` where ``v`` is the noise path that entered
    the retained samples (useful for the signal-to-noise ratio).
    """
    if n < 1:
        raise ValidationError("number of samples must be positive")
    T = n + burn_in
    u = signals.draw(stream(seed, 0), signals.input_dist, signals.input_scale, (T, model.n_u))
    mu = np.ones((T, model.n_mu))
    if model.n_mu > 1:
        mu[:, 1:] = signals.draw(stream(seed, 1), signals.sched_dist, signals.sched_scale, (T, model.n_mu - 1))
    if signals.noise_scale == 0.0:
        v = np.zeros((T, model.n_y))
    else:
        cov = model.Q[0]
        white = signals.draw(stream(seed, 2), signals.noise_dist, 1.0, (T, model.n_y))
        if signals.noise_dist == "uniform":
            white *= np.sqrt(3.0)
        w, V = np.linalg.eigh(cov)
        shaping = V @ np.diag(np.sqrt(np.clip(w, 0.0, None)))
        v = signals.noise_scale * white @ shaping.T
    data = simulate(model, u, mu, v, burn_in=burn_in)
    return data, v[burn_in:]


def _det_arrays(model):
    n_mu, n_x = model.A.shape[0], model.A.shape[1]
    C = np.atleast_2d(model.C)
    return model.A, model.B, np.zeros((n_mu, n_x, C.shape[0])), C, np.atleast_2d(model.D)


def simulate_deterministic(model, u, mu):
    """Noise-free response from x = 0; any object with A, B, C, D works."""
    A, B, K, C, D = _det_arrays(model)
    u = np.asarray(u, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.shape[1] != D.shape[1] or mu.shape[1] != A.shape[0] or len(u) != len(mu):
        raise ShapeError("paths do not match the model dimensions")
    y, status = kernels.run_simulate(A, B, K, C, D, u, mu, np.zeros((len(u), C.shape[0])), DIVERGENCE_LIMIT)
    if status >= 0:
        raise DivergenceError(status, DIVERGENCE_LIMIT)
    return y


def predict_one_step(model, dataset):
    """Innovation-form one-step-ahead prediction of ``dataset.y``."""
    if (dataset.n_y, dataset.n_u, dataset.n_mu) != (model.n_y, model.n_u, model.n_mu):
        raise ShapeError(
            f"dataset dims (y={dataset.n_y}, u={dataset.n_u}, mu={dataset.n_mu}) do not match model "
            f"(y={model.n_y}, u={model.n_u}, mu={model.n_mu})"
        )
    yhat, status = kernels.run_predict(
        model.A, model.B, model.K, model.C, model.D, dataset.u, dataset.mu, dataset.y, DIVERGENCE_LIMIT
    )
    if status >= 0:
        raise DivergenceError(status, DIVERGENCE_LIMIT)
    return yhat


def save_model(model, path):
    Path(path).write_text(json.dumps(model.to_dict(), indent=1))


def load_model(path):
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, location=f"{path}:{exc.lineno}:{exc.colno}") from exc
    if not isinstance(d, dict):
        raise ParseError("top level must be an object", location=str(path))
    if isinstance(d.get("model"), dict):
        d = d["model"]
    return LpvSsaModel.from_dict(d)


def dataset_header(n_y, n_u, n_mu):
    return (
        ["t"]
        + [f"y{i}" for i in range(1, n_y + 1)]
        + [f"u{i}" for i in range(1, n_u + 1)]
        + [f"mu{i}" for i in range(1, n_mu + 1)]
    )


def save_dataset(data, path):
    header = dataset_header(data.n_y, data.n_u, data.n_mu)
    t = np.arange(1, len(data) + 1)[:, None]
    table = np.hstack([t, data.y, data.u, data.mu])
    fmt = ["%d"] + ["%.17g"] * (table.shape[1] - 1)
    np.savetxt(path, table, delimiter=",", header=",".join(header), comments="", fmt=fmt)


def load_dataset(path):
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", location=f"{path}:1") from None
        counts = {prefix: 0 for prefix in ("y", "u", "mu")}
        for name in header[1:]:
            prefix = name.rstrip("0123456789")
            if prefix not in counts:
                raise ParseError(f"unexpected column {name!r}", location=f"{path}:1")
            counts[prefix] += 1
        expected = dataset_header(counts["y"], counts["u"], counts["mu"])
        if header != expected:
            raise ParseError(f"header must read {','.join(expected)}", location=f"{path}:1")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", location=f"{path}:{lineno}")
            try:
                rows.append([float(x) for x in row])
            except ValueError as exc:
                raise ParseError(str(exc), location=f"{path}:{lineno}") from None
    if not rows:
        raise ParseError("no data rows", location=f"{path}:2")
    table = np.array(rows)
    ny, nu = counts["y"], counts["u"]
    try:
        return Dataset(table[:, 1 : 1 + ny], table[:, 1 + ny : 1 + ny + nu], table[:, 1 + ny + nu :])
    except ValidationError as exc:
        raise ParseError(str(exc), location=str(path)) from exc


def save_noise(v, path):
    v = np.atleast_2d(np.asarray(v, dtype=float))
    header = ["t"] + [f"v{i}" for i in range(1, v.shape[1] + 1)]
    table = np.hstack([np.arange(1, len(v) + 1)[:, None], v])
    np.savetxt(path, table, delimiter=",", header=",".join(header), comments="", fmt=["%d"] + ["%.17g"] * v.shape[1])


def load_noise(path):
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return table[:, 1:]
