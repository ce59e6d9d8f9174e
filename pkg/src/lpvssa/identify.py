"""End-to-end identification from one input/scheduling/output record.

Stages, in order:

1. ``input-stats``: scheduling weights and input covariance (given or estimated)
2. ``io-covariances``: normalized input-output covariances over the words
   the deterministic Hankels need
3. ``deterministic``: Ho-Kalman realization of the input-driven part
4. ``split``: covariances of the noise-driven part, either from the
   residual y - yhat^d (``residual``) or by subtracting the exact
   covariances of the realized deterministic part (``analytic``)
5. ``stochastic``: innovation-form realization of the noise-driven part
6. ``compose``: block-diagonal joint model
"""

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .covariances import (
    empirical_output_moments,
    empirical_psi_uy,
    estimate_input_stats,
    exact_deterministic_moments,
    residual_psi_ys,
)
from .errors import DivergenceError, IdentificationError, LpvError, ParseError, ValidationError
from .hankel import Selection, required_words
from .model import SignalSpec, as_weights, generate, stability_radius, sub_markov
from .realization import (
    COND_MAX,
    RANK_TOL,
    RECURSION_TOL,
    StochasticRealization,
    compose,
    realize_deterministic,
    realize_stochastic,
)
from .words import enumerate_words, format_word

logger = logging.getLogger(__name__)

VARIANTS = ("residual", "analytic")


@dataclass(frozen=True)
class IdentifyConfig:
    """Inputs of :func:`identify`.

    ``weights`` and ``Lambda_u`` are arrays or the string ``"estimate"``.
    """

    selection_det: Selection
    selection_stoch: Selection
    weights: object = "estimate"
    Lambda_u: object = "estimate"
    max_iter: int = 50
    tol: float = RECURSION_TOL
    split_variant: str = "residual"
    rank_tol: float = RANK_TOL
    cond_max: float = COND_MAX
    stochastic: bool = True

    def __post_init__(self):
        if int(self.max_iter) < 1:
            raise ValidationError("max_iter must be positive")
        if not (self.tol > 0 and self.rank_tol > 0 and self.cond_max > 0):
            raise ValidationError("tolerances must be positive")
        if self.split_variant not in VARIANTS:
            raise ValidationError(f"split_variant must be one of {VARIANTS}")
        for name in ("weights", "Lambda_u"):
            v = getattr(self, name)
            if isinstance(v, str):
                if v != "estimate":
                    raise ValidationError(f"{name} must be a matrix or 'estimate'")
            else:
                object.__setattr__(self, name, np.asarray(v, dtype=float))

    def with_(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        def enc(v):
            return v if isinstance(v, str) else np.asarray(v).tolist()

        return {
            "selection_det": self.selection_det.to_dict(),
            "selection_stoch": self.selection_stoch.to_dict(),
            "weights": enc(self.weights),
            "Lambda_u": enc(self.Lambda_u),
            "max_iter": int(self.max_iter),
            "tol": self.tol,
            "split_variant": self.split_variant,
            "rank_tol": self.rank_tol,
            "cond_max": self.cond_max,
            "stochastic": self.stochastic,
        }

    @classmethod
    def from_dict(cls, d):
        if "selection_det" not in d or "selection_stoch" not in d:
            raise ParseError("config needs selection_det and selection_stoch", location="config")
        kwargs = {k: d[k] for k in ("weights", "Lambda_u", "max_iter", "tol", "split_variant", "rank_tol", "cond_max", "stochastic") if k in d}
        return cls(Selection.from_dict(d["selection_det"]), Selection.from_dict(d["selection_stoch"]), **kwargs)

    @classmethod
    def load(cls, path):
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, location=f"{path}:{exc.lineno}") from exc
        return cls.from_dict(d)


@dataclass
class IdentifyReport:
    model: object
    deterministic: object
    stochastic: object
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {"model": self.model.to_dict(), "diagnostics": _jsonable(self.diagnostics)}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def _zero_noise_block(n_mu, n_y):
    return StochasticRealization(
        A_s=np.zeros((n_mu, 0, 0)),
        G=np.zeros((n_mu, 0, n_y)),
        C_s=np.zeros((n_y, 0)),
        K=np.zeros((n_mu, 0, n_y)),
        Q=np.zeros((n_mu, n_y, n_y)),
        P=np.zeros((n_mu, 0, 0)),
        iterations_used=0,
        converged=True,
        degenerate=True,
    )


class _Stages:
    """Runs named stages, wrapping failures with what was computed so far."""

    def __init__(self):
        self.partial = {"diagnostics": {}}

    def run(self, name, fn, *args, **kwargs):
        logger.debug("stage %s", name)
        try:
            return fn(*args, **kwargs)
        except LpvError as exc:
            raise IdentificationError(name, exc, self.partial) from exc
        except np.linalg.LinAlgError as exc:
            raise IdentificationError(name, exc, self.partial) from exc


def identify(data, config):
    """Identify a joint deterministic/noise model from ``data``; returns an :class:`IdentifyReport`."""
    stages = _Stages()
    diag = stages.partial["diagnostics"]
    n_mu = data.n_mu

    def input_stats():
        L_hat, p_hat = estimate_input_stats(data)
        p = p_hat if isinstance(config.weights, str) else as_weights(config.weights, n_mu)
        L = L_hat if isinstance(config.Lambda_u, str) else np.atleast_2d(config.Lambda_u)
        config.selection_det.check(n_mu, data.n_y, data.n_u)
        config.selection_stoch.check(n_mu, data.n_y, data.n_y)
        return p, L, p_hat, L_hat

    p, L, p_hat, L_hat = stages.run("input-stats", input_stats)
    diag.update(weights=p, Lambda_u=L, weights_estimated=p_hat, Lambda_u_estimated=L_hat)
    if isinstance(config.weights, str) or isinstance(config.Lambda_u, str):
        logger.info("using estimated weights %s and input covariance %s", p, L.tolist())

    words_det = required_words(config.selection_det, n_mu)
    psi_uy = stages.run("io-covariances", empirical_psi_uy, data, words_det, p, L)
    diag["psi_uy"] = psi_uy.to_dict()
    diag["Lambda_u_condition"] = float(np.linalg.cond(L))

    det = stages.run(
        "deterministic",
        realize_deterministic,
        psi_uy,
        config.selection_det,
        n_mu,
        cond_max=config.cond_max,
        rank_tol=config.rank_tol,
    )
    stages.partial["deterministic"] = det
    diag["deterministic"] = {
        "hankel_singular_values": det.singular_values,
        "hankel_condition": det.condition,
        "stability_radius": stability_radius(det.A, p),
    }

    if not config.stochastic:
        stoch = _zero_noise_block(n_mu, data.n_y)
        diag["stochastic"] = {"skipped": True}
    else:
        words_sto = sorted(w for w in required_words(config.selection_stoch, n_mu) if w)

        def split():
            if config.split_variant == "residual":
                return residual_psi_ys(data, det, words_sto, p)
            lam, T = empirical_output_moments(data, words_sto, p)
            lam_d, T_d = exact_deterministic_moments(det, L, words_sto, p)
            return lam.combine(lam_d, 1.0, -1.0), T - T_d

        psi_ys, T = stages.run("split", split)
        diag["psi_ys"] = psi_ys.to_dict()
        diag["second_moments"] = T
        stoch = stages.run(
            "stochastic",
            realize_stochastic,
            psi_ys,
            T,
            config.selection_stoch,
            p,
            max_iter=config.max_iter,
            tol=config.tol,
            cond_max=config.cond_max,
            rank_tol=config.rank_tol,
        )
        stages.partial["stochastic"] = stoch
        diag["stochastic"] = {
            "hankel_singular_values": stoch.singular_values,
            "hankel_condition": stoch.condition,
            "iterations": stoch.iterations_used,
            "converged": stoch.converged,
            "increments": stoch.increments,
            "min_eig_P": stoch.min_eig_P,
            "min_eig_Q": stoch.min_eig_Q,
            "degenerate": stoch.degenerate,
            "stability_radius": stability_radius(stoch.A_s, p) if stoch.n_x else 0.0,
        }
        if stoch.degenerate:
            logger.warning("noise-driven part is negligible; noise model has no states")

    model = stages.run("compose", compose, det, stoch, p)
    diag["split_variant"] = config.split_variant
    diag["n_samples"] = len(data)
    return IdentifyReport(model=model, deterministic=det, stochastic=stoch, diagnostics=diag)


def markov_error(true_model, est, max_len=3):
    """max over |w| <= max_len of the largest entry of |M_est(w) - M_true(w)|."""
    return max(
        float(np.max(np.abs(sub_markov(est, w) - sub_markov(true_model, w))))
        for w in enumerate_words(true_model.n_mu, max_len)
    )


def _sweep_cell(args):
    model, N, seed, config, signals, max_len = args
    row = {"N": N, "seed": seed, "error": math.inf, "status": "ok"}
    try:
        data, _ = generate(model, N, seed, signals)
    except DivergenceError as exc:
        row["status"] = f"divergence: {exc}"
        return row
    try:
        rep = identify(data, config)
        est = rep.deterministic
    except IdentificationError as exc:
        row["status"] = f"{exc.stage}: {exc.cause}"
        est = exc.partial.get("deterministic")
    if est is not None:
        row["error"] = markov_error(model, est, max_len)
    return row


def consistency_sweep(model, Ns, seeds, config, signals=None, max_len=3, workers=None):
    """Sub-Markov estimation error for every (N, seed) cell.

    Cells whose deterministic realization fails record an infinite error;
    later stages failing do not affect the error. Returns rows sorted by
    (N, seed).
    """
    signals = signals or SignalSpec()
    cells = [(model, int(N), int(s), config, signals, max_len) for N in Ns for s in seeds]
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(cells) == 1:
        rows = [_sweep_cell(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    return sorted(rows, key=lambda r: (r["N"], r["seed"]))


def mean_errors(rows):
    """Mean error per sample size."""
    out = {}
    for N in sorted({r["N"] for r in rows}):
        out[N] = float(np.mean([r["error"] for r in rows if r["N"] == N]))
    return out


def markov_table(words, est, reference=None, labels=None):
    """Plain-text table of sub-Markov values, optionally beside a reference model."""
    lines = []
    head = f"{'word':>8} {'product':>12} {'estimated':>12}"
    if reference is not None:
        head += f" {'true':>12}"
    lines.append(head)
    for i, w in enumerate(words):
        lab = labels[i] if labels else ""
        v = sub_markov(est, w).ravel()
        line = f"{format_word(w):>8} {lab:>12} {np.array2string(v, precision=4):>12}"
        if reference is not None:
            line += f" {np.array2string(sub_markov(reference, w).ravel(), precision=4):>12}"
        lines.append(line)
    return "\n".join(lines)
