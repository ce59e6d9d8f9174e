"""Selections of Hankel entries and the four Hankel constructions.

A selection picks ``n`` rows ``(u_i, k_i)`` (a word and an output index)
and ``n`` columns ``(sigma_j, v_j, l_j)`` (a letter, a word and a column
index). Given a series ``M`` over words, entry (i, j) of the Hankel
matrix is ``M(sigma_j v_j u_i)[k_i, l_j]``.

All indices are 1-based, as they are in selection files.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import ParseError, RankDeficiencyError, ValidationError
from .words import EMPTY, check_word, enumerate_words, format_word, parse_word

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Selection:
    """Row set ``alpha`` and column set ``beta`` of a square sub-Hankel."""

    alpha: tuple
    beta: tuple

    def __post_init__(self):
        alpha = tuple((tuple(int(s) for s in u), int(k)) for u, k in self.alpha)
        beta = tuple((int(s), tuple(int(c) for c in v), int(l)) for s, v, l in self.beta)
        if len(alpha) != len(beta):
            raise ValidationError(f"alpha has {len(alpha)} entries but beta has {len(beta)}")
        if len(alpha) == 0:
            raise ValidationError("selection is empty")
        if len(set(alpha)) != len(alpha):
            raise ValidationError("duplicate entry in alpha")
        if len(set(beta)) != len(beta):
            raise ValidationError("duplicate entry in beta")
        n = len(alpha)
        for u, k in alpha:
            if len(u) > n:
                raise ValidationError(f"row word {format_word(u)} longer than n={n}")
            if k < 1:
                raise ValidationError(f"output index {k} must be >= 1")
        for s, v, l in beta:
            if len(v) > n:
                raise ValidationError(f"column word {format_word(v)} longer than n={n}")
            if s < 1 or l < 1 or any(c < 1 for c in v) or any(c < 1 for u, _ in alpha for c in u):
                raise ValidationError("letters and column indices must be >= 1")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def n(self):
        return len(self.alpha)

    def check(self, n_mu, n_rows, n_cols):
        """Raise if the selection refers to letters or indices outside the given ranges."""
        for u, k in self.alpha:
            check_word(u, n_mu)
            if k > n_rows:
                raise ValidationError(f"row index {k} exceeds {n_rows}")
        for s, v, l in self.beta:
            check_word((s,) + v, n_mu)
            if l > n_cols:
                raise ValidationError(f"column index {l} exceeds {n_cols}")

    def to_dict(self):
        return {
            "alpha": [[format_word(u), k] for u, k in self.alpha],
            "beta": [[s, format_word(v), l] for s, v, l in self.beta],
        }

    @classmethod
    def from_dict(cls, d):
        try:
            alpha = [(parse_word(str(u)), int(k)) for u, k in d["alpha"]]
            beta = [(int(s), parse_word(str(v)), int(l)) for s, v, l in d["beta"]]
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ParseError(f"malformed selection: {exc}", location="selection") from exc
        return cls(tuple(alpha), tuple(beta))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def load(cls, path):
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, location=f"{path}:{exc.lineno}") from exc
        return cls.from_dict(d)


def _col_word(b):
    return (b[0],) + b[1]


def build_hankel(series, sel):
    """n x n matrix with entries M(sigma_j v_j u_i)[k_i, l_j]."""
    return np.array([[series[_col_word(b) + u][k - 1, b[2] - 1] for b in sel.beta] for u, k in sel.alpha])


def build_shifted_hankel(series, sel, sigma):
    """As :func:`build_hankel` with ``sigma`` spliced between v_j and u_i."""
    return np.array(
        [[series[_col_word(b) + (sigma,) + u][k - 1, b[2] - 1] for b in sel.beta] for u, k in sel.alpha]
    )


def build_input_hankel(series, sel, sigma):
    """n x n_cols matrix with rows M(sigma u_i)[k_i, :]."""
    return np.array([series[(sigma,) + u][k - 1, :] for u, k in sel.alpha])


def build_output_hankel(series, sel):
    """n_rows x n matrix with columns M(sigma_j v_j)[:, l_j]."""
    return np.array([series[_col_word(b)][:, b[2] - 1] for b in sel.beta]).T


def required_words(sel, n_mu):
    """Every word the four Hankel builders read, plus the empty word."""
    words = {EMPTY}
    for u, _ in sel.alpha:
        for s in range(1, n_mu + 1):
            words.add((s,) + u)
        for b in sel.beta:
            cw = _col_word(b)
            words.add(cw + u)
            for s in range(1, n_mu + 1):
                words.add(cw + (s,) + u)
    for b in sel.beta:
        words.add(_col_word(b))
    return words


def candidate_rows(n_mu, n_rows, max_len):
    return [(u, k) for u in enumerate_words(n_mu, max_len) for k in range(1, n_rows + 1)]


def candidate_cols(n_mu, n_cols, max_len):
    return [
        (w[0], w[1:], l)
        for w in enumerate_words(n_mu, max_len + 1)
        if w
        for l in range(1, n_cols + 1)
    ]


def search_words(n_mu, n, max_len=None):
    """Words needed to search with candidates of length <= ``max_len`` and realize the result."""
    max_len = n - 1 if max_len is None else max_len
    return list(enumerate_words(n_mu, 2 * max_len + 2))


def _independent(R, order, rel_tol):
    """Greedy scan over rows of R in ``order``; keep rows that raise the rank."""
    scale = max(np.max(np.abs(R)), np.finfo(float).tiny)
    basis = np.zeros((0, R.shape[1]))
    keep = []
    for i in order:
        r = R[i]
        if basis.shape[0]:
            r = r - basis.T @ (basis @ r)
            r = r - basis.T @ (basis @ r)
        nr = np.linalg.norm(r)
        if nr > rel_tol * scale * np.sqrt(R.shape[1]):
            keep.append(i)
            basis = np.vstack([basis, r / nr])
    return keep


def search_selection(series, n, n_mu, strategy="exhaustive", rank_tol=1e-8, max_len=None):
    """Find an n-selection whose Hankel has numerical rank ``n``.

    Candidates are rows (u, k) with |u| <= ``max_len`` and columns
    (sigma, v, l) with |v| <= ``max_len`` (default n - 1, which is enough
    for any minimal system of order n).

    ``exhaustive`` returns the first rank-n selection in canonical
    enumeration order: rows are scanned in order and kept when they raise
    the rank of the candidate block, then columns likewise. This finds a
    selection whenever one exists among the candidates. ``greedy`` picks
    rows and columns by QR with column pivoting (largest volume first).
    """
    if n < 1:
        raise ValidationError("n must be positive")
    max_len = n - 1 if max_len is None else max_len
    rows = candidate_rows(n_mu, series.rows, max_len)
    cols = candidate_cols(n_mu, series.cols, max_len)
    R = np.array([[series[_col_word(c) + u][k - 1, c[2] - 1] for c in cols] for u, k in rows])
    sv = np.linalg.svd(R, compute_uv=False)
    best = int(np.sum(sv > rank_tol * sv[0])) if sv.size and sv[0] > 0 else 0
    if best < n:
        raise RankDeficiencyError(
            f"candidate Hankel has numerical rank {best} < {n}", best_rank=best, singular_values=sv
        )
    if strategy == "exhaustive":
        ri = _independent(R, range(len(rows)), 1e-6)[:n]
        sub = R[ri]
        ci = _independent(sub.T, range(len(cols)), 1e-6)[:n]
    elif strategy == "greedy":
        _, _, piv = scipy.linalg.qr(R.T, mode="economic", pivoting=True)
        ri = sorted(piv[:n])
        _, _, piv = scipy.linalg.qr(R[ri], mode="economic", pivoting=True)
        ci = sorted(piv[:n])
    else:
        raise ValidationError(f"unknown strategy {strategy!r}")
    if len(ri) < n or len(ci) < n:
        raise RankDeficiencyError(f"could not assemble {n} independent rows/columns", best_rank=min(len(ri), len(ci)))
    sel = Selection(tuple(rows[i] for i in ri), tuple(cols[j] for j in ci))
    s = np.linalg.svd(build_hankel(series, sel), compute_uv=False)
    ratio = s[-1] / s[0] if s[0] > 0 else 0.0
    if ratio <= rank_tol:
        raise RankDeficiencyError(
            f"selected Hankel is numerically singular (sigma ratio {ratio:.3e})",
            best_rank=int(np.sum(s > rank_tol * s[0])),
            sv_ratio=ratio,
            singular_values=s,
        )
    logger.debug("selection found with sigma ratio %.3e", ratio)
    return sel
