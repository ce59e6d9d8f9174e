"""Words over the scheduling alphabet {1, ..., n_mu}.

A word is a plain tuple of 1-based letters, most recent letter last, so
``(2, 1)`` is the word written ``21``. The empty tuple is the empty word,
rendered ``"e"`` in text. Matrix products over a word run in reverse
order: ``A_w = A_{w_k} ... A_{w_1}``.
"""

from itertools import product

import numpy as np

from .errors import ParseError, ShapeError, ValidationError

EMPTY = ()


def enumerate_words(n_mu, max_len):
    """All words of length <= ``max_len``, shortest first, then lexicographic.

    >>> [format_word(w) for w in enumerate_words(2, 2)]
    ['e', '1', '2', '11', '12', '21', '22']
    """
    if n_mu < 1 or max_len < 0:
        raise ValueError("need n_mu >= 1 and max_len >= 0")
    letters = range(1, n_mu + 1)
    out = []
    for k in range(max_len + 1):
        out.extend(product(letters, repeat=k))
    return out


def words_of_length(n_mu, k):
    return list(product(range(1, n_mu + 1), repeat=k))


def check_word(w, n_mu):
    w = tuple(int(s) for s in w)
    for s in w:
        if not 1 <= s <= n_mu:
            raise ValidationError(f"letter {s} outside alphabet 1..{n_mu}")
    return w


def format_word(w):
    w = tuple(w)
    if not w:
        return "e"
    if any(s > 9 for s in w):
        # dotted form; a lone multi-digit letter keeps a trailing dot
        return ".".join(str(s) for s in w) + ("." if len(w) == 1 else "")
    return "".join(str(s) for s in w)


def parse_word(text):
    """Inverse of :func:`format_word`; accepts ``"e"`` or ``""`` for the empty word."""
    text = str(text).strip()
    if text in ("", "e", "eps", "ε"):
        return EMPTY
    parts = text.rstrip(".").split(".") if "." in text else list(text)
    try:
        w = tuple(int(s) for s in parts)
    except ValueError:
        raise ParseError(f"cannot parse word {text!r}") from None
    if any(s < 1 for s in w):
        raise ParseError(f"letters are 1-based, got {text!r}")
    return w


def word_key(w):
    """Sort key implementing the length-then-lexicographic order."""
    return (len(w), tuple(w))


def p_of_word(w, p):
    """Product of per-letter scheduling second moments; 1 for the empty word."""
    out = 1.0
    for s in w:
        out *= p[s - 1]
    return out


def mu_product(w, mu, t):
    """mu_w(t) = mu_{w_1}(t-k+1) ... mu_{w_k}(t), with 1-based time ``t``.

    ``mu`` is an (N, n_mu) array whose row 0 holds time 1.
    """
    k = len(w)
    if k == 0:
        return 1.0
    start = t - k + 1
    if start < 1 or t > len(mu):
        raise IndexError(f"word of length {k} needs samples {start}..{t}, have 1..{len(mu)}")
    out = 1.0
    for j, s in enumerate(w):
        out *= mu[start - 1 + j, s - 1]
    return float(out)


def word_matrix_product(w, family):
    """A_w = A_{w_k} ... A_{w_1}; identity for the empty word."""
    family = [np.asarray(a, dtype=float) for a in family]
    n = family[0].shape[0]
    for a in family:
        if a.shape != (n, n):
            raise ShapeError(f"expected {n}x{n} matrices, got {a.shape}")
    out = np.eye(n)
    for s in w:
        out = family[s - 1] @ out
    return out
