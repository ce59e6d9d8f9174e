import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lpvssa.errors import ParseError, ShapeError, ValidationError
from lpvssa.words import (
    EMPTY,
    check_word,
    enumerate_words,
    format_word,
    mu_product,
    p_of_word,
    parse_word,
    word_matrix_product,
)

words = st.lists(st.integers(1, 12), max_size=6).map(tuple)


def test_enumeration_order_and_count():
    ws = enumerate_words(2, 3)
    assert ws[0] == EMPTY
    assert len(ws) == 1 + 2 + 4 + 8
    assert ws[:7] == [(), (1,), (2,), (1, 1), (1, 2), (2, 1), (2, 2)]
    assert len(set(ws)) == len(ws)


@given(st.integers(1, 4), st.integers(0, 4))
def test_enumeration_counts(n_mu, k):
    assert len(enumerate_words(n_mu, k)) == sum(n_mu**j for j in range(k + 1))


@given(words)
def test_format_parse_roundtrip(w):
    assert parse_word(format_word(w)) == w


@pytest.mark.parametrize("text", ["", "e", "eps", "ε"])
def test_empty_word_spellings(text):
    assert parse_word(text) == EMPTY


def test_parse_digits_and_dots():
    assert parse_word("21") == (2, 1)
    assert parse_word("10.2") == (10, 2)
    with pytest.raises((ParseError, ValidationError)):
        parse_word("2x")
    with pytest.raises((ParseError, ValidationError)):
        parse_word("0")


def test_check_word_alphabet():
    assert check_word((1, 2), 2) == (1, 2)
    with pytest.raises(ValidationError):
        check_word((3,), 2)


def test_weight_of_word():
    p = [1.0, 0.75]
    assert p_of_word(EMPTY, p) == 1.0
    assert p_of_word((2, 2, 1), p) == pytest.approx(0.5625)


def test_mu_product_indexing():
    mu = np.array([[1, 2.0], [1, 3.0], [1, 5.0]])
    # mu_w(t) for w = (2, 2) at t = 2 (1-based) is mu_2(1) mu_2(2)
    assert mu_product((2, 2), mu, 2) == 6.0
    assert mu_product(EMPTY, mu, 1) == 1.0
    with pytest.raises(IndexError):
        mu_product((2, 2, 2), mu, 2)


def test_word_matrix_product_order(example):
    A = example.A
    assert np.allclose(word_matrix_product((2, 1), A), A[0] @ A[1])
    assert np.allclose(word_matrix_product(EMPTY, A), np.eye(3))
    # C A1 A2 B2 is the product attached to the word 221
    assert (example.C @ word_matrix_product((2, 1), A) @ example.B[1]).item() == pytest.approx(0.16, abs=1e-12)


def test_word_matrix_product_shape_error():
    with pytest.raises(ShapeError):
        word_matrix_product((1,), [np.ones((2, 3))])
