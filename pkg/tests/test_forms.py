from __future__ import annotations

import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from denomkit import arith, forms
from denomkit.forms import Form, FormError

import oracles

A2 = forms.quadratic(((2, 1), (1, 2)))


def test_definiteness():
    assert forms.is_positive_definite(forms.identity_form(3))
    assert not forms.is_positive_definite(forms.quadratic(((1, 0), (0, -1))))
    assert forms.is_positive_definite(A2)
    assert forms.leading_minors(A2) == [2, 3]
    assert forms.is_positive_definite(forms.hermitian([[2, [1, 1]], [[1, -1], 2]]))


def test_nonsymmetric_rejected():
    with pytest.raises(FormError):
        forms.quadratic(((1, 2), (0, 1)))
    with pytest.raises(FormError):
        forms.hermitian([[1, [0, 1]], [[0, 1], 1]])


def test_real_embedding():
    c, r = forms.real_embedding(forms.identity_form(4))
    assert np.array_equal(c, np.eye(4)) and r == 0
    c, _ = forms.real_embedding(forms.quadratic(((4, 0), (0, 9))))
    assert np.allclose(c, np.diag([2.0, 3.0]))
    c, r = forms.real_embedding(A2)
    assert abs(c[0, 0] - np.sqrt(2)) < 1e-15 and r < 1e-12
    assert np.allclose(np.triu(c), c)
    with pytest.raises(FormError):
        forms.real_embedding(forms.quadratic(((1, 0), (0, -1))))


def test_padic_diagonalize_examples():
    g, d = forms.padic_diagonalize(forms.identity_form(3), 3, 3)
    assert g.matrix == arith.identity(3) and d == (1, 1, 1)
    g, d = forms.padic_diagonalize(A2, 5, 2)
    assert g.transform(A2.gram) == arith.diag(*d)
    assert (d[0] * d[1] - 3 * arith.det(g.matrix) ** 2) % 25 == 0
    with pytest.raises(FormError, match="bad prime"):
        forms.padic_diagonalize(forms.quadratic(((1, 0), (0, 7))), 7, 1)
    with pytest.raises(FormError):
        forms.padic_diagonalize(A2, 2, 1)


@pytest.mark.parametrize("u,p,e", [(1, 5, 1), (3, 5, 2), (2, 7, 3)])
def test_sum_of_two_squares_examples(u, p, e):
    a, b = forms.sum_of_two_squares_padic(u, p, e)
    assert (a * a + b * b - u) % p ** e == 0
    assert (a % p ** e, b % p ** e) in oracles.squares_mod(u, p ** e)


def test_sum_of_two_squares_random_corpus():
    rng = random.Random(7)
    for _ in range(200):
        p = rng.choice([3, 5, 7, 11, 13])
        e = rng.randint(1, 6)
        u = rng.randrange(1, p ** e)
        if u % p == 0:
            u += 1
        a, b = forms.sum_of_two_squares_padic(u, p, e)
        assert (a * a + b * b - u) % p ** e == 0


def test_hyperbolic_reduce_id5():
    change, red = forms.hyperbolic_reduce(forms.identity_form(5), 3, 2)
    assert change.transform(forms.identity_form(5).gram) == red
    assert red[0][1] == 1 and red[0][0] == 0 and red[2][3] == 1
    assert red[4][4] % 3 != 0
    with pytest.raises(FormError):
        forms.hyperbolic_reduce(forms.identity_form(5), 2, 2)
    with pytest.raises(FormError):
        forms.hyperbolic_reduce(forms.identity_form(4), 3, 2)


def test_hyperbolic_reduce_diag_exhaustive_mod5():
    f = forms.quadratic(arith.diag(1, 1, 1, 1, 2))
    change, red = forms.hyperbolic_reduce(f, 5, 1)
    g = change.matrix
    # independent re-multiplication mod 5
    prod = oracles.matmul(oracles.matmul(oracles.transpose(g), f.gram), g)
    assert tuple(tuple(x % 5 for x in r) for r in prod) == red
    assert oracles.leibniz_det(g) % 5 != 0


@pytest.mark.parametrize("p,e", [(3, 1), (3, 4), (5, 3), (7, 2), (11, 2)])
def test_hyperbolic_reduce_self_checks(p, e):
    for f in (forms.identity_form(5), forms.identity_form(7), forms.quadratic(arith.diag(1, 2, 3, 5, 7, 1))):
        if p in forms.bad_primes(f):
            continue
        change, red = forms.hyperbolic_reduce(f, p, e)
        assert change.transform(f.gram) == red


def test_bad_primes():
    assert forms.bad_primes(forms.identity_form(5)) == {2}
    assert forms.bad_primes(forms.quadratic(arith.diag(1, 1, 1, 1, 3))) == {2, 3}
    f = forms.quadratic(arith.block_diag(((2, 1), (1, 2)), arith.identity(3)))
    assert forms.bad_primes(f) == {2, 3}


def _random_form(rng: random.Random, k: int) -> Form:
    while True:
        b = [[rng.randint(-2, 2) for _ in range(k)] for _ in range(k)]
        g = oracles.matmul(oracles.transpose(b), b)
        g = tuple(tuple(g[i][j] + (1 if i == j else 0) for j in range(k)) for i in range(k))
        f = forms.quadratic(g)
        if forms.is_positive_definite(f):
            return f


def _unimodular(rng: random.Random, k: int):
    m = arith.identity(k)
    for _ in range(4):
        i, j = rng.sample(range(k), 2)
        c = rng.randint(-2, 2)
        rows = [list(r) for r in m]
        for r in range(k):
            rows[r][j] += c * rows[r][i]
        m = tuple(tuple(r) for r in rows)
    return m


def test_genus_examples():
    assert forms.genus_equivalent(forms.identity_form(3), forms.identity_form(3)).status == "same_genus"
    v = forms.genus_equivalent(forms.identity_form(2), forms.quadratic(arith.diag(1, 2)))
    assert v.status == "distinct"


def test_genus_corpus_reflexive_symmetric_and_integral():
    rng = random.Random(11)
    corpus = [_random_form(rng, rng.choice([2, 3])) for _ in range(20)]
    for f in corpus:
        assert forms.genus_equivalent(f, f).status == "same_genus"
        g = _unimodular(rng, f.rank)
        f2 = forms.quadratic(arith.matmul(arith.matmul(arith.transpose(g), f.gram), g))
        v = forms.genus_equivalent(f, f2)
        assert v.status != "distinct"
        for p, w in v.witnesses.items():
            assert w.transform(f.gram) == arith.mod_matrix(f2.gram, w.modulus)
    for f1, f2 in zip(corpus, corpus[1:]):
        if f1.rank == f2.rank:
            a = forms.genus_equivalent(f1, f2).status
            b = forms.genus_equivalent(f2, f1).status
            assert (a == "distinct") == (b == "distinct")


def test_genus_rank_mismatch():
    with pytest.raises(FormError):
        forms.genus_equivalent(forms.identity_form(2), forms.identity_form(3))


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([3, 5, 7, 11, 13]), st.integers(1, 5))
def test_padic_diagonalize_property(p, e):
    f = forms.quadratic(((2, 1, 0), (1, 2, 1), (0, 1, 6)))
    if f.det() % p == 0:
        return
    g, d = forms.padic_diagonalize(f, p, e)
    assert g.transform(f.gram) == arith.diag(*d)
    assert all(x % p for x in d)


def test_form_json_round_trip(tmp_path):
    f = forms.hermitian([[2, [1, 1]], [[1, -1], 2]])
    path = tmp_path / "f.json"
    import json
    path.write_text(json.dumps(f.to_json()))
    assert Form.load(path) == f
