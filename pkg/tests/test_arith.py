from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from denomkit import arith
from denomkit.arith import GaussianInt, RationalPoint

import oracles

ints = st.integers(-10**6, 10**6)
gauss = st.builds(GaussianInt, ints, ints)
QUAT_111 = ((1, 2, 2), (2, 1, -2), (-2, 2, -1))


def test_content_examples():
    assert arith.content_z(arith.identity(3, 3)) == 3
    assert arith.content_z(((2, 4), (6, 8))) == 2
    assert arith.content_z(QUAT_111) == 1


def test_content_gaussian_uses_both_parts():
    m = ((GaussianInt(2, 4), GaussianInt(6, 0)), (GaussianInt(0, 2), GaussianInt(4, 4)))
    assert arith.content_z(m) == 2
    # 1 + i divides every entry in Z[i] but no rational prime does
    m2 = ((GaussianInt(1, 1), GaussianInt(2, 0)), (GaussianInt(0, 2), GaussianInt(1, -1)))
    assert arith.content_z(m2) == 1
    assert arith.content_gaussian_norm(m2) == 2


def test_content_zero_matrix():
    with pytest.raises(ValueError, match="zero matrix has no content"):
        arith.content_z(((0, 0), (0, 0)))


@pytest.mark.parametrize("n", [1, 2, 7, 30])
def test_denominator_of_scalar(n):
    assert arith.denominator(arith.identity(3, n), n) == 1


def test_denominator_examples():
    assert arith.denominator(arith.identity(2), 1) == 1
    assert arith.denominator(QUAT_111, 3) == 3
    assert arith.denominator(((2, 4), (6, 8)), 6) == 3


@pytest.mark.parametrize("n,p,v", [(12, 2, 2), (12, 3, 1), (7, 5, 0), (2**40, 2, 40)])
def test_v_p(n, p, v):
    assert arith.v_p(n, p) == v


def test_v_p_rejects_composite():
    with pytest.raises(ValueError):
        arith.v_p(12, 4)


@given(st.lists(st.integers(-50, 50), min_size=4, max_size=4),
       st.integers(1, 40), st.integers(1, 40))
def test_denominator_scaling(entries, c, f):
    m = (tuple(entries[:2]), tuple(entries[2:]))
    if not any(entries):
        return
    d = c * f
    # denominator(c M, d) = denominator(M, d / gcd(c, d)) for c | d
    assert arith.denominator(arith.scale(m, c), d) == arith.denominator(m, d // c)
    assert d % arith.denominator(m, d) == 0


@settings(max_examples=1000)
@given(gauss, gauss)
def test_norm_multiplicative(x, y):
    assert (x * y).norm() == x.norm() * y.norm()
    assert x.norm() >= 0
    assert x.conj().conj() == x


@given(st.lists(st.integers(-30, 30), min_size=9, max_size=9))
def test_det_matches_leibniz(entries):
    m = tuple(tuple(entries[3 * i:3 * i + 3]) for i in range(3))
    assert arith.det(m) == oracles.leibniz_det(m)


@given(st.lists(st.integers(-9, 9), min_size=16, max_size=16))
def test_det_4x4_matches_leibniz(entries):
    m = tuple(tuple(entries[4 * i:4 * i + 4]) for i in range(4))
    assert arith.det(m) == oracles.leibniz_det(m)


@given(st.lists(st.tuples(st.integers(-5, 5), st.integers(-5, 5)), min_size=9, max_size=9))
def test_gaussian_det_matches_cofactor(pairs):
    m = tuple(tuple(GaussianInt(*pairs[3 * i + j]) for j in range(3)) for i in range(3))
    assert arith.det(m) == arith.det_cofactor(m)


def test_matmul_and_adjoint():
    a = ((GaussianInt(1, 1), 2), (0, GaussianInt(0, -1)))
    adj = arith.adjoint(a)
    assert adj[0][0] == GaussianInt(1, -1)
    assert adj[1][0] == 2
    prod = arith.matmul(adj, a)
    assert prod[0][1] == prod[1][0].conj()


def test_rational_point():
    pt = RationalPoint.reduced(arith.identity(2, 4), 4)
    assert pt.level == 1 and pt.denominator() == 1
    assert RationalPoint(QUAT_111, 3).denominator() == 3
    with pytest.raises(ValueError):
        RationalPoint(((3, 0), (0, 3)), 3)


def test_json_round_trip():
    m = ((2**60, -1), (GaussianInt(1, 2), 0))
    back = arith.parse_matrix(arith.matrix_to_json(m))
    assert back[0][0] == 2**60
    assert back[1][0] == GaussianInt(1, 2)
    assert arith.parse_matrix([["12345678901234567890", 0], [0, 1]])[0][0] == 12345678901234567890


def test_mat_inv_mod():
    m = ((2, 1), (1, 1))
    inv = arith.mat_inv_mod(m, 27)
    assert arith.mod_matrix(arith.matmul(m, inv), 27) == arith.identity(2)


def test_is_prime_matches_sieve():
    limit = 20000
    sieve = [True] * limit
    sieve[0] = sieve[1] = False
    for i in range(2, limit):
        if sieve[i]:
            for j in range(i * i, limit, i):
                sieve[j] = False
    assert [arith.is_prime(n) for n in range(limit)] == sieve
    assert arith.is_prime(2**61 - 1) and not arith.is_prime(2**61 + 1)
