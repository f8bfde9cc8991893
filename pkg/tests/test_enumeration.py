from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from denomkit import arith, enumeration, forms, local
from denomkit.arith import GaussianInt
from denomkit.enumeration import EnumOptions, SinkError

import oracles

ID3 = forms.identity_form(3)
HID2 = forms.identity_form(2, "hermitian")
A2 = forms.quadratic(((2, 1), (1, 2)))


def _exact_ok(form, n, m):
    adj = arith.adjoint(m) if form.hermitian else arith.transpose(m)
    lhs = arith.matmul(arith.matmul(adj, form.gram), m)
    return lhs == arith.scale(form.gram, n * n) and arith.det(m) == n ** form.rank


def test_level_one_is_signed_permutations():
    s = enumeration.solve_scaled_isometry(ID3, 1)
    assert s.count == 24
    expected = oracles.brute_force_isometries(ID3.gram, 1, 1)
    assert s.as_set() == expected


def test_level_two_empty():
    assert enumeration.count_solutions(ID3, 2) == 0
    assert enumeration.solve_scaled_isometry(ID3, 2).solutions == []


def test_level_three_contains_quaternion_matrix_and_is_closed():
    s = enumeration.solve_scaled_isometry(ID3, 3)
    assert ((1, 2, 2), (2, 1, -2), (-2, 2, -1)) in s.as_set()
    group = enumeration.group_elements(ID3)
    sols = s.as_set()
    for u in group[:6]:
        for m in list(sols)[:20]:
            assert arith.matmul(u, m) in sols
            assert arith.matmul(m, u) in sols


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_matches_brute_force_small_forms(n):
    for form in (ID3, A2, forms.quadratic(arith.diag(1, 2))):
        bound = n * max(max(r) for r in form.gram)
        expected = oracles.brute_force_isometries(form.gram, n, bound)
        got = enumeration.solve_scaled_isometry(form, n).as_set()
        assert got == expected


def test_hermitian_level_one_matches_brute_force():
    s = enumeration.solve_scaled_isometry(HID2, 1)
    expected = oracles.brute_force_unitary_id2(1, 1)
    got = {tuple((GaussianInt.of(x).re, GaussianInt.of(x).im) for r in m for x in r)
           for m in s.solutions}
    # oracle stores entries in the order a, b, c, d = m11, m12, m21, m22
    assert got == expected
    assert enumeration.count_solutions(HID2, 1) == len(expected) == 8


@pytest.mark.parametrize("n", [1, 3, 5, 7, 9, 11, 13, 15])
def test_group_closure_id3(n):
    sols = enumeration.solve_scaled_isometry(ID3, n).as_set()
    group = enumeration.group_elements(ID3)
    for u1 in group:
        image = {arith.matmul(u1, m) for m in sols}
        assert image == sols
        image = {arith.matmul(m, u1) for m in sols}
        assert image == sols


@pytest.mark.parametrize("form,n", [(ID3, 3), (ID3, 9), (A2, 7), (HID2, 5), (HID2, 3)])
def test_every_solution_is_exact_and_local(form, n):
    s = enumeration.solve_scaled_isometry(form, n)
    assert s.solutions, "expected a nonempty level"
    for m in s.solutions:
        assert _exact_ok(form, n, m)
        assert arith.content_z(m) == 1
    assert local.local_profile(form, n).member == "yes"


def test_canonical_order_and_no_duplicates():
    s = enumeration.solve_scaled_isometry(ID3, 5)
    keys = [enumeration.canonical_key(m) for m in s.solutions]
    assert keys == sorted(keys)
    assert len(set(s.solutions)) == len(s.solutions)


def test_full_group_option_admits_negative_det():
    s = enumeration.solve_scaled_isometry(ID3, 1, EnumOptions(special=False))
    assert s.count == 48


def test_gaussian_content_option():
    rational = enumeration.count_solutions(HID2, 2)
    gaussian = enumeration.count_solutions(HID2, 2, EnumOptions(content="gaussian"))
    assert gaussian == 0 and rational > 0


def test_workers_give_same_result():
    a = enumeration.solve_scaled_isometry(ID3, 9)
    b = enumeration.solve_scaled_isometry(ID3, 9, EnumOptions(workers=2))
    assert a.solutions == b.solutions


def test_stream_matches_solve():
    out = []
    assert enumeration.stream_solutions(ID3, 1, out.append) == 24
    assert out == enumeration.solve_scaled_isometry(ID3, 1).solutions
    assert enumeration.stream_solutions(ID3, 2, out.append) == 0
    unordered = []
    enumeration.stream_solutions(ID3, 5, unordered.append, canonical=False)
    assert set(unordered) == enumeration.solve_scaled_isometry(ID3, 5).as_set()


def test_stream_sink_failure_reports_progress():
    seen = []

    def sink(m):
        if len(seen) == 5:
            raise OSError("disk full")
        seen.append(m)

    with pytest.raises(SinkError) as info:
        enumeration.stream_solutions(ID3, 1, sink)
    assert info.value.emitted == 5


def test_vectors_of_norm_against_box():
    g = ((2, 1, 0), (1, 3, 1), (0, 1, 4))
    for norm in (2, 9, 25, 40):
        got = {tuple(v) for v in enumeration.vectors_of_norm(g, norm).tolist()}
        box = itertools.product(range(-7, 8), repeat=3)
        want = {v for v in box
                if sum(v[i] * g[i][j] * v[j] for i in range(3) for j in range(3)) == norm}
        assert got == want


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(1, 4), st.integers(0, 2))
def test_vectors_of_norm_property(a, c, b):
    if a * c - b * b <= 0:
        return
    g = ((a, b), (b, c))
    for norm in range(1, 30):
        got = {tuple(v) for v in enumeration.vectors_of_norm(g, norm).tolist()}
        want = {(x, y) for x in range(-30, 31) for y in range(-30, 31)
                if a * x * x + 2 * b * x * y + c * y * y == norm}
        assert got == want


def test_has_solution_and_limit():
    assert enumeration.has_solution(forms.identity_form(5), 2)
    s = enumeration.solve_scaled_isometry(ID3, 3, EnumOptions(limit=5))
    assert s.count == 5 and s.stats["truncated"]


def test_solution_set_json():
    data = enumeration.solve_scaled_isometry(ID3, 1).to_json()
    assert data["count"] == 24 and len(data["solutions"]) == 24
    assert np.array(data["solutions"]).shape == (24, 3, 3)
