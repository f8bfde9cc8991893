"""Double-coset volumes for split SL2 / SL3 over Q_p.

Affine Weyl elements of type A_r act on V = {x in R^(r+1) : sum x = 0} as
x -> sigma(x) + lam with lam in the coroot lattice.  Lengths are counted as
the number of affine root hyperplanes separating the base alcove C from
w(C).  The volume formula

    Card(U a U / U) = sum_{y in W0 w W0} q^l(y) / sum_{y in W0} q^l(y)

is checked against counts of lattices with prescribed elementary divisors
(the U-orbit of a Z_p^k) and, for the mod-p congruence subgroup, against
element counts in SL2(Z/p^N).
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from . import arith

RANKS = {"A1": 1, "A2": 2}


def _apply_perm(sigma: tuple[int, ...], x: Sequence) -> tuple:
    y = [0] * len(x)
    for i, s in enumerate(sigma):
        y[s] = x[i]
    return tuple(y)


def _compose(s: tuple[int, ...], t: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(s[t[i]] for i in range(len(t)))


def _inverse(s: tuple[int, ...]) -> tuple[int, ...]:
    out = [0] * len(s)
    for i, v in enumerate(s):
        out[v] = i
    return tuple(out)


@lru_cache(maxsize=None)
def _base_point(dim: int) -> tuple[Fraction, ...]:
    # rho / h: every positive root takes a value strictly between 0 and 1
    return tuple(Fraction(dim + 1 - 2 * (i + 1), 2 * dim) for i in range(dim))


@dataclass(frozen=True)
class AffineWeylElement:
    """w = t_lam * sigma, acting by x -> sigma(x) + lam."""

    root_type: str
    translation: tuple[int, ...]
    finite: tuple[int, ...]
    weights: tuple[int, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.root_type not in RANKS:
            raise ValueError(f"unsupported root system {self.root_type!r}")
        dim = RANKS[self.root_type] + 1
        if len(self.translation) != dim or sum(self.translation) != 0:
            raise ValueError("translation must be a coroot vector (integer, sum zero)")
        if sorted(self.finite) != list(range(dim)):
            raise ValueError("finite part must be a permutation")
        if not self.weights:
            object.__setattr__(self, "weights", (1,) * dim)
        elif len(self.weights) != dim:
            raise ValueError("one weight per simple affine reflection")

    @property
    def dim(self) -> int:
        return len(self.translation)

    def __mul__(self, o: "AffineWeylElement") -> "AffineWeylElement":
        lam = tuple(a + b for a, b in zip(self.translation, _apply_perm(self.finite, o.translation)))
        return AffineWeylElement(self.root_type, lam, _compose(self.finite, o.finite), self.weights)

    def inverse(self) -> "AffineWeylElement":
        inv = _inverse(self.finite)
        lam = tuple(-x for x in _apply_perm(inv, self.translation))
        return AffineWeylElement(self.root_type, lam, inv, self.weights)

    def act(self, x: Sequence) -> tuple:
        return tuple(a + b for a, b in zip(_apply_perm(self.finite, x), self.translation))

    def length(self) -> int:
        """Number of hyperplanes <e_i - e_j, x> = k separating C and w(C)."""
        y = self.act(_base_point(self.dim))
        total = 0
        for i, j in itertools.combinations(range(self.dim), 2):
            v = y[i] - y[j]
            total += abs(v.__floor__())
        return total

    def is_identity(self) -> bool:
        return self.finite == tuple(range(self.dim)) and not any(self.translation)


def identity(root_type: str) -> AffineWeylElement:
    dim = RANKS[root_type] + 1
    return AffineWeylElement(root_type, (0,) * dim, tuple(range(dim)))


def translation(root_type: str, lam: Sequence[int]) -> AffineWeylElement:
    dim = RANKS[root_type] + 1
    return AffineWeylElement(root_type, tuple(int(x) for x in lam), tuple(range(dim)))


def coweight(root_type: str, m: int) -> AffineWeylElement:
    """Translation by the image of diag(p^m, p^-m) resp. diag(p^m, 1, p^-m)."""
    return translation(root_type, (m, -m) if root_type == "A1" else (m, 0, -m))


def simple_reflections(root_type: str) -> list[AffineWeylElement]:
    """s_0 (the affine one, reflection in <theta, x> = 1), then s_1, ..., s_r."""
    dim = RANKS[root_type] + 1
    ident = tuple(range(dim))
    gens = []
    theta = list(ident)
    theta[0], theta[-1] = theta[-1], theta[0]
    coroot = [0] * dim
    coroot[0], coroot[-1] = 1, -1
    gens.append(AffineWeylElement(root_type, tuple(coroot), tuple(theta)))
    for i in range(dim - 1):
        s = list(ident)
        s[i], s[i + 1] = s[i + 1], s[i]
        gens.append(AffineWeylElement(root_type, (0,) * dim, tuple(s)))
    return gens


def finite_weyl_group(root_type: str) -> list[AffineWeylElement]:
    dim = RANKS[root_type] + 1
    return [AffineWeylElement(root_type, (0,) * dim, tuple(s))
            for s in itertools.permutations(range(dim))]


def reduced_word(w: AffineWeylElement) -> list[int]:
    """Indices of simple reflections s_i1 ... s_il = w, found by peeling left descents."""
    gens = simple_reflections(w.root_type)
    word = []
    cur = w
    while cur.length() > 0:
        for i, s in enumerate(gens):
            nxt = s * cur
            if nxt.length() < cur.length():
                word.append(i)
                cur = nxt
                break
        else:  # pragma: no cover - impossible for a Coxeter group
            raise AssertionError("no descent found")
    return word


def weighted_length(w: AffineWeylElement) -> int:
    """Sum of generator weights along a reduced word (the plain length for unit weights)."""
    if all(x == 1 for x in w.weights):
        return w.length()
    return sum(w.weights[i] for i in reduced_word(w))


def word_lengths(root_type: str, max_len: int = 8) -> dict[tuple, int]:
    """Breadth-first word search: minimal word length of every element of length <= max_len."""
    gens = simple_reflections(root_type)
    start = identity(root_type)
    seen = {(start.translation, start.finite): 0}
    frontier = deque([start])
    while frontier:
        w = frontier.popleft()
        d = seen[(w.translation, w.finite)]
        if d == max_len:
            continue
        for s in gens:
            x = w * s
            key = (x.translation, x.finite)
            if key not in seen:
                seen[key] = d + 1
                frontier.append(x)
    return seen


def dominant(w: AffineWeylElement) -> AffineWeylElement:
    """Representative t_lam of W0 w W0 with lam in the closed positive chamber."""
    lam = tuple(sorted(w.translation, reverse=True))
    return AffineWeylElement(w.root_type, lam, tuple(range(w.dim)), w.weights)


def double_coset(w: AffineWeylElement) -> list[AffineWeylElement]:
    """W0 t_lam W0 = { t_(sigma lam) tau }."""
    d = dominant(w)
    orbit = sorted(set(itertools.permutations(d.translation)))
    return [AffineWeylElement(w.root_type, lam, s.finite, w.weights)
            for lam in orbit for s in finite_weyl_group(w.root_type)]


def poincare_sum(elements: Iterable[AffineWeylElement], q: int) -> int:
    return sum(q ** weighted_length(y) for y in elements)


def double_coset_size(w: AffineWeylElement, q: int) -> Fraction:
    if q < 2:
        raise ValueError("residue field size must be at least 2")
    num = poincare_sum(double_coset(w), q)
    den = poincare_sum(finite_weyl_group(w.root_type), q)
    return Fraction(num, den)


# ------------------------------------------------------------ lattice oracle


class OracleBudgetExceeded(RuntimeError):
    def __init__(self, partial: int):
        super().__init__(f"oracle budget exceeded after {partial} lattices")
        self.partial = partial


def _elementary_exponents(rows: list[list[int]], p: int) -> list[int]:
    """p-adic valuations of the elementary divisors, via gcds of minors."""
    k = len(rows)
    out = []
    prev = 0
    for r in range(1, k + 1):
        g = 0
        for ri in itertools.combinations(range(k), r):
            for ci in itertools.combinations(range(k), r):
                g = np.gcd(g, int(arith.det([[rows[i][j] for j in ci] for i in ri])))
        v = arith.v_p(int(g), p)
        out.append(v - prev)
        prev = v
    return out


def direct_coset_count(p: int, m: int, group: str = "SL2", budget: int = 2_000_000) -> int:
    """Count lattices L = u a Z_p^k (u in SL_k(Z_p)), i.e. the left cosets in U a U.

    After scaling by p^m these are the sublattices of Z^k containing p^2m Z^k
    whose elementary divisors are (p^2m, 1) resp. (p^2m, p^m, 1).  They are
    enumerated in row Hermite normal form.
    """
    if not arith.is_prime(p):
        raise ValueError("p must be prime")
    if m < 0:
        raise ValueError("m must be nonnegative")
    if group == "SL2":
        target = [0, 2 * m]
    elif group == "SL3":
        target = [0, m, 2 * m]
    else:
        raise ValueError(f"unknown group {group!r}")
    k = len(target)
    total_exp = sum(target)
    count = 0
    visited = 0
    for diag in itertools.product(range(2 * m + 1), repeat=k):
        if sum(diag) != total_exp:
            continue
        ranges = [range(p ** diag[j]) for i in range(k) for j in range(i + 1, k)]
        for offs in itertools.product(*ranges):
            visited += 1
            if visited > budget:
                raise OracleBudgetExceeded(count)
            rows = [[0] * k for _ in range(k)]
            it = iter(offs)
            for i in range(k):
                rows[i][i] = p ** diag[i]
                for j in range(i + 1, k):
                    rows[i][j] = next(it)
            if sorted(_elementary_exponents(rows, p)) == target:
                count += 1
    return count


def congruence_index(p: int) -> int:
    """[SL2(Z_p) : Gamma(p)] = |SL2(F_p)|, counted directly."""
    return sum(1 for a, b, c, d in itertools.product(range(p), repeat=4) if (a * d - b * c) % p == 1)


def congruence_coset_count(p: int, m: int) -> int:
    """Card(V g V / V) = [V : V cap g V g^-1] for V = Gamma(p) and g = diag(p^m, p^-m).

    Both groups contain Gamma(p^N) with N = 2m + 1, so the index is a ratio of
    element counts in SL2(Z/p^N).  Elements of V are a = 1 + p x, b, c in pZ,
    d = (1 + bc) / a; membership of g^-1 x g in V is tested entry by entry.
    """
    n_exp = 2 * m + 1
    q = p ** n_exp
    ex = (m, -m)
    steps = np.arange(0, q, p, dtype=object)
    total = 0
    inside = 0
    for a in steps + 1:
        ainv = pow(int(a), -1, q)
        for b in steps:
            for c in steps:
                d = (1 + b * c) * ainv % q
                total += 1
                x = ((a, b), (c, d))
                ok = True
                for i in range(2):
                    for j in range(2):
                        e = ex[j] - ex[i]  # (g^-1 x g)_ij = p^(m_j - m_i) x_ij
                        v = arith.v_p_or(int(x[i][j]) % q, p, n_exp) + e
                        want = 1 if i == j else 0
                        if v < 0:
                            ok = False
                        elif e == 0 and (int(x[i][j]) - want) % p:
                            ok = False
                        elif e != 0 and v < 1:
                            ok = False
                if ok:
                    inside += 1
    if total % inside:
        raise AssertionError("subgroup count does not divide group count")
    return total // inside


@dataclass
class GrowthReport:
    sizes: list[Fraction]
    lengths: list[int]
    lower_bound_ok: bool
    increasing: bool

    @property
    def ok(self) -> bool:
        return self.lower_bound_ok and self.increasing

    def to_json(self) -> dict:
        return {"sizes": [str(s) for s in self.sizes], "lengths": self.lengths,
                "lower_bound_ok": self.lower_bound_ok, "increasing": self.increasing}


def growth_check(elements: Sequence[AffineWeylElement], q: int) -> GrowthReport:
    """Every non-identity dominant size is >= q, and sizes increase strictly along the sequence."""
    if not elements:
        raise ValueError("empty sequence")
    sizes = [double_coset_size(w, q) for w in elements]
    lower = all(s >= q for w, s in zip(elements, sizes) if not dominant(w).is_identity())
    inc = all(b > a for a, b in zip(sizes, sizes[1:]))
    return GrowthReport(sizes, [dominant(w).length() for w in elements], lower, inc)


@dataclass
class ComparisonReport:
    p: int
    m: int
    index: int
    count_u: int
    count_v: int

    @property
    def lower_ok(self) -> bool:
        return Fraction(self.count_v, self.index) <= self.count_u

    @property
    def upper_ok(self) -> bool:
        return self.count_u <= self.index * self.count_v

    @property
    def ok(self) -> bool:
        return self.lower_ok and self.upper_ok

    def to_json(self) -> dict:
        return {"p": self.p, "m": self.m, "index": self.index, "count_U": self.count_u,
                "count_V": self.count_v, "lower_ok": self.lower_ok, "upper_ok": self.upper_ok}


def compact_open_comparison(p: int, m: int, count_u: Optional[int] = None,
                            count_v: Optional[int] = None) -> ComparisonReport:
    """Check (1/c) Card(VgV/V) <= Card(UgU/U) <= c Card(VgV/V) with U = SL2(Z_p), V = Gamma(p)."""
    cu = direct_coset_count(p, m, "SL2") if count_u is None else count_u
    cv = congruence_coset_count(p, m) if count_v is None else count_v
    return ComparisonReport(p, m, congruence_index(p), cu, cv)
