"""Positive-definite quadratic and hermitian forms.

Gram convention: ``q(x) = x^T Q x`` (resp. ``h(x) = x^* H x``), so a
hyperbolic plane appears as the bilinear block ``[[0, 1], [1, 0]]``, which is
``2 x1 x2``; for odd p the factor 2 is a unit and harmless.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from pathlib import Path
from typing import Optional

import numpy as np

from . import arith
from .arith import GaussianInt, Matrix, det, inv_mod, mat_inv_mod, matmul, transpose, v_p


class FormError(ValueError):
    pass


@dataclass(frozen=True)
class Form:
    kind: str
    gram: Matrix

    def __post_init__(self):
        if self.kind not in ("quadratic", "hermitian"):
            raise FormError(f"unknown form kind {self.kind!r}")
        g = self.gram
        k = len(g)
        if k == 0 or any(len(r) != k for r in g):
            raise FormError("gram matrix must be square")
        if self.kind == "quadratic":
            if any(isinstance(x, GaussianInt) for r in g for x in r):
                raise FormError("quadratic form needs integer entries")
            if any(g[i][j] != g[j][i] for i in range(k) for j in range(k)):
                raise FormError("gram matrix is not symmetric")
        else:
            gg = tuple(tuple(GaussianInt.of(x) for x in r) for r in g)
            object.__setattr__(self, "gram", gg)
            if any(gg[i][j] != gg[j][i].conj() for i in range(k) for j in range(k)):
                raise FormError("gram matrix is not hermitian")

    @property
    def rank(self) -> int:
        return len(self.gram)

    @property
    def hermitian(self) -> bool:
        return self.kind == "hermitian"

    def det(self) -> int:
        d = det(self.gram)
        if isinstance(d, GaussianInt):
            assert d.im == 0
            return d.re
        return d

    def real_gram(self) -> Matrix:
        """Symmetric 2k x 2k integer Gram of the realification (hermitian only)."""
        if not self.hermitian:
            return self.gram
        return realify(self.gram)

    def to_json(self) -> dict:
        return {"kind": self.kind, "gram": arith.matrix_to_json(self.gram)}

    @classmethod
    def from_json(cls, data: dict) -> "Form":
        gram = arith.parse_matrix(data["gram"])
        kind = data.get("kind", "quadratic")
        return cls(kind, gram)

    @classmethod
    def load(cls, path) -> "Form":
        return cls.from_json(json.loads(Path(path).read_text()))


def quadratic(gram) -> Form:
    return Form("quadratic", arith.mat(gram))


def hermitian(gram) -> Form:
    return Form("hermitian", arith.parse_matrix(gram))


def identity_form(k: int, kind: str = "quadratic") -> Form:
    return Form(kind, arith.identity(k))


def realify(m: Matrix) -> Matrix:
    """Ring embedding M_k(Z[i]) -> M_2k(Z), A + iB -> [[A, -B], [B, A]]."""
    k = len(m)
    re = [[GaussianInt.of(x).re for x in r] for r in m]
    im = [[GaussianInt.of(x).im for x in r] for r in m]
    top = [re[i] + [-x for x in im[i]] for i in range(k)]
    bot = [im[i] + re[i] for i in range(k)]
    return tuple(tuple(r) for r in top + bot)


def leading_minors(form: Form) -> list[int]:
    g = form.gram
    out = []
    for i in range(1, form.rank + 1):
        d = det(tuple(r[:i] for r in g[:i]))
        out.append(d.re if isinstance(d, GaussianInt) else d)
    return out


def is_positive_definite(form: Form) -> bool:
    return all(d > 0 for d in leading_minors(form))


def require_definite(form: Form) -> None:
    if not is_positive_definite(form):
        raise FormError("form is not positive definite")


def real_embedding(form: Form, tol: float = 1e-9) -> tuple[np.ndarray, float]:
    """Upper-triangular C with C^* C = gram, plus the sup-norm residual."""
    require_definite(form)
    a = _to_numpy(form.gram)
    lower = np.linalg.cholesky(a)
    c = lower.conj().T
    resid = float(np.max(np.abs(c.conj().T @ c - a)))
    if resid > tol * max(1.0, float(np.max(np.abs(a)))):
        raise FormError(f"Cholesky residual {resid:.3e} exceeds tolerance")
    if not form.hermitian:
        c = c.real
    return c, resid


def _to_numpy(m: Matrix) -> np.ndarray:
    if arith.is_gaussian(m):
        return np.array([[complex(x.re, x.im) for x in r] for r in m], dtype=complex)
    return np.array(m, dtype=float)


# ------------------------------------------------------------ p-adic pieces


@dataclass(frozen=True)
class PAdicBasisChange:
    p: int
    e: int
    matrix: Matrix

    def __post_init__(self):
        d = det(self.matrix)
        if d % self.p == 0:
            raise FormError("basis change is not invertible mod p")

    @property
    def modulus(self) -> int:
        return self.p ** self.e

    def transform(self, gram: Matrix) -> Matrix:
        g = self.matrix
        return arith.mod_matrix(matmul(matmul(transpose(g), gram), g), self.modulus)

    def inverse(self) -> Matrix:
        return mat_inv_mod(self.matrix, self.modulus)


def legendre(a: int, p: int) -> int:
    a %= p
    if a == 0:
        return 0
    return 1 if pow(a, (p - 1) // 2, p) == 1 else -1


def sqrt_mod_prime_power(a: int, p: int, e: int) -> int:
    """Square root of a unit a modulo p**e (p odd); raises if a is a non-residue."""
    q = p ** e
    a %= q
    if legendre(a, p) != 1:
        raise ValueError(f"{a} is not a square unit mod {p}")
    r = next(x for x in range(1, p) if (x * x - a) % p == 0)
    # Newton: r <- r - (r^2 - a)/(2r)
    for _ in range(e.bit_length() + 1):
        r = (r - (r * r - a) * inv_mod(2 * r, q)) % q
    assert (r * r - a) % q == 0
    return r


def _check_odd_prime(p: int) -> None:
    if p == 2:
        raise FormError("p = 2 is not supported here")
    if not arith.is_prime(p):
        raise FormError(f"{p} is not prime")


def padic_diagonalize(form: Form, p: int, e: int) -> tuple[PAdicBasisChange, tuple[int, ...]]:
    """Gram-Schmidt over Z/p^e with unit pivots: g^T Q g = diag(d) mod p^e."""
    _check_odd_prime(p)
    if form.hermitian:
        raise FormError("p-adic diagonalization is for quadratic forms")
    if form.det() % p == 0:
        raise FormError(f"bad prime {p} divides det; use bad_primes")
    q = p ** e
    k = form.rank
    a = [[x % q for x in r] for r in form.gram]
    g = [[1 if i == j else 0 for j in range(k)] for i in range(k)]  # columns = basis

    def add_col(dst, src, c):
        # basis vector dst <- dst + c * src; update Gram congruently
        for r in range(k):
            g[r][dst] = (g[r][dst] + c * g[r][src]) % q
        for r in range(k):
            a[r][dst] = (a[r][dst] + c * a[r][src]) % q
        for r in range(k):
            a[dst][r] = (a[dst][r] + c * a[src][r]) % q

    def swap(i, j):
        for r in range(k):
            g[r][i], g[r][j] = g[r][j], g[r][i]
        a[i], a[j] = a[j], a[i]
        for r in range(k):
            a[r][i], a[r][j] = a[r][j], a[r][i]

    for i in range(k):
        piv = next((j for j in range(i, k) if a[j][j] % p), None)
        if piv is None:
            pair = next(((j, l) for j in range(i, k) for l in range(j + 1, k) if a[j][l] % p), None)
            if pair is None:
                raise FormError(f"no unit pivot mod {p}; {p} is a bad prime for this form")
            add_col(pair[0], pair[1], 1)
            piv = pair[0]
        if piv != i:
            swap(i, piv)
        inv = inv_mod(a[i][i], q)
        for r in range(i + 1, k):
            if a[i][r] % q:
                add_col(r, i, (-a[i][r] * inv) % q)
    d = tuple(a[i][i] for i in range(k))
    change = PAdicBasisChange(p, e, tuple(tuple(r) for r in g))
    target = arith.diag(*d)
    if change.transform(form.gram) != target:
        raise AssertionError("diagonalization failed its re-multiplication check")
    return change, d


def sum_of_two_squares_padic(u: int, p: int, e: int = 1) -> tuple[int, int]:
    """(a, b) with a^2 + b^2 = u mod p^e for a unit u and odd p."""
    _check_odd_prime(p)
    if u % p == 0:
        raise ValueError("u must be a unit mod p")
    q = p ** e
    for b in range(p):
        r = (u - b * b) % p
        if r and legendre(r, p) == 1:
            a = sqrt_mod_prime_power(u - b * b, p, e)
            break
    else:  # pragma: no cover - impossible for odd p
        raise AssertionError("no representation found")
    a, b = a % q, b % q
    if (a * a + b * b - u) % q:
        raise AssertionError("sum of two squares failed its check")
    return a, b


def hyperbolic_shape(k: int, tail: tuple[int, ...]) -> Matrix:
    h = ((0, 1), (1, 0))
    return arith.block_diag(h, h, arith.diag(*tail))


def hyperbolic_reduce(form: Form, p: int, e: int) -> tuple[PAdicBasisChange, Matrix]:
    """g in GL(k, Z/p^e) taking Q to two hyperbolic planes plus a unit diagonal.

    Returns the basis change and the reduced Gram matrix g^T Q g mod p^e.
    """
    if form.hermitian:
        raise FormError("hyperbolic reduction is for quadratic forms")
    if form.rank < 5:
        raise FormError("hyperbolic reduction needs rank >= 5")
    _check_odd_prime(p)
    if p in bad_primes(form):
        raise FormError(f"{p} is a bad prime for this form")
    q = p ** e
    k = form.rank
    change, d = padic_diagonalize(form, p, e)
    cols = [list(c) for c in transpose(change.matrix)]
    vals = list(d)
    planes = []
    # pool of (vector, diagonal value) still to be reduced
    pool = list(zip(cols, vals))
    for _ in range(2):
        (va, da), (vb, db), (vc, dc) = _pick_pair(pool[:3], p)
        rest = pool[3:]
        s = sqrt_mod_prime_power(db * inv_mod(da, q), p, e)
        vb = [x * inv_mod(s, q) % q for x in vb]  # now vb has value da
        alpha, beta = da, dc
        a, b = sum_of_two_squares_padic(-beta * inv_mod(alpha, q), p, e)
        binv = inv_mod(beta, q)
        f1 = [(a * x + b * y + z) % q for x, y, z in zip(va, vb, vc)]
        f2 = [binv * (-b * x + a * y + z) % q for x, y, z in zip(va, vb, vc)]
        f3 = [((a - b) * x + (a + b) * y + z) % q for x, y, z in zip(va, vb, vc)]
        planes.extend([f1, f2])
        pool = [(f3, (-beta) % q)] + rest
    basis = planes + [v for v, _ in pool]
    g = transpose(tuple(tuple(v) for v in basis))
    change = PAdicBasisChange(p, e, g)
    reduced = change.transform(form.gram)
    target = hyperbolic_shape(k, tuple(x % q for _, x in pool))
    if reduced != target:
        raise AssertionError("hyperbolic reduction failed its re-multiplication check")
    return change, reduced


def _pick_pair(triple, p):
    """Reorder three (vector, unit) pairs so the first two share a square class."""
    for i, j in ((0, 1), (0, 2), (1, 2)):
        if legendre(triple[i][1] * triple[j][1], p) == 1:
            other = 3 - i - j
            return triple[i], triple[j], triple[other]
    raise AssertionError("pigeonhole on square classes failed")


def bad_primes(form: Form) -> frozenset[int]:
    """2 together with every prime dividing a leading principal minor.

    The leading minors are the numerators and denominators of the pivots of
    the rational LDL^T decomposition, so this over-approximates the primes at
    which the diagonalizing change of basis or the diagonal fails to be a unit.
    """
    out = {2}
    for d in leading_minors(form):
        out.update(arith.prime_divisors(d))
    return frozenset(out)


# ------------------------------------------------------------------ genus


def hilbert_symbol(a: int, b: int, p: int) -> int:
    """(a, b)_p for nonzero integers a, b and a prime p."""
    if a == 0 or b == 0:
        raise ValueError("Hilbert symbol of zero")
    alpha, u = _split(a, p)
    beta, v = _split(b, p)
    if p != 2:
        s = (-1) ** (alpha * beta * ((p - 1) // 2) % 2)
        return s * legendre(u, p) ** beta * legendre(v, p) ** alpha
    eps = lambda x: ((x - 1) // 2) % 2  # noqa: E731
    omega = lambda x: ((x * x - 1) // 8) % 2  # noqa: E731
    e = eps(u) * eps(v) + alpha * omega(v) + beta * omega(u)
    return -1 if e % 2 else 1


def _split(a: int, p: int) -> tuple[int, int]:
    v = 0
    while a % p == 0:
        a //= p
        v += 1
    return v, a


def rational_diagonal(form: Form) -> list[Fraction]:
    ms = [1] + leading_minors(form)
    return [Fraction(ms[i + 1], ms[i]) for i in range(form.rank)]


def _squarefree_int(x: Fraction) -> int:
    # a/b is in the same square class as a*b
    n = x.numerator * x.denominator
    sign = -1 if n < 0 else 1
    n = abs(n)
    out = 1
    for p, e in arith.factorize(n).items() if n > 1 else []:
        if e % 2:
            out *= p
    return sign * out


def hasse_invariant(form: Form, p: int) -> int:
    diag_ = [_squarefree_int(x) for x in rational_diagonal(form)]
    c = 1
    for i in range(len(diag_)):
        for j in range(i + 1, len(diag_)):
            c *= hilbert_symbol(diag_[i], diag_[j], p)
    return c


@dataclass
class GenusVerdict:
    status: str  # same_genus | distinct | undetermined
    witnesses: dict[int, PAdicBasisChange] = field(default_factory=dict)
    reason: str = ""
    prime: Optional[int] = None
    precision: dict[int, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "reason": self.reason,
            "prime": self.prime,
            "witnesses": {str(p): {"e": w.e, "matrix": arith.matrix_to_json(w.matrix)}
                          for p, w in sorted(self.witnesses.items())},
        }


def genus_equivalent(f1: Form, f2: Form, e: Optional[int] = None,
                     search_budget: int = 200_000) -> GenusVerdict:
    if f1.rank != f2.rank:
        raise FormError("rank mismatch")
    if f1.hermitian or f2.hermitian:
        raise FormError("genus comparison is for quadratic forms")
    require_definite(f1)
    require_definite(f2)
    d1, d2 = f1.det(), f2.det()
    if _squarefree_int(Fraction(d1, d2)) != 1:
        return GenusVerdict("distinct", reason="determinant class")
    primes = sorted(bad_primes(f1) | bad_primes(f2))
    for p in primes:
        if hasse_invariant(f1, p) != hasse_invariant(f2, p):
            return GenusVerdict("distinct", reason="hasse invariant", prime=p)
    # integral equivalence at the bad primes: g^T Q g = Q' over Z_p
    witnesses: dict[int, PAdicBasisChange] = {}
    precision: dict[int, int] = {}
    for p in primes:
        ep = e if e is not None else 2 * v_p(d2, p) + 3
        ep = max(ep, v_p(2 * d2, p) + 1)
        found, g = _equivalence_search(f1.gram, f2.gram, p, ep, search_budget)
        if found is None:
            return GenusVerdict("undetermined", witnesses, "search budget", p, precision)
        if not found:
            return GenusVerdict("distinct", witnesses, "no Z_p equivalence", p, precision)
        witnesses[p] = PAdicBasisChange(p, ep, g)
        precision[p] = ep
    # at p outside the bad set both lattices are unimodular with the same
    # determinant class, hence Z_p-equivalent.
    return GenusVerdict("same_genus", witnesses, "", None, precision)


def _equivalence_search(q1: Matrix, q2: Matrix, p: int, e: int, budget: int):
    """Column DFS for g mod p^e with g^T q1 g = q2, det g a unit.

    Returns (True, g), (False, None) after full exhaustion, or (None, None)
    when the search space exceeds the budget.
    """
    k = len(q1)
    mod = p ** e
    if mod ** k > budget:
        # try the identity and signed permutations first; they settle the
        # common integrally-equivalent case without exhaustion.
        g = _cheap_equivalence(q1, q2, mod)
        return (True, g) if g is not None else (None, None)
    a1 = np.array(q1, dtype=object)
    grid = np.array(np.meshgrid(*[np.arange(mod)] * k, indexing="ij")).reshape(k, -1).T
    grid = grid.astype(np.int64)
    q1i = np.array(q1, dtype=np.int64)
    norms = np.einsum("ni,ij,nj->n", grid, q1i, grid)
    cands = [grid[(norms - q2[j][j]) % mod == 0] for j in range(k)]
    chosen: list[np.ndarray] = []

    def dfs(j: int):
        if j == k:
            g = tuple(tuple(int(c[i]) for c in chosen) for i in range(k))
            return g if det(g) % p else None
        c = cands[j]
        for i, u in enumerate(chosen):
            c = c[(c @ (q1i @ u) - q2[i][j]) % mod == 0]
        for v in c:
            chosen.append(v)
            r = dfs(j + 1)
            if r is not None:
                return r
            chosen.pop()
        return None

    del a1
    g = dfs(0)
    return (True, g) if g is not None else (False, None)


def _cheap_equivalence(q1: Matrix, q2: Matrix, mod: int):
    import itertools

    k = len(q1)
    for perm in itertools.permutations(range(k)):
        for signs in itertools.product((1, -1), repeat=k):
            g = tuple(tuple(signs[j] if perm[j] == i else 0 for j in range(k)) for i in range(k))
            if arith.mod_matrix(matmul(matmul(transpose(g), q1), g), mod) == arith.mod_matrix(q2, mod):
                return arith.mod_matrix(g, mod)
    return None
