"""Exact arithmetic over Z and Z[i]: Gaussian integers, small dense matrices,
contents, denominators and p-adic valuations.

Matrices are plain tuples of row tuples. Entries are Python ``int`` or
:class:`GaussianInt`; every helper here works for both because GaussianInt
interoperates with ``int`` through the usual operators.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import reduce
from math import gcd, isqrt
from typing import Iterable, Sequence, Union

Matrix = tuple[tuple, ...]


@dataclass(frozen=True, order=True)
class GaussianInt:
    re: int
    im: int = 0

    @staticmethod
    def of(x) -> "GaussianInt":
        if isinstance(x, GaussianInt):
            return x
        if isinstance(x, int):
            return GaussianInt(x, 0)
        raise TypeError(f"cannot convert {x!r} to GaussianInt")

    def __add__(self, other):
        if isinstance(other, int):
            return GaussianInt(self.re + other, self.im)
        if isinstance(other, GaussianInt):
            return GaussianInt(self.re + other.re, self.im + other.im)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return GaussianInt(-self.re, -self.im)

    def __sub__(self, other):
        if isinstance(other, (int, GaussianInt)):
            return self + (-other)
        return NotImplemented

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, int):
            return GaussianInt(self.re * other, self.im * other)
        if isinstance(other, GaussianInt):
            return GaussianInt(self.re * other.re - self.im * other.im,
                               self.re * other.im + self.im * other.re)
        return NotImplemented

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, int):
            return self.im == 0 and self.re == other
        if isinstance(other, GaussianInt):
            return self.re == other.re and self.im == other.im
        return NotImplemented

    def __hash__(self):
        return hash((self.re, self.im)) if self.im else hash(self.re)

    def conj(self) -> "GaussianInt":
        return GaussianInt(self.re, -self.im)

    def norm(self) -> int:
        return self.re * self.re + self.im * self.im

    def __repr__(self):
        return f"GaussianInt({self.re}, {self.im})"

    def to_json(self):
        return [self.re, self.im]


Entry = Union[int, GaussianInt]


def conj(x: Entry) -> Entry:
    return x.conj() if isinstance(x, GaussianInt) else x


def is_gaussian(m: Matrix) -> bool:
    return any(isinstance(x, GaussianInt) for row in m for x in row)


# ---------------------------------------------------------------- primes


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    # deterministic Miller-Rabin for n < 3.3e24
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41):
        if a % n == 0:
            continue
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def factorize(n: int) -> dict[int, int]:
    """Trial-division factorization; fine for the desk-scale levels used here."""
    if n < 1:
        raise ValueError("factorize expects a positive integer")
    out: dict[int, int] = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1 if d == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def prime_divisors(n: int) -> list[int]:
    return sorted(factorize(abs(n))) if n else []


def v_p(n: int, p: int) -> int:
    """Exact p-adic valuation of a nonzero integer."""
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    if n == 0:
        raise ValueError("valuation of 0 is infinite")
    n = abs(n)
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def v_p_or(n: int, p: int, default: int) -> int:
    """v_p with a cap standing in for +infinity at n = 0."""
    return default if n == 0 else min(v_p(n, p), default)


def is_square(n: int) -> bool:
    return n >= 0 and isqrt(n) ** 2 == n


# --------------------------------------------------------------- matrices


def mat(rows: Iterable[Iterable]) -> Matrix:
    return tuple(tuple(r) for r in rows)


def identity(k: int, scale: int = 1) -> Matrix:
    return tuple(tuple(scale if i == j else 0 for j in range(k)) for i in range(k))


def diag(*entries) -> Matrix:
    k = len(entries)
    return tuple(tuple(entries[i] if i == j else 0 for j in range(k)) for i in range(k))


def block_diag(*blocks: Matrix) -> Matrix:
    k = sum(len(b) for b in blocks)
    rows = []
    off = 0
    for b in blocks:
        for r in b:
            rows.append((0,) * off + tuple(r) + (0,) * (k - off - len(r)))
        off += len(b)
    return tuple(rows)


def transpose(m: Matrix) -> Matrix:
    return tuple(zip(*m))


def conj_transpose(m: Matrix) -> Matrix:
    return tuple(tuple(conj(x) for x in col) for col in zip(*m))


def adjoint(m: Matrix) -> Matrix:
    """Conjugate transpose for Gaussian matrices, transpose otherwise."""
    return conj_transpose(m) if is_gaussian(m) else transpose(m)


def matmul(a: Matrix, b: Matrix) -> Matrix:
    bt = tuple(zip(*b))
    return tuple(tuple(sum((x * y for x, y in zip(row, col)), 0) for col in bt) for row in a)


def matvec(a: Matrix, v: Sequence) -> tuple:
    return tuple(sum((x * y for x, y in zip(row, v)), 0) for row in a)


def scale(m: Matrix, c) -> Matrix:
    return tuple(tuple(c * x for x in row) for row in m)


def madd(a: Matrix, b: Matrix) -> Matrix:
    return tuple(tuple(x + y for x, y in zip(r, s)) for r, s in zip(a, b))


def msub(a: Matrix, b: Matrix) -> Matrix:
    return tuple(tuple(x - y for x, y in zip(r, s)) for r, s in zip(a, b))


def mod_matrix(m: Matrix, q: int) -> Matrix:
    return tuple(tuple(_mod(x, q) for x in row) for row in m)


def _mod(x: Entry, q: int) -> Entry:
    if isinstance(x, GaussianInt):
        return GaussianInt(x.re % q, x.im % q)
    return x % q


def is_zero_mod(m: Matrix, q: int) -> bool:
    return all(_mod(x, q) == 0 for row in m for x in row)


def det(m: Matrix) -> Entry:
    """Fraction-free Bareiss elimination; exact over Z and Z[i]."""
    k = len(m)
    if k == 0:
        return 1
    if is_gaussian(m):
        return _det_gaussian(m)
    a = [list(r) for r in m]
    sign = 1
    prev = 1
    for i in range(k - 1):
        if a[i][i] == 0:
            for r in range(i + 1, k):
                if a[r][i] != 0:
                    a[i], a[r] = a[r], a[i]
                    sign = -sign
                    break
            else:
                return 0
        for r in range(i + 1, k):
            for c in range(i + 1, k):
                a[r][c] = (a[r][c] * a[i][i] - a[r][i] * a[i][c]) // prev
        prev = a[i][i]
    return sign * a[k - 1][k - 1]


def _det_gaussian(m: Matrix) -> GaussianInt:
    # Laplace expansion along the first row with memoised minors; k <= 6 here.
    k = len(m)
    memo: dict[tuple[int, ...], Entry] = {}

    def minor(row: int, cols: tuple[int, ...]):
        if not cols:
            return 1
        key = cols
        if key in memo:
            return memo[key]
        total = 0
        for idx, c in enumerate(cols):
            x = m[row][c]
            if x == 0:
                continue
            sub = minor(row + 1, cols[:idx] + cols[idx + 1:])
            term = x * sub
            total = total + term if idx % 2 == 0 else total - term
        memo[key] = total
        return total

    return GaussianInt.of(minor(0, tuple(range(k))))


def det_cofactor(m: Matrix) -> Entry:
    """Naive cofactor expansion; the independent oracle for :func:`det`."""
    k = len(m)
    if k == 1:
        return m[0][0]
    total = 0
    for j in range(k):
        sub = tuple(tuple(r[c] for c in range(k) if c != j) for r in m[1:])
        term = m[0][j] * det_cofactor(sub)
        total = total + term if j % 2 == 0 else total - term
    return total


def int_entries(m: Matrix) -> list[int]:
    out = []
    for row in m:
        for x in row:
            if isinstance(x, GaussianInt):
                out.extend((x.re, x.im))
            else:
                out.append(x)
    return out


def content_z(m: Matrix) -> int:
    """Largest rational integer dividing every entry (real and imaginary parts)."""
    g = reduce(gcd, (abs(x) for x in int_entries(m)), 0)
    if g == 0:
        raise ValueError("zero matrix has no content")
    return g


def gaussian_gcd(a: GaussianInt, b: GaussianInt) -> GaussianInt:
    a, b = GaussianInt.of(a), GaussianInt.of(b)
    while b != 0:
        nb = b.norm()
        # nearest-integer division a / b = a * conj(b) / N(b)
        t = a * b.conj()
        q = GaussianInt(_round_div(t.re, nb), _round_div(t.im, nb))
        a, b = b, a - q * b
    return a


def _round_div(a: int, b: int) -> int:
    return (2 * a + b) // (2 * b)


def content_gaussian_norm(m: Matrix) -> int:
    """Norm of the Z[i]-gcd of all entries (1 iff the entries are coprime in Z[i])."""
    g = GaussianInt(0, 0)
    for row in m:
        for x in row:
            g = gaussian_gcd(g, GaussianInt.of(x))
    if g == 0:
        raise ValueError("zero matrix has no content")
    return g.norm()


def denominator(m: Matrix, d: int) -> int:
    """Denominator of the rational matrix m / d."""
    if d < 1:
        raise ValueError("d must be a positive integer")
    try:
        c = content_z(m)
    except ValueError:
        return 1
    return d // gcd(c, d)


@dataclass(frozen=True)
class RationalPoint:
    """The rational matrix numerator / level, kept in reduced form."""

    numerator: Matrix
    level: int

    def __post_init__(self):
        if self.level < 1:
            raise ValueError("level must be positive")
        if gcd(content_z(self.numerator), self.level) != 1:
            raise ValueError("numerator content is not coprime to the level")

    @classmethod
    def reduced(cls, m: Matrix, d: int) -> "RationalPoint":
        g = gcd(content_z(m), d)
        return cls(tuple(tuple(_exact_div(x, g) for x in row) for row in m), d // g)

    def denominator(self) -> int:
        return denominator(self.numerator, self.level)


def _exact_div(x: Entry, g: int) -> Entry:
    if isinstance(x, GaussianInt):
        return GaussianInt(x.re // g, x.im // g)
    return x // g


# ------------------------------------------------------------ modular helpers


def inv_mod(a: int, q: int) -> int:
    return pow(a % q, -1, q)


def centered(x: int, q: int) -> int:
    x %= q
    return x - q if x > q // 2 else x


def mat_inv_mod(m: Matrix, q: int) -> Matrix:
    """Inverse of an integer matrix modulo q = p**e (det must be a unit)."""
    k = len(m)
    a = [[x % q for x in row] + [1 if i == j else 0 for j in range(k)] for i, row in enumerate(m)]
    for c in range(k):
        piv = None
        for r in range(c, k):
            if gcd(a[r][c], q) == 1:
                piv = r
                break
        if piv is None:
            raise ValueError("matrix is not invertible modulo %d" % q)
        a[c], a[piv] = a[piv], a[c]
        inv = inv_mod(a[c][c], q)
        a[c] = [x * inv % q for x in a[c]]
        for r in range(k):
            if r != c and a[r][c]:
                f = a[r][c]
                a[r] = [(x - f * y) % q for x, y in zip(a[r], a[c])]
    return tuple(tuple(row[k:]) for row in a)


def rank_mod_p(rows: list[list[int]], p: int) -> int:
    a = [[x % p for x in r] for r in rows]
    rank = 0
    ncols = len(a[0]) if a else 0
    for c in range(ncols):
        piv = next((r for r in range(rank, len(a)) if a[r][c]), None)
        if piv is None:
            continue
        a[rank], a[piv] = a[piv], a[rank]
        inv = pow(a[rank][c], -1, p)
        a[rank] = [x * inv % p for x in a[rank]]
        for r in range(len(a)):
            if r != rank and a[r][c]:
                f = a[r][c]
                a[r] = [(x - f * y) % p for x, y in zip(a[r], a[rank])]
        rank += 1
    return rank


# ------------------------------------------------------------------- JSON


def parse_entry(x) -> Entry:
    if isinstance(x, bool):
        raise ValueError("booleans are not matrix entries")
    if isinstance(x, int):
        return x
    if isinstance(x, str):
        return int(x)
    if isinstance(x, float) and x.is_integer():
        return int(x)
    if isinstance(x, (list, tuple)) and len(x) == 2:
        return GaussianInt(int(parse_entry(x[0])), int(parse_entry(x[1])))
    raise ValueError(f"cannot parse matrix entry {x!r}")


def parse_matrix(data) -> Matrix:
    rows = tuple(tuple(parse_entry(x) for x in row) for row in data)
    if not rows or any(len(r) != len(rows) for r in rows):
        raise ValueError("matrix literal must be square and nonempty")
    if any(isinstance(x, GaussianInt) for r in rows for x in r):
        rows = tuple(tuple(GaussianInt.of(x) for x in r) for r in rows)
    return rows


def _json_int(x: int):
    return x if abs(x) < 2 ** 53 else str(x)


def matrix_to_json(m: Matrix) -> list:
    out = []
    for row in m:
        r = []
        for x in row:
            if isinstance(x, GaussianInt):
                r.append([_json_int(x.re), _json_int(x.im)])
            else:
                r.append(_json_int(x))
        out.append(r)
    return out


def dumps_matrix(m: Matrix) -> str:
    return json.dumps(matrix_to_json(m))


def adjugate(m: Matrix) -> Matrix:
    """Classical adjoint (transpose of the cofactor matrix), exact."""
    k = len(m)
    if k == 1:
        return ((1,),)
    cof = []
    for i in range(k):
        row = []
        for j in range(k):
            sub = tuple(tuple(m[r][c] for c in range(k) if c != j) for r in range(k) if r != i)
            d = det(sub)
            row.append(d if (i + j) % 2 == 0 else -d)
        cof.append(tuple(row))
    return transpose(tuple(cof))
