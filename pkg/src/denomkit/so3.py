"""Rational rotations from integer quaternions.

Conjugation by x = a + bi + cj + dk acts on the pure quaternions through the
integer matrix R(x) with R(x)^T R(x) = N(x)^2 Id and det R(x) = N(x)^3.  A
rotation in SO(3, Q) of denominator exactly n (n odd) comes from a primitive x
with N(x) in {n, 2n, 4n}; for N(x) = 2^j n the matrix R(x) is divisible by 2^j.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import gcd, isqrt

import numpy as np

from . import arith, forms
from .arith import Matrix
from .enumeration import SolutionSet


@dataclass(frozen=True, order=True)
class Quaternion:
    a: int
    b: int
    c: int
    d: int

    def norm(self) -> int:
        return self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d

    def conj(self) -> "Quaternion":
        return Quaternion(self.a, -self.b, -self.c, -self.d)

    def __mul__(self, o: "Quaternion") -> "Quaternion":
        a1, b1, c1, d1 = self.a, self.b, self.c, self.d
        a2, b2, c2, d2 = o.a, o.b, o.c, o.d
        return Quaternion(
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        )

    def __neg__(self) -> "Quaternion":
        return Quaternion(-self.a, -self.b, -self.c, -self.d)

    @property
    def primitive(self) -> bool:
        return gcd(gcd(self.a, self.b), gcd(self.c, self.d)) == 1

    def astuple(self) -> tuple[int, int, int, int]:
        return (self.a, self.b, self.c, self.d)


UNITS = tuple(Quaternion(*v) for v in
              [(1, 0, 0, 0), (-1, 0, 0, 0), (0, 1, 0, 0), (0, -1, 0, 0),
               (0, 0, 1, 0), (0, 0, -1, 0), (0, 0, 0, 1), (0, 0, 0, -1)])


def _two_square_table(limit: int) -> tuple[np.ndarray, np.ndarray]:
    """All (c, d) with c^2 + d^2 <= limit, sorted by c^2 + d^2."""
    r = isqrt(limit)
    c, d = np.meshgrid(np.arange(-r, r + 1), np.arange(-r, r + 1), indexing="ij")
    c, d = c.ravel(), d.ravel()
    s = c * c + d * d
    keep = s <= limit
    c, d, s = c[keep], d[keep], s[keep]
    idx = np.lexsort((d, c, s))
    return s[idx], np.stack([c[idx], d[idx]], axis=1)


def quaternion_array(n: int, primitive: bool = True) -> np.ndarray:
    """All (a, b, c, d) with a^2 + b^2 + c^2 + d^2 = n as an (m, 4) array, lexicographic."""
    if n < 1:
        raise ValueError("n must be positive")
    sums, pairs = _two_square_table(n)
    rest = n - sums  # (a, b) range over the same table as (c, d)
    lo = np.searchsorted(sums, rest, side="left")
    hi = np.searchsorted(sums, rest, side="right")
    cnt = np.where(rest >= 0, hi - lo, 0)
    ab = np.repeat(pairs, cnt, axis=0)
    starts = np.repeat(lo, cnt)
    offs = np.arange(len(ab)) - np.repeat(np.cumsum(cnt) - cnt, cnt)
    cd = pairs[starts + offs]
    q = np.concatenate([ab, cd], axis=1).astype(np.int64)
    if primitive:
        g = np.gcd.reduce(np.abs(q), axis=1)
        q = q[g == 1]
    return np.unique(q, axis=0)


def quaternions_of_norm(n: int) -> list[Quaternion]:
    """Primitive integer quaternions of norm n, in lexicographic order."""
    return [Quaternion(*map(int, row)) for row in quaternion_array(n)]


def rotation_numerators(q: np.ndarray) -> np.ndarray:
    """Vectorised conjugation matrices R(x) for rows x = (a, b, c, d); shape (m, 3, 3)."""
    a, b, c, d = (q[:, i].astype(np.int64) for i in range(4))
    r = np.empty((len(q), 3, 3), dtype=np.int64)
    r[:, 0, 0] = a * a + b * b - c * c - d * d
    r[:, 0, 1] = 2 * (b * c - a * d)
    r[:, 0, 2] = 2 * (a * c + b * d)
    r[:, 1, 0] = 2 * (a * d + b * c)
    r[:, 1, 1] = a * a - b * b + c * c - d * d
    r[:, 1, 2] = 2 * (c * d - a * b)
    r[:, 2, 0] = 2 * (b * d - a * c)
    r[:, 2, 1] = 2 * (a * b + c * d)
    r[:, 2, 2] = a * a - b * b - c * c + d * d
    return r


def quat_to_rotation(x: Quaternion) -> Matrix:
    """R(x), the numerator of the rotation by conjugation (level N(x))."""
    a, b, c, d = x.astuple()
    return (
        (a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (a * c + b * d)),
        (2 * (a * d + b * c), a * a - b * b + c * c - d * d, 2 * (c * d - a * b)),
        (2 * (b * d - a * c), 2 * (a * b + c * d), a * a - b * b - c * c + d * d),
    )


def rotation_array(n: int) -> np.ndarray:
    """Numerators of all rotations of denominator exactly n (n odd), deduplicated.

    Shape (m, 3, 3), sorted row-major lexicographically.  Each numerator M
    satisfies M^T M = n^2 Id, det M = n^3 and has content 1.
    """
    if n < 1 or n % 2 == 0:
        raise ValueError("construction requires odd n")
    blocks = []
    for j in range(3):
        q = quaternion_array(n << j)
        if len(q) == 0:
            continue
        r = rotation_numerators(q)
        if np.any(r % (1 << j)):
            raise AssertionError("numerator of an even-norm quaternion is not divisible")
        blocks.append(r // (1 << j))
    if not blocks:
        return np.zeros((0, 3, 3), dtype=np.int64)
    allr = np.concatenate(blocks)
    flat = np.unique(allr.reshape(len(allr), 9), axis=0)
    # content is checked explicitly rather than assumed
    g = np.gcd.reduce(np.abs(flat), axis=1)
    flat = flat[g == 1]
    out = flat.reshape(-1, 3, 3)
    _check_rotations(out, n)
    return out


def _check_rotations(r: np.ndarray, n: int) -> None:
    if len(r) == 0:
        return
    if n < 2 ** 16:
        # entries and determinants stay far inside the exact range of int64 / float64
        gram = np.einsum("mki,mkj->mij", r, r)
        ok = bool(np.all(gram == n * n * np.eye(3, dtype=np.int64)))
        ok = ok and bool(np.all(np.round(np.linalg.det(r.astype(float))) == float(n ** 3)))
    else:
        mats = [arith.mat(m.tolist()) for m in r]
        ok = all(arith.matmul(arith.transpose(m), m) == arith.identity(3, n * n)
                 and arith.det(m) == n ** 3 for m in mats)
    if not ok:
        raise AssertionError("generated matrix is not a scaled rotation")


def denominator_n_rotations(n: int) -> SolutionSet:
    """All denominator-n points of SO(3, Q) as integer numerators, as a SolutionSet for Id_3."""
    arr = rotation_array(n)
    sols = [tuple(tuple(int(x) for x in row) for row in m) for m in arr]
    stats = {"count": len(sols), "source": "quaternions",
             "norms": [n, 2 * n, 4 * n]}
    return SolutionSet(forms.identity_form(3), n, sols, stats)


def unit_fiber(x: Quaternion) -> dict[Matrix, list[Quaternion]]:
    """Group the eight unit multiples u*x by the rotation they induce."""
    out: dict[Matrix, list[Quaternion]] = {}
    for u in UNITS:
        out.setdefault(quat_to_rotation(u * x), []).append(u * x)
    return out
