"""Linear algebra over F_p and Newton lifting of p-adic isometries."""
from __future__ import annotations

from math import gcd

import numpy as np

from . import arith
from .arith import Matrix


def valuation_matrix(m, p: int, cap: int) -> int:
    """min v_p over the entries of an integer matrix, capped (cap stands for infinity)."""
    v = cap
    for row in m:
        for x in row:
            x = int(x)
            if x:
                v = min(v, arith.v_p_or(x, p, cap))
    return v


def lift_isometry(x: Matrix, a: Matrix, a_adj: Matrix, a_det: int, c: int,
                  p: int, prec: int) -> Matrix:
    """One Newton step towards X^T A X = c A over Z_p.

    With X^T A X = cA + E the corrected matrix is X - (1/2c) X A^{-1} E.
    Arithmetic is exact; the result is reduced mod p^prec. Raises if the
    correction is not p-integral (the starting point was too coarse).
    """
    xt = arith.transpose(x)
    err = arith.msub(arith.matmul(arith.matmul(xt, a), x), arith.scale(a, c))
    num = arith.matmul(arith.matmul(x, a_adj), err)
    den = 2 * c * a_det
    vd = arith.v_p(den, p)
    q = p ** prec
    unit = den // p ** vd
    inv = arith.inv_mod(unit, q)
    pv = p ** vd
    out = []
    for xrow, nrow in zip(x, num):
        r = []
        for xv, nv in zip(xrow, nrow):
            if nv % pv:
                raise ValueError("Newton correction is not p-integral")
            r.append((xv - (nv // pv) * inv) % q)
        out.append(tuple(r))
    return tuple(out)


def isometry_defect(x: Matrix, a: Matrix, c: int) -> Matrix:
    return arith.msub(arith.matmul(arith.matmul(arith.transpose(x), a), x), arith.scale(a, c))


class LinearSystemModP:
    """Row-reduced form of a fixed coefficient matrix over F_p.

    Solving for several right-hand sides reuses the elimination; solutions are
    returned as (particular, nullspace basis).
    """

    def __init__(self, coeffs: np.ndarray, p: int):
        self.p = p
        a = np.array(coeffs, dtype=np.int64) % p
        nrows, ncols = a.shape
        self.ncols = ncols
        # track row operations so the rhs can be transformed identically
        t = np.eye(nrows, dtype=np.int64)
        pivots = []
        r = 0
        for c in range(ncols):
            if r == nrows:
                break
            nz = np.nonzero(a[r:, c])[0]
            if nz.size == 0:
                continue
            piv = r + int(nz[0])
            if piv != r:
                a[[r, piv]] = a[[piv, r]]
                t[[r, piv]] = t[[piv, r]]
            inv = pow(int(a[r, c]), -1, p)
            a[r] = a[r] * inv % p
            t[r] = t[r] * inv % p
            for rr in range(nrows):
                if rr != r and a[rr, c]:
                    f = a[rr, c]
                    a[rr] = (a[rr] - f * a[r]) % p
                    t[rr] = (t[rr] - f * t[r]) % p
            pivots.append(c)
            r += 1
        self.rank = r
        self.rref = a
        self.transform = t
        self.pivots = pivots
        free = [c for c in range(ncols) if c not in set(pivots)]
        self.free = free
        basis = np.zeros((len(free), ncols), dtype=np.int64)
        for i, f in enumerate(free):
            basis[i, f] = 1
            for row, pc in enumerate(pivots):
                basis[i, pc] = (-a[row, f]) % p
        self.nullspace = basis

    def solve(self, rhs: np.ndarray):
        """Particular solution or None when inconsistent."""
        p = self.p
        b = (self.transform @ (np.asarray(rhs, dtype=np.int64) % p)) % p
        if np.any(b[self.rank:]):
            return None
        x = np.zeros(self.ncols, dtype=np.int64)
        for row, pc in enumerate(self.pivots):
            x[pc] = b[row]
        return x


def unit_gcd(values, p: int) -> bool:
    return any(int(v) % p for v in values)


def gcd_list(values) -> int:
    g = 0
    for v in values:
        g = gcd(g, int(v))
    return g
