"""Local solvability of the scaled isometry equation over Z_p.

For a form with Gram matrix G (quadratic, or hermitian over Z[i]) and a level
n, the question is whether some p-adic integral matrix M with a unit entry
satisfies ``M^* G M = n^2 G`` and ``det M = n^k``.

Three routes, tried in order:

* p does not divide n: ``n * Id`` is a solution.
* quadratic, rank >= 5, p odd and good: conjugate the block witness
  ``g u g^-1`` through a hyperbolic reduction of the form.
* p^m || n with m >= 2: a level-p solution A whose reduction is not
  nilpotent gives the witness ``A^m``.
* otherwise: depth-first search through the Hensel tree.  A candidate mod p
  is built column by column; each further p-adic digit is a solution of a
  linear system over F_p.  Leaves at precision ``e0`` satisfy the Newton
  lifting criterion and are lifted and verified; exhausting the tree at any
  precision proves that no solution exists.

Only the p-part of n matters: the cofactor is a p-adic unit, so verdicts are
computed at level p^m, cached, and rescaled.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional

import numpy as np

from . import arith, forms, padic
from .arith import GaussianInt, Matrix
from .forms import Form


class BudgetExceeded(Exception):
    pass


@dataclass
class LocalVerdict:
    p: int
    n: int
    outcome: str  # "yes" | "no" | "unknown"
    witness: Optional[Matrix] = None
    precision: Optional[int] = None
    method: str = ""
    lift_certificate: list[int] = field(default_factory=list)
    nodes: int = 0

    @property
    def yes(self) -> bool:
        return self.outcome == "yes"

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "n": self.n,
            "outcome": self.outcome,
            "method": self.method,
            "precision": self.precision,
            "lift_certificate": self.lift_certificate,
            "nodes": self.nodes,
            "witness": arith.matrix_to_json(self.witness) if self.witness else None,
        }


@dataclass
class LocalProfile:
    n: int
    verdicts: dict[int, LocalVerdict]

    @property
    def member(self) -> str:
        outs = [v.outcome for v in self.verdicts.values()]
        if any(o == "no" for o in outs):
            return "no"
        if any(o == "unknown" for o in outs):
            return "unknown"
        return "yes"

    def to_json(self) -> dict:
        return {"n": self.n, "member": self.member,
                "verdicts": {str(p): v.to_json() for p, v in sorted(self.verdicts.items())}}


def search_precision(form: Form, n: int, p: int) -> int:
    """Precision at which a solution mod p^e is guaranteed to lift."""
    m = arith.v_p(n, p)
    e0 = 2 * m + arith.v_p(2 * form.det(), p) + 1
    return e0 + 2 if p == 2 else e0


def verify_witness(form: Form, n: int, p: int, w: Matrix, e: int,
                   content: str = "rational") -> bool:
    """Exact modular re-check of a witness: equation, determinant, unit entry."""
    q = p ** e
    g = form.gram
    k = form.rank
    lhs = arith.matmul(arith.matmul(arith.adjoint(w) if form.hermitian else arith.transpose(w), g), w)
    if not arith.is_zero_mod(arith.msub(lhs, arith.scale(g, n * n)), q):
        return False
    d = arith.det(w)
    if arith._mod(d - n ** k, q) != 0:
        return False
    return _has_unit_entry(w, p, content)


def _has_unit_entry(w: Matrix, p: int, content: str) -> bool:
    for row in w:
        for x in row:
            if isinstance(x, GaussianInt):
                if content == "gaussian":
                    if x.norm() % p:
                        return True
                elif x.re % p or x.im % p:
                    return True
            elif x % p:
                return True
    return False


def local_solvable(form: Form, n: int, p: int, budget: int = 200_000,
                   content: str = "rational", max_e: Optional[int] = None,
                   use_fast_path: bool = True) -> LocalVerdict:
    if n < 1:
        raise ValueError("n must be positive")
    if not arith.is_prime(p):
        raise ValueError(f"{p} is not prime")
    if content not in ("rational", "gaussian"):
        raise ValueError("content must be 'rational' or 'gaussian'")
    forms.require_definite(form)
    k = form.rank
    if n % p:
        w = arith.identity(k, n)
        if form.hermitian:
            w = tuple(tuple(GaussianInt.of(x) for x in r) for r in w)
        return LocalVerdict(p, n, "yes", w, None, "scalar", [], 0)
    m = arith.v_p(n, p)
    o = n // p ** m
    if max_e is not None:
        return _prime_power_verdict(form, n, p, budget, content, max_e, use_fast_path)
    # the cofactor o is a p-adic unit: M solves level n iff M / o solves level p^m
    v = _cached_verdict(form, p ** m, p, budget, content, use_fast_path)
    w = v.witness
    if w is not None and o > 1:
        w = arith.mod_matrix(arith.scale(w, o), p ** v.precision)
        if not verify_witness(form, n, p, w, v.precision, content):
            raise AssertionError("rescaled witness failed its re-multiplication check")
    return replace(v, n=n, witness=w)


@lru_cache(maxsize=512)
def _cached_verdict(form, n, p, budget, content, use_fast_path):
    return _prime_power_verdict(form, n, p, budget, content, None, use_fast_path)


def _prime_power_verdict(form, n, p, budget, content, max_e, use_fast_path) -> LocalVerdict:
    k = form.rank
    if (use_fast_path and not form.hermitian and k >= 5 and p != 2
            and p not in forms.bad_primes(form)):
        return _hyperbolic_witness(form, n, p)
    m = arith.v_p(n, p)
    spent = 0
    if use_fast_path and m >= 2 and max_e is None:
        v = _power_witness(form, n, p, budget, content)
        if v.outcome == "yes":
            return v
        spent = v.nodes
    search = _HenselSearch(form, n, p, max(budget - spent, 1), content, max_e)
    v = search.run()
    v.nodes += spent
    return v


def _non_nilpotent_mod_p(mr: np.ndarray, p: int) -> bool:
    a = np.array(mr, dtype=np.int64) % p
    x = a.copy()
    for _ in range(len(a)):
        x = x @ a % p
    return bool(x.any())


def _power_witness(form: Form, n: int, p: int, budget: int, content: str) -> LocalVerdict:
    """Witness o * A^m from a level-p solution A whose reduction mod p is not nilpotent.

    A^m is a solution at level p^m, and a non-nilpotent reduction keeps a unit
    entry in every power, so no deep search at level n is needed.
    """
    m = arith.v_p(n, p)
    o = n // p ** m
    e = search_precision(form, n, p)
    search = _HenselSearch(form, p, p, budget, content, None,
                           base_filter=lambda mr: _non_nilpotent_mod_p(mr, p), need_acc=e)
    base = search.run()
    if base.outcome != "yes":
        return LocalVerdict(p, n, "unknown", None, None, "power", [], search.nodes)
    q = p ** base.precision
    a = base.witness
    w = a
    for _ in range(m - 1):
        w = arith.mod_matrix(arith.matmul(w, a), q)
    w = arith.mod_matrix(arith.scale(w, o), q)
    if not verify_witness(form, n, p, w, base.precision, content):
        raise AssertionError("power witness failed its re-multiplication check")
    return LocalVerdict(p, n, "yes", w, base.precision, "power", base.lift_certificate,
                        search.nodes)


def local_profile(form: Form, n: int, budget: int = 200_000, content: str = "rational",
                  workers: int = 1) -> LocalProfile:
    primes = arith.prime_divisors(n)

    def one(p):
        return local_solvable(form, n, p, budget, content)

    if workers > 1 and len(primes) > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(one, primes))
    else:
        results = [one(p) for p in primes]
    return LocalProfile(n, dict(zip(primes, results)))


# ------------------------------------------------------------ fast path


def unipotent_block(k: int) -> Matrix:
    """u: identity plus entries u[1][2] = 1 and u[3][0] = -1; preserves x1 x2 + x3 x4."""
    u = [[1 if i == j else 0 for j in range(k)] for i in range(k)]
    u[1][2] = 1
    u[3][0] = -1
    return arith.mat(u)


def conjugated_block(k: int, n: int, p: int) -> Matrix:
    """n * g u g^-1 for g = diag(p^m, p^-m, 1, ..., 1), m = v_p(n), as an integer matrix.

    (g u g^-1)_ij = p^(a_i - a_j) u_ij with exponents a = (m, -m, 0, ...); the
    two off-diagonal entries of u pick up p^-m, so the sup-norm is p^m.
    """
    m = arith.v_p(n, p)
    a = [m, -m] + [0] * (k - 2)
    u = unipotent_block(k)
    out = []
    for i in range(k):
        row = []
        for j in range(k):
            ex = a[i] - a[j]
            val = n * u[i][j]
            if ex >= 0:
                val *= p ** ex
            else:
                assert val % p ** (-ex) == 0
                val //= p ** (-ex)
            row.append(val)
        out.append(tuple(row))
    return tuple(out)


def _hyperbolic_witness(form: Form, n: int, p: int) -> LocalVerdict:
    k = form.rank
    e = search_precision(form, n, p)
    q = p ** e
    change, reduced = forms.hyperbolic_reduce(form, p, e)
    h = change.matrix
    hinv = change.inverse()
    inner = conjugated_block(k, n, p)
    # inner is n * (g u g^-1) in the reduced coordinates; check it there first
    lhs = arith.matmul(arith.matmul(arith.transpose(inner), reduced), inner)
    if not arith.is_zero_mod(arith.msub(lhs, arith.scale(reduced, n * n)), q):
        raise AssertionError("block witness is not an isometry of the reduced form")
    w = arith.mod_matrix(arith.matmul(arith.matmul(h, inner), hinv), q)
    cert = _newton_certificate(form, n, p, w, e)
    if not verify_witness(form, n, p, w, e):
        raise AssertionError("transported witness failed its re-multiplication check")
    return LocalVerdict(p, n, "yes", w, e, "hyperbolic", cert, 1)


def _newton_certificate(form: Form, n: int, p: int, w: Matrix, e: int, steps: int = 2) -> list[int]:
    """Run Newton steps from w and record the precision reached after each."""
    g = form.real_gram()
    x = forms.realify(w) if form.hermitian else w
    if form.hermitian:
        adj = forms.realify(arith.adjugate(form.gram))
    else:
        adj = arith.adjugate(g)
    d = form.det()
    prec = e
    cert = [padic.valuation_matrix(padic.isometry_defect(x, g, n * n), p, e)]
    for _ in range(steps):
        prec *= 2
        x = padic.lift_isometry(x, g, adj, d, n * n, p, prec)
        if form.hermitian:
            x = _restructure(x, form.rank, p ** prec)
        v = padic.valuation_matrix(
            arith.mod_matrix(padic.isometry_defect(x, g, n * n), p ** prec), p, prec)
        if v <= cert[-1]:
            raise AssertionError("Newton lifting did not improve the precision")
        cert.append(v)
    return cert


# ------------------------------------------------------------ Hensel tree


class _HenselSearch:
    def __init__(self, form: Form, n: int, p: int, budget: int, content: str,
                 max_e: Optional[int], base_filter=None, need_acc: int = 0):
        self.base_filter = base_filter
        self.need_acc = need_acc
        self.form = form
        self.n = n
        self.p = p
        self.budget = budget
        self.content = content
        self.k = form.rank
        self.m = arith.v_p(n, p)
        self.e = search_precision(form, n, p)
        if max_e is not None and max_e < self.e:
            self.e_cap = max_e
        else:
            self.e_cap = None
        self.nodes = 0
        self.herm = form.hermitian
        self.g_real = np.array(form.real_gram(), dtype=object)
        if self.herm:
            adj = forms.realify(arith.adjugate(form.gram))
        else:
            adj = arith.adjugate(form.gram)
        # M^T G M = n^2 G forces M adj(G) M^T = n^2 adj(G); both are imposed
        self.a_real = np.array(adj, dtype=object)
        self.K = len(self.g_real)
        self._build_params()
        self.n2 = n * n
        self.det_rejects = 0
        self.stalls = 0
        self.extra_depth = 0 if self.e_cap is not None else 4
        self.deepest = 0
        self.reflection = None if self.herm else _integral_reflection(form, p)

    # parametrisation of structured realified matrices by integer vectors
    def _build_params(self):
        k, K = self.k, self.K
        pos = []
        if not self.herm:
            for r in range(k):
                for c in range(k):
                    pos.append([(r, c, 1)])
            groups = [[r * k + c for r in range(k)] for c in range(k)]
            cols = [[c] for c in range(k)]
        else:
            for r in range(k):
                for c in range(k):
                    pos.append([(r, c, 1), (k + r, k + c, 1)])
            for r in range(k):
                for c in range(k):
                    pos.append([(k + r, c, 1), (r, k + c, -1)])
            groups = [[r * k + c for r in range(k)] + [k * k + r * k + c for r in range(k)]
                      for c in range(k)]
            cols = [[c, k + c] for c in range(k)]
        self.N = len(pos)
        emb = np.zeros((self.N, K, K), dtype=np.int64)
        for a, plist in enumerate(pos):
            for r, c, s in plist:
                emb[a, r, c] = s
        self.emb = emb
        self.groups = groups
        self.group_cols = cols
        self.rows = [(i, j) for i in range(K) for j in range(i, K)]

    def tick(self):
        self.nodes += 1
        if self.nodes > self.budget:
            raise BudgetExceeded

    def embed(self, theta) -> np.ndarray:
        return np.tensordot(np.asarray(theta, dtype=object), self.emb.astype(object), axes=1)

    def defect(self, mr: np.ndarray):
        g, a = self.g_real, self.a_real
        return (mr.T.dot(g).dot(mr) - self.n2 * g,
                mr.dot(a).dot(mr.T) - self.n2 * a)

    def _ok_one(self, c, t, idx) -> bool:
        p = self.p
        q = p ** t
        qd = p ** (t + 1) if p == 2 else q
        for i in idx:
            for j in idx:
                if c[i, j] % (qd if i == j else q):
                    return False
        return True

    def ok(self, cs, t: int, cols=None) -> bool:
        """Congruence conditions known once M is fixed mod p^t.

        Row conditions involve every column, so they are only checked when
        cols is None (all columns placed).
        """
        full = range(self.K)
        if not self._ok_one(cs[0], t, full if cols is None else cols):
            return False
        if cols is None or len(cols) == self.K:
            return self._ok_one(cs[1], t, full)
        return True

    def det_ok(self, theta, t: int) -> bool:
        """det M = n^k exactly, so its residue mod p^t is already fixed."""
        q = self.p ** t
        mr = arith.mod_matrix(arith.mat((int(x) for x in row) for row in self.embed(theta)), q)
        w = _unrealify(mr, self.k) if self.herm else mr
        return arith._mod(arith.det(w) - self.n ** self.k, q) == 0

    def unit_ok(self, theta) -> bool:
        p = self.p
        if not self.herm or self.content == "rational":
            return any(int(x) % p for x in theta)
        k2 = self.k * self.k
        return any((int(theta[a]) ** 2 + int(theta[k2 + a]) ** 2) % p for a in range(k2))

    # -- search

    def run(self) -> LocalVerdict:
        p = self.p
        target = self.e if self.e_cap is None else self.e_cap
        try:
            for theta in self._base_solutions():
                res = self._descend(theta, 1, target)
                if res is not None:
                    w, prec, cert = res
                    return LocalVerdict(p, self.n, "yes", w, prec, "search", cert, self.nodes)
        except BudgetExceeded:
            return LocalVerdict(p, self.n, "unknown", None, self.deepest, "search", [], self.nodes)
        if self.deepest >= target:
            # leaves were reached but none certified: no proof either way
            return LocalVerdict(p, self.n, "unknown", None, self.deepest, "search", [], self.nodes)
        exhausted = self.deepest + 1 + (1 if p == 2 else 0)
        return LocalVerdict(p, self.n, "no", None, exhausted, "search", [], self.nodes)

    def _base_solutions(self):
        """All theta mod p (with a unit entry) satisfying the level-1 congruences.

        Column groups are placed one at a time.  Orthogonality to the columns
        already placed is linear in the new group, so its candidates are the
        points of an affine space over F_p, filtered by their own norm.
        """
        p = self.p
        n2 = self.n2
        theta = np.zeros(self.N, dtype=object)
        groups = self.groups
        g_int = np.array(self.g_real, dtype=np.int64)
        dmod = 2 * p if p == 2 else p

        def candidates(gi, placed_cols):
            idx = groups[gi]
            new_cols = self.group_cols[gi]
            ebs = {b: self.emb[idx, :, b] for b in new_cols}
            mr = np.array(self.embed(theta), dtype=np.int64) % p
            rows, rhs = [], []
            for a in placed_cols:
                gca = g_int @ mr[:, a]
                for b in new_cols:
                    rows.append(ebs[b] @ gca % p)
                    rhs.append((n2 * int(g_int[a, b])) % p)
            if rows:
                system = padic.LinearSystemModP(np.array(rows), p)
                part = system.solve(np.array(rhs))
                if part is None:
                    return np.zeros((0, len(idx)), dtype=np.int64)
                basis = system.nullspace
            else:
                part = np.zeros(len(idx), dtype=np.int64)
                basis = np.eye(len(idx), dtype=np.int64)
            combos = np.array(list(itertools.product(range(p), repeat=len(basis))),
                              dtype=np.int64).reshape(-1, len(basis))
            cands = (combos @ basis + part) % p
            keep = np.ones(len(cands), dtype=bool)
            for b in new_cols:
                col = cands @ ebs[b]
                quad = np.einsum("ni,ij,nj->n", col, g_int, col)
                keep &= (quad - n2 * int(g_int[b, b])) % dmod == 0
            return cands[keep]

        def rec(gi, placed_cols):
            if gi == len(groups):
                if self.base_filter is not None and not self.base_filter(self.embed(theta)):
                    return
                if self.unit_ok(theta):
                    yield theta.copy()
                return
            cols = placed_cols + self.group_cols[gi]
            for v in candidates(gi, placed_cols):
                self.tick()
                theta[groups[gi]] = v.astype(object)
                if self.ok(self.defect(self.embed(theta)), 1, cols):
                    yield from rec(gi + 1, cols)
            theta[groups[gi]] = 0

        yield from rec(0, [])

    def _linear_data(self, base_theta):
        """Coefficient matrices of the digit equations for a fixed residue mod p."""
        p = self.p
        m1 = self.embed(base_theta).astype(np.int64) % p
        blocks, blocks_t1 = [], []
        # row family: the column equations for M^T with A = adj(G)
        for gram, emb, m in ((self.g_real, self.emb, m1),
                             (self.a_real, self.emb.transpose(0, 2, 1), m1.T)):
            gm = np.array(gram, dtype=np.int64) % p
            gk = gm @ m % p
            # (E_a^T A M)_{ij}
            et_gm = np.einsum("ari,rj->aij", emb, gk) % p
            sym = (et_gm + et_gm.transpose(0, 2, 1)) % p
            coeff = np.zeros((len(self.rows), self.N), dtype=np.int64)
            coeff_t1 = np.zeros_like(coeff)
            gdiag = np.diag(gm)
            for ri, (i, j) in enumerate(self.rows):
                if p == 2 and i == j:
                    coeff[ri] = et_gm[:, i, i] % 2
                    quad = (np.abs(emb[:, :, i]) * gdiag[None, :]).sum(axis=1) % 2
                    coeff_t1[ri] = (coeff[ri] + quad) % 2
                else:
                    coeff[ri] = sym[:, i, j]
                    coeff_t1[ri] = sym[:, i, j]
            blocks.append(coeff)
            blocks_t1.append(coeff_t1)
        # det(M + p^t X) = det M + p^t tr(adj(M) X) mod p^(t+1)
        drows = self._det_rows(m1)
        blocks.append(drows)
        blocks_t1.append(drows)
        sys_main = padic.LinearSystemModP(np.vstack(blocks), p)
        sys_t1 = padic.LinearSystemModP(np.vstack(blocks_t1), p) if p == 2 else sys_main
        return sys_main, sys_t1

    def _complex(self, mr):
        mr = arith.mat((int(x) for x in row) for row in mr)
        return _unrealify(mr, self.k) if self.herm else mr

    def _det_rows(self, m1) -> np.ndarray:
        """Rows of the linearised determinant condition (re and im for hermitian)."""
        p, k = self.p, self.k
        adj = arith.adjugate(self._complex(m1))
        if not self.herm:
            row = [adj[c][r] % p for r in range(k) for c in range(k)]
            return np.array([row], dtype=np.int64)
        re_row, im_row = [], []
        for part in (0, 1):
            for r in range(k):
                for c in range(k):
                    z = GaussianInt.of(adj[c][r])
                    if part == 1:
                        z = z * GaussianInt(0, 1)
                    re_row.append(z.re % p)
                    im_row.append(z.im % p)
        return np.array([re_row, im_row], dtype=np.int64)

    def _det_rhs(self, theta, t: int) -> np.ndarray:
        q = self.p ** t
        d = arith.det(self._complex(self.embed(theta))) - self.n ** self.k
        if not self.herm:
            return np.array([(-(d // q)) % self.p], dtype=np.int64)
        d = GaussianInt.of(d)
        return np.array([(-(d.re // q)) % self.p, (-(d.im // q)) % self.p], dtype=np.int64)

    def _descend(self, base_theta, t0, target):
        p = self.p
        sys_main, sys_t1 = self._linear_data(base_theta)
        theta0 = np.array([int(x) for x in base_theta], dtype=object)

        def rec(theta, t):
            if not self.det_ok(theta, t):
                return None
            self.deepest = max(self.deepest, t)
            if t >= target:
                r = self._finish(theta, t)
                if r is not None or t >= target + self.extra_depth:
                    return r
            mr = self.embed(theta)
            parts = []
            for c in self.defect(mr):
                r = np.zeros(len(self.rows), dtype=np.int64)
                for ri, (i, j) in enumerate(self.rows):
                    if p == 2 and i == j:
                        r[ri] = (-(int(c[i, i]) // 2 ** (t + 1))) % 2
                    else:
                        r[ri] = (-(int(c[i, j]) // p ** t)) % p
                parts.append(r)
            parts.append(self._det_rhs(theta, t))
            rhs = np.concatenate(parts)
            system = sys_t1 if t == 1 else sys_main
            part = system.solve(rhs)
            if part is None:
                return None
            basis = system.nullspace
            scale = p ** t
            for coeffs in itertools.product(range(p), repeat=len(basis)):
                self.tick()
                x = part.copy()
                for cf, b in zip(coeffs, basis):
                    if cf:
                        x = (x + cf * b) % p
                nxt = theta + scale * x.astype(object)
                r = rec(nxt, t + 1)
                if r is not None:
                    return r
            return None

        return rec(theta0, t0)

    def _finish(self, theta, t):
        """Lift a leaf, settle the determinant, and return (witness, e, certificate)."""
        if t < self.e:
            return None  # capped search: leaf cannot be certified
        p, n, k = self.p, self.n, self.k
        mr = arith.mat((int(x) for x in row) for row in self.embed(theta))
        g = self.form.real_gram()
        if self.herm:
            adj = forms.realify(arith.adjugate(self.form.gram))
        else:
            adj = arith.adjugate(g)
        d = self.form.det()
        slack = 2 * self.m + arith.v_p(2 * d, p)
        need = self.m * self.k + arith.v_p(2, p) + 1 if p == 2 else self.m * self.k + 1
        need = max(need, self.need_acc)
        cert = [padic.valuation_matrix(padic.isometry_defect(mr, g, n * n), p, t)]
        prec = t
        x = mr
        while len(cert) < 3 or cert[-1] - slack < need:
            prec *= 2
            x = padic.lift_isometry(x, g, adj, d, n * n, p, prec)
            if self.herm:
                x = _restructure(x, k, p ** prec)
            v = padic.valuation_matrix(
                arith.mod_matrix(padic.isometry_defect(x, g, n * n), p ** prec), p, prec)
            if v <= cert[-1]:
                self.stalls += 1
                return None  # leaf too coarse for Newton; the caller digs deeper
            cert.append(v)
        acc = cert[-1] - slack  # x agrees with an exact solution mod p^acc
        w = _unrealify(x, k) if self.herm else x
        q = p ** acc
        dw = arith.det(w)
        nk = n ** k
        if self.herm:
            w = self._fix_unitary_det(w, dw, acc)
            if w is None:
                self.det_rejects += 1
                return None
            if p == 2:
                acc -= 1
                q = p ** acc
        elif (dw - nk) % q:
            if (dw + nk) % q:
                raise AssertionError("determinant is neither +n^k nor -n^k")
            if self.reflection is None:
                self.det_rejects += 1
                return None
            r = reflection_matrix(self.form, self.reflection, p, prec)
            w = arith.matmul(w, r)
        w = arith.mod_matrix(w, q)
        if not verify_witness(self.form, n, p, w, acc, self.content):
            raise AssertionError("lifted witness failed its re-multiplication check")
        return w, acc, cert

    def _fix_unitary_det(self, w, dw, acc):
        """Multiply by a quasi-reflection so that det w = n^k exactly."""
        p, n, k = self.p, self.n, self.k
        q = p ** acc
        pm = p ** (self.m * k)
        dwi = GaussianInt.of(dw)
        if dwi.re % pm or dwi.im % pm:
            return None  # det/n^k is not integral (possible at split primes)
        unit = (n // p ** self.m) ** k
        inv = arith.inv_mod(unit, q)
        lam = GaussianInt((dwi.re // pm) * inv % q, (dwi.im // pm) * inv % q)
        lam_prec = acc - self.m * k
        if lam_prec < 1:
            return None
        ql = p ** lam_prec
        if (lam.re - 1) % ql == 0 and lam.im % ql == 0:
            return w
        # mu = conj(lambda) / sqrt(N(lambda)) has norm exactly 1 mod p^acc and
        # agrees with lambda^-1 to the precision of lambda (one bit less at p = 2)
        nl = lam.norm() % q
        r = _sqrt_near_one(nl, p, acc)
        if r is None:
            return None
        ri = arith.inv_mod(r, q)
        lc = lam.conj()
        mu = GaussianInt(lc.re * ri % q, lc.im * ri % q)
        mu_minus_1 = mu - 1
        h = self.form.gram
        for i in range(k):
            hii = GaussianInt.of(h[i][i]).re
            vn = arith.v_p(hii, p)
            if vn >= lam_prec:
                continue
            iv = arith.inv_mod(hii // p ** vn, q)
            entries = []
            for j in range(k):
                z = mu_minus_1 * h[i][j]
                if z.re % p ** vn or z.im % p ** vn:
                    break
                entries.append(GaussianInt((z.re // p ** vn) * iv % q, (z.im // p ** vn) * iv % q))
            else:
                # T = I + e_i (mu - 1) H_i. / H_ii, a unitary quasi-reflection of det mu
                t_mat = [[GaussianInt(1 if r == c else 0) for c in range(k)] for r in range(k)]
                for j in range(k):
                    t_mat[i][j] = t_mat[i][j] + entries[j]
                return arith.mod_matrix(arith.matmul(w, arith.mat(t_mat)), q)
        return None


def _sqrt_near_one(a: int, p: int, e: int) -> Optional[int]:
    """Square root of a = 1 mod p (mod 8 at p = 2) in Z_p, reduced mod p^e."""
    q = p ** e
    if p == 2:
        if a % 8 != 1:
            return None
        r = 1
        for j in range(3, e):
            if (r * r - a) % 2 ** (j + 1):
                r += 2 ** (j - 1)
        return r % q
    if a % p != 1:
        return None
    r = 1
    inv2 = arith.inv_mod(2, q)
    for _ in range(e.bit_length() + 1):
        r = (r + a * arith.inv_mod(r, q)) * inv2 % q
    return r


def _restructure(x: Matrix, k: int, q: int) -> Matrix:
    """Project a realified matrix back onto the image of M_k(Z[i]) mod q.

    The realified equation also has non-complex solutions, so Newton steps
    must be followed by this projection or they drift out of the image.
    """
    return arith.mod_matrix(forms.realify(_unrealify(x, k)), q)


def _unrealify(x: Matrix, k: int) -> Matrix:
    return tuple(tuple(GaussianInt(x[r][c], x[k + r][c]) for c in range(k)) for r in range(k))


def _integral_reflection(form: Form, p: int):
    """A vector v whose reflection x -> x - 2 B(x,v)/q(v) v is p-integral, if any."""
    g = form.gram
    k = form.rank
    for v in itertools.product((0, 1, -1), repeat=k):
        if not any(v):
            continue
        gv = arith.matvec(g, v)
        qv = sum(a * b for a, b in zip(v, gv))
        vq = arith.v_p(qv, p)
        if all((2 * vi * gj) == 0 or arith.v_p(2 * vi * gj, p) >= vq for vi in v for gj in gv):
            return tuple(v)
    return None


def reflection_matrix(form: Form, v, p: int, prec: int) -> Matrix:
    """R_v = I - 2 v v^T G / q(v) reduced mod p^prec (det R_v = -1)."""
    g = form.gram
    k = form.rank
    gv = arith.matvec(g, v)
    qv = sum(a * b for a, b in zip(v, gv))
    vq = arith.v_p(qv, p)
    unit = qv // p ** vq
    q = p ** prec
    inv = arith.inv_mod(unit, q)
    rows = []
    for i in range(k):
        row = []
        for j in range(k):
            num = 2 * v[i] * gv[j]
            assert num % p ** vq == 0
            row.append(((1 if i == j else 0) - (num // p ** vq) * inv) % q)
        rows.append(tuple(row))
    return tuple(rows)
