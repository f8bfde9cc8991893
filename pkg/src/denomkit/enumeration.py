"""Exact enumeration of integral scaled isometries.

All matrices M over Z (or Z[i]) with ``M^* G M = n^2 G``, content 1 and
``det M = n^k``.  Column j of such an M is a lattice vector of norm
``n^2 G_jj``; the candidates for every column come from a short-vector
enumeration on the (realified) Gram matrix, and the columns are assembled by
depth-first search with forward checking of the cross conditions.
"""
from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np

from . import arith, forms
from .arith import GaussianInt, Matrix
from .forms import Form

# leaves of the Fincke-Pohst tree are processed in blocks of this many rows
_CHUNK = 200_000


@dataclass
class EnumOptions:
    count_only: bool = False
    limit: Optional[int] = None  # stop after this many solutions
    special: bool = True  # det = +n^k; False admits every unimodular multiple
    content: str = "rational"  # or "gaussian" (Z[i]-coprime entries)
    workers: int = 1
    existence_order: bool = False  # try columns coprime to n first

    def __post_init__(self):
        if self.content not in ("rational", "gaussian"):
            raise ValueError("content must be 'rational' or 'gaussian'")
        if self.limit is not None and self.limit < 1:
            raise ValueError("limit must be positive")


@dataclass
class SolutionSet:
    form: Form
    n: int
    solutions: list[Matrix]
    stats: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return self.stats.get("count", len(self.solutions))

    def __len__(self) -> int:
        return self.count

    def as_set(self) -> set[Matrix]:
        return set(self.solutions)

    def to_json(self) -> dict:
        return {
            "form": self.form.to_json(),
            "n": self.n,
            "count": self.count,
            "solutions": [arith.matrix_to_json(m) for m in self.solutions],
            "stats": self.stats,
        }


class SinkError(RuntimeError):
    """A sink raised; ``emitted`` solutions had been delivered before."""

    def __init__(self, emitted: int, cause: BaseException):
        super().__init__(f"sink failed after {emitted} solutions: {cause!r}")
        self.emitted = emitted
        self.cause = cause


# ------------------------------------------------------------ short vectors


def vectors_of_norm(gram, norm: int) -> np.ndarray:
    """All integer x with x^T gram x == norm, as rows sorted lexicographically.

    Fincke-Pohst with floating bounds widened by a relative slack, so no
    integer point is lost to rounding; every row is then checked exactly.
    """
    g_int = np.array(gram, dtype=object)
    k = len(g_int)
    if norm < 0:
        return np.zeros((0, k), dtype=np.int64)
    if norm == 0:
        return np.zeros((1, k), dtype=np.int64)
    g = np.array(gram, dtype=float)
    r = np.linalg.cholesky(g).T  # g = r^T r, r upper triangular
    qd = np.diag(r) ** 2
    mu = r / np.diag(r)[:, None]
    slack = 1e-9 * (norm + 1) * k * max(1.0, float(np.max(np.abs(g))))
    xs = np.zeros((1, k), dtype=np.int64)
    rem = np.array([float(norm)])
    for i in range(k - 1, 0, -1):
        c = -(xs[:, i + 1:] @ mu[i, i + 1:]) if i + 1 < k else np.zeros(len(xs))
        s = np.sqrt(np.maximum(rem + slack, 0.0) / qd[i])
        lo = np.ceil(c - s).astype(np.int64)
        hi = np.floor(c + s).astype(np.int64)
        cnt = np.maximum(hi - lo + 1, 0)
        rows = np.repeat(np.arange(len(xs)), cnt)
        if len(rows) == 0:
            return np.zeros((0, k), dtype=np.int64)
        starts = np.cumsum(cnt) - cnt
        offs = np.arange(len(rows)) - np.repeat(starts, cnt)
        xs = xs[rows]
        xi = lo[rows] + offs
        xs[:, i] = xi
        rem = rem[rows] - qd[i] * (xi - c[rows]) ** 2
    out = []
    exact_int64 = norm < 2 ** 50
    for start in range(0, len(xs), _CHUNK):
        block = xs[start:start + _CHUNK]
        rb = rem[start:start + _CHUNK]
        c = -(block[:, 1:] @ mu[0, 1:]) if k > 1 else np.zeros(len(block))
        s = np.sqrt(np.maximum(rb, 0.0) / qd[0])
        # the last coordinate is a root of a quadratic: only its neighbours matter
        cand = np.stack([np.floor(c - s), np.ceil(c - s), np.floor(c + s), np.ceil(c + s)], axis=1)
        full = np.repeat(block, 4, axis=0)
        full[:, 0] = cand.reshape(-1).astype(np.int64)
        if exact_int64:
            g64 = np.array(gram, dtype=np.int64)
            val = np.einsum("ni,ij,nj->n", full, g64, full)
            keep = val == norm
        else:
            fo = full.astype(object)
            keep = np.array([int(v @ g_int @ v) == norm for v in fo], dtype=bool)
        out.append(full[keep])
    res = np.concatenate(out) if out else np.zeros((0, k), dtype=np.int64)
    if len(res) == 0:
        return res
    res = np.unique(res, axis=0)  # sorted lexicographically
    return res


# ------------------------------------------------------------ assembly


class _Problem:
    """Everything the column search needs, in a picklable form."""

    def __init__(self, form: Form, n: int, opts: EnumOptions):
        forms.require_definite(form)
        self.form = form
        self.n = n
        self.opts = opts
        self.k = form.rank
        self.herm = form.hermitian
        self.G = np.array(form.real_gram(), dtype=np.int64)
        self.K = len(self.G)
        n2 = n * n
        if self.herm:
            diag = [GaussianInt.of(form.gram[j][j]).re for j in range(self.k)]
        else:
            diag = [form.gram[j][j] for j in range(self.k)]
        # tightest ellipsoids (largest diagonal entry) first
        self.order = sorted(range(self.k), key=lambda j: (-diag[j], j))
        cache: dict[int, np.ndarray] = {}
        self.cands = []
        for j in range(self.k):
            target = n2 * diag[j]
            if target not in cache:
                cache[target] = vectors_of_norm(self.G, target)
            self.cands.append(cache[target])
        # cross targets: Re and Im of n^2 H_ij, or n^2 G_ij
        self.re_t = np.zeros((self.k, self.k), dtype=object)
        self.im_t = np.zeros((self.k, self.k), dtype=object)
        for i in range(self.k):
            for j in range(self.k):
                h = form.gram[i][j]
                if self.herm:
                    h = GaussianInt.of(h)
                    self.re_t[i, j], self.im_t[i, j] = n2 * h.re, n2 * h.im
                else:
                    self.re_t[i, j] = n2 * h
        if opts.existence_order:
            self.cands = [self._existence_sort(c) for c in self.cands]
        self.nodes = 0

    def _existence_sort(self, c: np.ndarray) -> np.ndarray:
        if len(c) == 0:
            return c
        g = np.gcd.reduce(np.abs(c), axis=1)
        bad = np.gcd(g, self.n) != 1
        spread = np.max(np.abs(c), axis=1)
        idx = np.lexsort((spread, bad))
        return c[idx]

    def _i_times(self, v: np.ndarray) -> np.ndarray:
        # realify(i v) = (-y, x)
        k = self.k
        return np.concatenate([-v[k:], v[:k]])

    def filter(self, cand: np.ndarray, v: np.ndarray, i: int, j: int) -> np.ndarray:
        """Rows w of cand with <v_i, w> equal to the target for the pair (i, j)."""
        if len(cand) == 0:
            return cand
        gv = self.G @ v
        mask = cand @ gv == self.re_t[i, j]
        if self.herm:
            giv = self.G @ self._i_times(v)
            mask &= cand @ giv == self.im_t[i, j]
        return cand[mask]

    def to_matrix(self, cols: dict[int, np.ndarray]) -> Matrix:
        k = self.k
        if self.herm:
            return tuple(tuple(GaussianInt(int(cols[c][r]), int(cols[c][k + r])) for c in range(k))
                         for r in range(k))
        return tuple(tuple(int(cols[c][r]) for c in range(k)) for r in range(k))

    def accept(self, m: Matrix) -> bool:
        n, k = self.n, self.k
        d = arith.det(m)
        nk = n ** k
        if self.opts.special:
            if d != nk:
                return False
        elif self.herm:
            if GaussianInt.of(d).norm() != nk * nk:
                return False
        elif d not in (nk, -nk):
            return False
        if self.opts.content == "gaussian":
            if arith.content_gaussian_norm(m) != 1:
                return False
        elif arith.content_z(m) != 1:
            return False
        # exactness is asserted on every emitted solution, not merely assumed
        g = self.form.gram
        mt = arith.adjoint(m) if self.herm else arith.transpose(m)
        if arith.matmul(arith.matmul(mt, g), m) != arith.scale(g, n * n):
            raise AssertionError("assembled matrix violates the isometry equation")
        return True

    def search(self, first: Optional[np.ndarray] = None) -> Iterator[Matrix]:
        order = self.order
        pools = {j: self.cands[j] for j in order}
        if first is not None:
            pools[order[0]] = first
        cols: dict[int, np.ndarray] = {}

        def rec(depth: int, pools: dict[int, np.ndarray]):
            if depth == len(order):
                m = self.to_matrix(cols)
                if self.accept(m):
                    yield m
                return
            j = order[depth]
            rest = order[depth + 1:]
            for v in pools[j]:
                self.nodes += 1
                cols[j] = v
                nxt = {}
                dead = False
                for f in rest:
                    nxt[f] = self.filter(pools[f], v, j, f)
                    if len(nxt[f]) == 0:
                        dead = True
                        break
                if not dead:
                    yield from rec(depth + 1, nxt)
            cols.pop(j, None)

        # diagonal conditions are built into the pools; for hermitian forms
        # Im <v, v> = 0 holds automatically
        yield from rec(0, pools)


def canonical_key(m: Matrix) -> tuple:
    """Row-major lexicographic key (Gaussian entries as (re, im))."""
    out = []
    for row in m:
        for x in row:
            if isinstance(x, GaussianInt):
                out.extend((x.re, x.im))
            else:
                out.append(x)
    return tuple(out)


def _worker(args) -> tuple[list[Matrix], int, int]:
    form_json, n, opts, block = args
    form = Form.from_json(form_json)
    prob = _Problem(form, n, opts)
    sols = []
    count = 0
    for m in prob.search(first=block):
        count += 1
        if not opts.count_only:
            sols.append(m)
    return sols, count, prob.nodes


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("DENOMKIT_WORKERS", "1")))
    except ValueError:
        return 1


def solve_scaled_isometry(form: Form, n: int, opts: Optional[EnumOptions] = None) -> SolutionSet:
    """The complete (or, with a limit, truncated) solution set at level n."""
    if n < 1:
        raise ValueError("n must be positive")
    opts = opts or EnumOptions()
    t0 = time.perf_counter()
    prob = _Problem(form, n, opts)
    sols: list[Matrix] = []
    count = 0
    nodes = 0
    truncated = False
    first = prob.cands[prob.order[0]]
    if opts.workers > 1 and opts.limit is None and len(first) > 1:
        blocks = np.array_split(first, min(len(first), 4 * opts.workers))
        jobs = [(form.to_json(), n, opts, b) for b in blocks if len(b)]
        with ProcessPoolExecutor(opts.workers) as ex:
            for s, c, nd in ex.map(_worker, jobs):
                sols.extend(s)
                count += c
                nodes += nd
    else:
        for m in prob.search():
            count += 1
            if not opts.count_only:
                sols.append(m)
            if opts.limit is not None and count >= opts.limit:
                truncated = True
                break
        nodes = prob.nodes
    sols.sort(key=canonical_key)
    stats = {
        "count": count,
        "nodes": nodes,
        "candidates": [int(len(c)) for c in prob.cands],
        "truncated": truncated,
        "seconds": round(time.perf_counter() - t0, 6),
    }
    return SolutionSet(form, n, sols, stats)


def count_solutions(form: Form, n: int, opts: Optional[EnumOptions] = None) -> int:
    opts = opts or EnumOptions()
    o = EnumOptions(**{**opts.__dict__, "count_only": True})
    return solve_scaled_isometry(form, n, o).count


def has_solution(form: Form, n: int, opts: Optional[EnumOptions] = None) -> bool:
    """Existence only: stops at the first solution."""
    opts = opts or EnumOptions()
    o = EnumOptions(**{**opts.__dict__, "count_only": True, "limit": 1,
                       "existence_order": True, "workers": 1})
    return solve_scaled_isometry(form, n, o).count > 0


def stream_solutions(form: Form, n: int, sink: Callable[[Matrix], None],
                     opts: Optional[EnumOptions] = None, canonical: bool = True) -> int:
    """Deliver each solution once to sink; returns the number emitted.

    Canonical order needs the whole set before the first emission.  With
    ``canonical=False`` solutions go out in search order and memory stays
    bounded by the search state.
    """
    opts = opts or EnumOptions()
    if canonical:
        source: Iterator[Matrix] = iter(solve_scaled_isometry(form, n, opts).solutions)
    else:
        source = _Problem(form, n, opts).search()
    emitted = 0
    for m in source:
        try:
            sink(m)
        except Exception as exc:  # noqa: BLE001 - any sink failure aborts
            raise SinkError(emitted, exc) from exc
        emitted += 1
        if opts.limit is not None and emitted >= opts.limit:
            break
    return emitted


def group_elements(form: Form) -> list[Matrix]:
    """The finite group of level-1 solutions (integral special isometries)."""
    return solve_scaled_isometry(form, 1).solutions

