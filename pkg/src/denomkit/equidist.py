"""Empirical measures of solution sets against Haar measure.

A solution M at level n is sent to C (M/n) C^-1 in the compact group, where
C is the Cholesky factor of the form.  Test functions are the monomials in
the matrix entries up to a fixed degree and indicator functions of
spherical caps.  Haar values are exact zeros where an entry-sign symmetry
forces them and Monte Carlo estimates otherwise.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from . import forms
from .arith import GaussianInt
from .forms import Form

RESIDUAL_CAP = 1e-8
_SUM_CHUNK = 512  # products are < 2^63 / 512 when exact sums are used


class EmbeddingError(ValueError):
    pass


@dataclass
class EmpiricalSample:
    matrices: np.ndarray  # (m, k, k), float or complex
    kind: str = "orthogonal"  # or "unitary"
    n: Optional[int] = None
    residual: float = 0.0
    numerators: Optional[np.ndarray] = None  # exact integer numerators when C = Id
    source: str = ""

    def __post_init__(self):
        if self.kind not in ("orthogonal", "unitary"):
            raise ValueError(f"unknown group kind {self.kind!r}")

    def __len__(self) -> int:
        return len(self.matrices)

    @property
    def k(self) -> int:
        return self.matrices.shape[1]


@dataclass
class StatEntry:
    statistic: str
    empirical: float
    reference: float
    source: str  # exact-symmetry | monte-carlo | exact-area | table
    samples: Optional[int] = None
    std_error: Optional[float] = None
    degree: Optional[int] = None

    @property
    def gap(self) -> float:
        return abs(self.empirical - self.reference)

    def to_json(self) -> dict:
        return {"statistic": self.statistic, "empirical": self.empirical,
                "reference": self.reference, "source": self.source,
                "samples": self.samples, "std_error": self.std_error,
                "degree": self.degree, "gap": self.gap}


@dataclass
class DiscrepancyReport:
    entries: list[StatEntry] = field(default_factory=list)

    def sup_gap(self, degree: Optional[int] = None) -> float:
        gaps = [e.gap for e in self.entries if degree is None or e.degree == degree]
        return max(gaps) if gaps else 0.0

    def max_std_error(self) -> float:
        errs = [e.std_error for e in self.entries if e.std_error is not None]
        return max(errs) if errs else 0.0

    def to_json(self) -> dict:
        return {"sup_gap": self.sup_gap(),
                "max_std_error": self.max_std_error(),
                "entries": [e.to_json() for e in self.entries]}


# ------------------------------------------------------------ samples


def _residual(g: np.ndarray) -> float:
    if len(g) == 0:
        return 0.0
    k = g.shape[1]
    prod = np.einsum("mji,mjk->mik", g.conj(), g)
    return float(np.max(np.abs(prod - np.eye(k))))


def _as_numerator_array(solutions, hermitian: bool) -> np.ndarray:
    if isinstance(solutions, np.ndarray):
        return solutions
    if hermitian:
        return np.array([[[complex(GaussianInt.of(x).re, GaussianInt.of(x).im) for x in r]
                          for r in m] for m in solutions], dtype=complex)
    return np.array([[[int(x) for x in r] for r in m] for m in solutions], dtype=np.int64)


def embed_solutions(form: Form, solutions, n: Optional[int] = None) -> EmpiricalSample:
    """Map numerators M (level n) to C (M/n) C^-1 in the compact group.

    ``solutions`` is a SolutionSet, a list of matrices, or an (m, k, k) array.
    """
    if hasattr(solutions, "solutions"):
        n = solutions.n if n is None else n
        solutions = solutions.solutions
    if n is None:
        raise ValueError("level n is required")
    if len(solutions) == 0:
        raise ValueError("cannot embed an empty solution set")
    num = _as_numerator_array(solutions, form.hermitian)
    c, _ = forms.real_embedding(form)
    k = form.rank
    identity_gram = all(form.gram[i][j] == (1 if i == j else 0) for i in range(k) for j in range(k))
    if identity_gram:
        g = num / n
    else:
        cinv = np.linalg.inv(c)
        g = np.einsum("ij,mjk,kl->mil", c, num / n, cinv)
    if not form.hermitian:
        g = np.real(g)
    res = _residual(g)
    if res > RESIDUAL_CAP:
        raise EmbeddingError(f"embedding residual {res:.3e} exceeds {RESIDUAL_CAP}")
    exact = num if (identity_gram and not form.hermitian) else None
    kind = "unitary" if form.hermitian else "orthogonal"
    return EmpiricalSample(g, kind, n, res, exact, source=f"level {n}")


def haar_sample(k: int, count: int, seed: Union[int, np.random.SeedSequence],
                kind: str = "orthogonal") -> EmpiricalSample:
    """Haar-distributed SO(k) or SU(k) matrices.

    QR of a Gaussian matrix with the phases of diag(R) moved into Q gives
    Haar on O(k) / U(k); multiplying the first column by conj(det) then lands
    in the special group, and left invariance is preserved because det is
    invariant under left multiplication by the special group.
    """
    if count < 1:
        raise ValueError("count must be positive")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng = np.random.default_rng(ss)
    z = rng.standard_normal((count, k, k))
    if kind == "unitary":
        z = (z + 1j * rng.standard_normal((count, k, k))) / np.sqrt(2.0)
    elif kind != "orthogonal":
        raise ValueError(f"unknown group kind {kind!r}")
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=1, axis2=2)
    q = q * (d / np.abs(d))[:, None, :]
    det = np.linalg.det(q)
    q[:, :, 0] *= np.conj(det)[:, None] if kind == "unitary" else det[:, None]
    src = f"haar seed {ss.entropy}/{ss.spawn_key}"
    return EmpiricalSample(q, kind, None, _residual(q), None, source=src)


# ------------------------------------------------------------ monomials


def _variables(k: int, kind: str) -> list[tuple[str, int, int]]:
    parts = ("re",) if kind == "orthogonal" else ("re", "im")
    return [(part, i, j) for part in parts for i in range(k) for j in range(k)]


def monomials(k: int, kind: str, max_degree: int) -> list[tuple[int, ...]]:
    nv = len(_variables(k, kind))
    out = []
    for d in range(1, max_degree + 1):
        out.extend(itertools.combinations_with_replacement(range(nv), d))
    return out


def monomial_name(mono: Sequence[int], k: int, kind: str) -> str:
    vs = _variables(k, kind)
    names = []
    for v in mono:
        part, i, j = vs[v]
        base = f"G{i + 1}{j + 1}"
        names.append(base if kind == "orthogonal" else f"{part.capitalize()}{base}")
    return "*".join(names)


def _symmetry_signs(k: int, kind: str) -> list[np.ndarray]:
    """Sign actions on the variables of generators of the entry-sign symmetries.

    Generators: flipping rows 0 and i, flipping columns 0 and j (determinant
    one), and complex conjugation in the unitary case.
    """
    vs = _variables(k, kind)
    gens = []
    for a in range(1, k):
        gens.append(np.array([-1 if i in (0, a) else 1 for _, i, _ in vs]))
        gens.append(np.array([-1 if j in (0, a) else 1 for _, _, j in vs]))
    if kind == "unitary":
        gens.append(np.array([-1 if part == "im" else 1 for part, _, _ in vs]))
    return gens


def forced_zero(mono: Sequence[int], k: int, kind: str) -> bool:
    """True when some entry-sign symmetry of Haar measure negates the monomial."""
    for s in _symmetry_signs(k, kind):
        if np.prod(s[list(mono)]) == -1:
            return True
    return False


def _values(sample: EmpiricalSample, v: int) -> np.ndarray:
    k = sample.k
    part, i, j = _variables(k, sample.kind)[v]
    x = sample.matrices[:, i, j]
    return np.real(x) if part == "re" else np.imag(x)


def _exact_mean(sample: EmpiricalSample, mono: Sequence[int]) -> Optional[Fraction]:
    num = sample.numerators
    if num is None or sample.kind != "orthogonal":
        return None
    n = sample.n
    d = len(mono)
    if float(np.max(np.abs(num))) ** d * _SUM_CHUNK >= 2 ** 62:
        return None
    k = sample.k
    prod = np.ones(len(num), dtype=np.int64)
    for v in mono:
        prod = prod * num[:, v // k, v % k]
    total = sum(int(prod[s:s + _SUM_CHUNK].sum()) for s in range(0, len(prod), _SUM_CHUNK))
    return Fraction(total, len(num) * n ** d)


def moment(sample: EmpiricalSample, mono: Sequence[int]) -> tuple[float, float]:
    """Sample mean of a monomial and its standard error."""
    if len(sample) == 0:
        raise ValueError("empty sample")
    prod = np.ones(len(sample))
    for v in mono:
        prod = prod * _values(sample, v)
    exact = _exact_mean(sample, mono)
    mean = float(exact) if exact is not None else float(np.mean(prod))
    se = float(np.std(prod) / np.sqrt(len(prod)))
    return mean, se


def weyl_discrepancy(sample: EmpiricalSample,
                     reference: Union[EmpiricalSample, dict],
                     max_degree: int = 2) -> DiscrepancyReport:
    """Gap between sample and reference averages of every monomial of degree <= max_degree.

    ``reference`` is a Monte Carlo sample or a table {statistic name: value}.
    """
    if max_degree not in (1, 2, 3, 4):
        raise ValueError("max_degree must be in 1..4")
    if len(sample) == 0:
        raise ValueError("empty sample")
    k, kind = sample.k, sample.kind
    report = DiscrepancyReport()
    for mono in monomials(k, kind, max_degree):
        name = monomial_name(mono, k, kind)
        emp, _ = moment(sample, mono)
        if isinstance(reference, dict):
            report.entries.append(StatEntry(name, emp, float(reference[name]), "table",
                                            degree=len(mono)))
        elif forced_zero(mono, k, kind):
            report.entries.append(StatEntry(name, emp, 0.0, "exact-symmetry", degree=len(mono)))
        else:
            ref, se = moment(reference, mono)
            report.entries.append(StatEntry(name, emp, ref, "monte-carlo", len(reference), se,
                                            degree=len(mono)))
    return report


def cap_discrepancy(sample: EmpiricalSample, direction: Sequence[float],
                    cap_angles: Sequence[float], center: Optional[Sequence[float]] = None,
                    tol: float = 1e-12) -> DiscrepancyReport:
    """Fraction of G * direction in the cap of angle theta around center vs (1 - cos theta)/2.

    Points on the boundary circle count one half.
    """
    if sample.k != 3 or sample.kind != "orthogonal":
        raise ValueError("caps are defined for samples in SO(3)")
    d = np.asarray(direction, dtype=float)
    if d.shape != (3,) or abs(float(np.linalg.norm(d)) - 1.0) > 1e-12:
        raise ValueError("direction must be a unit vector in R^3")
    c = d if center is None else np.asarray(center, dtype=float)
    if abs(float(np.linalg.norm(c)) - 1.0) > 1e-12:
        raise ValueError("center must be a unit vector")
    dots = (sample.matrices @ d) @ c
    report = DiscrepancyReport()
    for theta in cap_angles:
        if theta >= np.pi:
            frac = 1.0
        else:
            ct = np.cos(theta)
            w = np.where(dots > ct + tol, 1.0, np.where(np.abs(dots - ct) <= tol, 0.5, 0.0))
            frac = float(np.mean(w))
        ref = (1.0 - np.cos(min(theta, np.pi))) / 2.0
        report.entries.append(StatEntry(f"cap({theta:.6g})", frac, float(ref), "exact-area"))
    return report
