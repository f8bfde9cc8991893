"""Rational points of bounded denominator in compact orthogonal and unitary groups."""
from __future__ import annotations

from .arith import GaussianInt, RationalPoint, content_z, denominator, v_p
from .enumeration import EnumOptions, SolutionSet, count_solutions, solve_scaled_isometry, stream_solutions
from .forms import Form, genus_equivalent, hyperbolic_reduce, identity_form, is_positive_definite
from .local import LocalProfile, LocalVerdict, local_profile, local_solvable

__version__ = "0.1.0"

__all__ = [
    "GaussianInt", "RationalPoint", "content_z", "denominator", "v_p",
    "EnumOptions", "SolutionSet", "count_solutions", "solve_scaled_isometry", "stream_solutions",
    "Form", "genus_equivalent", "hyperbolic_reduce", "identity_form", "is_positive_definite",
    "LocalProfile", "LocalVerdict", "local_profile", "local_solvable",
]
