"""Numerical laboratory for Dirac-Schrödinger systems on a half-line.

The Hilbert space is ``C^n``; a system is a Hermitian ``A`` and a unitary
``γ`` with ``γ* = -γ = γ^{-1}`` and ``Aγ + γA = 0``, optionally with a
potential ``V(t)`` and a supersymmetry ``α``.  Boundary conditions are
subspaces of ``C^n`` and indices are computed by counting intersection
dimensions against the Calderón spaces.
"""

__version__ = "0.1.0"

from .errors import DiracLabError  # noqa: E402
from .spectral_core import (DiracData, eigendecompose, normal_form_gamma,  # noqa: E402
                            spectral_projection, spectral_subspace, validate_dirac_data)
from .subspace import Subspace, intersection, span  # noqa: E402
from .boundary import BoundaryCondition, adjoint_condition, aps_condition  # noqa: E402
from .evolution import CoefficientPath, fundamental_solution  # noqa: E402
from .calderon import CalderonPair, calderon_subspaces, constant_pair  # noqa: E402
from .index_lab import ext_index, run_batch  # noqa: E402

__all__ = [
    "__version__", "DiracLabError", "DiracData", "eigendecompose", "normal_form_gamma",
    "spectral_projection", "spectral_subspace", "validate_dirac_data", "Subspace",
    "intersection", "span", "BoundaryCondition", "adjoint_condition", "aps_condition",
    "CoefficientPath", "fundamental_solution", "CalderonPair", "calderon_subspaces",
    "constant_pair", "ext_index", "run_batch",
]
