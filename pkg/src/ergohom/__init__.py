"""Non-ergodic stochastic homogenization at desk scale."""

__version__ = "0.1.0"

from .corrector import HomogenizedMatrix, homogenize, homogenized_matrix, solve_correctors, voigt_reuss_bounds
from .fields import CoefficientField, EllipticityBounds, EllipticMap, GridSpec, check_ellipticity, map_field
from .measure import EmpiricalLaw, GaussianRelated, Mixture, estimate_law
from .resonance import FrequencySet, ResonanceLattice, brute_force_kernel, invariant_phases, kernel_basis

__all__ = [
    "CoefficientField", "EllipticMap", "EllipticityBounds", "EmpiricalLaw", "FrequencySet",
    "GaussianRelated", "GridSpec", "HomogenizedMatrix", "Mixture", "ResonanceLattice",
    "brute_force_kernel", "check_ellipticity", "estimate_law", "homogenize", "homogenized_matrix",
    "invariant_phases", "kernel_basis", "map_field", "solve_correctors", "voigt_reuss_bounds",
]
