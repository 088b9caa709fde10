"""Numerical laboratory for convex energies of linear growth in the symmetric gradient."""

from .grid import GridDomain, SymTensorField, TensorField, VectorField, divergence, full_gradient, sym_gradient
from .integrands import Integrand, get_integrand, make_area, make_phi_mu, make_quadratic, phi_mu
from .solver import Schedule, minimize_Fj, run_viscosity_sequence

__all__ = [
    "GridDomain", "VectorField", "SymTensorField", "TensorField",
    "sym_gradient", "full_gradient", "divergence",
    "Integrand", "get_integrand", "phi_mu", "make_phi_mu", "make_area", "make_quadratic",
    "Schedule", "minimize_Fj", "run_viscosity_sequence",
]

__version__ = "0.1.0"
