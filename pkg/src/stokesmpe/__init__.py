"""Residual a posteriori error estimators for a coupled Stokes / multiple-network
poroelasticity (MPE) problem, discretized with Taylor-Hood elements in space and
implicit Euler in time."""
from .assembly import Discretization, ParameterSet, Sources
from .kernels import BACKEND
from .mesh import build_two_square_mesh, classify_facets, uniform_refine

__version__ = "0.1.0"

__all__ = ["BACKEND", "Discretization", "ParameterSet", "Sources", "build_two_square_mesh",
           "classify_facets", "uniform_refine"]
