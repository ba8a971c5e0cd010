"""Nonlocal conservation laws with two-sided kernels and their local singular limit."""

from __future__ import annotations

__version__ = "0.1.0"

from .analysis import (GapMeasurement, RateReport, WeakStarProbe, fit_rate, nonlocal_term_convergence,
                       primitive_gap, weak_star_pairing)
from .fields import Field, Grid, NumericalError, Trajectory
from .flux import FluxModel, SplitMode, VelocitySplit, builtin_flux, make_split, polynomial_flux
from .hj_tools import ConvolutionRegularization, NonlocalPrimitive, build_primitive
from .kernels import KernelFamily, ScaledKernel, Shape, Side, truncated_first_moment
from .local_ref import ViscositySolutionEval, godunov_solve, hopf_lax_eval
from .nonlocal_solver import CFLError, KernelPair, NonlocalSolver, solve, solve_sign_unrestricted

__all__ = [
    "CFLError", "ConvolutionRegularization", "Field", "FluxModel", "GapMeasurement", "Grid",
    "KernelFamily", "KernelPair", "NonlocalPrimitive", "NonlocalSolver", "NumericalError", "RateReport",
    "ScaledKernel", "Shape", "Side", "SplitMode", "Trajectory", "VelocitySplit", "ViscositySolutionEval",
    "WeakStarProbe", "build_primitive", "builtin_flux", "fit_rate", "godunov_solve", "hopf_lax_eval",
    "make_split", "nonlocal_term_convergence", "polynomial_flux", "primitive_gap", "solve",
    "solve_sign_unrestricted", "truncated_first_moment", "weak_star_pairing",
]
