"""Fast invariant checks behind ``selftest``; each returns ``(ok, detail)``."""

from __future__ import annotations

import numpy as np

from .fields import Field, Grid
from .flux import BUILTIN_FLUXES, SplitMode, builtin_flux, make_split
from .hj_tools import sup_convolution, sup_convolution_naive
from .kernels import KernelFamily, ScaledKernel, Shape, Side, stencil, truncated_first_moment
from .local_ref import ViscositySolutionEval, godunov_solve, hopf_lax_trajectory
from .nonlocal_solver import KernelPair, solve


def _splits():
    for name in BUILTIN_FLUXES:
        flux = builtin_flux(name, 0.0, 1.0)
        for mode in SplitMode:
            try:
                yield name, mode.value, make_split(flux, mode)
            except ValueError:
                continue


def check_compatibility():
    s = np.linspace(0.0, 1.0, 101)
    worst = max(float(np.max(np.abs(s * sp(s, s) - sp.base.f(s)))) for _, _, sp in _splits())
    return worst <= 1e-8, f"max |s V(s,s) - f(s)| = {worst:.2e}"


def check_monotone_split():
    s = np.linspace(0.0, 1.0, 41)
    A, B = np.meshgrid(s, s, indexing="ij")
    worst = 0.0
    for _, _, sp in _splits():
        V = sp(A, B)
        worst = max(worst, float(-np.min(np.diff(V, axis=0))), float(np.max(np.diff(V, axis=1))))
    return worst <= 1e-12, f"worst monotonicity violation {worst:.2e}"


def check_kernel_mass():
    worst = 0.0
    for shape in Shape:
        for side in Side:
            kern = ScaledKernel(KernelFamily(side, shape, 1.0), 16.0)
            worst = max(worst, abs(stencil(kern, 1 / 128, False).sum() - 1.0))
    box = ScaledKernel(KernelFamily(Side.LEFT, Shape.BOX, 1.0), 16.0)
    m_err = abs(truncated_first_moment(box) - 1 / 32)
    return worst <= 1e-13 and m_err <= 1e-14, f"stencil mass error {worst:.1e}, box moment error {m_err:.1e}"


def check_max_principle_and_mass():
    grid = Grid.uniform(-1.0, 1.0, 1 / 128, t_end=0.25)
    rng = np.random.default_rng(0)
    datum = Field(grid, rng.uniform(0.1, 0.9, grid.n_cells))
    flux = builtin_flux("burgers", 0.1, 0.9)
    kern = KernelPair(ScaledKernel(KernelFamily(Side.LEFT, Shape.BOX, 1.0), 16.0),
                      ScaledKernel(KernelFamily(Side.RIGHT, Shape.BOX, 1.0), 16.0))
    tr = solve(datum, kern, make_split(flux, "midpoint"), 0.25, "periodic")
    excess = max(float(tr.values.max() - 0.9), float(0.1 - tr.values.min()), 0.0)
    drift = float(np.max(np.abs(tr.masses() - tr.masses()[0]))) / abs(tr.masses()[0])
    return excess <= 1e-12 and drift <= 1e-10, f"bound excess {excess:.1e}, relative mass drift {drift:.1e}"


def check_envelope():
    rng = np.random.default_rng(1)
    Q = np.cumsum(rng.uniform(-1, 1, 200)) / 50
    err = float(np.max(np.abs(sup_convolution(Q, 0.02, 0.05) - sup_convolution_naive(Q, 0.02, 0.05))))
    return err <= 1e-12, f"fast vs naive sup-convolution {err:.1e}"


def check_oracles():
    grid = Grid.uniform(-1.5, 1.5, 1 / 200, t_end=0.5)
    flux = builtin_flux("burgers", 0.0, 1.0)
    datum = Field.from_function(grid, lambda x: (x < 0).astype(float))
    times = np.array([0.0, 0.5])
    g = godunov_solve(datum, flux, 0.5, output_times=times)
    h = hopf_lax_trajectory(ViscositySolutionEval.from_field(datum, flux), grid, times)
    l1 = float(np.sum(np.abs(g.values[-1] - h.values[-1])) * grid.dx)
    return l1 <= 0.02, f"Godunov vs Hopf-Lax L1 {l1:.2e}"


CHECKS = {
    "compatibility identity": check_compatibility,
    "split monotonicity": check_monotone_split,
    "kernel mass and moment": check_kernel_mass,
    "maximum principle and conservation": check_max_principle_and_mass,
    "sup-convolution envelope": check_envelope,
    "two-oracle agreement": check_oracles,
}


def run_all():
    return [(name, *fn()) for name, fn in CHECKS.items()]
