"""Explicit upwind finite-volume solver for the two-sided nonlocal law

    q_t + (q V(W_-[q], W_+[q]))_x = 0.

Nonlocal averages of the piecewise-constant field are exact cell-wise
kernel integrals.  The interface velocity is ``V`` evaluated on the averages
taken at the interface itself; the spec's alternative (mean of the two
adjacent cell-centre averages) is kept as ``velocity_sampling="mean"``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .fields import Field, Grid, NumericalError, Trajectory
from .flux import VelocitySplit, split_gradient_bound, velocity_bound
from .kernels import ScaledKernel, Side, stencil

log = logging.getLogger(__name__)

BOUNDARIES = ("periodic", "outflow")


class CFLError(ValueError):
    pass


@dataclass(frozen=True)
class KernelPair:
    """Backward (``left``) and forward (``right``) kernels; ``None`` is a Dirac."""

    left: ScaledKernel | None
    right: ScaledKernel | None

    def __post_init__(self):
        if self.left is not None and self.left.side is not Side.LEFT:
            raise ValueError("left slot needs a LEFT kernel")
        if self.right is not None and self.right.side is not Side.RIGHT:
            raise ValueError("right slot needs a RIGHT kernel")

    def to_dict(self) -> dict:
        return {"left": None if self.left is None else self.left.to_dict(),
                "right": None if self.right is None else self.right.to_dict()}


@dataclass
class NonlocalState:
    field: Field
    w_minus: np.ndarray
    w_plus: np.ndarray
    kernels: KernelPair
    split: VelocitySplit


class NonlocalSolver:
    def __init__(self, grid: Grid, kernels: KernelPair, split: VelocitySplit,
                 boundary: str = "periodic", velocity_sampling: str = "interface"):
        if boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}")
        if velocity_sampling not in ("interface", "mean"):
            raise ValueError("velocity_sampling must be 'interface' or 'mean'")
        self.grid = grid
        self.kernels = kernels
        self.split = split
        self.boundary = boundary
        self.velocity_sampling = velocity_sampling
        dx = grid.dx
        self.if_left = stencil(kernels.left, dx, centered=False)
        self.if_right = stencil(kernels.right, dx, centered=False)[::-1].copy()
        self.c_left = stencil(kernels.left, dx, centered=True)
        self.c_right = stencil(kernels.right, dx, centered=True)[::-1].copy()
        self.pad = max(len(self.if_left), len(self.if_right), len(self.c_left), len(self.c_right)) + 1

        base = split.base
        self.v_max = velocity_bound(split)
        self.grad_v = split_gradient_bound(split)
        q_abs = max(abs(base.q_min), abs(base.q_max))
        # extra term keeps the update monotone against the kernel's near-cell weight
        near = self.if_left[0] + self.if_right[-1]
        self.wave_speed = 2.0 * self.v_max + q_abs * self.grad_v * near
        try:
            self.origin = grid.origin_index()
        except ValueError:
            self.origin = None

    # -- averages --------------------------------------------------------
    def _padded(self, q: np.ndarray) -> np.ndarray:
        mode = "wrap" if self.boundary == "periodic" else "edge"
        return np.pad(q, self.pad, mode=mode)

    def interface_averages(self, q: np.ndarray):
        """``W_-`` and ``W_+`` at the ``n_cells + 1`` interfaces."""
        qp = self._padded(q)
        P, N = self.pad, len(q)
        L = len(self.if_right)
        wm = np.convolve(qp, self.if_left)[P - 1:P + N]
        wp = np.convolve(qp, self.if_right)[P + L - 1:P + L + N]
        return wm, wp

    def center_averages(self, q: np.ndarray):
        qp = self._padded(q)
        P, N = self.pad, len(q)
        L = len(self.c_right)
        wm = np.convolve(qp, self.c_left)[P:P + N]
        wp = np.convolve(qp, self.c_right)[P + L - 1:P + L - 1 + N]
        return wm, wp

    def interface_velocity(self, q: np.ndarray) -> np.ndarray:
        if self.velocity_sampling == "interface":
            wm, wp = self.interface_averages(q)
        else:
            qp = self._padded(q)
            P, N = self.pad, len(q)
            L = len(self.c_right)
            # centre averages of cells -1 .. N
            cm = np.convolve(qp, self.c_left)[P - 1:P + N + 1]
            cp = np.convolve(qp, self.c_right)[P + L - 2:P + L + N]
            wm = 0.5 * (cm[:-1] + cm[1:])
            wp = 0.5 * (cp[:-1] + cp[1:])
        return self.split(wm, wp)

    def fluxes(self, q: np.ndarray) -> np.ndarray:
        """Upwind numerical flux at the ``n_cells + 1`` interfaces."""
        v = self.interface_velocity(q)
        P = self.pad
        ql = self._padded(q)[P - 1:P + len(q)]
        qr = self._padded(q)[P:P + len(q) + 1]
        return ql * np.maximum(v, 0.0) + qr * np.minimum(v, 0.0)

    # -- time stepping ---------------------------------------------------
    def max_dt(self) -> float:
        if self.wave_speed == 0.0:
            return self.grid.t_end
        return self.grid.cfl * self.grid.dx / self.wave_speed

    def _advance(self, q: np.ndarray, dt: float):
        F = self.fluxes(q)
        q_new = q - (dt / self.grid.dx) * np.diff(F)
        return q_new, F

    def step(self, state: NonlocalState, dt: float) -> NonlocalState:
        if dt > self.max_dt() * (1 + 1e-12):
            raise CFLError(f"dt={dt:g} exceeds the stable bound {self.max_dt():g}")
        q_new, _ = self._advance(state.field.values, dt)
        f = Field(state.field.grid, q_new, state.field.time + dt)
        wm, wp = self.center_averages(q_new)
        return replace(state, field=f, w_minus=wm, w_plus=wp)

    def state(self, field: Field) -> NonlocalState:
        wm, wp = self.center_averages(field.values)
        return NonlocalState(field, wm, wp, self.kernels, self.split)

    def solve(self, datum: Field, t_end: float | None = None, output_times=None,
              n_snapshots: int = 11) -> Trajectory:
        grid = self.grid
        t_end = grid.t_end if t_end is None else t_end
        if output_times is None:
            output_times = np.linspace(0.0, t_end, n_snapshots)
        output_times = np.asarray(sorted(output_times), dtype=float)
        q = datum.values.astype(float).copy()
        dt_max = self.max_dt()
        t = datum.time
        alpha = 0.0
        out = 0.0
        snaps, alphas, outs = [], [], []
        nsteps = 0
        for target in output_times:
            while target - t > 1e-13 * max(1.0, abs(target)):
                dt = min(dt_max, target - t)
                q, F = self._advance(q, dt)
                nsteps += 1
                t = target if dt == target - t else t + dt
                if self.origin is not None:
                    alpha += dt * F[self.origin]
                out += dt * (F[-1] - F[0])
                if not np.all(np.isfinite(q)):
                    bad = int(np.flatnonzero(~np.isfinite(q))[0])
                    raise NumericalError(f"non-finite density at t={t:.6g}, cell {bad}")
            snaps.append(q.copy())
            alphas.append(alpha if self.origin is not None else np.nan)
            outs.append(out)
        log.debug("nonlocal solve: %d steps, dt=%.3g", nsteps, dt_max)
        return Trajectory(grid, output_times, np.array(snaps), np.array(alphas), np.array(outs),
                          source="nonlocal",
                          meta={"steps": nsteps, "dt": dt_max, "boundary": self.boundary,
                                "kernels": self.kernels.to_dict(), "split": self.split.to_dict(),
                                "flux": self.split.base.to_dict()})


def nonlocal_averages(field: Field, kernels: KernelPair, boundary: str = "periodic"):
    """Cell-centre ``(W_-, W_+)`` of a piecewise-constant field."""
    w = [stencil(kernels.left, field.grid.dx, True), stencil(kernels.right, field.grid.dx, True)[::-1]]
    pad = max(len(w[0]), len(w[1])) + 1
    qp = np.pad(field.values, pad, mode="wrap" if boundary == "periodic" else "edge")
    N = field.grid.n_cells
    wm = np.convolve(qp, w[0])[pad:pad + N]
    L = len(w[1])
    wp = np.convolve(qp, w[1])[pad + L - 1:pad + L - 1 + N]
    return wm, wp


def solve(datum: Field, kernels: KernelPair, split: VelocitySplit, t_end: float | None = None,
          boundary: str = "periodic", **kw) -> Trajectory:
    return NonlocalSolver(datum.grid, kernels, split, boundary).solve(datum, t_end, **kw)


def solve_sign_unrestricted(datum: Field, kernels: KernelPair, split_base: VelocitySplit,
                            t_end: float | None = None, boundary: str = "periodic", **kw) -> Trajectory:
    """Solve for ``q - m`` with the shifted flux, ``m = min(datum)``, and shift back."""
    from .flux import VelocitySplit as _VS, shift_model

    m = float(np.min(datum.values))
    if m == 0.0:
        return solve(datum, kernels, split_base, t_end, boundary, **kw)
    base = split_base.base
    sh = shift_model(base, m)
    model = sh.model.with_range(0.0, float(np.max(datum.values)) - m)
    kappa = split_base.kappa
    if kappa is not None and np.isclose(kappa, base.vtilde_lipschitz):
        kappa = None
    split = _VS(model, split_base.mode, kappa)
    shifted = Field(datum.grid, datum.values - m, datum.time)
    traj = solve(shifted, kernels, split, t_end, boundary, **kw)
    traj.values = traj.values + m
    # flux of q is flux of (q - m) plus the constant f(m)
    traj.origin_flux = traj.origin_flux + float(base.f(m)) * (traj.times - datum.time)
    traj.meta["shift"] = m
    return traj
