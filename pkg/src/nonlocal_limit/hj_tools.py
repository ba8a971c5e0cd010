"""Primitives of nonlocal solutions and their sup/inf-convolution regularisations.

The primitive of a nonlocal solution is corrected by the flux through the
origin,

    Q^k(t, x) = int_0^x q^k(t, y) dy - alpha(t),

so that it solves the nonlocal Hamilton-Jacobi equation.  Grid functions
live on cell interfaces throughout this module.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .fields import Grid, Trajectory
from .flux import VelocitySplit, split_gradient_bound
from .kernels import moment_or_zero
from .nonlocal_solver import KernelPair, NonlocalSolver, nonlocal_averages

log = logging.getLogger(__name__)


@dataclass
class NonlocalPrimitive:
    grid: Grid
    times: np.ndarray
    Q: np.ndarray          # (n_times, n_cells + 1)
    alpha: np.ndarray      # (n_times,)
    alpha_error: float = 0.0

    def at(self, i: int) -> np.ndarray:
        return self.Q[i]


def cumulative_primitive(values: np.ndarray, grid: Grid) -> np.ndarray:
    """``int_0^x q`` at every interface, exact for cell averages."""
    j0 = grid.origin_index()
    Q = np.zeros(values.shape[:-1] + (grid.n_cells + 1,))
    Q[..., 1:] = np.cumsum(values, axis=-1) * grid.dx
    return Q - Q[..., j0:j0 + 1]


def build_primitive(traj: Trajectory, kernels: KernelPair | None = None,
                    split: VelocitySplit | None = None, alpha_method: str = "flux",
                    boundary: str = "periodic") -> NonlocalPrimitive:
    """Alpha-corrected primitive series of a trajectory.

    ``alpha_method="flux"`` uses the flux through ``x = 0`` accumulated by the
    solver at every time step (exact for the scheme).  ``"trapezoid"``
    integrates the numerical flux at the origin over the snapshots; it needs
    ``kernels`` and ``split`` and reports a step-halving error estimate.
    """
    grid = traj.grid
    j0 = grid.origin_index()
    base = cumulative_primitive(traj.values, grid)
    err = 0.0
    if alpha_method == "flux":
        alpha = np.asarray(traj.origin_flux, dtype=float)
        if np.any(np.isnan(alpha)):
            raise ValueError("trajectory carries no origin flux; use alpha_method='trapezoid'")
    elif alpha_method == "trapezoid":
        if kernels is None or split is None:
            raise ValueError("trapezoid alpha needs kernels and split")
        solver = NonlocalSolver(grid, kernels, split, boundary)
        g = np.array([solver.fluxes(v)[j0] for v in traj.values])
        alpha = _cumtrapz(g, traj.times)
        if len(g) >= 5 and (len(g) - 1) % 2 == 0:
            coarse = _cumtrapz(g[::2], traj.times[::2])
            err = float(np.max(np.abs(coarse - alpha[::2])))
            if err > 1e-8 * max(traj.times[-1], 1e-300):
                log.warning("alpha quadrature error estimate %.2e exceeds 1e-8*T", err)
    else:
        raise ValueError(f"unknown alpha_method {alpha_method!r}")
    return NonlocalPrimitive(grid, np.asarray(traj.times), base - alpha[:, None], alpha, err)


def _cumtrapz(g, t):
    out = np.zeros_like(g, dtype=float)
    out[1:] = np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(t))
    return out


# ---------------------------------------------------------------------------
# sup / inf convolutions
# ---------------------------------------------------------------------------

def lower_envelope(y: np.ndarray, g: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``min_j (x_i - y_j)^2 + g_j`` by the linear-time parabola envelope.

    ``y`` must be strictly increasing and ``x`` nondecreasing.
    """
    n = len(y)
    v = np.empty(n, dtype=np.int64)   # parabola indices in the envelope
    z = np.empty(n + 1)               # envelope breakpoints
    h = g + y * y
    k = 0
    v[0] = 0
    z[0] = -math.inf
    z[1] = math.inf
    for q in range(1, n):
        while True:
            p = v[k]
            s = (h[q] - h[p]) / (2.0 * (y[q] - y[p]))
            if s <= z[k]:
                k -= 1
                continue
            break
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = math.inf
    out = np.empty(len(x))
    k = 0
    for i, xi in enumerate(x):
        while z[k + 1] < xi:
            k += 1
        p = v[k]
        out[i] = (xi - y[p]) ** 2 + g[p]
    return out


def _extend_linear(Q: np.ndarray, dx: float, n: int) -> np.ndarray:
    left = Q[0] - (Q[1] - Q[0]) * np.arange(n, 0, -1)
    right = Q[-1] + (Q[-1] - Q[-2]) * np.arange(1, n + 1)
    return np.concatenate([left, Q, right])


def _pad_for(Q: np.ndarray, dx: float, eps: float) -> int:
    lip = float(np.max(np.abs(np.diff(Q)))) / dx if len(Q) > 1 else 0.0
    return int(math.ceil((2.0 * lip * eps + dx) / dx)) + 1


def _segment_candidates(Qe: np.ndarray, dx: float, epsilon: float, out: np.ndarray):
    """Raise ``out`` to the interior maxima of each linear segment.

    On segment ``j`` with slope ``c`` the objective peaks at ``y = x + c eps``;
    that point lies inside the segment for at most two grid nodes ``x``.
    """
    c = np.diff(Qe) / dx
    j = np.arange(len(c))
    lo = np.ceil(j - c * epsilon / dx - 1e-12).astype(np.int64)
    for off in (0, 1):
        i = lo + off
        ok = (i >= 0) & (i < len(Qe)) & (i * dx + c * epsilon <= (j + 1) * dx + 1e-12 * dx)
        i, jj, cc = i[ok], j[ok], c[ok]
        val = Qe[jj] + cc * (i - jj) * dx + 0.5 * cc * cc * epsilon
        np.maximum.at(out, i, val)


def sup_convolution(Q: np.ndarray, dx: float, epsilon: float) -> np.ndarray:
    """``sup_y {Q(y) - (x - y)^2 / (2 eps)}`` at the grid nodes.

    ``Q`` is read as its continuous piecewise-linear interpolant, continued
    linearly with its edge slopes beyond the grid; the supremum is exact for
    that function.  Node candidates come from the parabola envelope and
    segment-interior candidates are added in one linear pass.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    n = _pad_for(Q, dx, epsilon)
    Qe = _extend_linear(np.asarray(Q, dtype=float), dx, n)
    y = dx * np.arange(len(Qe))
    out = -lower_envelope(y, -2.0 * epsilon * Qe, y) / (2.0 * epsilon)
    _segment_candidates(Qe, dx, epsilon, out)
    return out[n:n + len(Q)]


def inf_convolution(Q: np.ndarray, dx: float, epsilon: float) -> np.ndarray:
    """``inf_y {Q(y) + (x - y)^2 / (2 eps)}`` at the grid nodes."""
    return -sup_convolution(-np.asarray(Q, dtype=float), dx, epsilon)


def sup_convolution_naive(Q: np.ndarray, dx: float, epsilon: float) -> np.ndarray:
    """Quadratic-time reference: maximise over every segment at the clipped stationary point."""
    n = _pad_for(Q, dx, epsilon)
    Qe = _extend_linear(np.asarray(Q, dtype=float), dx, n)
    y = dx * np.arange(len(Qe))
    c = np.diff(Qe) / dx
    ys = np.clip(y[:, None] + c[None, :] * epsilon, y[None, :-1], y[None, 1:])
    vals = Qe[None, :-1] + c[None, :] * (ys - y[None, :-1]) - (y[:, None] - ys) ** 2 / (2.0 * epsilon)
    return vals.max(axis=1)[n:n + len(Q)]


def mollifier_weights(dx: float, epsilon: float) -> np.ndarray:
    """Discrete standard mollifier of radius ``epsilon``; symmetric, sums to one."""
    if epsilon < 2 * dx:
        raise ValueError(f"mollifier radius {epsilon:g} unresolved on dx={dx:g} (needs >= 2 dx)")
    m = int(math.floor(epsilon / dx))
    z = np.arange(-m, m + 1) * dx / epsilon
    w = np.zeros_like(z)
    inside = np.abs(z) < 1
    w[inside] = np.exp(-1.0 / (1.0 - z[inside] ** 2))
    w = 0.5 * (w + w[::-1])
    return w / w.sum()


def mollify(Qeps: np.ndarray, dx: float, epsilon: float) -> np.ndarray:
    w = mollifier_weights(dx, epsilon)
    m = len(w) // 2
    Qe = _extend_linear(np.asarray(Qeps, dtype=float), dx, m + 1)
    return np.convolve(Qe, w, mode="same")[m + 1:m + 1 + len(Qeps)]


@dataclass
class ConvolutionRegularization:
    epsilon: float
    Q: np.ndarray
    Q_plus: np.ndarray
    Q_minus: np.ndarray
    U: np.ndarray
    L: np.ndarray

    @classmethod
    def of(cls, Q: np.ndarray, dx: float, epsilon: float) -> "ConvolutionRegularization":
        Qp = sup_convolution(Q, dx, epsilon)
        Qm = inf_convolution(Q, dx, epsilon)
        return cls(epsilon, np.asarray(Q, dtype=float), Qp, Qm,
                   mollify(Qp, dx, epsilon), mollify(Qm, dx, epsilon))


def approximation_constant(q_max: float) -> float:
    """``C_n = q_max + q_max^2 / 2``."""
    return q_max + 0.5 * q_max * q_max


def second_differences(U: np.ndarray, dx: float) -> np.ndarray:
    return (U[2:] - 2.0 * U[1:-1] + U[:-2]) / (dx * dx)


# ---------------------------------------------------------------------------
# nonlocal defect
# ---------------------------------------------------------------------------

@dataclass
class DefectReport:
    defect: np.ndarray          # per cell, per interior time
    bound: float
    violation_fraction: float
    kind: str


def nonlocal_defect(series: np.ndarray, times: np.ndarray, grid: Grid, kernels: KernelPair,
                    split: VelocitySplit, epsilon: float, kind: str = "U",
                    tol: float = 0.0, boundary: str = "outflow") -> DefectReport:
    """``U_t + V(W_-[U_x], W_+[U_x]) U_x`` for a regularised series on interfaces.

    Time derivatives are centred differences of consecutive entries of
    ``series``; the defect is reported at cell centres for every interior
    time.  For ``kind="U"`` a node violates when the defect exceeds
    ``C_e (M_- + M_+)/eps + tol``; for ``"L"`` when it falls below the negative.
    """
    series = np.asarray(series, dtype=float)
    times = np.asarray(times, dtype=float)
    if len(times) < 3:
        raise ValueError("need at least three snapshots for centred time differences")
    m_sum = moment_or_zero(kernels.left) + moment_or_zero(kernels.right)
    for kern in (kernels.left, kernels.right):
        if moment_or_zero(kern) > epsilon:
            raise ValueError("kernel truncated first moment exceeds epsilon; increase k")
    b = split.base
    q_max = max(abs(b.q_min), abs(b.q_max))
    c_e = q_max * split_gradient_bound(split, bounds=(b.q_min - 1.0, b.q_max + 1.0))
    bound = c_e * m_sum / epsilon
    out = []
    from .fields import Field
    for i in range(1, len(times) - 1):
        U = series[i]
        p = np.diff(U) / grid.dx
        wm, wp = nonlocal_averages(Field(grid, p), kernels, boundary)
        Ut = (series[i + 1] - series[i - 1]) / (times[i + 1] - times[i - 1])
        Ut = 0.5 * (Ut[1:] + Ut[:-1])
        out.append(Ut + split(wm, wp) * p)
    defect = np.array(out)
    if kind == "U":
        bad = defect > bound + tol
    elif kind == "L":
        bad = defect < -bound - tol
    else:
        raise ValueError("kind must be 'U' or 'L'")
    return DefectReport(defect, bound, float(np.mean(bad)), kind)


def sandwich_fraction(U: np.ndarray, grid: Grid, kernels: KernelPair, epsilon: float,
                      kind: str = "U", boundary: str = "outflow", tol: float = 0.0) -> float:
    """Fraction of cells where the averaged-slope sandwich of the regularisation holds.

    For ``U``: ``W_+[p] >= p - M_+/eps`` and ``W_-[p] <= p + M_-/eps``;
    for ``L`` the inequalities flip.
    """
    from .fields import Field

    p = np.diff(np.asarray(U, dtype=float)) / grid.dx
    wm, wp = nonlocal_averages(Field(grid, p), kernels, boundary)
    mm = moment_or_zero(kernels.left) / epsilon
    mp = moment_or_zero(kernels.right) / epsilon
    if kind == "U":
        ok = (wp >= p - mp - tol) & (wm <= p + mm + tol)
    else:
        ok = (wp <= p + mp + tol) & (wm >= p - mm - tol)
    return float(np.mean(ok))
