"""Convergence measurements: primitive gaps, rate fits and weak-star pairings."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .fields import Trajectory
from .flux import VelocitySplit, split_gradient_bound, velocity_bound
from .hj_tools import NonlocalPrimitive, build_primitive, cumulative_primitive
from .kernels import moment_or_zero
from .local_ref import ViscositySolutionEval, hopf_lax_eval
from .nonlocal_solver import KernelPair, nonlocal_averages

RATE_THRESHOLD = -0.45


def rate_constant(q_max: float, t_end: float, grad_v: float) -> float:
    """``C_z = 2 q_max (T (2 + q_max) ||grad V||)^(1/2)``."""
    return 2.0 * q_max * math.sqrt(t_end * (2.0 + q_max) * grad_v)


@dataclass
class GapMeasurement:
    k: float
    sup_gap: float
    moments_sum: float
    theorem_bound: float
    c_z: float
    allowance: float
    dx: float
    q_max: float
    bound_satisfied: bool
    # sufficiently-large-k conditions of the rate argument
    eps_star: float = math.nan
    large_k: bool = True
    # same k on a grid with dx/2; nan when no refinement was run
    refined_gap: float = math.nan

    def above_floor(self, floor_factor: float = 10.0, stability: float = 0.1) -> bool:
        """Whether the gap measures the kernel error rather than the grid.

        With a refined companion run the gap must move by at most
        ``stability`` (relative) under halving ``dx``; otherwise it must exceed
        ``floor_factor * dx * q_max``.
        """
        if not self.sup_gap > 0:
            return False
        if math.isfinite(self.refined_gap):
            return abs(self.sup_gap - self.refined_gap) <= stability * self.sup_gap
        return self.sup_gap >= floor_factor * self.dx * self.q_max


def primitive_gap(nonlocal_primitive: NonlocalPrimitive, oracle, kernels: KernelPair,
                  split: VelocitySplit, t_end: float | None = None) -> GapMeasurement:
    """Sup over snapshot times and interfaces of ``|Q^k - Q|``.

    ``oracle`` is a :class:`ViscositySolutionEval` (exact) or a reference
    :class:`Trajectory` on the same grid and times.
    """
    P = nonlocal_primitive
    grid = P.grid
    t_end = float(P.times[-1]) if t_end is None else t_end
    if isinstance(oracle, ViscositySolutionEval):
        ref = np.array([hopf_lax_eval(oracle, t, grid.interfaces) if t > 0
                        else oracle.primitive_datum(grid.interfaces) for t in P.times])
    elif isinstance(oracle, Trajectory):
        if oracle.grid != grid or not np.allclose(oracle.times, P.times):
            raise ValueError("oracle trajectory grid/time samples do not match")
        ref = build_primitive(oracle).Q
    elif isinstance(oracle, NonlocalPrimitive):
        if oracle.grid != grid or not np.allclose(oracle.times, P.times):
            raise ValueError("oracle primitive grid/time samples do not match")
        ref = oracle.Q
    else:
        raise TypeError(f"unsupported oracle {type(oracle).__name__}")
    if ref.shape != P.Q.shape:
        raise ValueError("grid mismatch between nonlocal primitive and oracle")
    sup_gap = float(np.max(np.abs(P.Q - ref)))
    return measure(sup_gap, kernels, split, t_end, grid.dx)


def measure(sup_gap: float, kernels: KernelPair, split: VelocitySplit, t_end: float,
            dx: float) -> GapMeasurement:
    b = split.base
    q_max = max(abs(b.q_min), abs(b.q_max))
    grad_v = split_gradient_bound(split)
    m_sum = moment_or_zero(kernels.left) + moment_or_zero(kernels.right)
    c_z = rate_constant(q_max, t_end, grad_v)
    bound = c_z * math.sqrt(m_sum)
    allowance = 5.0 * dx * q_max * (1.0 + t_end * velocity_bound(split))
    c_n = q_max + 0.5 * q_max ** 2
    c_e = q_max * grad_v
    eps_star = math.sqrt(t_end * c_e * m_sum / (2.0 * c_n)) if c_n > 0 else 0.0
    large_k = bool(eps_star <= (1.0 / q_max if q_max > 0 else math.inf)
                   and max(moment_or_zero(kernels.left), moment_or_zero(kernels.right)) <= eps_star)
    k = (kernels.left or kernels.right).k if (kernels.left or kernels.right) else math.inf
    return GapMeasurement(k=k, sup_gap=sup_gap, moments_sum=m_sum, theorem_bound=bound, c_z=c_z,
                          allowance=allowance, dx=dx, q_max=q_max,
                          bound_satisfied=bool(sup_gap <= bound + allowance),
                          eps_star=eps_star, large_k=large_k)


@dataclass
class RateReport:
    measurements: list[GapMeasurement]
    fitted_slope: float
    intercept: float
    slope_all: float
    usable: list[bool]
    status: str                      # "pass" | "fail" | "inconclusive"
    bound_satisfied: list[bool] = field(default_factory=list)
    threshold: float = RATE_THRESHOLD

    def to_dict(self) -> dict:
        d = asdict(self)
        d["measurements"] = [asdict(m) for m in self.measurements]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        head = f"{'k':>8} {'sup_gap':>13} {'M-+M+':>11} {'bound':>11} {'allow':>11} {'ok':>3} {'used':>4}"
        rows = [head]
        for m, u in zip(self.measurements, self.usable):
            rows.append(f"{m.k:8g} {m.sup_gap:13.6e} {m.moments_sum:11.4e} {m.theorem_bound:11.4e} "
                        f"{m.allowance:11.4e} {'y' if m.bound_satisfied else 'n':>3} {'y' if u else 'n':>4}")
        rows.append(f"fitted slope {self.fitted_slope:+.4f} (all points {self.slope_all:+.4f}), "
                    f"threshold {self.threshold:+.2f}: {self.status}")
        return "\n".join(rows)


def _fit(k, gaps):
    slope, intercept = np.polyfit(np.log(k), np.log(gaps), 1)
    return float(slope), float(intercept)


def fit_rate(measurements, floor_factor: float = 10.0, threshold: float = RATE_THRESHOLD) -> RateReport:
    """Least-squares slope of ``log sup_gap`` against ``log k``.

    Points below the discretisation floor (see
    :meth:`GapMeasurement.above_floor`) are left out of the fit; with fewer
    than four usable points the report is inconclusive.
    """
    ms = list(measurements)
    if len({m.k for m in ms}) < 4:
        raise ValueError("rate fit needs at least four distinct k values")
    if max(m.k for m in ms) < 10 * min(m.k for m in ms):
        raise ValueError("k sweep must span at least one decade")
    k = np.array([m.k for m in ms], dtype=float)
    gaps = np.array([m.sup_gap for m in ms], dtype=float)
    usable = [m.above_floor(floor_factor) for m in ms]
    positive = gaps > 0
    slope_all, _ = _fit(k[positive], gaps[positive]) if positive.sum() >= 2 else (math.nan, math.nan)
    u = np.array(usable)
    if u.sum() >= 4:
        slope, intercept = _fit(k[u], gaps[u])
        status = "pass" if slope <= threshold else "fail"
    else:
        slope, intercept = math.nan, math.nan
        status = "inconclusive"
    return RateReport(ms, slope, intercept, slope_all, usable, status,
                      [m.bound_satisfied for m in ms], threshold)


# ---------------------------------------------------------------------------
# weak-star probes
# ---------------------------------------------------------------------------

BUMP_CENTERS = (-0.5, 0.0, 0.5)
BUMP_RADII = (0.25, 0.5)


@dataclass(frozen=True)
class Bump:
    """``(1 - z^2)^3`` with ``z = (x - center)/radius``; C^2 at its support edge."""

    center: float
    radius: float

    def __call__(self, x):
        z = (np.asarray(x, dtype=float) - self.center) / self.radius
        return np.where(np.abs(z) < 1, (1 - z * z) ** 3, 0.0)

    def antiderivative(self, x):
        z = np.clip((np.asarray(x, dtype=float) - self.center) / self.radius, -1.0, 1.0)
        return self.radius * (z - z ** 3 + 0.6 * z ** 5 - z ** 7 / 7.0)

    @property
    def derivative_l1(self) -> float:
        return 2.0

    @property
    def support(self) -> tuple[float, float]:
        return self.center - self.radius, self.center + self.radius


@dataclass(frozen=True)
class WeakStarProbe:
    test_functions: tuple[Bump, ...] = tuple(Bump(c, r) for c in BUMP_CENTERS for r in BUMP_RADII)
    version: str = "bumps-v1"


def _pair(values: np.ndarray, times: np.ndarray, grid, phi: Bump) -> float:
    """Space-time pairing; exact in space for cell averages, trapezoid in time."""
    w = np.diff(phi.antiderivative(grid.interfaces))
    per_t = values @ w
    if len(times) == 1:
        return float(per_t[0])
    return float(np.sum(0.5 * (per_t[1:] + per_t[:-1]) * np.diff(times)))


def _check_support(probe: WeakStarProbe, grid, margin: float):
    lo, hi = grid.x_left + margin, grid.x_right - margin
    for phi in probe.test_functions:
        a, b = phi.support
        if a < lo or b > hi:
            raise ValueError(f"test function support [{a}, {b}] escapes [{lo}, {hi}]")


@dataclass
class PairingRow:
    center: float
    radius: float
    pairing: float
    oracle: float
    discrepancy: float
    ibp_bound: float      # T ||phi'||_L1 sup_gap, filled when a gap is supplied


def weak_star_pairing(traj: Trajectory, oracle: Trajectory, probe: WeakStarProbe | None = None,
                      sup_gap: float | None = None, margin: float = 0.0) -> list[PairingRow]:
    probe = probe or WeakStarProbe()
    if oracle.grid != traj.grid or not np.allclose(oracle.times, traj.times):
        raise ValueError("oracle trajectory must share grid and times")
    _check_support(probe, traj.grid, margin)
    span = float(traj.times[-1] - traj.times[0])
    rows = []
    for phi in probe.test_functions:
        a = _pair(traj.values, traj.times, traj.grid, phi)
        b = _pair(oracle.values, oracle.times, oracle.grid, phi)
        bound = math.nan if sup_gap is None else span * phi.derivative_l1 * sup_gap
        rows.append(PairingRow(phi.center, phi.radius, a, b, abs(a - b), bound))
    return rows


def nonlocal_term_convergence(traj: Trajectory, kernels: KernelPair, oracle: Trajectory,
                              probe: WeakStarProbe | None = None, boundary: str = "periodic",
                              margin: float = 0.0) -> dict[str, list[PairingRow]]:
    """Pairings of ``q^k``, ``W_-[q^k]`` and ``W_+[q^k]`` against the oracle density."""
    probe = probe or WeakStarProbe()
    _check_support(probe, traj.grid, margin)
    wm, wp = [], []
    for i in range(len(traj)):
        a, b = nonlocal_averages(traj.field(i), kernels, boundary)
        wm.append(a)
        wp.append(b)
    out = {"q": weak_star_pairing(traj, oracle, probe, margin=margin)}
    for name, vals in (("w_minus", np.array(wm)), ("w_plus", np.array(wp))):
        t = Trajectory(traj.grid, traj.times, vals, traj.origin_flux, traj.outflow, name)
        out[name] = weak_star_pairing(t, oracle, probe, margin=margin)
    return out


def primitive_series(traj: Trajectory) -> np.ndarray:
    """Uncorrected ``int_0^x q`` at interfaces for every snapshot."""
    return cumulative_primitive(traj.values, traj.grid)
