"""Reference entropy solutions of the local law ``q_t + f(q)_x = 0``.

Two independent routes: a first-order Godunov scheme (any flux) and an exact
Hopf-Lax evaluation of the primitive ``Q`` for convex or concave fluxes,
from which exact cell averages follow as ``(Q(x_{i+1/2}) - Q(x_{i-1/2}))/dx``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .fields import Field, Grid, NumericalError, Trajectory
from .flux import Convexity, FluxModel
from .nonlocal_solver import CFLError


# --------------------------------------------------------------------------
# Godunov
# --------------------------------------------------------------------------

def godunov_flux(flux: FluxModel, ql, qr):
    """Godunov interface flux: min of f over [ql, qr] if ql <= qr, else max."""
    ql = np.asarray(ql, dtype=float)
    qr = np.asarray(qr, dtype=float)
    lo = np.minimum(ql, qr)
    hi = np.maximum(ql, qr)
    conv = flux.convexity
    if conv is Convexity.NEITHER:
        s = lo[..., None] + (hi - lo)[..., None] * np.linspace(0.0, 1.0, 257)
        fs = flux.f(s)
        return np.where(ql <= qr, fs.min(axis=-1), fs.max(axis=-1))
    d = flux.dpoly
    crit = d.roots()
    crit = crit[np.abs(crit.imag) < 1e-12].real if len(crit) else crit
    cand = [lo, hi] + [np.clip(c, lo, hi) for c in np.atleast_1d(crit)]
    fs = np.stack([flux.f(c) for c in cand])
    return np.where(ql <= qr, fs.min(axis=0), fs.max(axis=0))


def godunov_solve(datum: Field, flux: FluxModel, t_end: float | None = None,
                  boundary: str = "outflow", output_times=None, n_snapshots: int = 11,
                  dt: float | None = None) -> Trajectory:
    grid = datum.grid
    t_end = grid.t_end if t_end is None else t_end
    lo, hi = float(np.min(datum.values)), float(np.max(datum.values))
    s = np.linspace(lo, hi, 201)
    speed = 1.05 * float(np.max(np.abs(flux.fprime(s)))) if hi > lo else abs(float(flux.fprime(lo)))
    dt_max = grid.cfl * grid.dx / speed if speed > 0 else t_end
    if dt is not None:
        if dt > dt_max * (1 + 1e-12):
            raise CFLError(f"dt={dt:g} exceeds the stable bound {dt_max:g}")
        dt_max = dt
    if output_times is None:
        output_times = np.linspace(0.0, t_end, n_snapshots)
    output_times = np.asarray(sorted(output_times), dtype=float)
    try:
        origin = grid.origin_index()
    except ValueError:
        origin = None
    mode = "wrap" if boundary == "periodic" else "edge"
    q = datum.values.astype(float).copy()
    t = datum.time
    alpha = out = 0.0
    snaps, alphas, outs = [], [], []
    for target in output_times:
        while target - t > 1e-13 * max(1.0, abs(target)):
            h = min(dt_max, target - t)
            qp = np.pad(q, 1, mode=mode)
            F = godunov_flux(flux, qp[:-1], qp[1:])
            q = q - (h / grid.dx) * np.diff(F)
            t = target if h == target - t else t + h
            if origin is not None:
                alpha += h * F[origin]
            out += h * (F[-1] - F[0])
            if not np.all(np.isfinite(q)):
                raise NumericalError(f"non-finite density at t={t:.6g}")
        snaps.append(q.copy())
        alphas.append(alpha if origin is not None else np.nan)
        outs.append(out)
    return Trajectory(grid, output_times, np.array(snaps), np.array(alphas), np.array(outs),
                      source="godunov", meta={"dt": dt_max, "boundary": boundary, "flux": flux.to_dict()})


# --------------------------------------------------------------------------
# Legendre transform
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Conjugate:
    """``f*(p) = sup_s {p s - f(s)}`` over ``s`` in ``[lo, hi]`` for convex ``f``.

    The supremum sits at ``s*(p) = clamp((f')^{-1}(p), lo, hi)``; the inverse is
    closed-form for quadratics and found by bisection otherwise.
    """

    flux: FluxModel
    lo: float
    hi: float

    def argmax(self, p):
        p = np.asarray(p, dtype=float)
        d = self.flux.dpoly
        if d.degree() <= 0:
            return np.where(p >= d.coef[0], self.hi, self.lo) + 0.0 * p
        if d.degree() == 1:
            c0, c1 = d.coef
            return np.clip((p - c0) / c1, self.lo, self.hi)
        a = np.full(p.shape, self.lo)
        b = np.full(p.shape, self.hi)
        for _ in range(64):
            m = 0.5 * (a + b)
            below = d(m) < p
            a = np.where(below, m, a)
            b = np.where(below, b, m)
        s = 0.5 * (a + b)
        s = np.where(p <= d(self.lo), self.lo, s)
        return np.where(p >= d(self.hi), self.hi, s)

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        s = self.argmax(p)
        return p * s - self.flux.f(s)


def legendre_transform(flux: FluxModel, extend: float = 1.0) -> Conjugate:
    if flux.convexity is not Convexity.CONVEX:
        raise ValueError(f"flux {flux.name!r} is not convex on its admissible range")
    lo, hi = flux.q_min - extend, flux.q_max + extend
    # keep the extension inside the region where f stays convex
    d2 = flux.dpoly.deriv()
    if d2.degree() >= 1:
        for r in d2.roots():
            if abs(r.imag) < 1e-12:
                r = r.real
                if lo < r <= flux.q_min:
                    lo = r
                elif flux.q_max <= r < hi:
                    hi = r
    return Conjugate(flux, lo, hi)


# --------------------------------------------------------------------------
# Hopf-Lax
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PrimitiveDatum:
    """Continuous piecewise-linear ``Q0`` with ``Q0(0) = 0``.

    Outside the breakpoints ``Q0`` continues linearly with the edge slopes.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    @classmethod
    def from_field(cls, field: Field) -> "PrimitiveDatum":
        g = field.grid
        x = g.interfaces
        Q = np.concatenate([[0.0], np.cumsum(field.values) * g.dx])
        Q = Q - _interp_linear_ext(0.0, x, Q)
        return cls(x, Q)

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.breakpoints)

    def __call__(self, y):
        return _interp_linear_ext(y, self.breakpoints, self.values)


def _interp_linear_ext(y, x, Q):
    y = np.asarray(y, dtype=float)
    s = np.diff(Q) / np.diff(x)
    out = np.interp(y, x, Q)
    out = np.where(y < x[0], Q[0] + s[0] * (y - x[0]), out)
    out = np.where(y > x[-1], Q[-1] + s[-1] * (y - x[-1]), out)
    return out if out.ndim else float(out)


class ViscositySolutionEval:
    """Exact viscosity solution of ``Q_t + f(Q_x) = 0`` for a piecewise-linear datum.

    Concave fluxes go through ``Q -> -Q``: ``R = -Q`` solves
    ``R_t + h(R_x) = 0`` with the convex ``h(p) = -f(-p)``.
    """

    def __init__(self, primitive_datum: PrimitiveDatum, flux: FluxModel, chunk: int = 2048):
        self.primitive_datum = primitive_datum
        self.flux = flux
        self.chunk = chunk
        slopes = primitive_datum.slopes
        lo, hi = float(slopes.min()), float(slopes.max())
        conv = flux.with_range(min(lo, flux.q_min), max(hi, flux.q_max)).convexity
        if conv is Convexity.NEITHER:
            raise ValueError("Hopf-Lax evaluation needs a convex or concave flux; use godunov_solve")
        self.sign = 1.0 if conv is Convexity.CONVEX else -1.0
        if self.sign > 0:
            self._h = flux.with_range(lo, hi)
        else:
            c = np.array(flux.coefficients)
            c = -c * (-1.0) ** np.arange(len(c))  # h(p) = -f(-p)
            self._h = FluxModel(f"reflected-{flux.name}", tuple(c), -hi, -lo)
        self._x = primitive_datum.breakpoints
        self._Q = self.sign * primitive_datum.values
        self._c = np.diff(self._Q) / np.diff(self._x)

    @classmethod
    def from_field(cls, field: Field, flux: FluxModel, **kw) -> "ViscositySolutionEval":
        return cls(PrimitiveDatum.from_field(field), flux, **kw)

    @cached_property
    def legendre(self) -> Conjugate:
        return legendre_transform(self._h)

    def __call__(self, t: float, x):
        return hopf_lax_eval(self, t, x)

    def _eval_convex(self, t: float, x: np.ndarray) -> np.ndarray:
        h = self._h
        fstar = self.legendre
        X, Q, c = self._x, self._Q, self._c
        n = len(X)
        cmin, cmax = float(c.min()), float(c.max())
        vmin, vmax = float(h.fprime(cmin)), float(h.fprime(cmax))
        out = np.empty_like(x)
        for s0 in range(0, len(x), self.chunk):
            xs = x[s0:s0 + self.chunk]
            # minimisers satisfy (x - y)/t in [h'(cmin), h'(cmax)]
            jlo = np.clip(np.searchsorted(X, xs - t * vmax, side="left") - 1, 0, n - 1)
            jhi = np.clip(np.searchsorted(X, xs - t * vmin, side="right"), 0, n - 1)
            width = int(np.max(jhi - jlo)) + 1
            idx = jlo[:, None] + np.arange(width)[None, :]
            valid = idx <= jhi[:, None]
            idx = np.minimum(idx, n - 1)
            y = X[idx]
            best = np.where(valid, Q[idx] + t * fstar((xs[:, None] - y) / t), np.inf).min(axis=1)
            # interior stationary points of segments idx .. idx+1
            seg = np.minimum(idx, n - 2)
            cs = c[seg]
            ys = xs[:, None] - t * h.fprime(cs)
            inside = valid & (ys >= X[seg]) & (ys <= X[seg + 1])
            val = Q[seg] + cs * (xs[:, None] - X[seg]) - t * h.f(cs)
            best = np.minimum(best, np.where(inside, val, np.inf).min(axis=1))
            # linear continuation beyond the first and last breakpoints
            for j, edge, side in ((0, X[0], -1), (n - 2, X[-1], 1)):
                cj = c[j]
                ye = xs - t * float(h.fprime(cj))
                ok = (ye <= edge) if side < 0 else (ye >= edge)
                Qe = Q[0] if side < 0 else Q[-1]
                ve = Qe + cj * (xs - edge) - t * float(h.f(cj))
                best = np.where(ok, np.minimum(best, ve), best)
            out[s0:s0 + self.chunk] = best
        return out


def hopf_lax_eval(sol: ViscositySolutionEval, t: float, x):
    if not t > 0:
        if t == 0:
            return sol.primitive_datum(x)
        raise ValueError("Hopf-Lax evaluation needs t > 0")
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    val = sol.sign * sol._eval_convex(float(t), xa)
    return val if np.ndim(x) else float(val[0])


def entropy_density_from_primitive(sol: ViscositySolutionEval, t: float, grid: Grid) -> Field:
    Q = hopf_lax_eval(sol, t, grid.interfaces)
    return Field(grid, np.diff(Q) / grid.dx, t)


def hopf_lax_trajectory(sol: ViscositySolutionEval, grid: Grid, times) -> Trajectory:
    """Exact cell averages at ``times`` packed like a solver trajectory."""
    times = np.asarray(times, dtype=float)
    snaps, alphas = [], []
    try:
        j0 = grid.origin_index()
    except ValueError:
        j0 = None
    for t in times:
        Q = hopf_lax_eval(sol, t, grid.interfaces)
        snaps.append(np.diff(Q) / grid.dx)
        alphas.append(-Q[j0] if j0 is not None else np.nan)
    return Trajectory(grid, times, np.array(snaps), np.array(alphas), np.full(len(times), np.nan),
                      source="hopflax", meta={"flux": sol.flux.to_dict()})
