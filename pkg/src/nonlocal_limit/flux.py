"""Fluxes, induced velocities and two-argument velocity splittings.

Every flux is a polynomial with ``f(0) = 0``, so the induced velocity
``V~(s) = f(s)/s`` is again a polynomial (its value at 0 is ``f'(0)``) and
all derived quantities are exact.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial

BUILTIN_FLUXES = {
    "burgers": [0.0, 0.0, 0.5],
    "lwr": [0.0, 1.0, -1.0],
    "cubic": [0.0, 0.0, 0.0, 1.0 / 3.0],
}


class Convexity(str, enum.Enum):
    CONVEX = "convex"
    CONCAVE = "concave"
    NEITHER = "neither"


class SplitMode(str, enum.Enum):
    ENGQUIST_OSHER = "eo"
    MIDPOINT = "midpoint"
    DOWNSTREAM = "downstream"


def _bisect_root(p: Polynomial, a: float, b: float, tol: float = 1e-12) -> float:
    fa = p(a)
    for _ in range(200):
        if b - a <= tol:
            break
        m = 0.5 * (a + b)
        fm = p(m)
        if fm == 0.0:
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def sign_changes(p: Polynomial, lo: float, hi: float) -> np.ndarray:
    """Points in ``(lo, hi)`` where ``p`` changes sign, located by bisection."""
    if p.degree() < 1:
        return np.empty(0)
    roots = p.roots()
    roots = np.sort(roots[np.abs(roots.imag) < 1e-9].real)
    roots = roots[(roots > lo) & (roots < hi)]
    # probe around each candidate root to keep genuine sign changes only
    grid = np.unique(np.concatenate([[lo, hi], roots]))
    out = []
    for r in roots:
        i = np.searchsorted(grid, r)
        left = grid[i - 1] if grid[i - 1] < r else grid[max(i - 2, 0)]
        right = grid[i + 1] if i + 1 < len(grid) else hi
        a = 0.5 * (left + r)
        b = 0.5 * (r + right)
        if np.sign(p(a)) * np.sign(p(b)) < 0:
            out.append(_bisect_root(p, a, b))
    return np.array(out)


def _abs_max_on(p: Polynomial, lo: float, hi: float) -> float:
    """Exact ``max |p|`` on ``[lo, hi]`` via endpoints and critical points."""
    pts = [lo, hi]
    if p.degree() >= 2:
        r = p.deriv().roots()
        r = r[np.abs(r.imag) < 1e-12].real
        pts.extend(r[(r > lo) & (r < hi)])
    return float(np.max(np.abs(p(np.array(pts)))))


@dataclass(frozen=True)
class FluxModel:
    """Polynomial flux on an admissible density range ``[q_min, q_max]``."""

    name: str
    coefficients: tuple[float, ...]
    q_min: float = 0.0
    q_max: float = 1.0

    def __post_init__(self):
        c = tuple(float(v) for v in self.coefficients)
        if not c:
            raise ValueError("flux needs at least one coefficient")
        if c[0] != 0.0:
            raise ValueError(f"flux must satisfy f(0) = 0; constant term is {c[0]}")
        object.__setattr__(self, "coefficients", c)
        if not self.q_min <= self.q_max:
            raise ValueError("admissible range must satisfy q_min <= q_max")

    @cached_property
    def poly(self) -> Polynomial:
        return Polynomial(self.coefficients)

    @cached_property
    def dpoly(self) -> Polynomial:
        return self.poly.deriv()

    @cached_property
    def vpoly(self) -> Polynomial:
        c = self.coefficients[1:] or (0.0,)
        return Polynomial(c)

    @cached_property
    def dvpoly(self) -> Polynomial:
        return self.vpoly.deriv()

    def f(self, s):
        return self.poly(np.asarray(s, dtype=float))

    def fprime(self, s):
        return self.dpoly(np.asarray(s, dtype=float))

    def vtilde(self, s):
        return self.vpoly(np.asarray(s, dtype=float))

    def vtilde_prime(self, s):
        return self.dvpoly(np.asarray(s, dtype=float))

    @cached_property
    def convexity(self) -> Convexity:
        lo, hi = self.q_min, self.q_max
        d2 = self.dpoly.deriv()
        if d2.degree() < 1 and abs(d2.coef[0]) < 1e-300:
            return Convexity.CONVEX  # affine fluxes are both; treat as convex
        s = np.linspace(lo, hi, 1001)
        v = d2(s)
        if np.all(v >= -1e-14):
            return Convexity.CONVEX
        if np.all(v <= 1e-14):
            return Convexity.CONCAVE
        return Convexity.NEITHER

    @property
    def lipschitz(self) -> float:
        """``L = max |f'|`` on the admissible range."""
        return _abs_max_on(self.dpoly, self.q_min, self.q_max)

    @property
    def vtilde_lipschitz(self) -> float:
        return _abs_max_on(self.dvpoly, self.q_min, self.q_max)

    def with_range(self, q_min: float, q_max: float) -> "FluxModel":
        return FluxModel(self.name, self.coefficients, q_min, q_max)

    def shifted(self, m: float) -> "FluxModel":
        """``s -> f(s + m) - f(m)`` on the range translated by ``-m``."""
        p = self.poly(Polynomial([m, 1.0]))
        c = list(p.coef) + [0.0] * (len(self.coefficients) - len(p.coef))
        c[0] = 0.0
        return FluxModel(f"{self.name}@shift({m:g})", tuple(c), self.q_min - m, self.q_max - m)

    def to_dict(self) -> dict:
        return {"name": self.name, "coefficients": list(self.coefficients),
                "q_min": self.q_min, "q_max": self.q_max}


def builtin_flux(name: str, q_min: float = 0.0, q_max: float = 1.0) -> FluxModel:
    try:
        coef = BUILTIN_FLUXES[name]
    except KeyError:
        raise ValueError(f"unknown flux {name!r}; choose from {sorted(BUILTIN_FLUXES)}") from None
    return FluxModel(name, tuple(coef), q_min, q_max)


def polynomial_flux(coefficients: Sequence[float], q_min=0.0, q_max=1.0, name="custom") -> FluxModel:
    return FluxModel(name, tuple(coefficients), q_min, q_max)


@dataclass(frozen=True)
class VelocitySplit:
    """Two-argument velocity ``V(a, b)``, nondecreasing in ``a`` and
    nonincreasing in ``b``, with ``s V(s, s) = f(s)``.

    ``a`` receives the backward average ``W_-`` and ``b`` the forward one.
    """

    base: FluxModel
    mode: SplitMode = SplitMode.MIDPOINT
    kappa: float | None = None
    _eo: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "mode", SplitMode(self.mode))
        b = self.base
        if self.mode is SplitMode.MIDPOINT:
            need = b.vtilde_lipschitz
            if self.kappa is None:
                object.__setattr__(self, "kappa", need)
            elif self.kappa < need * (1 - 1e-12):
                raise ValueError(f"kappa={self.kappa} below the required ||V~'|| = {need}")
        elif self.mode is SplitMode.DOWNSTREAM:
            worst = float(np.max(b.vtilde_prime(np.linspace(b.q_min, b.q_max, 1001))))
            for r in b.dvpoly.deriv().roots() if b.dvpoly.degree() >= 1 else []:
                if abs(r.imag) < 1e-12 and b.q_min < r.real < b.q_max:
                    worst = max(worst, float(b.vtilde_prime(r.real)))
            if worst > 1e-12:
                raise ValueError(
                    f"downstream split needs V~' <= 0 on [{b.q_min}, {b.q_max}]; "
                    f"flux {b.name!r} has V~' up to {worst:g}"
                )
        else:
            lo = min(b.q_min, 0.0) - 2.0
            hi = max(b.q_max, 0.0) + 2.0
            cuts = sign_changes(b.dvpoly, lo, hi)
            nodes = np.concatenate([[lo], cuts, [hi]])
            mids = 0.5 * (nodes[:-1] + nodes[1:])
            pos = b.vtilde_prime(mids) > 0
            vals = b.vtilde(nodes)
            dv = np.diff(vals)
            cum_pos = np.concatenate([[0.0], np.cumsum(np.where(pos, dv, 0.0))])
            cum_neg = np.concatenate([[0.0], np.cumsum(np.where(pos, 0.0, dv))])
            object.__setattr__(self, "_eo", (nodes, pos, cum_pos, cum_neg))

    def _eo_part(self, s, positive: bool):
        nodes, pos, cum_pos, cum_neg = self._eo
        s = np.asarray(s, dtype=float)
        i = np.clip(np.searchsorted(nodes, s, side="right") - 1, 0, len(pos) - 1)
        cum = cum_pos if positive else cum_neg
        seg_on = pos[i] if positive else ~pos[i]
        inc = self.base.vtilde(s) - self.base.vtilde(nodes[i])
        return cum[i] + np.where(seg_on, inc, 0.0)

    def __call__(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        base = self.base
        if self.mode is SplitMode.MIDPOINT:
            return base.vtilde(0.5 * (a + b)) + self.kappa * (a - b)
        if self.mode is SplitMode.DOWNSTREAM:
            return base.vtilde(b) + 0.0 * a
        v0 = base.vtilde(0.0)
        return (v0 + self._eo_part(a, True) - self._eo_part(0.0, True)
                + self._eo_part(b, False) - self._eo_part(0.0, False))

    def to_dict(self) -> dict:
        d = {"mode": self.mode.value}
        if self.mode is SplitMode.MIDPOINT:
            d["kappa"] = self.kappa
        return d


def eval_split(split: VelocitySplit, a, b):
    v = split(a, b)
    return float(v) if np.ndim(v) == 0 else v


def _square(split: VelocitySplit, bounds, n):
    lo, hi = bounds if bounds is not None else (split.base.q_min, split.base.q_max)
    s = np.linspace(lo, hi, n)
    return s, lo, hi


def split_gradient_bound(split: VelocitySplit, bounds=None, n: int = 200, safety: float = 1.05) -> float:
    """Sampled ``max(|d1 V|, |d2 V|)`` on the square, times ``safety``."""
    s, lo, hi = _square(split, bounds, n)
    if hi == lo:
        s = np.array([lo - 0.5e-3, lo + 0.5e-3])
    A, B = np.meshgrid(s, s, indexing="ij")
    V = split(A, B)
    h = s[1] - s[0]
    d1 = np.abs(np.diff(V, axis=0)) / h
    d2 = np.abs(np.diff(V, axis=1)) / h
    return safety * float(max(d1.max(), d2.max()))


def velocity_bound(split: VelocitySplit, bounds=None, n: int = 200, safety: float = 1.05) -> float:
    """Sampled ``max |V|`` on the square, times ``safety``."""
    s, _, _ = _square(split, bounds, n)
    A, B = np.meshgrid(s, s, indexing="ij")
    return safety * float(np.max(np.abs(split(A, B))))


@dataclass(frozen=True)
class ShiftedFluxModel:
    base: FluxModel
    shift: float
    model: FluxModel

    def f_shift(self, s):
        return self.model.f(s)

    def vtilde_shift(self, s):
        return self.model.vtilde(s)


def shift_model(base: FluxModel, q0_essinf: float) -> ShiftedFluxModel:
    if not math.isfinite(q0_essinf):
        raise ValueError("shift must be finite")
    return ShiftedFluxModel(base, float(q0_essinf), base.shifted(float(q0_essinf)))


def make_split(flux: FluxModel, mode, kappa: float | None = None) -> VelocitySplit:
    return VelocitySplit(flux, SplitMode(mode), kappa)
