"""One-sided monotone kernels, their scaling family and moment quantities.

A kernel is described by a profile ``g`` on the distance ``d > 0`` from the
evaluation point.  The ``LEFT`` kernel looks backwards (gamma_- supported on
x > 0, acting on ``q(x - d)``) and the ``RIGHT`` kernel looks forwards
(gamma_+ supported on x < 0, acting on ``q(x + d)``).  Every profile is
nonincreasing in ``d`` and has unit mass.

The scaled kernel is ``k * g(k * d)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

#: stencils drop the kernel tail once the remaining mass falls below this
TAIL_CUTOFF = 1e-15


class Side(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"


class Shape(str, enum.Enum):
    EXPONENTIAL = "exponential"
    BOX = "box"
    TRIANGLE = "triangle"


@dataclass(frozen=True)
class KernelFamily:
    """Unit-mass, monotone one-sided profile.

    ``param`` is the rate for the exponential shape and the support width for
    the box and decreasing-triangle shapes.
    """

    side: Side
    shape: Shape
    param: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "side", Side(self.side))
        object.__setattr__(self, "shape", Shape(self.shape))
        if not (self.param > 0 and math.isfinite(self.param)):
            raise ValueError(f"kernel parameter must be positive, got {self.param}")

    # --- profile in the distance variable -------------------------------
    def profile(self, d):
        d = np.asarray(d, dtype=float)
        p = self.param
        inside = d > 0
        if self.shape is Shape.EXPONENTIAL:
            val = p * np.exp(-p * np.where(inside, d, 0.0))
        elif self.shape is Shape.BOX:
            val = np.where(d < p, 1.0 / p, 0.0)
        else:
            val = np.where(d < p, 2.0 / p * (1.0 - d / p), 0.0)
        return np.where(inside, val, 0.0)

    def mass_within(self, d):
        """Mass of the profile on ``(0, d)``, clamped to [0, 1]."""
        d = np.maximum(np.asarray(d, dtype=float), 0.0)
        p = self.param
        if self.shape is Shape.EXPONENTIAL:
            return -np.expm1(-p * d)
        if self.shape is Shape.BOX:
            return np.minimum(d / p, 1.0)
        r = np.minimum(d / p, 1.0)
        return r * (2.0 - r)

    def tail_beyond(self, d):
        """Mass of the profile on ``(d, inf)``; computed without cancellation."""
        d = np.maximum(np.asarray(d, dtype=float), 0.0)
        p = self.param
        if self.shape is Shape.EXPONENTIAL:
            return np.exp(-p * d)
        if self.shape is Shape.BOX:
            return np.maximum(1.0 - d / p, 0.0)
        r = np.minimum(d / p, 1.0)
        return (1.0 - r) ** 2

    def first_moment_within(self, u):
        """``int_0^u s g(s) ds``."""
        u = np.maximum(np.asarray(u, dtype=float), 0.0)
        p = self.param
        if self.shape is Shape.EXPONENTIAL:
            pu = p * u
            return -(np.expm1(-pu) + pu * np.exp(-pu)) / p
        m = np.minimum(u, p)
        if self.shape is Shape.BOX:
            return m * m / (2.0 * p)
        return 2.0 / p * (m * m / 2.0 - m ** 3 / (3.0 * p))

    def support_length(self) -> float:
        """Distance beyond which the stencil treats the profile as zero."""
        if self.shape is Shape.EXPONENTIAL:
            return -math.log(TAIL_CUTOFF) / self.param
        return self.param


@dataclass(frozen=True)
class ScaledKernel:
    family: KernelFamily
    k: float = 1.0

    def __post_init__(self):
        if not (self.k > 0 and math.isfinite(self.k)):
            raise ValueError(f"scale index k must be positive, got {self.k}")

    @property
    def side(self) -> Side:
        return self.family.side

    def _distance(self, x):
        x = np.asarray(x, dtype=float)
        return x if self.side is Side.LEFT else -x

    def support_length(self) -> float:
        return self.family.support_length() / self.k

    def to_dict(self) -> dict:
        return {
            "side": self.family.side.value,
            "shape": self.family.shape.value,
            "param": self.family.param,
            "k": self.k,
        }


@dataclass(frozen=True)
class KernelMoments:
    total_mass: float
    truncated_first_moment: float
    tail_mass: Callable[[float], float]


def _scalar(v):
    v = np.asarray(v)
    return float(v) if v.ndim == 0 else v


def eval_kernel(kernel: ScaledKernel, x):
    """Pointwise value of ``k * gamma(k x)``; zero off the kernel's side."""
    d = kernel._distance(x)
    return _scalar(kernel.k * kernel.family.profile(kernel.k * d))


def antiderivative(kernel: ScaledKernel, x):
    """Kernel mass between 0 and ``x`` (zero for ``x`` on the wrong side)."""
    d = kernel._distance(x)
    return _scalar(np.where(d > 0, kernel.family.mass_within(kernel.k * d), 0.0))


def tail_mass(kernel: ScaledKernel, x):
    """Kernel mass farther than ``x > 0`` from the origin."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("tail_mass needs x > 0")
    return _scalar(kernel.family.tail_beyond(kernel.k * x))


def truncated_first_moment(kernel: ScaledKernel) -> float:
    """``int_0^inf min(1, d) gamma_k(d) dd``."""
    fam, k = kernel.family, kernel.k
    return float(fam.first_moment_within(k) / k + fam.tail_beyond(k))


def moments(kernel: ScaledKernel) -> KernelMoments:
    return KernelMoments(
        total_mass=float(kernel.family.mass_within(np.inf)),
        truncated_first_moment=truncated_first_moment(kernel),
        tail_mass=lambda x: float(tail_mass(kernel, x)),
    )


def moment_or_zero(kernel: ScaledKernel | None) -> float:
    """Truncated first moment, with ``None`` standing for the Dirac limit."""
    return 0.0 if kernel is None else truncated_first_moment(kernel)


def stencil(kernel: ScaledKernel | None, dx: float, centered: bool) -> np.ndarray:
    """Cell weights of the kernel seen from a cell centre or a cell interface.

    Entry ``m`` is the kernel mass over the ``m``-th cell away from the
    evaluation point, in the direction the kernel looks.  With ``centered``
    the evaluation point is a cell centre and entry 0 is the half cell it sits
    in; otherwise it is an interface and entry 0 is the adjacent full cell.
    The tail past ``TAIL_CUTOFF`` is folded into the last entry so the weights
    sum to one.  ``None`` (Dirac limit) gives ``[1.0]``.
    """
    if kernel is None:
        return np.array([1.0])
    fam, k = kernel.family, kernel.k
    n = int(math.ceil(kernel.support_length() / dx + 0.5)) + 1
    offset = 0.5 if centered else 1.0
    edges = np.concatenate([[0.0], (np.arange(n) + offset) * dx])
    within = fam.mass_within(k * edges)
    tails = fam.tail_beyond(k * edges)
    w = np.diff(within)
    keep = int(np.searchsorted(-tails[1:], -TAIL_CUTOFF, side="right")) + 1
    keep = min(max(keep, 1), n)
    w = w[:keep].copy()
    w[-1] += 1.0 - w.sum()
    return w
