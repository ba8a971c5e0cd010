"""Experiment configuration: a YAML key tree, parsed into dataclasses and validated."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .fields import Field, Grid
from .flux import FluxModel, SplitMode, builtin_flux, make_split, polynomial_flux
from .kernels import KernelFamily, ScaledKernel, Shape, Side
from .nonlocal_solver import BOUNDARIES, KernelPair

DATUM_KINDS = ("constant", "riemann", "bump", "sampled")
ORDER_MSG = "must be sorted ascending without repeats"


class ConfigError(ValueError):
    """Carries a list of ``(field path, message)`` pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.errors))


@dataclass
class DatumSpec:
    kind: str = "bump"
    value: float = 0.0            # constant
    q_left: float = 1.0           # riemann
    q_right: float = 0.0
    x_jump: float = 0.0
    center: float = 0.0           # bump
    radius: float = 0.5
    height: float = 0.8
    file: str | None = None       # sampled: two-column x,q text file

    def function(self, base_dir: Path | None = None):
        if self.kind == "constant":
            return lambda x: np.full_like(x, self.value, dtype=float)
        if self.kind == "riemann":
            return lambda x: np.where(x < self.x_jump, self.q_left, self.q_right).astype(float)
        if self.kind == "bump":
            def bump(x):
                z = (x - self.center) / self.radius
                out = np.zeros_like(x, dtype=float)
                m = np.abs(z) < 1
                out[m] = self.height * np.exp(1.0 - 1.0 / (1.0 - z[m] ** 2))
                return out
            return bump
        if self.kind == "sampled":
            xs, qs = self.samples(base_dir)
            return lambda x: np.interp(x, xs, qs, left=0.0, right=0.0)
        raise ValueError(f"unknown datum kind {self.kind!r}")

    def samples(self, base_dir: Path | None = None):
        path = Path(self.file)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
        return data[:, 0], data[:, 1]

    def value_range(self, base_dir: Path | None = None) -> tuple[float, float]:
        if self.kind == "constant":
            return self.value, self.value
        if self.kind == "riemann":
            return min(self.q_left, self.q_right), max(self.q_left, self.q_right)
        if self.kind == "bump":
            return min(0.0, self.height), max(0.0, self.height)
        _, qs = self.samples(base_dir)
        return float(min(qs.min(), 0.0)), float(max(qs.max(), 0.0))

    def support(self, base_dir: Path | None = None) -> tuple[float, float] | None:
        """Interval outside which the datum is constant; ``None`` if it is constant."""
        if self.kind == "constant":
            return None
        if self.kind == "riemann":
            return self.x_jump, self.x_jump
        if self.kind == "bump":
            return self.center - self.radius, self.center + self.radius
        xs, _ = self.samples(base_dir)
        return float(xs.min()), float(xs.max())


@dataclass
class FluxSpec:
    name: str | None = "burgers"
    coefficients: list[float] | None = None
    q_min: float | None = None
    q_max: float | None = None


@dataclass
class KernelSpec:
    shape: str = "box"
    param: float = 1.0


@dataclass
class GridSpec:
    x_left: float = -3.0
    x_right: float = 3.0
    dx_per_k: float = 8.0         # dx = 1 / (dx_per_k * k) ...
    dx_max: float | None = None   # ... capped by dx_max when given
    cfl: float = 0.9
    t_end: float = 0.5
    boundary: str = "outflow"
    n_snapshots: int = 11

    def dx_for(self, k: float) -> float:
        dx = 1.0 / (self.dx_per_k * k)
        return dx if self.dx_max is None else min(dx, self.dx_max)


@dataclass
class RegularizationSpec:
    k: float = 64
    epsilons: list[float] = field(default_factory=lambda: [0.1, 0.05, 0.02])


@dataclass
class ChecksSpec:
    max_slope: float | None = None
    require_bound: bool = False
    require_decreasing: bool = False


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    datum: DatumSpec = field(default_factory=DatumSpec)
    flux: FluxSpec = field(default_factory=FluxSpec)
    split_mode: str = "midpoint"
    kappa: float | None = None
    left: KernelSpec | None = field(default_factory=KernelSpec)
    right: KernelSpec | None = field(default_factory=KernelSpec)
    k_sweep: list[float] = field(default_factory=lambda: [8, 16, 32, 64, 128])
    grid: GridSpec = field(default_factory=GridSpec)
    sign_unrestricted: bool = False
    refine_check: bool = True
    weak_star: bool = True
    regularization: RegularizationSpec | None = None
    checks: ChecksSpec = field(default_factory=ChecksSpec)
    output_dir: str = "runs/experiment"
    workers: int = 1
    base_dir: str | None = field(default=None, compare=False)

    # -- construction ----------------------------------------------------
    @classmethod
    def from_dict(cls, d: dict, base_dir: str | None = None) -> "ExperimentConfig":
        d = dict(d or {})
        errors = []
        known = {"name", "datum", "flux", "split", "kernels", "k_sweep", "grid", "sign_unrestricted",
                 "refine_check", "weak_star", "regularization", "checks", "output"}
        for key in d:
            if key not in known:
                errors.append((key, "unknown key"))

        def sub(key, klass):
            raw = d.get(key) or {}
            if not isinstance(raw, dict):
                errors.append((key, "expected a mapping"))
                return klass()
            try:
                return klass(**raw)
            except TypeError as exc:
                errors.append((key, str(exc)))
                return klass()

        split = d.get("split") or {}
        kernels = d.get("kernels") or {}
        out = d.get("output") or {}
        side = {}
        for s in ("left", "right"):
            raw = kernels.get(s, {}) if isinstance(kernels, dict) else {}
            if raw is None:
                side[s] = None
            else:
                try:
                    side[s] = KernelSpec(**raw)
                except TypeError as exc:
                    errors.append((f"kernels.{s}", str(exc)))
                    side[s] = KernelSpec()
        reg = d.get("regularization")
        cfg = cls(
            name=str(d.get("name", "experiment")),
            datum=sub("datum", DatumSpec),
            flux=sub("flux", FluxSpec),
            split_mode=str(split.get("mode", "midpoint")),
            kappa=split.get("kappa"),
            left=side["left"],
            right=side["right"],
            k_sweep=list(d.get("k_sweep", [8, 16, 32, 64, 128])),
            grid=sub("grid", GridSpec),
            sign_unrestricted=bool(d.get("sign_unrestricted", False)),
            refine_check=bool(d.get("refine_check", True)),
            weak_star=bool(d.get("weak_star", True)),
            regularization=None if reg is None else sub("regularization", RegularizationSpec),
            checks=sub("checks", ChecksSpec),
            output_dir=str(out.get("dir", f"runs/{d.get('name', 'experiment')}")),
            workers=int(out.get("workers", 1)),
            base_dir=base_dir,
        )
        if errors:
            raise ConfigError(errors)
        return cfg

    def to_dict(self) -> dict:
        def kern(k):
            return None if k is None else asdict(k)
        return {
            "name": self.name,
            "datum": asdict(self.datum),
            "flux": asdict(self.flux),
            "split": {"mode": self.split_mode, "kappa": self.kappa},
            "kernels": {"left": kern(self.left), "right": kern(self.right)},
            "k_sweep": list(self.k_sweep),
            "grid": asdict(self.grid),
            "sign_unrestricted": self.sign_unrestricted,
            "refine_check": self.refine_check,
            "weak_star": self.weak_star,
            "regularization": None if self.regularization is None else asdict(self.regularization),
            "checks": asdict(self.checks),
            "output": {"dir": self.output_dir, "workers": self.workers},
        }

    def sha256(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    # -- derived objects -------------------------------------------------
    def _base(self) -> Path | None:
        return None if self.base_dir is None else Path(self.base_dir)

    def flux_model(self) -> FluxModel:
        lo, hi = self.datum.value_range(self._base())
        if not self.sign_unrestricted:
            lo = min(lo, 0.0)
        q_min = lo if self.flux.q_min is None else self.flux.q_min
        q_max = hi if self.flux.q_max is None else self.flux.q_max
        if self.flux.coefficients is not None:
            return polynomial_flux(self.flux.coefficients, q_min, q_max, self.flux.name or "custom")
        return builtin_flux(self.flux.name, q_min, q_max)

    def split(self):
        return make_split(self.flux_model(), self.split_mode, self.kappa)

    def kernels(self, k: float) -> KernelPair:
        def make(spec, side):
            if spec is None:
                return None
            return ScaledKernel(KernelFamily(side, Shape(spec.shape), spec.param), float(k))
        return KernelPair(make(self.left, Side.LEFT), make(self.right, Side.RIGHT))

    def make_grid(self, k: float, refine: int = 1) -> Grid:
        g = self.grid
        dx = g.dx_for(k) / refine
        n = int(round((g.x_right - g.x_left) / dx))
        return Grid(float(g.x_left), (g.x_right - g.x_left) / n, n, t_end=g.t_end, cfl=g.cfl)

    def datum_field(self, grid: Grid) -> Field:
        return Field.from_function(grid, self.datum.function(self._base()))

    def influence_margin(self) -> float:
        """Cone padding ``L T`` plus the widest kernel support over the sweep."""
        flux = self.flux_model()
        k_min = min(self.k_sweep)
        ks = self.kernels(k_min)
        sup = max((kk.support_length() for kk in (ks.left, ks.right) if kk is not None), default=0.0)
        return flux.lipschitz * self.grid.t_end + sup


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigError([("<root>", "config must be a mapping")])
    return ExperimentConfig.from_dict(raw, base_dir=str(path.parent))


def validate(cfg: ExperimentConfig) -> list[tuple[str, str]]:
    """Pure check of a parsed config; returns ``(field path, message)`` pairs."""
    errors: list[tuple[str, str]] = []
    ks = cfg.k_sweep
    if not ks:
        errors.append(("k_sweep", "must not be empty"))
    elif any(not (isinstance(k, (int, float)) and k > 0) for k in ks):
        errors.append(("k_sweep", "entries must be positive numbers"))
    elif list(ks) != sorted(ks) or len(set(ks)) != len(ks):
        errors.append(("k_sweep", ORDER_MSG))
    if cfg.datum.kind not in DATUM_KINDS:
        errors.append(("datum.kind", f"must be one of {DATUM_KINDS}"))
        return errors
    if cfg.datum.kind == "bump" and not cfg.datum.radius > 0:
        errors.append(("datum.radius", "must be positive"))
    if cfg.datum.kind == "sampled":
        if not cfg.datum.file:
            errors.append(("datum.file", "sampled datum needs a file"))
            return errors
        try:
            cfg.datum.samples(cfg._base())
        except (OSError, ValueError) as exc:
            errors.append(("datum.file", str(exc)))
            return errors
    g = cfg.grid
    if g.boundary not in BOUNDARIES:
        errors.append(("grid.boundary", f"must be one of {BOUNDARIES}"))
    if not g.x_left < 0 < g.x_right:
        errors.append(("grid.x_left", "domain must contain x = 0 in its interior"))
    if not 0 < g.cfl <= 1:
        errors.append(("grid.cfl", "must lie in (0, 1]"))
    if not g.t_end > 0:
        errors.append(("grid.t_end", "must be positive"))
    if not g.n_snapshots >= 3:
        errors.append(("grid.n_snapshots", "need at least 3 snapshots"))
    if cfg.split_mode not in {m.value for m in SplitMode}:
        errors.append(("split.mode", f"must be one of {[m.value for m in SplitMode]}"))
    for s in ("left", "right"):
        spec = getattr(cfg, s)
        if spec is not None:
            try:
                KernelFamily(Side.LEFT, Shape(spec.shape), spec.param)
            except ValueError as exc:
                errors.append((f"kernels.{s}", str(exc)))
    if any(msg != ORDER_MSG for _, msg in errors):
        return errors
    try:
        flux = cfg.flux_model()
    except (ValueError, KeyError) as exc:
        errors.append(("flux", str(exc)))
        return errors
    lo, hi = cfg.datum.value_range(cfg._base())
    if lo < 0 and not cfg.sign_unrestricted:
        errors.append(("datum", "negative datum values need sign_unrestricted: true"))
    if lo < flux.q_min - 1e-12 or hi > flux.q_max + 1e-12:
        errors.append(("datum", f"values [{lo}, {hi}] outside the flux range [{flux.q_min}, {flux.q_max}]"))
    try:
        cfg.split()
    except ValueError as exc:
        errors.append(("split", str(exc)))
        return errors
    for k in ks:
        dx = g.dx_for(k)
        n = (g.x_right - g.x_left) / dx
        if abs(n - round(n)) > 1e-9 * n or abs(-g.x_left / dx - round(-g.x_left / dx)) > 1e-9 * n:
            errors.append(("grid.dx_per_k", f"k={k}: domain ends and x=0 must fall on cell interfaces"))
            break
    sup = cfg.datum.support(cfg._base())
    if sup is not None:
        margin = cfg.influence_margin()
        if sup[0] - margin < g.x_left or sup[1] + margin > g.x_right:
            errors.append(("grid.x_left" if sup[0] - margin < g.x_left else "grid.x_right",
                           f"domain must contain the datum support [{sup[0]}, {sup[1]}] padded by "
                           f"L*T + kernel support = {margin:.4g} (L = {flux.lipschitz:.4g}, T = {g.t_end})"))
    if cfg.weak_star:
        from .analysis import WeakStarProbe
        margin = cfg.influence_margin()
        for phi in WeakStarProbe().test_functions:
            a, b = phi.support
            if a < g.x_left + margin or b > g.x_right - margin:
                errors.append(("weak_star", f"test function support [{a}, {b}] escapes the domain "
                               f"minus the influence zone {margin:.4g}"))
                break
    if cfg.regularization is not None:
        for e in cfg.regularization.epsilons:
            if not e > 0:
                errors.append(("regularization.epsilons", "must be positive"))
    if cfg.checks.max_slope is not None and len(ks) >= 1 and (len(set(ks)) < 4 or max(ks) < 10 * min(ks)):
        errors.append(("k_sweep", "rate check needs >= 4 k values spanning a decade"))
    return errors


def check(cfg: ExperimentConfig) -> ExperimentConfig:
    errs = validate(cfg)
    if errs:
        raise ConfigError(errs)
    return cfg
