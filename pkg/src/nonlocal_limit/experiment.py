"""Config-driven k-sweeps: solve, measure, and write reports atomically."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import platform
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import GapMeasurement, WeakStarProbe, fit_rate, measure, weak_star_pairing
from .config import ConfigError, ExperimentConfig, validate
from .fields import NumericalError
from .flux import Convexity
from .hj_tools import ConvolutionRegularization, build_primitive, nonlocal_defect
from .local_ref import ViscositySolutionEval, godunov_solve, hopf_lax_eval, hopf_lax_trajectory
from .nonlocal_solver import solve, solve_sign_unrestricted

log = logging.getLogger(__name__)

SEEDS = "none (deterministic)"


class RunError(RuntimeError):
    """A solver failure, tagged with the run it happened in."""


# ---------------------------------------------------------------------------
# atomic writers
# ---------------------------------------------------------------------------

def _atomic_write(path: Path, writer, mode: str = "w"):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            writer(fh)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_text(path: Path, text: str):
    _atomic_write(Path(path), lambda fh: fh.write(text))


def write_csv(path: Path, header: list[str], rows):
    """Rows of numbers (or short strings); floats at 17 significant digits."""
    def fmt(v):
        if isinstance(v, str):
            return v
        if isinstance(v, (bool, np.bool_)):
            return "1" if v else "0"
        return format(float(v), ".17g")

    def writer(fh):
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(fmt(v) for v in r) + "\n")
    _atomic_write(Path(path), writer)


def write_npz(path: Path, **arrays):
    _atomic_write(Path(path), lambda fh: np.savez_compressed(fh, **arrays), mode="wb")


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# one k
# ---------------------------------------------------------------------------

def _oracle_kind(flux) -> str:
    return "godunov" if flux.convexity is Convexity.NEITHER else "hopflax"


def _solve_pair(cfg: ExperimentConfig, k: float, refine: int = 1):
    """Nonlocal trajectory, oracle primitive series and oracle density trajectory."""
    grid = cfg.make_grid(k, refine)
    g = cfg.grid
    datum = cfg.datum_field(grid)
    split = cfg.split()
    kernels = cfg.kernels(k)
    times = np.linspace(0.0, g.t_end, g.n_snapshots)
    runner = solve_sign_unrestricted if cfg.sign_unrestricted else solve
    traj = runner(datum, kernels, split, g.t_end, g.boundary, output_times=times)
    prim = build_primitive(traj)
    flux = split.base
    if _oracle_kind(flux) == "hopflax":
        ev = ViscositySolutionEval.from_field(datum, flux)
        ref_Q = np.array([hopf_lax_eval(ev, t, grid.interfaces) for t in times])
        oracle = hopf_lax_trajectory(ev, grid, times) if refine == 1 else None
    else:
        oracle = godunov_solve(datum, flux, g.t_end, boundary="outflow", output_times=times)
        ref_Q = build_primitive(oracle).Q
    return grid, kernels, split, traj, prim, ref_Q, oracle


def run_single(cfg_dict: dict, base_dir: str | None, k: float) -> dict:
    """All per-k work; a top-level function so process pools can pickle it."""
    cfg = ExperimentConfig.from_dict(cfg_dict, base_dir)
    try:
        grid, kernels, split, traj, prim, ref_Q, oracle = _solve_pair(cfg, k)
        sup_gap = float(np.max(np.abs(prim.Q - ref_Q)))
        m = measure(sup_gap, kernels, split, cfg.grid.t_end, grid.dx)
        if cfg.refine_check:
            _, _, _, _, prim2, ref2, _ = _solve_pair(cfg, k, refine=2)
            m.refined_gap = float(np.max(np.abs(prim2.Q - ref2)))
    except (NumericalError, FloatingPointError) as exc:
        raise RunError(f"run {cfg.name!r}, k={k}: {exc}") from exc

    out = {"k": k, "measurement": asdict(m), "times": traj.times, "centers": grid.centers,
           "interfaces": grid.interfaces, "q": traj.values, "oracle_q": oracle.values,
           "Q": prim.Q, "oracle_Q": ref_Q, "oracle_kind": _oracle_kind(split.base),
           "q_min": float(traj.values.min()), "q_max": float(traj.values.max()),
           "mass": traj.masses(), "outflow": traj.outflow, "steps": traj.meta["steps"]}
    if cfg.weak_star:
        rows = weak_star_pairing(traj, oracle, WeakStarProbe(), sup_gap=sup_gap,
                                 margin=cfg.influence_margin())
        out["weak_star"] = [asdict(r) for r in rows]
    reg = cfg.regularization
    if reg is not None and float(reg.k) == float(k):
        out["regularization"] = _regularize(prim, grid, kernels, split, reg.epsilons, cfg.grid.boundary)
    return out


def _regularize(prim, grid, kernels, split, epsilons, boundary) -> list[dict]:
    res = []
    for eps in epsilons:
        regs = [ConvolutionRegularization.of(Q, grid.dx, eps) for Q in prim.Q]
        U = np.array([r.U for r in regs])
        try:
            rep = nonlocal_defect(U, prim.times, grid, kernels, split, eps, "U", boundary=boundary)
            cell = rep.defect
            defect = np.full(U.shape, np.nan)
            defect[1:-1, 1:-1] = 0.5 * (cell[:, 1:] + cell[:, :-1])
        except ValueError as exc:
            log.warning("defect skipped for eps=%g: %s", eps, exc)
            defect = np.full(U.shape, np.nan)
        res.append({"epsilon": eps, "Q": prim.Q, "Q_plus": np.array([r.Q_plus for r in regs]),
                    "Q_minus": np.array([r.Q_minus for r in regs]), "U": U,
                    "L": np.array([r.L for r in regs]), "defect": defect})
    return res


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _versions() -> dict:
    import matplotlib
    import yaml
    return {"python": platform.python_version(), "numpy": np.__version__,
            "matplotlib": matplotlib.__version__, "pyyaml": yaml.__version__,
            "nonlocal_limit": __version__}


def _evaluate_checks(cfg: ExperimentConfig, report, measurements) -> dict:
    c = cfg.checks
    out = {}
    if c.max_slope is not None:
        out["slope"] = report is not None and report.status != "inconclusive" \
            and report.fitted_slope <= c.max_slope
    if c.require_bound:
        out["bound"] = all(m.bound_satisfied for m in measurements)
    if c.require_decreasing:
        g = [m.sup_gap for m in measurements]
        out["decreasing"] = all(b < a for a, b in zip(g, g[1:]))
    return out


def run_experiment(cfg: ExperimentConfig, output_dir: str | Path | None = None,
                   workers: int | None = None) -> dict:
    """Run the sweep of ``cfg`` and write its outputs; returns the manifest."""
    errors = validate(cfg)
    if errors:
        raise ConfigError(errors)
    t0 = time.perf_counter()
    out_dir = Path(output_dir if output_dir is not None else cfg.output_dir)
    if cfg.base_dir is not None and not out_dir.is_absolute() and output_dir is None:
        out_dir = Path(cfg.base_dir) / out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    workers = cfg.workers if workers is None else workers
    args = [(cfg.to_dict(), cfg.base_dir, k) for k in cfg.k_sweep]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_single, *zip(*args)))
    else:
        results = [run_single(*a) for a in args]

    measurements = [GapMeasurement(**r["measurement"]) for r in results]
    files = {}

    write_csv(out_dir / "gaps.csv",
              ["k", "sup_gap", "refined_gap", "moments_sum", "theorem_bound", "allowance", "bound_satisfied"],
              [(m.k, m.sup_gap, m.refined_gap, m.moments_sum, m.theorem_bound, m.allowance,
                m.bound_satisfied) for m in measurements])
    files["gaps.csv"] = out_dir / "gaps.csv"

    report = None
    ks = [m.k for m in measurements]
    if len(set(ks)) >= 4 and max(ks) >= 10 * min(ks):
        report = fit_rate(measurements)
        write_text(out_dir / "rate_report.json", report.to_json() + "\n")
        write_text(out_dir / "rate_report.txt", report.to_text() + "\n")
        files["rate_report.json"] = out_dir / "rate_report.json"
        files["rate_report.txt"] = out_dir / "rate_report.txt"

    def snapshot_rows():
        for r in results:
            for src, arr in (("nonlocal", r["q"]), (r["oracle_kind"], r["oracle_q"])):
                for t, row in zip(r["times"], arr):
                    for x, q in zip(r["centers"], row):
                        yield (format(r["k"], "g"), src, t, x, q)
    write_csv(out_dir / "snapshots.csv", ["k", "source", "t", "x", "q"], snapshot_rows())
    files["snapshots.csv"] = out_dir / "snapshots.csv"
    arrays = {}
    for r in results:
        tag = format(r["k"], "g")
        for key in ("times", "centers", "interfaces", "q", "oracle_q", "Q", "oracle_Q"):
            arrays[f"k{tag}_{key}"] = r[key]
    write_npz(out_dir / "snapshots.npz", **arrays)
    files["snapshots.npz"] = out_dir / "snapshots.npz"

    if cfg.weak_star:
        write_csv(out_dir / "weak_star.csv",
                  ["k", "center", "radius", "pairing", "oracle", "discrepancy", "ibp_bound"],
                  [(r["k"], w["center"], w["radius"], w["pairing"], w["oracle"], w["discrepancy"],
                    w["ibp_bound"]) for r in results for w in r["weak_star"]])
        files["weak_star.csv"] = out_dir / "weak_star.csv"

    for r in results:
        if "regularization" not in r:
            continue

        def reg_rows(r=r):
            for block in r["regularization"]:
                for i, t in enumerate(r["times"]):
                    for j, x in enumerate(r["interfaces"]):
                        yield (block["epsilon"], t, x, block["Q"][i, j], block["Q_plus"][i, j],
                               block["Q_minus"][i, j], block["U"][i, j], block["L"][i, j],
                               block["defect"][i, j])
        write_csv(out_dir / "regularization.csv",
                  ["epsilon", "t", "x", "Q", "Qeps_plus", "Qeps_minus", "Ueps", "Leps", "defect"], reg_rows())
        files["regularization.csv"] = out_dir / "regularization.csv"

    checks = _evaluate_checks(cfg, report, measurements)
    manifest = {
        "name": cfg.name,
        "config": cfg.to_dict(),
        "config_sha256": cfg.sha256(),
        "seeds": SEEDS,
        "versions": _versions(),
        "argv": sys.argv,
        "workers": workers,
        "wall_clock_s": time.perf_counter() - t0,
        "rate": None if report is None else {"fitted_slope": report.fitted_slope,
                                             "slope_all": report.slope_all, "status": report.status},
        "runs": [{"k": r["k"], "steps": r["steps"], "q_min": r["q_min"], "q_max": r["q_max"],
                  "oracle": r["oracle_kind"], "sup_gap": r["measurement"]["sup_gap"],
                  "mass_drift": float(np.max(np.abs(r["mass"] - r["mass"][0] + r["outflow"])))}
                 for r in results],
        "checks": checks,
        "passed": all(checks.values()),
        "files": {name: {"sha256": sha256_file(p), "bytes": p.stat().st_size} for name, p in files.items()},
    }
    write_text(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True, default=_json_default)
               + "\n")
    manifest["path"] = str(out_dir / "manifest.json")
    return manifest


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, float) and not math.isfinite(o):
        return None
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")
