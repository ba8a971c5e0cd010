"""SVG figures for finished runs."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .experiment import _atomic_write  # noqa: E402

# fixed hash salt and no date keep the SVG bytes reproducible
SVG_RC = {"svg.hashsalt": "nonlocal-limit", "svg.fonttype": "path"}


def _save(fig, path: Path):
    _atomic_write(path, lambda fh: fig.savefig(fh, format="svg", metadata={"Date": None}), mode="wb")
    plt.close(fig)


def plot_rate(k, gaps, bound=None, allowance=None, slope=None, intercept=None, path=None):
    """Log-log gap against k with the theorem bound overlaid; returns the figure."""
    k = np.asarray(k, dtype=float)
    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(5.5, 4.0))
        ax.loglog(k, gaps, "o-", label="sup |Q^k - Q|")
        if bound is not None:
            b = np.asarray(bound) + (0.0 if allowance is None else np.asarray(allowance))
            ax.loglog(k, b, "s--", label="theorem bound + allowance")
        if slope is not None and np.isfinite(slope):
            ax.loglog(k, np.exp(intercept) * k ** slope, ":", label=f"fit, slope {slope:.3f}")
        ref = gaps[0] * (k / k[0]) ** -0.5
        ax.loglog(k, ref, color="0.6", lw=0.8, label="k^(-1/2)")
        ax.set_xlabel("k")
        ax.set_ylabel("primitive gap")
        ax.legend(fontsize=8)
        fig.tight_layout()
        if path is not None:
            _save(fig, Path(path))
    return fig


def plot_snapshots(x, q, oracle_q, times, k, path=None, label="oracle"):
    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        idx = sorted({0, len(times) // 2, len(times) - 1})
        for n, i in enumerate(idx):
            ax.plot(x, q[i], color=f"C{n}", label=f"k={k:g}, t={times[i]:.3g}")
            ax.plot(x, oracle_q[i], color=f"C{n}", ls="--", lw=0.8)
        ax.plot([], [], color="k", ls="--", lw=0.8, label=label)
        ax.set_xlabel("x")
        ax.set_ylabel("q")
        ax.legend(fontsize=8)
        fig.tight_layout()
        if path is not None:
            _save(fig, Path(path))
    return fig


def emit_plots(manifest_path) -> list[Path]:
    """Render the rate and snapshot figures next to a run's manifest."""
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest at {manifest_path}")
    run_dir = manifest_path.parent
    manifest = json.loads(manifest_path.read_text())
    missing = [n for n in ("gaps.csv", "snapshots.npz") if not (run_dir / n).exists()]
    if missing:
        raise FileNotFoundError(f"run outputs missing: {', '.join(missing)}")
    out = []
    g = np.genfromtxt(run_dir / "gaps.csv", delimiter=",", names=True)
    g = np.atleast_1d(g)
    slope = intercept = None
    if (run_dir / "rate_report.json").exists():
        rep = json.loads((run_dir / "rate_report.json").read_text())
        slope, intercept = rep["fitted_slope"], rep["intercept"]
    p = run_dir / "rate.svg"
    plot_rate(g["k"], g["sup_gap"], g["theorem_bound"], g["allowance"], slope, intercept, path=p)
    out.append(p)
    data = np.load(run_dir / "snapshots.npz")
    k = max(r["k"] for r in manifest["runs"])
    tag = format(k, "g")
    oracle = manifest["runs"][-1]["oracle"]
    p = run_dir / f"snapshots_k{tag}.svg"
    plot_snapshots(data[f"k{tag}_centers"], data[f"k{tag}_q"], data[f"k{tag}_oracle_q"],
                   data[f"k{tag}_times"], k, path=p, label=oracle)
    out.append(p)
    return out
