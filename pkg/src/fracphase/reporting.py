"""Render run artifacts as figures next to the delimited output.

The CSV files remain the machine-readable contract; these helpers draw the
standard survey plots (energy decay, mass drift, auxiliary-consistency gap,
step-size history, convergence, field snapshots) into PNG files in the same
output directory.  All rendering uses the Agg backend so runs stay headless.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .diagnostics import DiagnosticsRecord  # noqa: E402
from .driver import RunResult, Snapshot  # noqa: E402
from .grids import PeriodicGrid  # noqa: E402

__all__ = [
    "render_diagnostics",
    "render_convergence",
    "render_snapshot",
    "render_kernel_rows",
    "render_run",
]

_DPI = 150


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def render_diagnostics(records: Sequence[DiagnosticsRecord],
                       out_dir) -> list[Path]:
    """Energy, mass-drift, aux-gap, and step-size figures from one run."""
    out_dir = Path(out_dir)
    t = np.array([r.t for r in records])
    written = []

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(t, [r.E for r in records], label="original energy")
    ax.plot(t, [r.E_mod for r in records], "--", label="modified energy")
    ax.plot(t, [r.E_var for r in records], ":", label="variational energy")
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    ax.legend(frameon=False)
    written.append(_save(fig, out_dir / "energy.png"))

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(t, [r.mass_drift for r in records])
    ax.set_xlabel("t")
    ax.set_ylabel("relative mass drift")
    written.append(_save(fig, out_dir / "mass.png"))

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.semilogy(t[1:], np.maximum([r.aux_gap for r in records[1:]], 1e-300))
    ax.set_xlabel("t")
    ax.set_ylabel("auxiliary gap (L2)")
    written.append(_save(fig, out_dir / "aux_gap.png"))

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.semilogy(t[1:], [r.tau for r in records[1:]], drawstyle="steps-post")
    ax.set_xlabel("t")
    ax.set_ylabel("step size")
    written.append(_save(fig, out_dir / "steps.png"))
    return written


def render_convergence(levels: Sequence[int], err_phi: Sequence[float],
                       err_r: Sequence[float], out_dir) -> Path:
    """Log-log error decay with a second-order guide line."""
    out_dir = Path(out_dir)
    levels = np.asarray(levels, dtype=float)
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    ax.loglog(levels, err_phi, "o-", label="phase")
    ax.loglog(levels, err_r, "s-", label="auxiliary")
    guide = err_phi[0] * (levels / levels[0]) ** -2.0
    ax.loglog(levels, guide, "k--", lw=0.8, label="order 2")
    ax.set_xlabel("N")
    ax.set_ylabel("max error")
    ax.legend(frameon=False)
    return _save(fig, out_dir / "convergence.png")


def render_snapshot(grid: PeriodicGrid, snap: Snapshot, path) -> Path:
    fig, ax = plt.subplots(figsize=(4.6, 4.0))
    im = ax.imshow(snap.values.T, origin="lower",
                   extent=(0.0, grid.Lx, 0.0, grid.Ly), cmap="RdBu_r")
    ax.set_title(f"t = {snap.actual:g}")
    fig.colorbar(im, ax=ax, shrink=0.85)
    return _save(fig, Path(path))


def render_kernel_rows(rows, out_dir) -> Path:
    """Decay of the last few kernel rows (semilog)."""
    out_dir = Path(out_dir)
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    for row in rows[-4:]:
        ax.semilogy(np.arange(row.weights.size), row.weights, "o-",
                    label=f"n = {row.n}", ms=3)
    ax.set_xlabel("lag j")
    ax.set_ylabel("weight")
    ax.legend(frameon=False)
    return _save(fig, out_dir / "kernels.png")


def render_run(result: RunResult, out_dir) -> list[Path]:
    """All figures for one completed run."""
    written = render_diagnostics(result.records, out_dir)
    for snap in result.snapshots:
        path = Path(out_dir) / f"snapshot_{snap.requested:g}.png"
        written.append(render_snapshot(result.grid, snap, path))
    return written
