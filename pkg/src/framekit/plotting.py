"""Report figures, rendered off-screen to PNG files."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    # fixed metadata keeps repeated renders byte-identical
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_measure_sequences(series: Mapping[str, np.ndarray], path: str | Path,
                           profiles: Mapping[str, object] | None = None,
                           title: str = "measure sequences", logx: bool = False) -> Path:
    """``a_n`` against ``n`` for each named series, with profile envelopes shaded."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for k, (name, values) in enumerate(series.items()):
        values = np.asarray(values, dtype=float)
        n = np.arange(1, len(values) + 1)
        color = f"C{k}"
        ax.plot(n, values, lw=1.0, color=color, label=name)
        prof = (profiles or {}).get(name)
        if prof is not None:
            lo, hi = prof.tail_window
            ax.fill_between([lo, hi], prof.liminf, prof.limsup, color=color, alpha=0.2)
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("a_n")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    return _save(fig, path)


def plot_channel(report, path: str | Path, title: str = "noise energy per coefficient") -> Path:
    """Empirical block energies with 4-sigma bars against the analytic values."""
    n = np.arange(1, len(report.analytic) + 1)
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(n, report.analytic, color="k", lw=1.0, label="analytic")
    ax.errorbar(n, report.empirical, yerr=4 * report.stderr, fmt=".", ms=2, lw=0.5,
                color="C1", label="empirical ±4 s.e.")
    if len(n) > 50:
        ax.set_xscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("energy / |I_n|")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    return _save(fig, path)


def plot_tails(report, path: str | Path, title: str = "off-ball energy") -> Path:
    """Row and column tail energy against the ball radius."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.semilogy(report.radii, np.maximum(report.row_tail, 1e-300), "o-", label="rows")
    ax.semilogy(report.radii, np.maximum(report.col_tail, 1e-300), "s--", label="columns")
    ax.set_xlabel("radius R")
    ax.set_ylabel("tail energy")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    return _save(fig, path)


def plot_residual(values, path: str | Path, title: str = "residual",
                  ylabel: str = "residual") -> Path:
    values = np.asarray(values, dtype=float)
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(np.arange(1, len(values) + 1), values, lw=1.0)
    ax.set_xlabel("n")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    return _save(fig, path)


def plot_lattice(lattice, path: str | Path, title: str = "time-frequency points") -> Path:
    pts = np.asarray(lattice.points, dtype=float)
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.scatter(pts[:, 0], pts[:, 1], s=8)
    if lattice.N is not None:
        ax.set_xlim(-0.5, lattice.N - 0.5)
        ax.set_ylim(-0.5, lattice.N - 0.5)
    ax.set_aspect("equal")
    ax.set_xlabel("t")
    ax.set_ylabel("w")
    ax.set_title(title)
    return _save(fig, path)


def plot_density(estimate, path: str | Path, title: str = "density ratios") -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(estimate.n_list, estimate.ratios, "o-", ms=3, label="centered box")
    if estimate.beurling_upper is not None:
        ax.plot(estimate.n_list, estimate.beurling_upper, "--", label="sup over centers")
        ax.plot(estimate.n_list, estimate.beurling_lower, ":", label="inf over centers")
    if estimate.exact is not None:
        ax.axhline(estimate.exact, color="k", lw=0.8, label="|Λ|/N")
    ax.set_xlabel("box side n")
    ax.set_ylabel("points per unit volume")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    return _save(fig, path)
