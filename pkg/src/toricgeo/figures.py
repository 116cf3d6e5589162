"""Convergence figures rendered next to the delimited report files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .lab import ConvergenceReport


def _loglog_axes(ax, title: str, ylabel: str):
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("degree N")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)


def render_figures(report: ConvergenceReport, output_dir) -> list[Path]:
    """Render the three convergence figures as PNG files.

    c0_convergence.png  - sup |u_N - U_t| with a log(N)/N reference curve
    q_convergence.png   - ratio errors, full lattice and boundary point
    c2_convergence.png  - the three second-derivative channels
    Returns the written paths.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    ns = np.asarray(report.n_schedule, dtype=float)
    written = []

    fig = plt.figure(figsize=(5.0, 3.8))
    ax = fig.add_subplot(111)
    ax.plot(ns, report.c0_err, "o-", label=r"$\sup\,|u_N - U_t|$")
    if report.c0_err and min(report.c0_err) > 0:
        scale = report.c0_err[0] / (np.log(ns[0]) / ns[0])
        ax.plot(ns, scale * np.log(ns) / ns, "--", color="gray",
                label=r"$\log N / N$ reference")
    _loglog_axes(ax, "Uniform convergence of the Bergman geodesic", "error")
    ax.legend()
    fig.tight_layout()
    path = out / "c0_convergence.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig = plt.figure(figsize=(5.0, 3.8))
    ax = fig.add_subplot(111)
    ax.plot(ns, report.q_err, "o-", label=r"$\max_k |q^N - \Omega|$")
    ax.plot(ns, report.boundary_q_err, "s-", label=r"$|q^N(1/N) - 1|$")
    _loglog_axes(ax, "Norming ratio convergence", "error")
    ax.legend()
    fig.tight_layout()
    path = out / "q_convergence.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig = plt.figure(figsize=(5.0, 3.8))
    ax = fig.add_subplot(111)
    ax.plot(ns, report.c2_err_rho, "o-", label=r"$|N\,\mathrm{var}(\alpha) - 1/G_t''|$")
    ax.plot(ns, report.c2_err_tt, "s-", label=r"$|\mathrm{var}(d)/N - (v')^2/G_t''|$")
    ax.plot(ns, report.c2_err_mixed, "^-", label=r"$|\mathrm{cov} - v'/G_t''|$")
    _loglog_axes(ax, "Second derivative channels (interior window)", "gap")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out / "c2_convergence.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)
    return written
