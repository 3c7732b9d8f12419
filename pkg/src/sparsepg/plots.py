"""Figure rendering for solve reports and benchmark tables.

All functions write PNG files next to the delimited output; they are kept
separate from the computational modules so headless use never imports
matplotlib unless figures are requested.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import matplotlib.tri as mtri  # noqa: E402
import numpy as np  # noqa: E402


def _triangulation(mesh):
    return mtri.Triangulation(mesh.nodes[:, 0], mesh.nodes[:, 1], mesh.triangles)


def plot_control(mesh, u, path, title="control"):
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    tpc = ax.tripcolor(_triangulation(mesh), facecolors=np.asarray(u), cmap="RdBu_r")
    fig.colorbar(tpc, ax=ax)
    ax.set_aspect("equal")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_state(mesh, y, path, title="state"):
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    tpc = ax.tripcolor(_triangulation(mesh), np.asarray(y), shading="gouraud", cmap="viridis")
    fig.colorbar(tpc, ax=ax)
    ax.set_aspect("equal")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_history(history, path):
    ks = [r.k for r in history]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    ax1.plot(ks, [r.J for r in history], "o-", ms=3)
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("objective")
    steps = [(r.k, r.step_norm) for r in history if r.k >= 1 and r.step_norm > 0]
    if steps:
        ax2.semilogy([k for k, _ in steps], [s for _, s in steps], "o-", ms=3)
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("step norm")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_omega(history, path):
    pts = [(r.k, r.omega_measure) for r in history if r.k >= 1 and math.isfinite(r.omega_measure)]
    if not pts:
        return
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.plot([k for k, _ in pts], [m for _, m in pts], "o-", ms=3)
    ax.set_xlabel("iteration")
    ax.set_ylabel("measure of the multivalued band")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_prox_curve(qs, vals, path, title="prox"):
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    ax.plot(qs, vals, ".", ms=2)
    ax.set_xlabel("q")
    ax.set_ylabel("prox value")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_gmap(members, path, title="stationarity map"):
    fig, ax = plt.subplots(figsize=(5.4, 4.2))
    colors = {"+": "tab:blue", "-": "tab:red", "0": "tab:green"}
    for branch in ("+", "-", "0"):
        zs = [z for z, _, b in members if b == branch]
        us = [u for _, u, b in members if b == branch]
        if zs:
            ax.plot(zs, us, ".", ms=2, color=colors[branch], label=branch)
    ax.set_xlabel("z")
    ax.set_ylabel("u")
    ax.set_title(title)
    ax.legend(markerscale=4)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_table(xs, ys, xlabel, ylabel, path, logx=False):
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.plot(xs, ys, "o-")
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
