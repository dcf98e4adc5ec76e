"""Figures for report files, rendered off-screen to PNG."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .fem import TriangleMesh  # noqa: E402
from .thresholds import BOUNDS, threshold_curve  # noqa: E402

STATUS_COLORS = {"pass": "tab:green", "indeterminate": "tab:orange", "fail": "tab:red"}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_verification(records: Sequence, stem: Path) -> list[Path]:
    """Theorem and lemma margins in units of their budgets against alpha / sigma1."""
    out = []
    x = np.array([r.alpha / r.sigma1 for r in records])
    for name, margin, budget, status in (
        ("theorem", "theorem_margin", "tau_alpha_budget", "theorem_status"),
        ("lemma", "lemma_margin", None, "lemma_status"),
    ):
        fig, ax = plt.subplots(figsize=(6, 4))
        y = np.array([getattr(r, margin) for r in records])
        if budget is None:
            b = np.array([r.lemma_budget for r in records])
        else:
            b = np.array([getattr(r, budget) for r in records])
        colors = [STATUS_COLORS.get(getattr(r, status) or r.status, "k") for r in records]
        ax.scatter(x, y, c=colors, s=14)
        ax.errorbar(x, y, yerr=b, fmt="none", ecolor="0.6", lw=0.8)
        ax.axhline(0.0, color="k", lw=0.8)
        ax.set_xlabel(r"$\alpha / \sigma_1(\Omega)$")
        ax.set_ylabel(f"{name} margin")
        ax.set_yscale("symlog", linthresh=1e-4)
        ax.set_title(f"{name} margins ({len(records)} samples)")
        out.append(_save(fig, stem.with_name(f"{stem.name}_{name}_margins.png")))
    return out


def plot_lowerbound(records: Sequence, stem: Path) -> list[Path]:
    fig, ax = plt.subplots(figsize=(7, 4))
    idx = np.arange(len(records))
    ref = np.array([r.tau_dirichlet for r in records])
    ax.plot(idx, [r.tau_dn / t for r, t in zip(records, ref)], "v", label=r"$\tau_{DN}$ shell")
    ax.plot(idx, [r.lower_bound / t for r, t in zip(records, ref)], "o", label="lower bound")
    ax.errorbar(
        idx, np.ones_like(ref), yerr=[r.tau_dirichlet_budget / t for r, t in zip(records, ref)],
        fmt="_", color="k", label=r"$\tau_D$ (FEM)",
    )
    ax.set_xticks(idx)
    ax.set_xticklabels([r.domain_id for r in records], rotation=70, fontsize=6)
    ax.set_ylabel(r"ratio to $\tau_D$")
    ax.legend(fontsize=8)
    return [_save(fig, stem.with_name(f"{stem.name}_lowerbound.png"))]


def plot_thresholds(dims: Sequence[int], stem: Path, nodes: int = 2000) -> list[Path]:
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=False)
    for kind, ax in (("perimeter", axes[0]), ("volume", axes[1])):
        for d in dims:
            c = threshold_curve(f"general-{kind}", d, nodes)
            ax.plot(c.t, c.values, lw=0.8, label=f"d={d}")
        ax.axhline(BOUNDS[f"general-{kind}"], color="k", ls="--", lw=0.8)
        ax.set_xlabel("t = R1/R2")
        ax.set_title(f"general-{kind}")
    c = threshold_curve("planar-perimeter", None, nodes)
    axes[0].plot(c.t, c.values, "k", lw=1.2, label="planar")
    axes[0].legend(fontsize=6, ncol=2)
    return [_save(fig, stem.with_name(f"{stem.name}_threshold_curves.png"))]


def plot_mesh(mesh: TriangleMesh, path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.triplot(mesh.nodes[:, 0], mesh.nodes[:, 1], mesh.triangles, lw=0.3, color="0.3")
    loop = mesh.nodes[np.append(mesh.boundary_edges[:, 0], mesh.boundary_edges[0, 0])]
    ax.plot(loop[:, 0], loop[:, 1], "k", lw=1)
    ax.set_aspect("equal")
    ax.set_title(f"{mesh.n_nodes} nodes, h = {mesh.h:.3g}")
    return _save(fig, Path(path))


def render_figures(kind: str, records: Sequence, stem, dims: Sequence[int] = (3, 4, 6, 8, 12)):
    """Figures for a report of the given kind, written next to ``stem``."""
    stem = Path(stem)
    if kind == "verification":
        return plot_verification(records, stem)
    if kind == "lowerbound":
        return plot_lowerbound(records, stem)
    if kind == "thresholds":
        present = sorted({int(r.d) for r in records if r.kind.startswith("general")})
        return plot_thresholds(present or list(dims), stem)
    return []
