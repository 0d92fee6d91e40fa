"""Matplotlib figures written next to the CSV outputs (Agg backend, files only)."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402


def plot_sweep(rows, path, title=None):
    """Per-seed and median L2 error against M (log scale)."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    cells = [r for r in rows if r["seed"] != "median"]
    med = [r for r in rows if r["seed"] == "median"]
    ax.semilogy([r["M"] for r in cells], [r["l2"] for r in cells], ".", color="0.6", label="seeds")
    ax.semilogy([r["M"] for r in med], [r["l2"] for r in med], "o-", label="median L2")
    ax.semilogy([r["M"] for r in med], [r["residual"] for r in med], "s--", label="median residual")
    ax.set_xlabel("M")
    ax.set_ylabel("error")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_convergence(rows, path, title=None):
    """L2/H1 error and indicator total against the number of unknowns."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    n = np.array([r["n_unknowns"] for r in rows], dtype=float)
    for key, style in (("err_L2", "o-"), ("err_H1", "s-"), ("eta_total", "^--")):
        vals = np.array([r[key] for r in rows], dtype=float)
        if np.any(np.isfinite(vals)):
            ax.loglog(n, vals, style, label=key)
    ax.set_xlabel("unknowns")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_partition(part, path, title=None, labels=("x1", "x2")):
    """Active leaves of a 2-d partition, shaded by level."""
    if part.dim != 2:
        return False
    fig, ax = plt.subplots(figsize=(4, 4))
    top = max(part.max_level(), 1)
    for j in part.active:
        e = part.element(j)
        ax.add_patch(Rectangle(e.lo, e.width[0], e.width[1], facecolor=plt.cm.viridis(e.level / top),
                               edgecolor="k", linewidth=0.3))
    lo, hi = part.domain.lo, part.domain.hi
    ax.set_xlim(lo[0], hi[0])
    ax.set_ylim(lo[1], hi[1])
    ax.set_aspect("equal")
    ax.set_xlabel(labels[0])
    ax.set_ylabel(labels[1])
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return True
