"""Deterministic SVG figures for experiment reports."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {"svg.hashsalt": "stitforest", "svg.fonttype": "none", "figure.figsize": (5.0, 3.6)}


def _render(fig) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return buf.getvalue()


def rate_plot(fits) -> str:
    """Log-log risk curves with fitted slopes, one series per estimator family."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for fit in fits:
            ns = np.array([p.n for p in fit.grid], dtype=float)
            risk = np.array([p.risk for p in fit.grid])
            se = np.array([p.stderr for p in fit.grid])
            line = ax.errorbar(ns, risk, yerr=se, marker="o", ls="none", capsize=2,
                               label=f"{fit.family} (slope {fit.slope:.3f})")
            coef = np.polyfit(np.log(ns), np.log(risk), 1)
            ax.plot(ns, np.exp(np.polyval(coef, np.log(ns))), color=line[0].get_color(), lw=1)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("n")
        ax.set_ylabel("risk")
        ax.legend(frameon=False)
        fig.tight_layout()
        return _render(fig)


def check_plot(rows, title: str = "") -> str:
    """Estimate / target ratio per check with 3-stderr bars."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 0.3 * len(rows) + 1.2))
        y = np.arange(len(rows))
        ratio = np.array([r.estimate / r.bound_or_target if r.bound_or_target else np.nan for r in rows])
        err = np.array([3 * r.stderr / abs(r.bound_or_target) if r.bound_or_target else 0.0 for r in rows])
        colors = ["tab:green" if r.passed else "tab:red" for r in rows]
        ax.errorbar(ratio, y, xerr=err, ls="none", ecolor="grey", capsize=2)
        ax.scatter(ratio, y, c=colors, zorder=3)
        ax.axvline(1.0, color="k", lw=0.8)
        ax.set_yticks(y, [r.check_id for r in rows], fontsize=7)
        ax.set_xlabel("estimate / bound or target")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        return _render(fig)


def _polygon(P) -> np.ndarray:
    """Vertices of a bounded 2-d polytope in counter-clockwise order."""
    from itertools import combinations

    pts = []
    for i, j in combinations(range(P.A.shape[0]), 2):
        M = P.A[[i, j]]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        v = np.linalg.solve(M, P.b[[i, j]])
        if np.all(P.A @ v <= P.b + 1e-9):
            pts.append(v)
    pts = np.array(pts)
    c = pts.mean(axis=0)
    return pts[np.argsort(np.arctan2(pts[:, 1] - c[1], pts[:, 0] - c[0]))]


def tessellation_plot(tree) -> str:
    """Cells of a planar tessellation."""
    from ..tessellate import cells

    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.0, 4.0))
        for P in cells(tree):
            poly = _polygon(P)
            ax.fill(poly[:, 0], poly[:, 1], facecolor="none", edgecolor="k", lw=0.6)
        ax.set_aspect("equal")
        ax.set_axis_off()
        fig.tight_layout()
        return _render(fig)
