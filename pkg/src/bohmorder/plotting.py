"""SVG renderings of the CSV files written by the command-line tools."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .errors import SchemaMismatch

# required leading columns per plot kind
SCHEMAS = {
    "path": ("t", "x", "y"),
    "loglog-chi": ("t", "x", "y", "chi"),
    "contour": ("x", "y", "P_s", "psi2"),
    "section": ("traj_id", "k", "x", "y"),
    "metrics": ("t", "D", "H_s"),
}


def _read(path: Path, kind: str) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    need = SCHEMAS[kind]
    if not rows:
        return {k: np.empty(0) for k in need}
    header = [h.strip() for h in rows[0]]
    if tuple(header[: len(need)]) != need:
        raise SchemaMismatch(f"{path}: plot kind {kind!r} needs columns {','.join(need)}, "
                             f"found {','.join(header)}")
    body = np.array(rows[1:], dtype=float) if len(rows) > 1 else np.empty((0, len(header)))
    return {h: body[:, i] for i, h in enumerate(header)}


def emit_plot(csv_path: str | Path, kind: str, svg_path: str | Path | None = None) -> Path:
    """Render ``csv_path`` as an SVG of the given kind and return the SVG path."""
    if kind not in SCHEMAS:
        raise SchemaMismatch(f"unknown plot kind {kind!r}")
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    csv_path = Path(csv_path)
    svg_path = csv_path.with_suffix(".svg") if svg_path is None else Path(svg_path)
    data = _read(csv_path, kind)
    plt.rcParams["svg.hashsalt"] = "bohmorder"
    fig, ax = plt.subplots(figsize=(6, 5))
    empty = next(iter(data.values())).size == 0
    if kind == "path":
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        if not empty:
            ax.plot(data["x"], data["y"], lw=0.4, color="k")
    elif kind == "loglog-chi":
        _chi_plot(ax, data, empty)
    elif kind == "contour":
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        if not empty:
            _contours(ax, data)
    elif kind == "section":
        ax.set_xlabel("x(2πk)")
        ax.set_ylabel("y(2πk)")
        if not empty:
            ax.scatter(data["x"], data["y"], s=0.5, c=data["traj_id"], cmap="viridis", linewidths=0)
    elif kind == "metrics":
        ax.set_xlabel("t")
        if not empty:
            ax.plot(data["t"], data["D"], "k-", lw=0.8, label="D")
            ax.plot(data["t"], data["H_s"], "k--", lw=0.8, label="H_s")
            if "D_bar" in data:
                ax.plot(data["t"], data["D_bar"], "k:", lw=0.8, label="D̄")
            ax.legend()
    fig.tight_layout()
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return svg_path


def _chi_plot(ax, data, empty):
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("χ")
    if empty:
        return
    t, chi = data["t"], data["chi"]
    keep = (t > 0) & (chi > 0)
    t, chi = t[keep], chi[keep]
    if t.size == 0:
        return
    ax.plot(t, chi, "k-", lw=0.6, label="χ(t)")
    lo = t.max() / 100.0
    tail = t >= lo
    label = "slope −1"
    if np.count_nonzero(tail) >= 3:
        slope = np.polyfit(np.log(t[tail]), np.log(chi[tail]), 1)[0]
        label += f" (fit {slope:.2f})"
    t_ref = np.array([t.min(), t.max()])
    anchor = chi[-1] * t[-1]
    ax.plot(t_ref, anchor / t_ref, "r--", lw=0.8, label=label)
    ax.legend()


def _contours(ax, data):
    xs = np.unique(data["x"])
    ys = np.unique(data["y"])
    if xs.size < 2 or ys.size < 2:
        return
    ix = np.searchsorted(xs, data["x"])
    iy = np.searchsorted(ys, data["y"])
    P = np.full((xs.size, ys.size), math.nan)
    R = np.full((xs.size, ys.size), math.nan)
    P[ix, iy] = data["P_s"]
    R[ix, iy] = data["psi2"]
    ax.contour(xs, ys, R.T, levels=8, colors="0.6", linewidths=0.6)
    ax.contour(xs, ys, P.T, levels=8, colors="k", linewidths=0.8)
    ax.set_aspect("equal")
