"""Figure rendering and data extraction for the supported plot kinds."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .spec import PlotSpec, SpecError, Table, read_table

_PNG_METADATA = {"Software": "figrender"}


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _floats(cells: list[str], column: str) -> np.ndarray:
    try:
        return np.array([float(c) for c in cells])
    except ValueError as exc:
        raise SpecError(f"column {column!r} is not numeric: {exc}")


def _plotted_columns(spec: PlotSpec) -> tuple[str, ...]:
    if spec.kind in ("line", "trajectory"):
        return (spec.x,) + spec.y
    return spec.columns


def extract(spec: PlotSpec, out_csv) -> None:
    """Re-emit exactly the CSV cells the figure would plot, verbatim."""
    table = read_table(spec)
    names = _plotted_columns(spec)
    cols = [table.column(n) for n in names]
    with open(out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        writer.writerows(zip(*cols))


def render(spec: PlotSpec) -> Path:
    table = read_table(spec)
    if spec.kind in ("line", "trajectory"):
        _render_curves(spec, table)
    elif spec.kind == "heatmap":
        _render_heatmap(spec, table)
    else:
        _render_matrix(spec, table)
    return spec.out


def _save(fig, spec: PlotSpec) -> None:
    fig.tight_layout()
    Path(spec.out).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.out, dpi=150, metadata=_PNG_METADATA)


def _render_curves(spec: PlotSpec, table: Table) -> None:
    plt = _plt()
    x = _floats(table.column(spec.x), spec.x)
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    marker = "o" if spec.kind == "trajectory" else None
    for name in spec.y:
        y = _floats(table.column(name), name)
        if spec.absolute:
            y = np.abs(y)
        if spec.yscale == "log":
            y = np.where(y > 0, y, np.nan)
        ax.plot(x, y, marker=marker, markersize=3.5, linewidth=1.2,
                label=name)
    ax.set_xscale(spec.xscale)
    ax.set_yscale(spec.yscale)
    ax.set_xlabel(spec.xlabel or spec.x)
    ax.set_ylabel(spec.ylabel or ", ".join(spec.y))
    if spec.title:
        ax.set_title(spec.title)
    if len(spec.y) > 1:
        ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    _save(fig, spec)
    plt.close(fig)


def _pivot(spec: PlotSpec, table: Table):
    """Long-form (x, y, value) rows to a dense grid with NaN holes."""
    cx, cy, cv = spec.columns
    x = _floats(table.column(cx), cx)
    y = _floats(table.column(cy), cy)
    v = _floats(table.column(cv), cv)
    xs = np.unique(x)
    ys = np.unique(y)
    grid = np.full((ys.size, xs.size), np.nan)
    xi = np.searchsorted(xs, x)
    yi = np.searchsorted(ys, y)
    grid[yi, xi] = v
    return xs, ys, grid


def _render_heatmap(spec: PlotSpec, table: Table) -> None:
    plt = _plt()
    from matplotlib.colors import LogNorm
    xs, ys, grid = _pivot(spec, table)
    if spec.absolute:
        grid = np.abs(grid)
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    masked = np.ma.masked_invalid(grid) if spec.mask_blank else grid
    if spec.vscale == "log":
        masked = np.ma.masked_less_equal(masked, 0.0)
        norm = LogNorm(vmin=float(masked.min()), vmax=float(masked.max()))
        mesh = ax.pcolormesh(xs, ys, masked, norm=norm, cmap="viridis",
                             shading="nearest")
    else:
        mesh = ax.pcolormesh(xs, ys, masked, cmap="viridis",
                             shading="nearest")
    mesh.cmap.set_bad(color="white")
    fig.colorbar(mesh, ax=ax)
    ax.set_xlabel(spec.xlabel or spec.columns[0])
    ax.set_ylabel(spec.ylabel or spec.columns[1])
    if spec.title:
        ax.set_title(spec.title)
    _save(fig, spec)
    plt.close(fig)


def _render_matrix(spec: PlotSpec, table: Table) -> None:
    """Square label-indexed matrix (diagonal/upper/lower carry different
    roles in the producing pipeline); cells annotated, holes blank."""
    plt = _plt()
    from matplotlib.colors import LogNorm
    crow, ccol, cval = spec.columns
    rows = table.column(crow)
    cols = table.column(ccol)
    vals = _floats(table.column(cval), cval)
    labels = list(dict.fromkeys(rows + cols))
    n = len(labels)
    pos = {lab: i for i, lab in enumerate(labels)}
    grid = np.full((n, n), np.nan)
    for r, c, v in zip(rows, cols, vals):
        grid[pos[r], pos[c]] = v
    masked = np.ma.masked_invalid(grid)
    if spec.vscale == "log":
        masked = np.ma.masked_less_equal(masked, 0.0)
    fig, ax = plt.subplots(figsize=(4.6, 4.2))
    norm = (LogNorm(vmin=float(masked.min()), vmax=float(masked.max()))
            if spec.vscale == "log" and masked.count() else None)
    img = ax.imshow(masked, norm=norm, cmap="viridis")
    img.cmap.set_bad(color="white")
    ax.set_xticks(range(n), labels, rotation=45, ha="right", fontsize=8)
    ax.set_yticks(range(n), labels, fontsize=8)
    for i in range(n):
        for j in range(n):
            if not np.isnan(grid[i, j]):
                ax.text(j, i, f"{grid[i, j]:.1e}", ha="center", va="center",
                        fontsize=6, color="white")
    fig.colorbar(img, ax=ax)
    ax.set_xlabel(spec.xlabel)
    ax.set_ylabel(spec.ylabel)
    if spec.title:
        ax.set_title(spec.title)
    _save(fig, spec)
    plt.close(fig)
