"""Static SVG figures rendered from result tables (Agg backend, byte-deterministic)."""

from __future__ import annotations

import io
import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .output import Table  # noqa: E402

PLOT_KINDS = ("line", "markers", "heatmap")
SNR_CLAMP = 16.0
DATA_GID = "data"


class PlotError(ValueError):
    pass


@dataclass(frozen=True)
class PlotSpec:
    kind: str
    x: str
    y: tuple[str, ...] = ()
    value: str | None = None  # heatmap cell column
    group: str | None = None  # one line per distinct value
    logx: bool = False
    logy: bool = False
    title: str = ""


def _clamped(name: str, values: np.ndarray) -> np.ndarray:
    if name.lower().startswith("snr"):
        return np.clip(values, -SNR_CLAMP, SNR_CLAMP)
    return values


def _numeric(table: Table, name: str) -> np.ndarray:
    if name not in table.columns:
        raise PlotError(f"column {name!r} not in table {table.columns}")
    return np.asarray(table.column(name), dtype=float)


def _draw_lines(ax, table: Table, spec: PlotSpec) -> None:
    x = _numeric(table, spec.x)
    style = dict(marker="o", linestyle="none") if spec.kind == "markers" else dict(linewidth=1.2)
    if spec.group:
        if len(spec.y) != 1:
            raise PlotError("grouped plots take exactly one y column")
        keys = table.column(spec.group)
        y = _clamped(spec.y[0], _numeric(table, spec.y[0]))
        for k in dict.fromkeys(keys):
            sel = np.array([kk == k for kk in keys])
            (line,) = ax.plot(x[sel], y[sel], label=f"{spec.group}={k}", **style)
            line.set_gid(f"{DATA_GID}-{spec.group}-{k}")
        ax.set_ylabel(spec.y[0])
    else:
        for name in spec.y:
            (line,) = ax.plot(x, _clamped(name, _numeric(table, name)), label=name, **style)
            line.set_gid(f"{DATA_GID}-{name}")
        ax.set_ylabel(", ".join(spec.y))
    ax.set_xlabel(spec.x)
    if spec.logx:
        ax.set_xscale("log")
    if spec.logy:
        ax.set_yscale("log")
    if len(ax.lines) > 1:
        ax.legend(fontsize="small", ncols=2 if len(ax.lines) > 5 else 1)


def _draw_heatmap(fig, ax, table: Table, spec: PlotSpec) -> None:
    if len(spec.y) != 1 or spec.value is None:
        raise PlotError("heatmap needs one y column and a value column")
    x, y = _numeric(table, spec.x), _numeric(table, spec.y[0])
    v = _clamped(spec.value, _numeric(table, spec.value))
    xs, ys = np.unique(x), np.unique(y)
    if xs.size * ys.size != v.size:
        raise PlotError("heatmap table is not a full grid")
    grid = np.full((ys.size, xs.size), np.nan)
    grid[np.searchsorted(ys, y), np.searchsorted(xs, x)] = v
    mesh = ax.pcolormesh(xs, ys, grid, shading="nearest", cmap="viridis")
    mesh.set_gid(DATA_GID)
    fig.colorbar(mesh, ax=ax, label=spec.value)
    ax.set_xlabel(spec.x)
    ax.set_ylabel(spec.y[0])
    if spec.logx:
        ax.set_xscale("log")
    if spec.logy:
        ax.set_yscale("log")


def render_svg(table: Table, spec: PlotSpec) -> str:
    """SVG document for ``table``; identical inputs give identical bytes."""
    if spec.kind not in PLOT_KINDS:
        raise PlotError(f"unsupported plot kind {spec.kind!r}; expected one of {PLOT_KINDS}")
    if len(table) == 0:
        raise PlotError("cannot plot an empty table")
    with plt.rc_context({"svg.hashsalt": "qbattery", "svg.fonttype": "path",
                         "path.simplify": False}):
        fig, ax = plt.subplots(figsize=(6.4, 4.4))
        try:
            if spec.kind == "heatmap":
                _draw_heatmap(fig, ax, table, spec)
            else:
                _draw_lines(ax, table, spec)
            if spec.title:
                ax.set_title(spec.title)
            fig.tight_layout()
            buf = io.StringIO()
            fig.savefig(buf, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    return buf.getvalue()


def write_svg(path: str | os.PathLike, table: Table, spec: PlotSpec) -> None:
    """Render first, then write, so a failed render leaves no file behind."""
    svg = render_svg(table, spec)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
