"""Figure rendering from exported CSV data; no numerics beyond plotting.

Every figure id matches one CSV emitted by the solver CLI's `figures`
command.  The plotting convention throughout: solid lines are sell-side
fees, dashed lines buy-side fees; sweep figures map the sweep variable
through a colorbar; value surfaces render as heatmaps over (t, y).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

__all__ = ["FigureSpec", "FigureDataError", "build_figure", "render",
           "line_series", "KNOWN_FIGURES"]


class FigureDataError(ValueError):
    """The CSV does not carry what the figure id requires."""


@dataclass(frozen=True)
class FigureSpec:
    """One renderable figure: source CSV, stable id, optional style tweaks."""

    csv_path: Path
    figure_id: str
    style: dict = field(default_factory=dict)


def _load(spec: FigureSpec, required: list[str]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(spec.csv_path)
    except FileNotFoundError:
        raise FigureDataError(f"{spec.figure_id}: file not found: {spec.csv_path}")
    except pd.errors.EmptyDataError:
        raise FigureDataError(f"{spec.figure_id}: empty CSV: {spec.csv_path}")
    if frame.empty:
        raise FigureDataError(f"{spec.figure_id}: no data rows in {spec.csv_path}")
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise FigureDataError(
            f"{spec.figure_id}: missing columns {missing} in {spec.csv_path} "
            f"(found {list(frame.columns)})")
    return frame


def _fee_axes(ax, title: str):
    ax.set_xlabel("quantity of risky asset in the pool")
    ax.set_ylabel("fee")
    ax.set_title(title)


def _plain_fee_curves(spec: FigureSpec) -> plt.Figure:
    df = _load(spec, ["y", "fee_sell", "fee_buy"])
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    ax.plot(df["y"], df["fee_sell"], "-", color="tab:blue", label="sell fee")
    ax.plot(df["y"], df["fee_buy"], "--", color="tab:blue", label="buy fee")
    _fee_axes(ax, spec.style.get("title", spec.figure_id))
    ax.legend()
    return fig


def _fee_curves_with_linear(spec: FigureSpec) -> plt.Figure:
    df = _load(spec, ["y", "fee_sell", "fee_buy",
                      "linear_fee_sell", "linear_fee_buy"])
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    ax.plot(df["y"], df["fee_sell"], "-", color="tab:blue", label="sell fee")
    ax.plot(df["y"], df["fee_buy"], "--", color="tab:blue", label="buy fee")
    ax.plot(df["y"], df["linear_fee_sell"], "-", color="tab:orange",
            label="linearized sell fee")
    ax.plot(df["y"], df["linear_fee_buy"], "--", color="tab:orange",
            label="linearized buy fee")
    _fee_axes(ax, spec.figure_id)
    ax.legend()
    return fig


def _scaled_by_decay(spec: FigureSpec) -> plt.Figure:
    df = _load(spec, ["k", "y", "scaled_fee_sell", "scaled_fee_buy"])
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    colors = plt.cm.viridis(np.linspace(0.1, 0.9, df["k"].nunique()))
    for color, (k, part) in zip(colors, df.groupby("k", sort=True)):
        ax.plot(part["y"], part["scaled_fee_sell"], "-", color=color,
                label=f"k={k:g}, sell")
        ax.plot(part["y"], part["scaled_fee_buy"], "--", color=color,
                label=f"k={k:g}, buy")
    ax.set_xlabel("quantity of risky asset in the pool")
    ax.set_ylabel("decay-scaled fee")
    ax.set_title(spec.figure_id)
    ax.legend(fontsize=8)
    return fig


def _sweep(spec: FigureSpec, sweep_col: str, facet_col: str | None = None):
    required = [sweep_col, "y", "fee_sell", "fee_buy"]
    if facet_col:
        required.append(facet_col)
    df = _load(spec, required)
    facets = sorted(df[facet_col].unique()) if facet_col else [None]
    fig, axes = plt.subplots(1, len(facets), figsize=(6.4 * len(facets), 4.8),
                             squeeze=False)
    values = np.sort(df[sweep_col].unique())
    norm = plt.Normalize(values.min(), values.max() or 1.0)
    cmap = plt.cm.plasma
    for ax, facet in zip(axes[0], facets):
        sub = df if facet is None else df[df[facet_col] == facet]
        for val, part in sub.groupby(sweep_col, sort=True):
            color = cmap(norm(val))
            ax.plot(part["y"], part["fee_sell"], "-", color=color)
            ax.plot(part["y"], part["fee_buy"], "--", color=color)
        title = spec.figure_id if facet is None else f"{spec.figure_id} ({facet_col}={facet:g})"
        _fee_axes(ax, title)
    fig.colorbar(plt.cm.ScalarMappable(norm=norm, cmap=cmap), ax=axes[0],
                 label=sweep_col)
    return fig


def _time_sweep(spec: FigureSpec) -> plt.Figure:
    df = _load(spec, ["k", "t", "y", "fee_sell", "fee_buy"])
    facets = sorted(df["k"].unique())
    fig, axes = plt.subplots(1, len(facets), figsize=(6.4 * len(facets), 4.8),
                             squeeze=False)
    ys = np.sort(df["y"].unique())
    norm = plt.Normalize(ys.min(), ys.max())
    cmap = plt.cm.viridis
    for ax, k in zip(axes[0], facets):
        sub = df[df["k"] == k]
        for y, part in sub.groupby("y", sort=True):
            part = part.sort_values("t")
            color = cmap(norm(y))
            ax.plot(part["t"], part["fee_sell"], "-", color=color, lw=0.8)
            ax.plot(part["t"], part["fee_buy"], "--", color=color, lw=0.8)
        ax.set_xlabel("time")
        ax.set_ylabel("fee")
        ax.set_title(f"{spec.figure_id} (k={k:g})")
    fig.colorbar(plt.cm.ScalarMappable(norm=norm, cmap=cmap), ax=axes[0],
                 label="quantity in pool")
    return fig


def _surface(spec: FigureSpec, value_col: str) -> plt.Figure:
    df = _load(spec, ["t", "y", value_col])
    pivot = df.pivot(index="y", columns="t", values=value_col)
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    mesh = ax.pcolormesh(pivot.columns.to_numpy(), pivot.index.to_numpy(),
                         pivot.to_numpy(), shading="nearest")
    ax.set_xlabel("time")
    ax.set_ylabel("quantity of risky asset in the pool")
    ax.set_title(spec.figure_id)
    fig.colorbar(mesh, ax=ax, label=value_col)
    return fig


KNOWN_FIGURES = {
    "fig_fees_fa_t05": _plain_fee_curves,
    "fig_fees_fa_klimit": _plain_fee_curves,
    "fig_fees_sa_t05": _plain_fee_curves,
    "fig_fees_sa_klimit": _plain_fee_curves,
    "fig_fees_fa_linear_t05": _fee_curves_with_linear,
    "fig_fees_fa_kscaled": _scaled_by_decay,
    "fig_fees_sa_kscaled": _scaled_by_decay,
    "fig_fees_fa_phi_sweep": lambda spec: _sweep(spec, "phi", facet_col="k"),
    "fig_fees_sa_phi_sweep": lambda spec: _sweep(spec, "phi"),
    "fig_fees_sa_s_sweep": lambda spec: _sweep(spec, "s"),
    "fig_fees_fa_time_sweep": _time_sweep,
    "fig_value_fa": lambda spec: _surface(spec, "g"),
    "fig_value_sa": lambda spec: _surface(spec, "g"),
    "fig_value_diff": lambda spec: _surface(spec, "g_diff"),
}


def build_figure(spec: FigureSpec) -> plt.Figure:
    """Figure object for a spec; raises FigureDataError on schema problems."""
    try:
        builder = KNOWN_FIGURES[spec.figure_id]
    except KeyError:
        raise FigureDataError(f"unknown figure id {spec.figure_id!r}; known: "
                              f"{sorted(KNOWN_FIGURES)}")
    return builder(spec)


def render(spec: FigureSpec, out_dir: Path) -> Path:
    """Write the figure as a PNG named after its id; returns the path."""
    fig = build_figure(spec)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = out_dir / f"{spec.figure_id}.png"
    fig.savefig(out, dpi=130)
    plt.close(fig)
    return out


def line_series(fig: plt.Figure) -> list[np.ndarray]:
    """Plotted (x, y) arrays of every line, in draw order, for round-trips."""
    out = []
    for ax in fig.get_axes():
        for line in ax.get_lines():
            out.append(np.asarray(line.get_xydata()))
    return out
