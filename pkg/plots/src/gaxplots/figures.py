"""Five figure kinds over the study's CSV artifacts.

Everything here displays columns as-is: no channel math, no reward
math, no learned quantities are recomputed. The requirement lines
(39 us, 1e-7) and the target-area circle are presentation parameters
with study defaults, overridable per spec.

Rendering is deterministic: fixed figure sizes, fixed dpi, pinned PNG
metadata, so the same inputs produce the same bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402
from matplotlib.colors import LogNorm  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402
from matplotlib.patches import Circle  # noqa: E402

from .schema import (  # noqa: E402
    CHANNEL_COLUMNS,
    METRICS_COLUMNS,
    N_AGENTS,
    TRAIN_COLUMNS,
    load_table,
)

__all__ = ["PlotSpec", "KINDS", "build_figure", "render"]

_PNG_META = {"Software": "gaxnet-plots"}
_DPI = 150


@dataclass(frozen=True)
class PlotSpec:
    """One figure request: what to read, what to draw, where to write."""

    kind: str
    inputs: tuple[Path, ...]
    out_path: Path
    labels: tuple[str, ...] = ()
    episode: int | None = None           # trajectory/heatmap row filter
    latency_line_s: float = 3.9e-5       # horizontal requirement line
    error_line: float = 1.0e-7
    target_center: tuple[float, float] = (1875.0, 1875.0)
    target_radius: float = 1200.0
    ma_window: int = 100                 # learning-curve smoothing

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; "
                             f"expected one of {sorted(KINDS)}")
        if not self.inputs:
            raise ValueError("at least one input file required")
        object.__setattr__(self, "inputs",
                           tuple(Path(p) for p in self.inputs))
        object.__setattr__(self, "out_path", Path(self.out_path))

    def label(self, i: int) -> str:
        if i < len(self.labels):
            return self.labels[i]
        return self.inputs[i].stem


def _channel_surface(spec: PlotSpec) -> Figure:
    table = load_table(spec.inputs[0], CHANNEL_COLUMNS)
    d, t, err = table["distance_m"], table["duration_s"], table["error_rate"]

    # the writer appends the operating point; recover the rectangular
    # grid first (grid durations repeat across distances, a lone extra
    # row does not) and mark everything off-grid explicitly
    t_unique, t_counts = np.unique(t, return_counts=True)
    t_vals = t_unique[t_counts > 1] if (t_counts > 1).any() else t_unique
    full_d = [dv for dv in np.unique(d)
              if np.isin(t_vals, t[d == dv]).all()]
    grid = np.full((len(t_vals), len(full_d)), np.nan)
    for j, dv in enumerate(full_d):
        for i, tv in enumerate(t_vals):
            sel = (d == dv) & (t == tv)
            if sel.any():
                grid[i, j] = err[sel][0]
    extras = [(dv, tv, ev) for dv, tv, ev in zip(d, t, err)
              if dv not in full_d or tv not in t_vals]

    fig, ax = plt.subplots(figsize=(7.0, 4.6))
    masked = np.ma.masked_less_equal(grid, 0.0)
    vmin = float(masked.min()) if masked.count() else 1e-30
    mesh = ax.pcolormesh(np.asarray(full_d), t_vals * 1e6, masked,
                         norm=LogNorm(vmin=max(vmin, 1e-30), vmax=1.0),
                         cmap="viridis", shading="nearest")
    fig.colorbar(mesh, ax=ax, label="block error rate")
    if masked.count() and (masked.min() < spec.error_line < masked.max()):
        ax.contour(np.asarray(full_d), t_vals * 1e6, grid,
                   levels=[spec.error_line], colors="red",
                   linewidths=1.2)
    for dv, tv, _ in extras:
        ax.plot(dv, tv * 1e6, marker="*", color="red", markersize=12)
    ax.set_xlabel("ground distance (m)")
    ax.set_ylabel("transmission duration (µs)")
    ax.set_title("error rate over distance and duration")
    fig.tight_layout()
    return fig


def _moving_average(x: np.ndarray, window: int) -> np.ndarray:
    if len(x) < window:
        window = max(1, len(x))
    kernel = np.ones(window) / window
    return np.convolve(x, kernel, mode="valid")


def _learning_curves(spec: PlotSpec) -> Figure:
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    for i, path in enumerate(spec.inputs):
        table = load_table(path, TRAIN_COLUMNS)
        it = table["iteration"]
        reward = table["episode_reward"]
        color = f"C{i}"
        ax.plot(it, reward, color=color, alpha=0.25, linewidth=0.6)
        ma = _moving_average(reward, spec.ma_window)
        ax.plot(it[len(it) - len(ma):], ma, color=color, linewidth=1.8,
                label=spec.label(i))
    ax.set_xlabel("training iteration")
    ax.set_ylabel("episode reward")
    ax.set_title(f"episode reward, {spec.ma_window}-iteration average")
    ax.legend()
    fig.tight_layout()
    return fig


def _episode_rows(table: dict[str, np.ndarray], episode: int | None):
    eps = table["episode"]
    wanted = eps[0] if episode is None else float(episode)
    sel = eps == wanted
    if not sel.any():
        raise ValueError(f"episode {wanted:g} not present "
                         f"(file holds {sorted(set(eps))})")
    return {k: v[sel] for k, v in table.items()}, int(wanted)


def _trajectories(spec: PlotSpec) -> Figure:
    table = load_table(spec.inputs[0], METRICS_COLUMNS)
    rows, episode = _episode_rows(table, spec.episode)

    fig, ax = plt.subplots(figsize=(6.0, 6.0))
    ax.add_patch(Circle(spec.target_center, spec.target_radius,
                        fill=False, linestyle=":", color="gray",
                        label="target area"))
    ax.plot(rows["target_x"], rows["target_y"], color="black",
            linestyle="--", marker=".", label="target")
    for n in range(N_AGENTS):
        x, y = rows[f"agent{n}_x"], rows[f"agent{n}_y"]
        ax.plot(x, y, marker=".", linewidth=1.0, label=f"agent {n}")
        ax.plot(x[0], y[0], marker="o", color=ax.lines[-1].get_color())
        hit = rows[f"collision_{n}"] > 0.5
        if hit.any():
            ax.plot(x[hit], y[hit], linestyle="none", marker="x",
                    color="red", markersize=9, markeredgewidth=2)
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title(f"episode {episode} trajectories")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return fig


def _latency_error(spec: PlotSpec) -> Figure:
    table = load_table(spec.inputs[0], METRICS_COLUMNS)
    rows, episode = _episode_rows(table, spec.episode)
    slots = rows["slot"]

    fig, (ax_lat, ax_err) = plt.subplots(2, 1, figsize=(7.0, 5.6),
                                         sharex=True)
    latency = rows["min_latency_s"]
    reachable = np.isfinite(latency)
    ax_lat.plot(slots[reachable], latency[reachable] * 1e6,
                marker="o", linewidth=1.2, label="achievable latency")
    if (~reachable).any():
        for s in slots[~reachable]:
            ax_lat.axvline(s, color="red", alpha=0.2)
    ax_lat.axhline(spec.latency_line_s * 1e6, color="red", linestyle="--",
                   label=f"requirement {spec.latency_line_s * 1e6:.0f} µs")
    ax_lat.set_ylabel("latency (µs)")
    ax_lat.legend(fontsize=8)

    err = np.maximum(rows["error_rate"], 1e-30)
    ax_err.plot(slots, err, marker="o", linewidth=1.2, color="C1",
                label="error rate")
    ax_err.axhline(spec.error_line, color="red", linestyle="--",
                   label=f"requirement {spec.error_line:g}")
    ax_err.set_yscale("log")
    ax_err.set_xlabel("slot")
    ax_err.set_ylabel("block error rate")
    ax_err.legend(fontsize=8)

    fig.suptitle(f"episode {episode} link quality at the serving agent")
    fig.tight_layout()
    return fig


def _attention_heatmaps(spec: PlotSpec) -> Figure:
    n_panels = len(spec.inputs)
    fig, axes = plt.subplots(1, n_panels,
                             figsize=(4.2 * n_panels + 0.8, 4.2),
                             squeeze=False)
    image = None
    for i, path in enumerate(spec.inputs):
        table = load_table(path, METRICS_COLUMNS)
        if spec.episode is not None:
            table, _ = _episode_rows(table, spec.episode)
        mat = np.empty((N_AGENTS, N_AGENTS))
        for n in range(N_AGENTS):
            for m in range(N_AGENTS):
                mat[n, m] = float(np.mean(table[f"attn_{n}_{m}"]))
        ax = axes[0, i]
        image = ax.imshow(mat, vmin=0.0, vmax=0.5, cmap="magma")
        ax.set_title(spec.label(i), fontsize=10)
        ax.set_xlabel("attended agent")
        if i == 0:
            ax.set_ylabel("attending agent")
        ax.set_xticks(range(N_AGENTS))
        ax.set_yticks(range(N_AGENTS))
        for n in range(N_AGENTS):
            for m in range(N_AGENTS):
                ax.text(m, n, f"{mat[n, m]:.2f}", ha="center", va="center",
                        color="white" if mat[n, m] < 0.35 else "black",
                        fontsize=8)
    fig.colorbar(image, ax=axes.ravel().tolist(), shrink=0.8,
                 label="mean attention weight")
    return fig


KINDS = {
    "channel-surface": _channel_surface,
    "learning-curves": _learning_curves,
    "trajectories": _trajectories,
    "latency-error": _latency_error,
    "attention-heatmaps": _attention_heatmaps,
}


def build_figure(spec: PlotSpec) -> Figure:
    return KINDS[spec.kind](spec)


def render(spec: PlotSpec) -> Path:
    """Draw the figure and write it as PNG; returns the output path."""
    fig = build_figure(spec)
    spec.out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.out_path, dpi=_DPI, metadata=_PNG_META)
    plt.close(fig)
    return spec.out_path
