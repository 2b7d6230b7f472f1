"""The two figure kinds: benchmark boxplots and estimation-process panels.

Figures are built from already-loaded data so tests can inspect the
matplotlib objects; ``render`` is the file-in, file-out wrapper the CLI
uses. Rendering is read-only and deterministic: the same inputs produce
the same figure content.
"""

from dataclasses import dataclass
from pathlib import Path

import matplotlib
matplotlib.use("Agg")  # headless; must precede pyplot
import matplotlib.pyplot as plt
import numpy as np

from .logs import LogFormatError, read_records, read_trial_dump

FIGURE_KINDS = ("benchmark_box", "estimation_panels")

# condition order is fixed so figures from different logs line up
FEATURE_ORDER = ("value", "fixed_hit", "adaptive_hit", "rank")
SENSOR_ORDER = ("calibrated", "sensor_I", "sensor_II")
SENSOR_COLORS = {"calibrated": "#4c72b0", "sensor_I": "#dd8452",
                 "sensor_II": "#55a868"}


@dataclass(frozen=True)
class FigureSpec:
    inputs: tuple[str, ...]          # log / dump paths
    kind: str                        # one of FIGURE_KINDS
    out: str                         # image path (matplotlib picks format)
    panels: tuple[int, ...] | None = None  # 1-based iterations, panel kind only

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise LogFormatError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise LogFormatError("no input paths given")


def render(spec: FigureSpec) -> Path:
    """Build the requested figure and write it to ``spec.out``."""
    if spec.kind == "benchmark_box":
        fig, _ = build_benchmark_figure(read_records(spec.inputs))
    else:
        if len(spec.inputs) != 1:
            raise LogFormatError("estimation_panels takes exactly one trial dump")
        fig, _ = build_panels_figure(read_trial_dump(spec.inputs[0]),
                                     panels=spec.panels)
    out = Path(spec.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


# -- benchmark boxplots -------------------------------------------------------

def _grouped(records):
    """records -> {(feature, sensor): (errors, iterations)}, ok trials only."""
    groups = {}
    for rec in records:
        if rec["status"] != "ok":
            continue
        key = (rec["feature"], rec["sensor"])
        groups.setdefault(key, ([], []))
        groups[key][0].append(rec["localization_error_m"])
        groups[key][1].append(rec["iterations_used"])
    if not groups:
        raise LogFormatError("no successful trials to plot")
    return groups


def build_benchmark_figure(records):
    """Boxplots of localization error and iteration count, one box per
    feature x sensor condition. Returns (figure, condition order)."""
    groups = _grouped(records)
    features = [f for f in FEATURE_ORDER if any(k[0] == f for k in groups)]
    sensors = [s for s in SENSOR_ORDER if any(k[1] == s for k in groups)]

    fig, axes = plt.subplots(2, 1, figsize=(1.8 + 2.1 * len(features), 7.0),
                             sharex=True)
    drawn = []
    width = 0.8 / max(len(sensors), 1)
    for ax, which, label in ((axes[0], 0, "localization error (m)"),
                             (axes[1], 1, "iterations")):
        for j, sensor in enumerate(sensors):
            positions, data = [], []
            for i, feature in enumerate(features):
                if (feature, sensor) in groups:
                    positions.append(i + (j - (len(sensors) - 1) / 2) * width)
                    data.append(groups[feature, sensor][which])
            bp = ax.boxplot(data, positions=positions, widths=width * 0.85,
                            patch_artist=True, medianprops={"color": "black"})
            for box in bp["boxes"]:
                box.set_facecolor(SENSOR_COLORS.get(sensor, "#999999"))
                box.set_alpha(0.75)
            if which == 0:
                drawn.extend((feature, sensor) for feature in features
                             if (feature, sensor) in groups)
        ax.set_ylabel(label)
        ax.grid(axis="y", alpha=0.3)
    axes[1].set_xticks(range(len(features)))
    axes[1].set_xticklabels(features)
    axes[0].legend(handles=[plt.Rectangle((0, 0), 1, 1,
                                          color=SENSOR_COLORS.get(s, "#999999"),
                                          alpha=0.75, label=s)
                            for s in sensors],
                   loc="upper right", title="sensor")
    n_ok = sum(len(v[0]) for v in groups.values())
    axes[0].set_title(f"feature comparison, {n_ok} trials")
    fig.tight_layout()
    return fig, drawn


# -- estimation panels --------------------------------------------------------

def mass_box_diagonal(posterior, cell_size, mass_fraction=0.9):
    """Diagonal (m) of the bounding box of the smallest set of top-probability
    cells jointly holding >= mass_fraction of the posterior mass."""
    p = np.asarray(posterior, dtype=float).ravel()
    order = np.argsort(p)[::-1]
    take = order[: int(np.searchsorted(np.cumsum(p[order]), mass_fraction) + 1)]
    rows, cols = np.unravel_index(take, posterior.shape)
    return float(np.hypot((cols.max() - cols.min() + 1) * cell_size,
                          (rows.max() - rows.min() + 1) * cell_size))


def default_panels(n_iterations: int) -> tuple[int, ...]:
    """First, middle, last recorded iteration (1-based, deduplicated)."""
    picks = sorted({1, (n_iterations + 1) // 2, n_iterations})
    return tuple(picks)


def build_panels_figure(dump: dict, panels=None):
    """Posterior heatmap + trajectory + rank-colored measurements, one panel
    per chosen iteration. Returns (figure, per-panel 90%-mass box diagonals)."""
    n_iter = dump["posteriors"].shape[0]
    panels = tuple(panels) if panels else default_panels(n_iter)
    for k in panels:
        if not 1 <= k <= n_iter:
            raise LogFormatError(
                f"panel iteration {k} outside recorded range 1..{n_iter}")

    cell = float(dump["cell_size"])
    height, width = dump["obstacle_mask"].shape
    extent = (0.0, width * cell, 0.0, height * cell)
    meas_iter = dump["measurement_iterations"]

    fig, axes = plt.subplots(1, len(panels),
                             figsize=(4.4 * len(panels), 4.4 * height / width + 1.2),
                             squeeze=False)
    diagonals = []
    vmax = float(dump["posteriors"][list(k - 1 for k in panels)].max())
    scatter = None
    for ax, k in zip(axes[0], panels):
        post = dump["posteriors"][k - 1]
        ax.imshow(post, origin="lower", extent=extent, cmap="viridis",
                  vmin=0.0, vmax=vmax, interpolation="nearest")
        # obstacles as an opaque overlay
        mask = np.where(dump["obstacle_mask"], 1.0, np.nan)
        ax.imshow(mask, origin="lower", extent=extent, cmap="gray_r",
                  vmin=0.0, vmax=1.0, interpolation="nearest")

        upto = meas_iter <= k
        pos = dump["measurement_positions"][upto]
        if pos.size:
            ax.plot(pos[:, 0], pos[:, 1], color="white", lw=0.8, alpha=0.6)
            scatter = ax.scatter(pos[:, 0], pos[:, 1],
                                 c=dump["measurement_ranks"][upto],
                                 cmap="coolwarm", vmin=0.0, vmax=1.0, s=14,
                                 edgecolors="black", linewidths=0.3, zorder=3)
        tx, ty = (dump["true_cell"] + 0.5) * cell
        ax.plot(tx, ty, marker="*", color="red", markersize=14,
                markeredgecolor="white", zorder=4)

        diag = mass_box_diagonal(post, cell)
        diagonals.append(diag)
        ax.set_title(f"iteration {k}: 90% mass within {diag:.1f} m")
        ax.set_xlim(extent[0], extent[1])
        ax.set_ylim(extent[2], extent[3])
        ax.set_xlabel("x (m)")
    axes[0][0].set_ylabel("y (m)")
    if scatter is not None:
        fig.colorbar(scatter, ax=list(axes[0]), label="measurement rank (EDF)",
                     fraction=0.03, pad=0.02)
    return fig, diagonals
