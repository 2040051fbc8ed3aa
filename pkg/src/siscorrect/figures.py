"""Figure rendering for filter runs.

Figures are written next to the delimited output, under <out>/figures/.
Rendering is deterministic: the Agg backend, a fixed dpi, and stripped
writer metadata keep reruns byte-identical.
"""

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

DPI = 120
_SAVE_KW = {"dpi": DPI, "metadata": {"Software": None}}


def _save(fig, path):
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def render_summary_figure(fig_dir, result, feed):
    """Filter mean with a 5-95% band and the revealed values overlaid."""
    os.makedirs(fig_dir, exist_ok=True)
    t_total = result.steps
    times = np.arange(1, t_total + 1)
    fig, ax = plt.subplots(figsize=(8.0, 4.5))
    ax.fill_between(times, result.q05[:, 0], result.q95[:, 0],
                    alpha=0.3, color="tab:blue", label="5-95% band")
    ax.plot(times, result.means[:, 0], color="tab:blue", label="filter mean")
    known = feed.final_known()[:, 0]
    if known.any():
        ax.plot(times[known], feed.values[known, 0], "o", ms=4,
                color="tab:red", label="observed")
    ax.set_xlabel("time")
    ax.set_ylabel("value")
    ax.legend(loc="best")
    ax.set_title("filter summary")
    fig.tight_layout()
    path = os.path.join(fig_dir, "summary.png")
    _save(fig, path)
    return path


def render_gold_figure(fig_dir, gold_rows):
    """Weighted particle histograms against the exact posterior densities."""
    os.makedirs(fig_dir, exist_ok=True)
    n_panels = len(gold_rows)
    ncols = min(3, n_panels)
    nrows = (n_panels + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols,
                             figsize=(4.0 * ncols, 3.0 * nrows),
                             squeeze=False)
    for k, row in enumerate(gold_rows):
        ax = axes[k // ncols][k % ncols]
        ax.hist(row["particle_values"], bins=40,
                weights=row["particle_weights"], density=True,
                alpha=0.5, color="tab:blue", label="particles")
        sd = np.sqrt(row["oracle_variance"])
        grid = np.linspace(row["oracle_mean"] - 4 * sd,
                           row["oracle_mean"] + 4 * sd, 200)
        dens = np.exp(-0.5 * ((grid - row["oracle_mean"]) / sd) ** 2) \
            / (sd * np.sqrt(2 * np.pi))
        ax.plot(grid, dens, color="tab:red", label="exact")
        ax.set_title(f"time {row['coord']} ({row['kind']})")
    for k in range(n_panels, nrows * ncols):
        axes[k // ncols][k % ncols].set_axis_off()
    axes[0][0].legend(loc="best")
    fig.tight_layout()
    path = os.path.join(fig_dir, "gold_compare.png")
    _save(fig, path)
    return path


def render_ar1_figures(fig_dir, result, feed, gold_rows=None):
    paths = [render_summary_figure(fig_dir, result, feed)]
    if gold_rows:
        paths.append(render_gold_figure(fig_dir, gold_rows))
    return paths


def render_invasion_figures(fig_dir, occupancy, feed=None):
    """Occupancy probability heatmap over (time, cell)."""
    os.makedirs(fig_dir, exist_ok=True)
    t_total, m = occupancy.shape
    fig, ax = plt.subplots(figsize=(max(4.0, 0.5 * m + 2.0),
                                    max(3.0, 0.3 * t_total + 1.5)))
    im = ax.imshow(occupancy, aspect="auto", origin="upper",
                   cmap="viridis", vmin=0.0, vmax=1.0,
                   extent=(0.5, m + 0.5, t_total + 0.5, 0.5))
    fig.colorbar(im, ax=ax, label="occupancy probability")
    if feed is not None:
        det = feed.final_known() & (feed.values > 0)
        rr, cc = np.nonzero(det)
        first = {}
        for r, c in zip(rr, cc):  # rr ascends, so first hit per cell wins
            first.setdefault(c, r)
        if first:
            xs = [c + 1 for c in sorted(first)]
            ys = [first[c] + 1 for c in sorted(first)]
            ax.plot(xs, ys, "x", color="white", ms=6, label="first detection")
            ax.legend(loc="lower right")
    ax.set_xlabel("cell")
    ax.set_ylabel("time")
    ax.set_title("occupancy heatmap")
    fig.tight_layout()
    path = os.path.join(fig_dir, "heatmap.png")
    _save(fig, path)
    return [path]
