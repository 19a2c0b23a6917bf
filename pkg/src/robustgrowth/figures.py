"""Figure rendering for the report paths (PNG, Agg backend).

Figures are a visual companion to the delimited artifacts: growth-rate
boxplots from precomputed five-number summaries, and strategy slice plots.
Rendering is headless and deterministic (fixed metadata, no timestamps).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# Fixed metadata keeps PNG bytes reproducible across runs of the same install.
_SAVE_KW = dict(dpi=150, metadata={"Software": "robustgrowth"})

_REFERENCE_STYLE = {
    "lambda_p": dict(color="#1a7a3c", ls="--"),
    "lambda_pi": dict(color="#b4351f", ls="--"),
    "g_star_under_hat": dict(color="#7a5ea8", ls=":"),
    "growth_gap": dict(color="#927608", ls="-."),
}


def growth_boxplot_figure(report, path, title=None, reference_keys=None):
    """Boxplots of per-path growth samples, grouped by strategy with one box
    per snapshot time (lighter to darker), plus dashed analytic reference
    lines taken from ``report.references``."""
    times = list(report.snapshot_times)
    names = list(report.strategy_names)
    n_t = len(times)
    cmap = plt.get_cmap("Blues")
    shades = [cmap(0.35 + (0.55 * j / max(1, n_t - 1))) for j in range(n_t)]

    boxes, positions, labels = [], [], []
    for si, name in enumerate(names):
        for ti, t in enumerate(times):
            st = report.box(name, t)
            boxes.append({
                "med": st.median, "q1": st.q1, "q3": st.q3,
                "whislo": st.whisker_lo, "whishi": st.whisker_hi,
                "mean": st.mean, "fliers": [],
            })
            positions.append(si * (n_t + 1) + ti)
            labels.append(f"{name}\nT={t:g}")

    fig, ax = plt.subplots(figsize=(1.1 * len(boxes) + 3.0, 4.5))
    arts = ax.bxp(boxes, positions=positions, showmeans=True, showfliers=False,
                  patch_artist=True,
                  meanprops=dict(marker="^", markerfacecolor="black",
                                 markeredgecolor="black", markersize=5),
                  medianprops=dict(color="black"))
    for k, patch in enumerate(arts["boxes"]):
        patch.set_facecolor(shades[k % n_t])
        patch.set_edgecolor("black")
    ax.set_xticks(positions)
    ax.set_xticklabels(labels, fontsize=8)

    refs = report.references or {}
    keys = reference_keys if reference_keys is not None else sorted(refs)
    for key in keys:
        if key not in refs:
            continue
        style = _REFERENCE_STYLE.get(key, dict(color="gray", ls="--"))
        ax.axhline(refs[key], lw=1.2, label=f"{key} = {refs[key]:.6g}", **style)
    if keys:
        ax.legend(loc="best", fontsize=8)

    ax.set_ylabel("realized growth rate (1/T) log V_T")
    ax.grid(True, axis="y", alpha=0.3)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def slice_figure(table, path, hat_limit=None, title=None):
    """Strategy slices: theta*(x, y) curves shaded light to dark as the factor
    value increases, against the factor-blind theta_hat(x) in black."""
    cmap = plt.get_cmap("viridis")
    ny = table.y_values.size
    fig, ax = plt.subplots(figsize=(7.0, 4.6))
    for j, y in enumerate(table.y_values):
        frac = j / max(1, ny - 1)
        label = None
        if j == 0 or j == ny - 1:
            label = f"theta* at y={y:g}"
        ax.plot(table.x_grid, table.theta_star[j], color=cmap(0.85 * frac),
                lw=1.2, label=label)
    ax.plot(table.x_grid, table.theta_hat, color="black", ls="--", lw=1.8,
            label="theta_hat")
    if hat_limit is not None:
        for sign in (+1.0, -1.0):
            ax.axhline(sign * hat_limit, color="black", ls=":", lw=0.9)
        ax.annotate(f"limit {hat_limit:.4g}",
                    xy=(table.x_grid[-1], hat_limit),
                    fontsize=7, ha="right", va="bottom")
    ax.set_xlabel("x (spread)")
    ax.set_ylabel("holdings fraction theta")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def ergodic_figure(report, path, title=None):
    """Bar chart of time-average vs target with 3 SE error bars."""
    names = [r.name for r in report.rows]
    averages = np.array([r.time_average for r in report.rows])
    targets = np.array([r.target for r in report.rows])
    ses = np.array([r.se for r in report.rows])
    x = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(1.6 * len(names) + 2.5, 4.0))
    ax.bar(x - 0.18, averages, width=0.36, yerr=3.0 * ses, capsize=4,
           color="#4878a8", label="time average (3 SE)")
    ax.bar(x + 0.18, targets, width=0.36, color="#a8a8a8", label="target")
    ax.set_xticks(x)
    ax.set_xticklabels(names, fontsize=9)
    ax.grid(True, axis="y", alpha=0.3)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path
