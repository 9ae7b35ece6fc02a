"""Matplotlib figures for reports.

All figures are written as SVG with a fixed hash salt and no date stamp so
that identical inputs give byte-identical files.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import METHODS_ORDER  # noqa: E402

MARKERS = {"rbmd": "o", "advdebias": "s", "roc": "^", "oracle-threshold": "D"}
COLORS = {"rbmd": "#1f77b4", "advdebias": "#d62728", "roc": "#2ca02c",
          "oracle-threshold": "#9467bd"}
EXTRA_MARKERS = "vP*Xh<>p"

STYLE = {
    "svg.hashsalt": "fairshift",
    "font.size": 9,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.dpi": 100,
}


def new_figure(width=5.0, height=None):
    """Figure with the package style; height defaults to the golden ratio."""
    plt.rcParams.update(STYLE)
    if height is None:
        height = width * (np.sqrt(5.0) - 1.0) / 2.0
    return plt.subplots(figsize=(width, height))


def save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches=None)
    plt.close(fig)


def _ordered(methods):
    methods = set(methods)
    known = [m for m in METHODS_ORDER if m in methods]
    return known + sorted(methods - set(known))


def _style(method, k):
    return (MARKERS.get(method, EXTRA_MARKERS[k % len(EXTRA_MARKERS)]),
            COLORS.get(method, "C%d" % (k % 10)))


def pareto_figure(records, path):
    """Accuracy (x) vs P-rule (y), one marker per run.

    Each method's markers sit in an SVG group with id ``markers-<method>``.
    """
    fig, ax = new_figure()
    for k, method in enumerate(_ordered(r.method for r in records)):
        rs = [r for r in records if r.method == method]
        marker, color = _style(method, k)
        sc = ax.scatter([r.accuracy for r in rs], [r.prule for r in rs], marker=marker,
                        s=18, color=color, alpha=0.8, linewidths=0, label=method)
        sc.set_gid("markers-" + method)
    ax.set_xlabel("accuracy")
    ax.set_ylabel("P-rule")
    if records:
        ax.legend(loc="best", frameon=False)
    else:
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1)
    ax.grid(alpha=0.3)
    save(fig, path)


def grid_figure(grid, path):
    """One heatmap of mean proportion-changed per method; excluded cells blank."""
    methods = grid.methods()
    n = max(1, len(methods))
    plt.rcParams.update(STYLE)
    fig, axes = plt.subplots(1, n, figsize=(3.0 * n, 3.0), squeeze=False)
    for ax, method in zip(axes[0], methods):
        values = np.full((4, 4), np.nan)
        for fq in range(4):
            for aq in range(4):
                st = grid.stat(method, fq, aq)
                if st is not None:
                    values[fq, aq] = st.mean
                    ax.text(aq, fq, "%.3g\n±%.2g" % (st.mean, st.std), ha="center",
                            va="center", fontsize=6)
                else:
                    ax.text(aq, fq, "NaN", ha="center", va="center", fontsize=6, color="0.5")
        ax.imshow(np.ma.masked_invalid(values), origin="lower", cmap="Blues",
                  vmin=0.0, vmax=max(0.05, np.nanmax(values) if np.isfinite(values).any() else 0.05))
        ax.set_title(method)
        ax.set_xticks(range(4), ["Q1", "Q2", "Q3", "Q4"])
        ax.set_yticks(range(4), ["Q1", "Q2", "Q3", "Q4"])
        ax.set_xlabel("accuracy quartile")
        ax.set_ylabel("fairness quartile")
    if not methods:
        axes[0][0].set_axis_off()
    fig.tight_layout()
    save(fig, path)


def ratio_histogram_figure(histograms, path):
    """``histograms``: mapping label -> (edges, counts)."""
    fig, ax = new_figure()
    for label, (edges, counts) in histograms.items():
        ax.stairs(counts, edges, label=label, alpha=0.8)
    ax.axvline(1.0, color="0.3", lw=0.8, ls="--")
    ax.axvline(0.0, color="0.3", lw=0.8, ls=":")
    ax.set_xlabel("ratio")
    ax.set_ylabel("count")
    if histograms:
        ax.legend(frameon=False)
    save(fig, path)


def calibration_figure(pairs, path, title=None):
    """Black-box score (x) against debiased score (y) with the 0.5 lines."""
    fig, ax = new_figure(4.0, 4.0)
    if pairs:
        f, g = np.asarray(pairs).T
        ax.scatter(f, g, s=4, alpha=0.4, linewidths=0)
    ax.plot([0, 1], [0, 1], color="0.5", lw=0.8)
    ax.axhline(0.5, color="0.3", lw=0.8, ls="--")
    ax.axvline(0.5, color="0.3", lw=0.8, ls="--")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_xlabel("black-box score f(x)")
    ax.set_ylabel("debiased score g(x)")
    if title:
        ax.set_title(title)
    save(fig, path)


def depth_sweep_figure(sweeps, path):
    """``sweeps``: mapping label -> {depth: f1}."""
    fig, ax = new_figure()
    for label, sweep in sweeps.items():
        depths = sorted(sweep)
        ax.plot(depths, [sweep[d] for d in depths], marker="o", ms=3, label=label)
    ax.set_xlabel("tree depth")
    ax.set_ylabel("F1 (training set)")
    ax.set_ylim(0, 1.02)
    if sweeps:
        ax.legend(frameon=False)
    save(fig, path)


def weights_figure(intercept, weights, feature_names, path):
    """Bar chart of a linear ratio's coefficients."""
    fig, ax = new_figure(5.0, 0.3 * (len(weights) + 1) + 1.0)
    labels = ["intercept"] + list(feature_names)
    values = [intercept] + list(weights)
    colors = ["#d62728" if v < 0 else "#1f77b4" for v in values]
    ax.barh(range(len(values)), values, color=colors)
    ax.set_yticks(range(len(values)), labels)
    ax.invert_yaxis()
    ax.axvline(0.0, color="0.3", lw=0.8)
    ax.set_xlabel("coefficient")
    fig.tight_layout()
    save(fig, path)
