"""Report figures, written as SVG files next to the CSV outputs."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed element ids and no timestamp keep reruns byte-identical
STYLE = {
    "svg.hashsalt": "d2ea",
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.figsize": (5.0, 3.2),
}

LABELS = {"sim_only": "sim only", "exp_only": "exp only", "d2ea": "two-stage"}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def accuracy_bars(reports, path):
    """Mean absolute error per modeling approach."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        names = list(reports)
        errs = [reports[n].mean_abs_error_pp for n in names]
        bars = ax.bar([LABELS.get(n, n) for n in names], errs, color=["0.6", "0.4", "C0"][: len(names)])
        for b, e in zip(bars, errs):
            ax.annotate(f"{e:.3f}", (b.get_x() + b.get_width() / 2, e), ha="center", va="bottom", fontsize=7)
        ax.set_ylabel("mean |error| on validation (pp)")
        _save(fig, path)


def optimum_sweep(rows, path):
    """Optimal duties and efficiency across the load range.

    ``rows`` are dicts with keys ``p, d1_opt, d2_opt, eta_pred`` and optionally
    ``eta_hw_check``.
    """
    p = np.array([r["p"] for r in rows])
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(5.0, 4.4))
        ax1.plot(p, [r["d1_opt"] for r in rows], "o-", ms=3, label="d1")
        ax1.plot(p, [r["d2_opt"] for r in rows], "s-", ms=3, label="d2")
        ax1.set_ylabel("optimal duty")
        ax1.legend(loc="best")
        ax2.plot(p, [r["eta_pred"] for r in rows], "o-", ms=3, label="surrogate")
        hw = [r.get("eta_hw_check") for r in rows]
        if all(h is not None for h in hw):
            ax2.plot(p, hw, "x--", ms=4, label="oracle")
        ax2.set_xlabel("load (W)")
        ax2.set_ylabel("efficiency (%)")
        ax2.legend(loc="best")
        _save(fig, path)


def incumbent_trace(trace, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(np.arange(len(trace)), trace, drawstyle="steps-post")
        ax.set_xlabel("iteration")
        ax.set_ylabel("best efficiency (%)")
        _save(fig, path)


def data_size(rows, path):
    """Accuracy against training fraction with the min/max band over repeats."""
    frac = np.array([r.fraction for r in rows]) * 100.0
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.fill_between(frac, [r.min_accuracy for r in rows], [r.max_accuracy for r in rows], alpha=0.25)
        ax.plot(frac, [r.mean_accuracy for r in rows], "o-", ms=3)
        ax.set_xlabel("experimental training data used (%)")
        ax.set_ylabel("accuracy (%)")
        _save(fig, path)


def optimality(rows, path):
    """True efficiency reached by each approach's optimum, per load.

    ``rows`` are dicts with ``p``, ``eta_hw_best`` and ``eta_hw_<approach>``.
    """
    p = np.array([r["p"] for r in rows])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(p, [r["eta_hw_best"] for r in rows], "k--", lw=1, label="oracle optimum")
        for key, label in LABELS.items():
            col = f"eta_hw_{key}"
            if col in rows[0]:
                ax.plot(p, [r[col] for r in rows], "o-", ms=3, label=label)
        ax.set_xlabel("load (W)")
        ax.set_ylabel("true efficiency at optimum (%)")
        ax.legend(loc="best")
        _save(fig, path)
