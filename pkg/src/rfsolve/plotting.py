"""Figures written next to the CSV reports.

Uses the non-interactive Agg backend and strips the PNG ``Software`` tag so
repeated runs produce byte-identical files.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.6),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "lines.linewidth": 1.5,
    "lines.markersize": 4,
}

ORDER_COLORS = {1: "tab:red", 2: "tab:green", 3: "tab:blue"}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)


def _positive(values):
    # log axes cannot show exact zeros
    arr = np.asarray(values, dtype=float)
    return np.where(arr > 0, arr, np.nan)


def plot_error_curves(curves, path, title=None):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for c in curves:
            order = c.metadata["order"]
            ax.plot(c.times, _positive(c.mse), marker="o", color=ORDER_COLORS.get(order),
                    label=f"order {order}, N={c.metadata['N']}")
        ax.set_yscale("log")
        ax.set_xlabel("t")
        ax.set_ylabel("MSE(inversion, reconstruction)")
        ax.invert_xaxis()
        ax.legend()
        if title:
            ax.set_title(title)
        _save(fig, path)


def plot_convergence(report, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        h = 1.0 / np.asarray(report.step_counts, dtype=float)
        label = "exact" if report.exact else f"slope {report.slope:.3f}"
        ax.loglog(h, _positive(report.errors), marker="o", color=ORDER_COLORS.get(report.order), label=label)
        ax.set_xlabel("step size h")
        ax.set_ylabel("terminal error")
        ax.set_title(f"{report.field_name}, order {report.order}")
        ax.legend()
        _save(fig, path)


def plot_ablation(rows, path, title=None):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        labels = [f"order {o}\nN={n}" for o, n, _ in rows]
        ax.bar(labels, [e for _, _, e in rows], color=[ORDER_COLORS.get(o) for o, _, _ in rows])
        ax.set_yscale("log")
        ax.set_ylabel("reconstruction MSE")
        if title:
            ax.set_title(title)
        _save(fig, path)


def plot_edit_study(rows, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        n = [r[0] for r in rows]
        ax.plot(n, [r[1] for r in rows], marker="o", label="to source reconstruction")
        ax.plot(n, [r[2] for r in rows], marker="s", label="to unshared edit")
        ax.set_xlabel("feature-sharing steps")
        ax.set_ylabel("MSE")
        ax.legend()
        _save(fig, path)


def plot_losses(losses, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(np.arange(1, len(losses) + 1), losses, linewidth=0.8)
        ax.set_yscale("log")
        ax.set_xlabel("step")
        ax.set_ylabel("loss")
        _save(fig, path)
