"""Figures written next to the CSV reports (Agg backend, no pyplot state)."""
from __future__ import annotations

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

_META = {"Software": None}


def _figure(nrows, ncols, size):
    fig = Figure(figsize=size, dpi=100)
    FigureCanvasAgg(fig)
    axes = fig.subplots(nrows, ncols, squeeze=False)
    return fig, axes


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata=_META)


def plot_trajectory(traj, path):
    t = np.arange(traj.steps + 1)
    fig, ax = _figure(2, 2, (9, 6.5))
    for j, res in enumerate(traj.resources):
        line, = ax[0, 0].plot(t, traj.price[:, j], label=f"{res.name} market")
        ax[0, 0].plot(t, traj.adjusted_price[:, j], "--", color=line.get_color(),
                      label=f"{res.name} adjusted")
        ax[0, 1].plot(t, traj.extraction[:, j], label=res.name)
        ax[1, 0].plot(t, traj.stock[:, j], label=res.name)
    ax[1, 1].plot(t, traj.capital, label="capital")
    ax[1, 1].plot(t, traj.consumption, label="consumption")
    ax[1, 1].plot(t, traj.investment, label="investment")
    titles = ["prices", "extraction", "stocks", "capital accounts"]
    for a, title in zip(ax.flat, titles):
        a.set_title(title)
        a.set_xlabel("step")
        a.legend(fontsize=7)
    _save(fig, path)


def plot_residuals(traj, report, path):
    t = np.arange(traj.steps)
    fig, ax = _figure(1, 3, (11, 3.5))
    for j, res in enumerate(traj.resources):
        ax[0, 0].plot(t, report.hotelling[:, j], marker=".", label=res.name)
        ax[0, 1].plot(t, report.user_cost[:, j], marker=".", label=res.name)
    ax[0, 2].plot(np.arange(traj.steps + 1), report.hartwick, marker=".")
    for a, title in zip(ax.flat, ["Hotelling (relative)", "user cost", "Hartwick"]):
        a.set_title(title)
        a.set_xlabel("step")
        a.axhline(0.0, color="0.6", lw=0.8)
    ax[0, 0].legend(fontsize=7)
    _save(fig, path)


def plot_oracle(solver_extraction, oracle_sequence, names, path):
    T = oracle_sequence.shape[0]
    t = np.arange(T)
    fig, ax = _figure(1, 1, (5, 3.5))
    for j, name in enumerate(names):
        line, = ax[0, 0].plot(t, solver_extraction[:T, j], marker="o", label=f"{name} solver")
        ax[0, 0].step(t, oracle_sequence[:, j], where="mid", color=line.get_color(),
                      ls="--", label=f"{name} oracle")
    ax[0, 0].set_xlabel("period")
    ax[0, 0].set_ylabel("extraction")
    ax[0, 0].legend(fontsize=7)
    _save(fig, path)


def plot_sweep(rows, keys, path, metric="cbar"):
    """Metric against the first swept parameter, one line per remaining combination."""
    fig, ax = _figure(1, 1, (5.5, 4))
    first, rest = keys[0], keys[1:]
    groups = {}
    for row in rows:
        label = ", ".join(f"{k}={row[k]:g}" for k in rest)
        groups.setdefault(label, []).append(row)
    for label, grp in groups.items():
        x = [r[first] for r in grp]
        y = [np.nan if r.get(metric) is None else r[metric] for r in grp]
        ax[0, 0].plot(x, y, marker="o", label=label or metric)
    ax[0, 0].set_xlabel(first)
    ax[0, 0].set_ylabel(metric)
    ax[0, 0].legend(fontsize=7)
    _save(fig, path)
