"""SVG line plots of observer runs.

Rendering goes through the Agg backend with a fixed ``svg.hashsalt`` and no
date metadata, so the same trajectory always produces the same bytes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from gsto.simulator import Trajectory, relative_error  # noqa: E402

_RC = {
    "svg.hashsalt": "gsto",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.0,
}
_META = {"Date": None, "Creator": "gsto"}


def _time_axis(times: np.ndarray) -> tuple[np.ndarray, str]:
    span = times[-1] - times[0]
    if span >= 2 * 86400.0:
        return times / 86400.0, "t [day]"
    return times, "t [s]"


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
    return path


def plot_outputs(traj: Trajectory, path, title: str = "") -> Path:
    """Measured and estimated outputs (top) and the unmeasured states (bottom)."""
    t, xl = _time_axis(traj.times)
    N = traj.N
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(2, N, figsize=(3.2 * N, 4.8), sharex=True, squeeze=False)
        for i in range(N):
            ax = axes[0, i]
            ax.plot(t, traj.y_meas[:, i], color="0.7", label="measured")
            ax.plot(t, traj.y_clean[:, i], "k", label="true")
            ax.plot(t, traj.xhat[:, 2 * i], "C3--", label="estimate")
            ax.set_title(f"x_{i + 1}1")
            ax = axes[1, i]
            ax.plot(t, traj.x[:, 2 * i + 1], "k", label="true")
            ax.plot(t, traj.xhat[:, 2 * i + 1], "C0--", label="estimate")
            ax.set_title(f"x_{i + 1}2")
            ax.set_xlabel(xl)
        axes[0, 0].legend(loc="best", fontsize=7)
        axes[1, 0].legend(loc="best", fontsize=7)
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        return _save(fig, path)


def plot_relative_errors(runs: dict[str, Trajectory], path, title: str = "") -> Path:
    """Per-state relative errors on a log scale, one panel per state, one line per run."""
    first = next(iter(runs.values()))
    t, xl = _time_axis(first.times)
    n = first.x.shape[1]
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(n // 2, 2, figsize=(6.4, 2.0 * (n // 2) + 0.6), sharex=True, squeeze=False)
        for c, (label, tr) in enumerate(runs.items()):
            re = np.maximum(relative_error(tr), 1e-16)
            for s in range(n):
                ax = axes[s // 2, s % 2]
                ax.semilogy(t, re[:, s], color=f"C{c}", label=label)
                ax.set_title(f"|e_{s // 2 + 1}{s % 2 + 1}| / |x_{s // 2 + 1}{s % 2 + 1}|")
        for ax in axes[-1]:
            ax.set_xlabel(xl)
        axes[0, 0].legend(loc="best", fontsize=7)
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        return _save(fig, path)


def plot_lyapunov(times, V_i: np.ndarray, path, in_omega=None) -> Path:
    t, xl = _time_axis(np.asarray(times))
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.4, 3.0))
        for i in range(V_i.shape[1]):
            ax.semilogy(t, np.maximum(V_i[:, i], 1e-300), label=f"V_{i + 1}")
        if in_omega is not None and np.any(in_omega):
            ax.plot(t[in_omega], np.maximum(V_i.sum(axis=1)[in_omega], 1e-300), "k.", ms=2, label="in Omega")
        ax.set_xlabel(xl)
        ax.legend(loc="best", fontsize=7)
        fig.tight_layout()
        return _save(fig, path)
