"""SVG figures: trajectories over the track, traces along arc length, training curves."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _close(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def plot_track(ax, scenario, raceline: bool = True):
    tr = scenario.track
    for b in (tr.left_boundary(), tr.right_boundary()):
        pts = np.vstack([b, b[:1]])
        ax.plot(pts[:, 0], pts[:, 1], color="0.2", lw=1.0)
    if raceline:
        xy = np.vstack([scenario.raceline.xy, scenario.raceline.xy[:1]])
        ax.plot(xy[:, 0], xy[:, 1], color="0.6", lw=0.8, ls="--", label="raceline")
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")


def plot_trajectories(path, scenario, reports):
    """``reports``: (label, LapReport) pairs with traces."""
    fig, ax = plt.subplots(figsize=(7, 6))
    plot_track(ax, scenario)
    for name, r in reports:
        ax.plot(r.traces["x"], r.traces["y"], lw=0.8, label=f"{name} ({r.speed_scale:.2f})")
    ax.legend(fontsize=7, loc="best")
    ax.set_title(scenario.name)
    return _close(fig, path)


def plot_trace_vs_s(path, scenario, reports, key: str, ylabel: str, lap: int = -1):
    """Trace ``key`` against raceline arc length over one lap (default: the last)."""
    s_wp = np.asarray(scenario.raceline.s)
    fig, ax = plt.subplots(figsize=(8, 3.5))
    for name, r in reports:
        idx = r.traces["index"].astype(int)
        wraps = np.flatnonzero(np.diff(idx) < -len(s_wp) // 2) + 1
        segs = np.split(np.arange(len(idx)), wraps)
        seg = segs[lap] if len(segs) > 1 else segs[0]
        if seg.size == 0:
            continue
        ax.plot(s_wp[idx[seg]], r.traces[key][seg], lw=0.9, label=name)
    ax.set_xlabel("arc length s (m)")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=7, loc="best")
    return _close(fig, path)


def plot_training_log(path, rows):
    """Evaluation reward, entropy and explained variance against environment steps."""
    steps = np.array([r["step"] for r in rows], dtype=float)
    fig, axes = plt.subplots(3, 1, figsize=(7, 7), sharex=True)
    for ax, key in zip(axes, ("eval_mean_reward", "entropy", "explained_variance")):
        ax.plot(steps, [float(r[key]) for r in rows], lw=1.0)
        ax.set_ylabel(key)
    axes[-1].set_xlabel("environment steps")
    return _close(fig, path)


def plot_raceline(path, scenario):
    fig, (a0, a1) = plt.subplots(1, 2, figsize=(11, 4.5))
    plot_track(a0, scenario)
    rl = scenario.raceline
    a1.plot(rl.s, rl.v_max, lw=1.0)
    a1.set_xlabel("arc length s (m)")
    a1.set_ylabel("v_max (m/s)")
    a0.set_title(scenario.name)
    return _close(fig, path)
