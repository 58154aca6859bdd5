"""Evaluation protocol: consecutive laps, speed-profile sweeps and controller comparison."""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from racelab.controller import FixedLookahead, PurePursuit, ScheduledLookahead
from racelab.environment import LapTimer, LearnedLookahead, racing_vehicle
from racelab.harness.config import ConfigError, ExperimentConfig
from racelab.learning.bundle import BundleError, PolicyBundle
from racelab.localization import MonteCarloLocalizer
from racelab.scenario import load_scenario
from racelab.simulator import Simulator, VehicleState, write_trajectory_log

log = logging.getLogger(__name__)

TRACE_FIELDS = ("t", "x", "y", "theta", "v", "delta", "L_d", "index", "kappa")


@dataclass
class LapReport:
    track: str
    strategy: str
    speed_scale: float
    laps_required: int
    lap_times: list = field(default_factory=list)
    dnf: bool = False
    cause: str | None = None
    traces: dict = field(default_factory=dict)

    @property
    def completed(self) -> int:
        return len(self.lap_times)

    def _stat(self, fn) -> float:
        if self.dnf or not self.lap_times:
            return float("nan")
        return float(fn(np.asarray(self.lap_times)))

    @property
    def mean(self) -> float:
        return self._stat(np.mean)

    @property
    def std(self) -> float:
        return self._stat(np.std)

    @property
    def min(self) -> float:
        return self._stat(np.min)

    @property
    def max(self) -> float:
        return self._stat(np.max)

    def summary(self) -> dict:
        return {"track": self.track, "strategy": self.strategy, "speed_scale": self.speed_scale,
                "laps_required": self.laps_required, "completed": self.completed,
                "dnf": self.dnf, "cause": self.cause, "mean": self.mean, "std": self.std,
                "min": self.min, "max": self.max, "lap_times": list(self.lap_times)}


def make_source(cfg: ExperimentConfig, raceline):
    if cfg.strategy == "fixed":
        return FixedLookahead(cfg.lookahead)
    if cfg.strategy == "scheduled":
        return ScheduledLookahead(cfg.sched_a, cfg.sched_b)
    try:
        bundle = PolicyBundle.load(cfg.policy)
    except BundleError as e:
        raise ConfigError(str(e)) from e
    return LearnedLookahead(bundle, raceline, cfg.horizons, cfg.alpha)


def run_trial(cfg: ExperimentConfig, source=None, keep_traces: bool = True) -> LapReport:
    """Drive ``cfg.laps`` consecutive timed laps starting at rest on waypoint 0.

    With ``cfg.out_lap`` (default) the first pass of the line only starts the
    clock, so every timed lap is a flying lap. Ends early on collision, stall (speed < 0.05 m/s for 2 s) or timeout; any
    of those marks the trial DNF.
    """
    sc = load_scenario(cfg.track, cfg.margin)
    rl = sc.raceline
    source = source if source is not None else make_source(cfg, rl)
    source.reset()
    sim = Simulator(sc.grid, racing_vehicle(latency_steps=cfg.latency_steps), seed=cfg.seed)
    pp = PurePursuit(rl, speed_scale=cfg.speed_scale)
    res = sim.reset(sc.spawn(0))
    state = res.state
    timer = LapTimer(rl)
    timer.reset(0.0, state, armed=not cfg.out_lap)
    mcl = None
    if cfg.mcl:
        mcl = MonteCarloLocalizer(sc.grid, sim.params.scan.angles(), seed=cfg.seed)
        mcl.initialize(state.pose, radius=0.25, heading_spread=0.05)
    kappa = np.asarray(rl.kappa)
    v_mean = float(np.mean(rl.v_max)) * cfg.speed_scale
    t_limit = (cfg.laps + cfg.out_lap) * rl.length / max(v_mean, 0.5) * 3.0 + 20.0
    report = LapReport(sc.name, cfg.strategy, cfg.speed_scale, cfg.laps)
    rows = []
    stall = 0.0
    est = state
    idx = pp.nearest(est)
    while True:
        L = source(est, idx)
        delta, v_target = pp.steer(est, L)
        t_prev = sim.time
        res = sim.step((v_target, delta))
        state = res.state
        if mcl is not None:
            x, y, th = mcl.step((state.v, sim.steer), sim.params.control_period, res.scan)
            est = VehicleState(x, y, th, state.v)
        else:
            est = state
        idx = pp.nearest(est)
        if keep_traces:
            rows.append((sim.time, state.x, state.y, state.theta, state.v, delta, L, idx,
                         kappa[idx]))
        lap = timer.update(t_prev, sim.time, state)
        if lap is not None:
            report.lap_times.append(lap)
            if report.completed >= cfg.laps:
                break
        stall = stall + sim.params.control_period if state.v < 0.05 else 0.0
        cause = None
        if res.collided:
            cause = "collision"
        elif stall >= 2.0:
            cause = "stall"
        elif sim.time > t_limit:
            cause = "timeout"
        if cause is not None:
            report.dnf, report.cause = True, cause
            break
    if keep_traces and rows:
        arr = np.array(rows)
        report.traces = {k: arr[:, i] for i, k in enumerate(TRACE_FIELDS)}
    return report


def sweep_speed_scale(cfg: ExperimentConfig, scales, stop_after_failures: int | None = None,
                      source_factory=None) -> dict:
    """Run one trial per scale in ascending order; a 1.0 baseline row is always included.

    ``stop_after_failures`` ends the sweep after that many consecutive DNFs
    (never before the baseline). Returns the rows, the largest fully completed
    scale, and non-monotone exceptions (passes above the first failure).
    """
    if not len(scales):
        raise ValueError("at least one scale required")
    scales = sorted({float(s) for s in scales} | {1.0})
    rows = []
    failures = 0
    for s in scales:
        rep = run_trial(cfg.replace(speed_scale=s),
                        source=None if source_factory is None else source_factory(),
                        keep_traces=False)
        rows.append({"scale": s, "completed": rep.completed, "dnf": rep.dnf, "cause": rep.cause,
                     "mean_lap": rep.mean})
        failures = failures + 1 if rep.dnf else 0
        if stop_after_failures is not None and failures >= stop_after_failures and s >= 1.0:
            break
    ok = [r["scale"] for r in rows if not r["dnf"]]
    first_fail = next((r["scale"] for r in rows if r["dnf"]), None)
    exceptions = [r["scale"] for r in rows if not r["dnf"] and first_fail is not None
                  and r["scale"] > first_fail]
    return {"rows": rows, "max_full_scale": max(ok) if ok else None,
            "max_full_scale_contiguous": _contiguous_max(rows), "exceptions": exceptions}


def _contiguous_max(rows):
    best = None
    for r in rows:
        if r["dnf"]:
            break
        best = r["scale"]
    return best


def segment_means(report: LapReport, kappa_max: float | None = None, straight: float = 0.02,
                  corner: float = 0.2, corner_fraction: float = 0.6):
    """Mean L_d on straights (|kappa| < ``straight``) and in corners (|kappa| > ``corner``).

    When the track never reaches ``corner`` (``kappa_max`` below it) the corner
    threshold drops to ``corner_fraction * kappa_max`` so the split stays defined.
    Returns ``(straight_mean, corner_mean)``; an empty class gives NaN.
    """
    k = np.abs(report.traces["kappa"])
    L = report.traces["L_d"]
    if kappa_max is not None and kappa_max <= corner:
        corner = corner_fraction * kappa_max
    s = L[k < straight]
    c = L[k > corner]
    return (float(s.mean()) if s.size else float("nan"),
            float(c.mean()) if c.size else float("nan"))


def write_report_csv(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["track", "controller", "speed_scale", "completed", "laps", "dnf", "cause",
                    "mean", "std", "min", "max"])
        for name, r in reports:
            w.writerow([r.track, name, r.speed_scale, r.completed, r.laps_required, r.dnf,
                        r.cause or "", r.mean, r.std, r.min, r.max])


def markdown_table(reports, config_hash: str) -> str:
    lines = [f"config hash: `{config_hash}`", "",
             "| Controller | Scale | Laps | Mean (s) | Std (s) | Min (s) | Max (s) |",
             "|---|---|---|---|---|---|---|"]
    for name, r in reports:
        if r.dnf:
            lines.append(f"| {name} | {r.speed_scale:.2f} | {r.completed}/{r.laps_required} "
                         f"| DNF ({r.cause}) | | | |")
        else:
            lines.append(f"| {name} | {r.speed_scale:.2f} | {r.completed}/{r.laps_required} "
                         f"| {r.mean:.3f} | {r.std:.3f} | {r.min:.3f} | {r.max:.3f} |")
    return "\n".join(lines) + "\n"


def controller_configs(cfg: ExperimentConfig, policy: str | None):
    """(label, config) for every fixed-grid value, the schedule and the learned policy."""
    out = [(f"Fixed L={L:g}", cfg.replace(strategy="fixed", lookahead=L)) for L in cfg.fixed_grid]
    out.append(("Adaptive (scheduled)", cfg.replace(strategy="scheduled")))
    if policy:
        out.append(("Learned", cfg.replace(strategy="learned", policy=str(policy))))
    return out


def compare_controllers(track: str, policy: str | None, cfg: ExperimentConfig,
                        out_dir=None, plots: bool = True) -> dict:
    """For each controller find the largest speed scale it completes, then
    report lap statistics there; writes markdown/CSV tables and SVG plots."""
    cfg = cfg.replace(track=track, policy=str(policy) if policy else None)
    out = Path(out_dir if out_dir is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.json")
    results, reports, sweeps = {}, [], {}
    for name, c in controller_configs(cfg, policy):
        sw = sweep_speed_scale(c, cfg.scales, stop_after_failures=1)
        sweeps[name] = sw
        best = sw["max_full_scale_contiguous"]
        rep = run_trial(c.replace(speed_scale=best if best is not None else min(cfg.scales)))
        reports.append((name, rep))
        results[name] = {"max_full_scale": best, "report": rep.summary()}
        if rep.traces:
            _write_traces(out / f"trace_{_slug(name)}.csv", rep)
    fixed_best = max((sweeps[n]["max_full_scale_contiguous"] or 0.0)
                     for n, _ in controller_configs(cfg, None) if n.startswith("Fixed"))
    h = cfg.config_hash()
    (out / "comparison.md").write_text(f"# {track}\n\n" + markdown_table(reports, h))
    write_report_csv(out / "comparison.csv", reports)
    summary = {"track": track, "config_hash": h, "best_fixed_scale": fixed_best,
               "controllers": results,
               "sweeps": {k: v["rows"] for k, v in sweeps.items()}}
    (out / "comparison.json").write_text(json.dumps(summary, indent=2, default=_nan_json))
    if plots:
        from racelab.harness import plots as P

        sc = load_scenario(track, cfg.margin)
        done = [(n, r) for n, r in reports if r.traces]
        P.plot_trajectories(out / "trajectories.svg", sc, done)
        P.plot_trace_vs_s(out / "lookahead_vs_s.svg", sc, done, "L_d", "lookahead L_d (m)")
        P.plot_trace_vs_s(out / "speed_vs_s.svg", sc, done, "v", "speed (m/s)")
    return summary


def _write_traces(path, rep: LapReport) -> None:
    tr = rep.traces
    write_trajectory_log(path, zip(tr["t"], tr["x"], tr["y"], tr["theta"], tr["v"], tr["delta"],
                                   tr["L_d"]))


def _slug(name: str) -> str:
    return re.sub(r"[^0-9a-z]+", "_", name.lower()).strip("_")


def _nan_json(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def localization_run(cfg: ExperimentConfig, steps: int = 500, start_index: int = 60,
                     radius: float = 2.0, heading_spread: float = 0.1,
                     n_particles: int = 1000) -> dict:
    """Drive with ground-truth pose while a particle filter tracks the car.

    The filter starts spread uniformly over ``radius`` around the true spawn
    pose. Returns per-step position and heading errors of the estimate.
    """
    sc = load_scenario(cfg.track, cfg.margin)
    rl = sc.raceline
    sim = Simulator(sc.grid, racing_vehicle(latency_steps=cfg.latency_steps), seed=cfg.seed)
    pp = PurePursuit(rl, speed_scale=cfg.speed_scale)
    source = make_source(cfg, rl)
    source.reset()
    res = sim.reset(sc.spawn(start_index))
    mcl = MonteCarloLocalizer(sc.grid, sim.params.scan.angles(), n_particles=n_particles,
                              seed=cfg.seed)
    mcl.initialize(res.state.pose, radius=radius, heading_spread=heading_spread)
    pos_err, head_err = [], []
    state = res.state
    for _ in range(steps):
        delta, v_target = pp.steer(state, source(state, pp.nearest(state)))
        res = sim.step((v_target, delta))
        state = res.state
        x, y, th = mcl.step((state.v, sim.steer), sim.params.control_period, res.scan)
        pos_err.append(math.hypot(x - state.x, y - state.y))
        head_err.append(abs(math.remainder(th - state.theta, 2 * math.pi)))
        if res.collided:
            break
    return {"position_error": np.array(pos_err), "heading_error": np.array(head_err),
            "degenerate": mcl.degenerate_count}
