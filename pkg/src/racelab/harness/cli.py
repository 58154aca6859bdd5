"""Command-line entry point: ``racelab <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from racelab.data import DEFAULT_POLICY
from racelab.harness.config import STRATEGIES, ConfigError, ExperimentConfig
from racelab.track import TrackError

log = logging.getLogger("racelab")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--track", help="corpus track name or racetrack CSV path (default oval)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (default runs/latest)")
    p.add_argument("--config", help="JSON experiment config; explicit flags override it")


def _driving(p: argparse.ArgumentParser) -> None:
    # defaults of None defer to --config, then to ExperimentConfig
    p.add_argument("--strategy", choices=STRATEGIES)
    p.add_argument("--lookahead", type=float, help="fixed lookahead (m), default 2.0")
    p.add_argument("--policy", help="policy bundle (.npz) for --strategy learned "
                                    "(default: the packaged policy)")
    p.add_argument("--speed-scale", type=float, help="speed-profile scale, default 1.0")
    p.add_argument("--laps", type=int, help="timed laps, default 10")
    p.add_argument("--mcl", action="store_true", default=None,
                   help="localize with the particle filter")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="racelab", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("raceline", help="optimize a raceline and write CSV plus SVG")
    _common(p)

    p = sub.add_parser("train", help="train a lookahead policy")
    _common(p)
    p.add_argument("--steps", type=int, help="environment steps (default 800000)")
    p.add_argument("--scale-range", type=float, nargs=2, metavar=("LO", "HI"),
                   help="per-episode speed scale range (default 0.95 1.3)")

    p = sub.add_parser("eval", help="run consecutive laps with one controller")
    _common(p)
    _driving(p)

    p = sub.add_parser("sweep", help="find the largest speed scale a controller completes")
    _common(p)
    _driving(p)
    p.add_argument("--scales", type=float, nargs="+")

    p = sub.add_parser("compare", help="fixed grid vs scheduled vs learned on held-out tracks")
    _common(p)
    p.add_argument("--policy", help="policy bundle (.npz), default: the packaged policy")
    p.add_argument("--no-learned", action="store_true", help="skip the learned controller")
    p.add_argument("--tracks", nargs="+", default=["chicane", "hairpin"])
    p.add_argument("--laps", type=int)
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("mcl-demo", help="track the car with the particle filter")
    _common(p)
    _driving(p)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--start-index", type=int, default=60)
    return ap


def make_config(args) -> ExperimentConfig:
    base = ExperimentConfig.load(args.config) if getattr(args, "config", None) else ExperimentConfig()
    kw = {}
    for name in ("track", "seed", "out", "strategy", "lookahead", "policy", "speed_scale", "laps",
                 "mcl"):
        if getattr(args, name, None) is not None:
            kw[name] = getattr(args, name)
    if kw.get("strategy", base.strategy) == "learned" and not kw.get("policy", base.policy):
        kw["policy"] = str(DEFAULT_POLICY)
    return base.replace(**kw)


def cmd_raceline(args) -> int:
    from racelab.harness import plots
    from racelab.scenario import load_scenario

    cfg = make_config(args)
    sc = load_scenario(cfg.track, cfg.margin)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    sc.raceline.write_csv(out / f"{sc.name}_raceline.csv")
    plots.plot_raceline(out / f"{sc.name}_raceline.svg", sc)
    rl = sc.raceline
    print(f"{sc.name}: {len(rl)} waypoints, length {rl.length:.2f} m, "
          f"max |kappa| {np.abs(rl.kappa).max():.4f} 1/m, "
          f"v_max range [{rl.v_max.min():.2f}, {rl.v_max.max():.2f}] m/s")
    return 0


def cmd_train(args) -> int:
    from racelab.harness import plots
    from racelab.harness.training import train_policy

    cfg = make_config(args)
    if args.track is None:
        cfg = cfg.replace(track=cfg.train_track)
    kw = {}
    if args.steps is not None:
        kw["train_steps"] = args.steps
    if args.scale_range is not None:
        kw["train_scale_range"] = tuple(args.scale_range)
    cfg = cfg.replace(**kw)
    out = Path(cfg.out)
    res = train_policy(cfg, out)
    if res.log:
        plots.plot_training_log(out / "training.svg", res.log)
    print(f"wrote {out / 'best_policy.npz'} and {out / 'final_policy.npz'}")
    return 0


def _print_report(rep) -> None:
    status = f"DNF ({rep.cause})" if rep.dnf else "complete"
    print(f"{rep.track} {rep.strategy} scale {rep.speed_scale:.2f}: "
          f"{rep.completed}/{rep.laps_required} laps, {status}")
    for i, t in enumerate(rep.lap_times, 1):
        print(f"  lap {i:2d}: {t:.3f} s")
    if not rep.dnf:
        print(f"  mean {rep.mean:.3f}  std {rep.std:.3f}  min {rep.min:.3f}  max {rep.max:.3f}")


def cmd_eval(args) -> int:
    from racelab.harness.trial import _write_traces, run_trial

    cfg = make_config(args)
    rep = run_trial(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if rep.traces:
        _write_traces(out / "trajectory.csv", rep)
    (out / "report.json").write_text(json.dumps(rep.summary(), indent=2))
    _print_report(rep)
    return 1 if rep.dnf else 0


def cmd_sweep(args) -> int:
    from racelab.harness.trial import sweep_speed_scale

    cfg = make_config(args)
    res = sweep_speed_scale(cfg, args.scales or cfg.scales)
    for r in res["rows"]:
        tag = f"DNF ({r['cause']})" if r["dnf"] else f"mean lap {r['mean_lap']:.3f} s"
        print(f"scale {r['scale']:.2f}: {r['completed']} laps, {tag}")
    print(f"largest completed scale: {res['max_full_scale_contiguous']}")
    if res["exceptions"]:
        print(f"non-monotone passes above first failure: {res['exceptions']}")
    return 0


def cmd_compare(args) -> int:
    from racelab.harness.trial import compare_controllers

    cfg = make_config(args)
    policy = None if args.no_learned else (args.policy or str(DEFAULT_POLICY))
    for track in args.tracks:
        out = Path(cfg.out) / track
        summary = compare_controllers(track, policy, cfg, out,
                                      plots=not args.no_plots)
        print((out / "comparison.md").read_text())
        print(f"best fixed-lookahead scale: {summary['best_fixed_scale']}")
    return 0


def cmd_mcl_demo(args) -> int:
    from racelab.harness.trial import localization_run

    cfg = make_config(args)
    res = localization_run(cfg, steps=args.steps, start_index=args.start_index)
    pe, he = res["position_error"], res["heading_error"]
    for k in range(0, len(pe), max(1, len(pe) // 10)):
        print(f"step {k:4d}: position error {pe[k]:.3f} m, heading error "
              f"{math.degrees(he[k]):.2f} deg")
    print(f"final: {pe[-1]:.3f} m, {math.degrees(he[-1]):.2f} deg; "
          f"degenerate updates {res['degenerate']}")
    return 0


COMMANDS = {"raceline": cmd_raceline, "train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep,
            "compare": cmd_compare, "mcl-demo": cmd_mcl_demo}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, TrackError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
