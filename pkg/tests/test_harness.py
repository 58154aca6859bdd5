import json
import math

import numpy as np
import pytest

from racelab.harness.cli import main
from racelab.harness.config import ConfigError, ExperimentConfig
from racelab.harness.trial import (LapReport, compare_controllers, localization_run,
                                   markdown_table, run_trial, segment_means, sweep_speed_scale,
                                   write_report_csv)


def test_config_validation():
    for kw in ({"strategy": "magic"}, {"speed_scale": 0.0}, {"laps": 0},
               {"strategy": "learned"}, {"latency_steps": -1},
               {"train_scale_range": (1.2, 1.0)}, {"train_eval_scales": ()}):
        with pytest.raises(ConfigError):
            ExperimentConfig(**kw)


def test_config_round_trip_and_hash(tmp_path):
    cfg = ExperimentConfig(track="hairpin", speed_scale=1.13, extra={"note": 1})
    cfg.save(tmp_path / "c.json")
    back = ExperimentConfig.load(tmp_path / "c.json")
    assert back == cfg and back.config_hash() == cfg.config_hash()
    assert cfg.replace(seed=1).config_hash() != cfg.config_hash()
    (tmp_path / "bad.json").write_text(json.dumps({"speed": 2}))
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "bad.json")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "missing.json")


def test_report_statistics_recomputed():
    times = [10.1, 10.4, 9.9, 10.0]
    r = LapReport("t", "fixed", 1.0, 4, list(times))
    assert r.completed == 4
    assert r.mean == pytest.approx(sum(times) / 4, abs=1e-9)
    m = sum(times) / 4
    assert r.std == pytest.approx(math.sqrt(sum((t - m) ** 2 for t in times) / 4), abs=1e-9)
    assert (r.min, r.max) == (9.9, 10.4)
    dnf = LapReport("t", "fixed", 1.0, 4, list(times[:2]), dnf=True, cause="collision")
    assert all(math.isnan(v) for v in (dnf.mean, dnf.std, dnf.min, dnf.max))


def test_fixed_oval_repeatable():
    rep = run_trial(ExperimentConfig(track="oval", lookahead=2.0, laps=10), keep_traces=False)
    assert rep.completed == 10 and not rep.dnf
    assert rep.std < 0.01 * rep.mean


def test_trial_deterministic_and_traced():
    cfg = ExperimentConfig(track="oval", laps=1, strategy="scheduled")
    a, b = run_trial(cfg), run_trial(cfg)
    assert a.lap_times == b.lap_times
    assert np.array_equal(a.traces["x"], b.traces["x"])
    L = a.traces["L_d"]
    assert np.all((L >= 0.35) & (L <= 4.0))


def test_overspeed_is_dnf():
    rep = run_trial(ExperimentConfig(track="oval", speed_scale=3.0, laps=2), keep_traces=False)
    assert rep.dnf and rep.cause == "collision" and rep.completed < 2
    assert math.isnan(rep.mean)


def test_standing_start_option():
    flying = run_trial(ExperimentConfig(track="oval", laps=2), keep_traces=False)
    standing = run_trial(ExperimentConfig(track="oval", laps=2, out_lap=False), keep_traces=False)
    assert standing.lap_times[0] > flying.lap_times[0]
    assert standing.lap_times[1] == pytest.approx(flying.lap_times[0], abs=1e-2)


def test_sweep_includes_baseline_sorted():
    res = sweep_speed_scale(ExperimentConfig(track="oval", laps=1), [2.5, 0.9],
                            stop_after_failures=1)
    assert [r["scale"] for r in res["rows"]] == [0.9, 1.0, 2.5]
    assert res["max_full_scale_contiguous"] == 1.0
    assert res["rows"][-1]["dnf"] and res["exceptions"] == []
    with pytest.raises(ValueError):
        sweep_speed_scale(ExperimentConfig(), [])


def test_segment_means_threshold_fallback():
    rep = LapReport("t", "x", 1.0, 1)
    rep.traces = {"kappa": np.array([0.0, 0.01, 0.1, 0.15, -0.14]),
                  "L_d": np.array([3.0, 3.2, 1.0, 1.2, 1.1])}
    s, c = segment_means(rep)
    assert s == pytest.approx(3.1) and math.isnan(c)
    s, c = segment_means(rep, kappa_max=0.15)
    assert c == pytest.approx(1.1)


def test_tables(tmp_path):
    ok = LapReport("oval", "fixed", 1.0, 2, [11.0, 11.2])
    bad = LapReport("oval", "fixed", 1.3, 2, [], dnf=True, cause="collision")
    md = markdown_table([("Fixed L=2", ok), ("Fixed L=1", bad)], "abc")
    assert "`abc`" in md and "| 11.100 |" in md and "DNF (collision)" in md
    write_report_csv(tmp_path / "r.csv", [("a", ok), ("b", bad)])
    rows = (tmp_path / "r.csv").read_text().splitlines()
    assert len(rows) == 3 and rows[2].split(",")[5] == "True"


def test_compare_outputs(tmp_path):
    cfg = ExperimentConfig(laps=1, fixed_grid=(2.0,), scales=(1.0, 1.5))
    summary = compare_controllers("oval", None, cfg, tmp_path, plots=True)
    for f in ("comparison.md", "comparison.csv", "comparison.json", "config.json",
              "trajectories.svg", "lookahead_vs_s.svg", "speed_vs_s.svg"):
        assert (tmp_path / f).exists(), f
    assert summary["best_fixed_scale"] == 1.0
    assert set(summary["controllers"]) == {"Fixed L=2", "Adaptive (scheduled)"}
    assert summary["config_hash"] in (tmp_path / "comparison.md").read_text()


def test_localization_run_short():
    res = localization_run(ExperimentConfig(track="oval"), steps=60, radius=0.3,
                           heading_spread=0.05, n_particles=300)
    assert len(res["position_error"]) == 60
    assert res["position_error"][-1] < 0.3


def test_trial_with_localizer():
    rep = run_trial(ExperimentConfig(track="oval", laps=1, mcl=True), keep_traces=False)
    assert rep.completed == 1 and not rep.dnf


def test_cli_eval(tmp_path, capsys):
    assert main(["eval", "--track", "oval", "--laps", "1", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["completed"] == 1 and (tmp_path / "trajectory.csv").exists()
    assert "lap  1" in capsys.readouterr().out


def test_cli_config_file_and_overrides(tmp_path):
    ExperimentConfig(track="oval", laps=1, speed_scale=3.0).save(tmp_path / "c.json")
    assert main(["eval", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path)]) == 1
    assert main(["eval", "--config", str(tmp_path / "c.json"), "--speed-scale", "1.0",
                 "--out", str(tmp_path)]) == 0


def test_cli_errors(tmp_path, capsys):
    assert main(["eval", "--track", "no_such_track", "--out", str(tmp_path)]) == 2
    assert main(["eval", "--strategy", "learned", "--policy", str(tmp_path / "x.npz"),
                 "--out", str(tmp_path)]) == 2
    assert "error:" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["eval", "--strategy", "bogus"])


def test_cli_learned_defaults_to_packaged_policy(tmp_path):
    from racelab.data import DEFAULT_POLICY

    assert DEFAULT_POLICY.exists()
    assert main(["eval", "--track", "oval", "--strategy", "learned", "--laps", "1",
                 "--out", str(tmp_path)]) == 0
    cfg = json.loads((tmp_path / "report.json").read_text())
    assert cfg["completed"] == 1


def test_cli_raceline_and_sweep(tmp_path, capsys):
    assert main(["raceline", "--track", "oval", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "oval_raceline.csv").exists() and (tmp_path / "oval_raceline.svg").exists()
    assert main(["sweep", "--track", "oval", "--laps", "1", "--scales", "1.0", "2.5",
                 "--out", str(tmp_path)]) == 0
    assert "largest completed scale: 1.0" in capsys.readouterr().out


def test_cli_mcl_demo(capsys):
    assert main(["mcl-demo", "--track", "oval", "--steps", "20"]) == 0
    assert "final:" in capsys.readouterr().out


def test_compare_bit_exact(tmp_path):
    cfg = ExperimentConfig(laps=1, fixed_grid=(2.0,), scales=(1.0,))
    compare_controllers("oval", None, cfg, tmp_path / "a", plots=False)
    compare_controllers("oval", None, cfg, tmp_path / "b", plots=False)
    for f in ("comparison.json", "trace_fixed_l_2.csv", "trace_adaptive_scheduled.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
