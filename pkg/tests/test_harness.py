import math

import numpy as np
import pytest

from doublechirp.errors import ConfigurationError
from doublechirp.harness import (CSV_FIELDS, MISSED, PerPoint, PerResult, SimConfig, Z95,
                                 correct_span, emit_csv, format_config, parse_config,
                                 read_csv, run_experiment, run_trial, score, snr_at_per,
                                 snr_to_noise_var, trial_rng)
from doublechirp.detector import DetectionEvent
from doublechirp.channel import PacketPlan
from doublechirp.preamble import PreambleAssignment

FAST = dict(trials=5, l_antennas=8, n_users=3)


def test_trial_seed_rule():
    a = trial_rng(7, 3).standard_normal(4)
    b = np.random.default_rng(np.random.SeedSequence([7, 3])).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, trial_rng(7, 4).standard_normal(4))


def test_snr_convention():
    assert snr_to_noise_var(0) == 1.0
    assert snr_to_noise_var(-20) == pytest.approx(100.0)


def test_run_trial_deterministic():
    cfg = SimConfig(**FAST)
    a = run_trial(cfg, 4, -10.0, keep_events=True)
    b = run_trial(cfg, 4, -10.0, keep_events=True)
    assert a == b


def test_high_snr_single_ed_always_correct():
    cfg = SimConfig(n_users=1, trials=100)
    res = run_experiment(cfg.replace(snr_grid_db=[40.0]))
    assert res.points[0].per_overall == 0.0


def test_very_low_snr_misses():
    cfg = SimConfig(n_users=1, trials=20, snr_grid_db=[-40.0])
    p = run_experiment(cfg).points[0]
    # buried signal: nothing detected, or only noise false alarms
    assert p.per_overall == 1.0
    assert p.missed + p.wrong == p.packets


def test_score_rules():
    a = PreambleAssignment(1, 0, 1, 128)
    b = PreambleAssignment(2, 0, 2, 128)
    packets = [PacketPlan(1, 1000, [], a), PacketPlan(2, 3000, [], b)]
    lo, hi = correct_span(1000, 128, 8)
    assert lo <= 1000 + 4 * 128 - 1 <= hi and lo <= 1000 + 8 * 128 - 1 <= hi
    events = [DetectionEvent(1, 1000 + 4 * 128 - 1, (0, 0, 0)),
              DetectionEvent(2, 100, (0, 0, 0)), DetectionEvent(9, 5, (0, 0, 0))]
    assert score(events, packets, 128, 8) == {1: "correct", 2: "wrong"}
    assert score([], packets, 128, 8) == {1: MISSED, 2: MISSED}


def test_perpoint_rates_and_ci():
    p = PerPoint(-10.0, 100, 500, 3, 2)
    assert p.per_overall == pytest.approx(0.01)
    assert p.per_overall >= max(p.per_missed, p.per_wrong)
    assert p.ci_halfwidth == pytest.approx(Z95 * math.sqrt(0.01 * 0.99 / 500))
    lo, hi = p.ci("missed")
    assert lo < p.per_missed < hi


def test_crossing_interpolation():
    snr = [-3, -2, -1, 0]
    per = [1e-1, 1e-2, 1e-4, 0.0]
    # halfway between 1e-2 and 1e-4 in log scale
    assert snr_at_per(snr, per, 1e-3) == pytest.approx(-1.5)
    assert math.isnan(snr_at_per(snr, [0.5] * 4, 1e-3))
    assert snr_at_per([0, 1], [1e-3, 0.0], 1e-3) == 0.0
    assert math.isnan(snr_at_per([0, 1], [1e-4, 0.0], 1e-3))
    res = PerResult([PerPoint(s, 1, 1000, int(r * 1000), 0) for s, r in zip(snr, per)])
    assert res.crossing() == pytest.approx(snr_at_per(res.snr_db, res.per))


def test_csv_round_trip(tmp_path):
    cfg = SimConfig(snr_grid_db=[-10.0, 5.0], **FAST)
    res = run_experiment(cfg)
    path = tmp_path / "per.csv"
    emit_csv(res, path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_FIELDS) and len(lines) == 3
    rows = read_csv(path)
    for row, p in zip(rows, res.points):
        assert row["trials"] == p.trials == 5
        assert row["snr_db"] == pytest.approx(p.snr_db)
        assert row["per_overall"] == pytest.approx(p.per_overall, abs=1e-6)
        assert row["ci_halfwidth"] == pytest.approx(p.ci_halfwidth, abs=1e-6)


def test_csv_edge_cases(tmp_path):
    emit_csv(PerResult([]), tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text() == ",".join(CSV_FIELDS) + "\n"
    with pytest.raises(OSError):
        emit_csv(PerResult([]), tmp_path / "missing" / "e.csv")


def test_parallel_equals_serial():
    cfg = SimConfig(snr_grid_db=[-18.0], **FAST)
    a = run_experiment(cfg)
    b = run_experiment(cfg, threads=2)
    assert a.points == b.points


def test_config_round_trip():
    cfg = SimConfig(sf=8, n_users=4, snr_grid_db=[-5.0, -2.5], policy="random",
                    toa_mean_gap=64.0)
    assert parse_config(format_config(cfg)) == cfg


def test_config_parse_and_errors():
    cfg = parse_config("# comment\nn_users = 5\nsnr_grid_db = -3, -2,-1\n")
    assert cfg.n_users == 5 and cfg.snr_grid_db == [-3.0, -2.0, -1.0]
    for bad in ("n_users 5", "foo = 1", "n_users = five", "n_thr = 9", "n_users = 64",
                "policy = greedy", "trials = 0", "sf = 3"):
        with pytest.raises(ConfigurationError):
            parse_config(bad)


def test_monotone_on_small_run():
    cfg = SimConfig(trials=30, n_users=2, snr_grid_db=[-26.0, -23.0, -20.0, -10.0])
    per = run_experiment(cfg).per
    assert np.all(np.diff(per) <= 1 / 30)
