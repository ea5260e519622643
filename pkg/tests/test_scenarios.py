import numpy as np
import pytest

from doublechirp.channel import PacketPlan, draw_channel, synthesize
from doublechirp.css import build_chirp_table
from doublechirp.detector import bcp_series
from doublechirp.preamble import assign_preambles
from doublechirp.scenarios import (SCENARIOS, example1, example2, longest_run,
                                   peak_positions, self_resemblance)

M = 128


def test_longest_run():
    z = np.zeros(1000)
    z[[10, 138, 266, 394, 600]] = 5
    assert longest_run(z, M, 1.0) == 4
    assert longest_run(np.zeros(10), M, 1.0) == 0
    assert list(peak_positions(z, 1.0)) == [10, 138, 266, 394, 600]


@pytest.mark.parametrize("seed", range(5))
def test_scenarios_hold_for_several_channels(seed):
    for fn in SCENARIOS.values():
        result = fn(seed=seed)
        assert result.passed, result.summary()


def test_example2_events():
    r = example2()
    assert sorted(e.ed_id for e in r.events) == [1, 2]


def test_example1_peak_height():
    r = example1(seed=2)
    rng = np.random.default_rng(2)
    h = draw_channel(64, rng)
    peaks = r.series[peak_positions(r.series[:, 0], M / 8), 0]
    assert np.allclose(peaks, M / 2 * np.sum(np.abs(h) ** 2) / 64)


def test_self_resemblance_heights():
    r = self_resemblance(seed=1)
    z = r.series[:, 0]
    peaks = peak_positions(z[M:M + 8 * M], M / 16) + M
    full = z[peaks[:-1]]
    # every window fully inside the preamble carries the whole peak
    assert np.allclose(full, full[0])
    assert z[peaks[-1]] == pytest.approx(full[0] / 4)


@pytest.mark.parametrize("policy,seed", [("sequential", 0), ("random", 1), ("random", 2)])
def test_valid_plans_are_resemblance_free(policy, seed):
    table = build_chirp_table(7)
    plan = assign_preambles(12, M, policy, seed=seed)
    rng = np.random.default_rng(seed)
    for a in plan.assignments[::3]:
        pkt = PacketPlan(a.ed_id, M, [], a)
        h = draw_channel(16, rng)
        stream = synthesize([pkt], {a.ed_id: h}, 0.0, 16, 11 * M, table, 8)
        z = bcp_series(stream, plan, table)
        for j, b in enumerate(plan.assignments):
            run = longest_run(z[:, j], M, M / 4 * np.sum(np.abs(h) ** 2) / 16)
            assert run == (8 if b is a else 0)
