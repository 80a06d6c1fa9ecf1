import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bilevel_nav.metrics import (
    EpisodeMetrics,
    aggregate,
    compute_flow_rate,
    count_delta_v,
    count_stop_time,
    detect_deadlock,
    format_table,
)


def test_deadlock_examples():
    assert detect_deadlock([0.0] * 100)
    assert not detect_deadlock([0.0] * 99 + [1.0])
    assert not detect_deadlock([0.005] * 100)  # exactly 0.5 m is progress
    assert not detect_deadlock([0.0] * 50)  # window not yet full


def test_delta_v_examples():
    assert count_delta_v([0.7] * 20) == 0
    assert count_delta_v([0, 1] * 5, 0.05) == 9
    ramp = np.r_[np.arange(0, 1, 0.025), np.full(10, 1.0), np.arange(1, 0, -0.025)]
    assert count_delta_v(ramp, 0.05) == 0


def test_stop_time_examples():
    assert count_stop_time([0.0] * 50) == 50
    assert count_stop_time([0.3] * 50) == 0
    assert count_stop_time([0.0, 0.005, 0.02, -0.001]) == 3


def test_flow_rate_examples():
    assert compute_flow_rate(2, 0.5, 1.333) == pytest.approx(3.0, abs=1e-3)
    assert compute_flow_rate(4, 1.0, 1.0) == 4.0
    assert compute_flow_rate(1, 1.0, 10.0) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        compute_flow_rate(2, 0.0, 1.0)


def episode(**kw):
    base = dict(
        robot_ids=[0, 1],
        reached={0: True, 1: True},
        goal_times={0: 1.5, 1: 2.0},
        collisions=0,
        goal_adjacent_collisions=0,
        wall_collisions=0,
        deadlock=False,
        timeout=False,
        ticks=80,
        stop_ticks={0: 0, 1: 4},
        delta_v={0: 0, 1: 2},
        gap_width=0.5,
        zone_entries={"gap": {0: 20, 1: 40}},
        zone_exits={"gap": {0: 35, 1: 60}},
        dt=0.025,
    )
    base.update(kw)
    return EpisodeMetrics(**base)


def test_episode_metrics_success():
    m = episode()
    assert m.success and m.outcome == "success"
    assert m.completion_time == 2.0
    assert m.makespan == pytest.approx((60 - 20) * 0.025)
    assert m.flow_rate == pytest.approx(2 / (0.5 * 1.0))
    assert m.avg_stop_time == 2.0 and m.avg_delta_v == 1.0


def test_makespan_falls_back_without_zones():
    m = episode(zone_entries={}, zone_exits={})
    assert m.makespan == m.completion_time == 2.0


def test_failed_episode_has_no_flow_rate():
    m = episode(reached={0: True, 1: False}, goal_times={0: 1.5, 1: None}, deadlock=True)
    assert m.outcome == "deadlock"
    assert m.makespan is None and m.flow_rate is None
    m = episode(collisions=1)
    assert m.outcome == "collision" and m.flow_rate is None


def test_summary_is_json_ready():
    import json

    s = episode().summary()
    assert json.loads(json.dumps(s))["outcome"] == "success"


@given(st.lists(st.tuples(st.booleans(), st.integers(0, 3), st.integers(0, 50), st.integers(0, 5)), min_size=1, max_size=10))
def test_aggregate_equals_independent_means(rows):
    eps = []
    for ok, coll, stop, dv in rows:
        eps.append(
            episode(
                reached={0: True, 1: ok},
                goal_times={0: 1.0, 1: 2.0 if ok else None},
                collisions=coll,
                stop_ticks={0: stop, 1: 0},
                delta_v={0: dv, 1: dv},
            )
        )
    row = aggregate("c", eps)
    n = len(rows)
    assert row["episodes"] == n
    assert row["success_rate"] == pytest.approx(sum(ok and c == 0 for ok, c, _, _ in rows) / n)
    assert row["collision_rate"] == pytest.approx(sum(c for _, c, _, _ in rows) / n)
    assert row["stop_time"] == pytest.approx(sum(s / 2 for _, _, s, _ in rows) / n)
    assert row["avg_delta_v"] == pytest.approx(sum(d for _, _, _, d in rows) / n)
    table = format_table([row])
    assert table.splitlines()[0].split("\t")[0] == "cell"
    assert len(table.splitlines()) == 2
