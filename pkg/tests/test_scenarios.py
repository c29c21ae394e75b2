"""The defect scenario suite: expectations, controls, determinism."""

import pytest

from asyncscope.analyzer import Heuristic, Metric
from asyncscope.scenarios import SCENARIOS, UnknownScenario, run_scenario
from asyncscope.tracelog import encode_session
from asyncscope.trace_model import correlate, queuing_time

MS = 1_000_000

DEFECTS = sorted(n for n, s in SCENARIOS.items() if not s.control)
CONTROLS = sorted(n for n, s in SCENARIOS.items() if s.control)


def test_registry_is_balanced():
    assert len(DEFECTS) == 6
    assert len(CONTROLS) == 6


@pytest.mark.parametrize("name", DEFECTS)
def test_defect_scenarios_fire_expected_warnings(name):
    result = run_scenario(name)
    assert result.scenario.expected_warnings, "defect scenarios must expect warnings"
    assert result.fired == result.scenario.expected_warnings
    assert result.passed


@pytest.mark.parametrize("name", CONTROLS)
def test_control_scenarios_fire_nothing(name):
    result = run_scenario(name)
    assert result.fired == frozenset()
    assert result.passed


def test_unknown_scenario_rejected():
    with pytest.raises(UnknownScenario):
        run_scenario("definitely_not_registered")


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_scenarios_are_deterministic(name):
    # One call site: the captured context embeds the caller's line number.
    first, *rest = [run_scenario(name) for _ in range(3)]
    for again in rest:
        assert encode_session(again.session) == encode_session(first.session)
        assert again.report == first.report


def test_sequential_execute_queuing_ladder():
    records = correlate(run_scenario("sequential_execute").session.events)
    assert [queuing_time(r) for r in records] == [i * 30 * MS for i in range(6)]


def test_parallel_execute_zero_queuing():
    records = correlate(run_scenario("parallel_execute").session.events)
    assert [queuing_time(r) for r in records] == [0] * 6


def test_no_cancel_task_runs_to_completion():
    (rec,) = correlate(run_scenario("no_cancel").session.events)
    assert not rec.cancelled
    assert rec.end_ns - rec.start_ns == 25_000 * MS


def test_no_cancel_control_stops_promptly():
    (rec,) = correlate(run_scenario("no_cancel_control").session.events)
    assert rec.cancelled
    assert rec.end_ns <= 101 * MS


def test_queue_overload_fires_all_ratio_heuristics():
    expected = SCENARIOS["queue_overload"].expected_warnings
    assert expected == frozenset(
        (metric, heuristic)
        for metric in (Metric.QUEUING, Metric.LATENCY)
        for heuristic in (Heuristic.HIGH_VARIANCE, Heuristic.MAX_MIN_SPREAD,
                          Heuristic.MAX_MEDIAN_SPREAD)
    )
