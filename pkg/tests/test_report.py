"""Histogram arithmetic, ranking, and rendering determinism."""

import json
import pathlib

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asyncscope.report import (
    build_report,
    format_duration,
    histogram,
    render_json,
    render_text,
    report_from_dict,
    report_to_dict,
    write_histogram_csvs,
)
from asyncscope.scenarios import run_scenario
from asyncscope.tracelog import parse_trace, read_trace
from asyncscope.trace_model import TraceSession

DATA = pathlib.Path(__file__).parent / "data"
MS = 1_000_000


def _empty_session(label="empty", session_id="e"):
    return TraceSession(session_id, label, 0, ())


# -- histograms -----------------------------------------------------------------


def test_uniform_split_two_bins():
    bins = histogram([v * MS for v in range(10)], bins=2)
    assert [b.count for b in bins] == [5, 5]


def test_single_value_any_bins():
    bins = histogram([42], bins=7)
    assert sum(b.count for b in bins) == 1
    assert bins[-1].count == 1  # zero-width range collapses to the last bin


def test_histogram_rejects_degenerate_input():
    with pytest.raises(ValueError):
        histogram([], bins=4)
    with pytest.raises(ValueError):
        histogram([1, 2], bins=0)


@settings(max_examples=300)
@given(
    st.lists(st.integers(0, 10**12), min_size=1, max_size=200),
    st.integers(1, 40),
)
def test_histogram_counts_conserved(values, bins):
    out = histogram(values, bins)
    assert len(out) == bins
    assert sum(b.count for b in out) == len(values)
    # Every value falls inside exactly one bin's [lower, upper] span.
    for v in values:
        holders = [
            b for b in out
            if b.lower_ns <= v <= b.upper_ns and b.count > 0
        ]
        assert holders


# -- assembly and ranking ------------------------------------------------------------


def test_empty_report_rendering():
    text = render_text(build_report([_empty_session()]))
    assert b"no UI-triggered asynchronous tasks observed" in text


def test_two_configs_indexed():
    report = build_report([_empty_session("first", "a"), _empty_session("second", "b")])
    assert report.config_entries == ((0, "first"), (1, "second"))


def test_rows_ranked_by_suspiciousness():
    sessions = [
        run_scenario("queue_control").session,
        run_scenario("queue_overload").session,
    ]
    report = build_report(sessions)
    scores = [row.suspiciousness for row in report.rows]
    assert scores == sorted(scores, reverse=True)
    assert report.rows[0].config_index == 1  # the defect config ranks first


def test_group_ref_matches_indices():
    report = build_report([run_scenario("pool_overload").session])
    for row in report.rows:
        assert row.group_ref == f"{row.config_index}-{row.context_index}"
        assert 0 <= row.context_index < len(report.contexts)


# -- rendering ----------------------------------------------------------------------


def test_format_duration_units():
    assert format_duration(999) == "999ns"
    assert format_duration(1_500) == "1.5us"
    assert format_duration(30 * MS) == "30.0ms"
    assert format_duration(2_500_000_000) == "2.50s"


def test_renderings_deterministic():
    session = read_trace(DATA / "sequential_execute.pdt")
    a = build_report([session])
    b = build_report([parse_trace((DATA / "sequential_execute.pdt").read_bytes())])
    assert render_text(a) == render_text(b)
    assert render_json(a) == render_json(b)


def test_golden_text_fixture():
    report = build_report([read_trace(DATA / "sequential_execute.pdt")])
    assert render_text(report) == (DATA / "sequential_execute.txt").read_bytes()


def test_golden_json_fixture():
    report = build_report([read_trace(DATA / "sequential_execute.pdt")])
    assert render_json(report) == (DATA / "sequential_execute.json").read_bytes()


def test_json_round_trip():
    report = build_report([read_trace(DATA / "sequential_execute.pdt")])
    payload = json.loads(render_json(report).decode())
    rebuilt = report_from_dict(payload)
    assert report_to_dict(rebuilt) == report_to_dict(report)
    assert render_json(rebuilt) == render_json(report)


def test_json_round_trip_empty():
    report = build_report([_empty_session()])
    assert report_to_dict(report)["rows"] == []
    rebuilt = report_from_dict(json.loads(render_json(report).decode()))
    assert render_json(rebuilt) == render_json(report)


def test_histogram_csvs(tmp_path):
    report = build_report([read_trace(DATA / "sequential_execute.pdt")])
    written = write_histogram_csvs(report, tmp_path)
    assert sorted(written) == ["0-0_latency.csv", "0-0_queuing.csv"]
    lines = (tmp_path / "0-0_queuing.csv").read_text().splitlines()
    assert lines[0] == "bin_lower_ns,bin_upper_ns,count"
    counts = [int(line.rsplit(",", 1)[1]) for line in lines[1:]]
    assert sum(counts) == 6
