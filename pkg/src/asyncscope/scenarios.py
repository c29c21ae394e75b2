"""Deterministic workloads reproducing well-known async misuse patterns,
each paired with a healthy control.

Every scenario runs under a virtual clock, knows which warnings it must
trigger, and is self-verifying: the runner compares the fired warning
set against the stored expectation.
"""

from __future__ import annotations

from dataclasses import dataclass

from .analyzer import Heuristic, HeuristicConfig, Metric
from .clock import ClockSource, VirtualClock
from .report import DiagnosisReport, build_report
from .runtime import ProfilerSession, Task, session_run
from .trace_model import TraceSession

MS = 1_000_000
SEC = 1_000_000_000


class UnknownScenario(Exception):
    pass


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    control: bool
    expected_warnings: frozenset[tuple[Metric, Heuristic]]
    build: object  # Callable[[ProfilerSession], None]


@dataclass(frozen=True)
class ScenarioResult:
    scenario: Scenario
    session: TraceSession
    report: DiagnosisReport
    fired: frozenset[tuple[Metric, Heuristic]]
    passed: bool


SCENARIOS: dict[str, Scenario] = {}


def _register(name, description, expected=(), control=False):
    def wrap(build):
        SCENARIOS[name] = Scenario(
            name=name,
            description=description,
            control=control,
            expected_warnings=frozenset(expected),
            build=build,
        )
        return build

    return wrap


# A stand-in third-party helper that silently routes work through the
# facade's global serial queue unless explicitly given a pool.
def _library_fetch(session: ProfilerSession, label: str, duration_ns: int,
                   pool=None) -> str:
    task = Task(label, synthetic_duration_ns=duration_ns)
    if pool is None:
        return session.facade.execute_default(task)
    return session.facade.execute_on(pool, task)


@_register(
    "sequential_execute",
    "six equal downloads submitted through the facade's default path, "
    "silently serialized on one queue",
    expected=[(Metric.QUEUING, Heuristic.MAX_MIN_SPREAD)],
)
def _sequential_execute(session: ProfilerSession) -> None:
    for i in range(6):
        session.facade.execute_default(
            Task(f"download-{i}", synthetic_duration_ns=30 * MS)
        )


@_register(
    "parallel_execute",
    "the same six downloads routed to an under-capacity pool; all start "
    "immediately",
    control=True,
)
def _parallel_execute(session: ProfilerSession) -> None:
    pool = session.pool_executor(core_size=6, max_size=6)
    for i in range(6):
        session.facade.execute_on(
            pool, Task(f"download-{i}", synthetic_duration_ns=30 * MS)
        )


@_register(
    "blocking_execution",
    "one asynchronous search runs for tens of seconds, gating the UI "
    "update far beyond the not-responding scale",
    expected=[
        (Metric.LATENCY, Heuristic.ABSOLUTE_LATENCY),
        (Metric.LATENCY, Heuristic.ANR_SCALE),
    ],
)
def _blocking_execution(session: ProfilerSession) -> None:
    pool = session.pool_executor(core_size=1, max_size=1)
    pool.submit(Task("search", synthetic_duration_ns=25 * SEC))


@_register(
    "blocking_control",
    "the same search completing promptly",
    control=True,
)
def _blocking_control(session: ProfilerSession) -> None:
    pool = session.pool_executor(core_size=1, max_size=1)
    pool.submit(Task("search", synthetic_duration_ns=50 * MS))


@_register(
    "no_cancel",
    "a stale download is cancelled but its body never checks the signal, "
    "so it runs to completion anyway",
    expected=[
        (Metric.LATENCY, Heuristic.ABSOLUTE_LATENCY),
        (Metric.LATENCY, Heuristic.ANR_SCALE),
    ],
)
def _no_cancel(session: ProfilerSession) -> None:
    key = session.facade.execute_default(
        Task("download", synthetic_duration_ns=25 * SEC, cancellation_check=False)
    )
    session.call_at(100 * MS, lambda: session.cancel(key))


@_register(
    "no_cancel_control",
    "the same download polling for cancellation; it stops at the next check",
    control=True,
)
def _no_cancel_control(session: ProfilerSession) -> None:
    key = session.facade.execute_default(
        Task("download", synthetic_duration_ns=25 * SEC, cancellation_check=True)
    )
    session.call_at(100 * MS, lambda: session.cancel(key))


@_register(
    "pool_overload",
    "a dozen jobs crowd a two-worker pool; later jobs wait through whole "
    "task durations",
    expected=[(Metric.QUEUING, Heuristic.MAX_MIN_SPREAD)],
)
def _pool_overload(session: ProfilerSession) -> None:
    pool = session.pool_executor(core_size=2, max_size=2)
    for i in range(12):
        pool.submit(Task(f"job-{i}", synthetic_duration_ns=20 * MS))


@_register(
    "pool_control",
    "the same dozen jobs on a pool sized for them",
    control=True,
)
def _pool_control(session: ProfilerSession) -> None:
    pool = session.pool_executor(core_size=12, max_size=12)
    for i in range(12):
        pool.submit(Task(f"job-{i}", synthetic_duration_ns=20 * MS))


@_register(
    "queue_overload",
    "a burst of messages, one of them heavy, on a single-worker message "
    "queue; queuing and latency both turn erratic",
    expected=[
        (Metric.QUEUING, Heuristic.HIGH_VARIANCE),
        (Metric.QUEUING, Heuristic.MAX_MIN_SPREAD),
        (Metric.QUEUING, Heuristic.MAX_MEDIAN_SPREAD),
        (Metric.LATENCY, Heuristic.HIGH_VARIANCE),
        (Metric.LATENCY, Heuristic.MAX_MIN_SPREAD),
        (Metric.LATENCY, Heuristic.MAX_MEDIAN_SPREAD),
    ],
)
def _queue_overload(session: ProfilerSession) -> None:
    looper = session.serial_executor()
    for duration_ms in (1, 1, 1, 1, 1, 1, 90, 1):
        looper.submit(Task("message", synthetic_duration_ns=duration_ms * MS))


@_register(
    "queue_control",
    "the same queue under light, evenly spaced load",
    control=True,
)
def _queue_control(session: ProfilerSession) -> None:
    looper = session.serial_executor()
    for i in range(8):
        session.call_at(
            i * 200 * MS,
            lambda: looper.submit(Task("message", synthetic_duration_ns=5 * MS)),
        )


@_register(
    "hidden_library_serialization",
    "a wrapper library silently funnels every fetch through the facade's "
    "global serial queue",
    expected=[(Metric.QUEUING, Heuristic.MAX_MIN_SPREAD)],
)
def _hidden_library(session: ProfilerSession) -> None:
    for i in range(8):
        _library_fetch(session, f"thumbnail-{i}", 25 * MS)


@_register(
    "hidden_library_control",
    "the same wrapper configured with an explicit pool",
    control=True,
)
def _hidden_library_control(session: ProfilerSession) -> None:
    pool = session.pool_executor(core_size=8, max_size=8)
    for i in range(8):
        _library_fetch(session, f"thumbnail-{i}", 25 * MS, pool=pool)


def run_scenario(
    name: str,
    cfg: HeuristicConfig | None = None,
    clock: ClockSource | None = None,
) -> ScenarioResult:
    """Run one registered scenario and check its warning expectations."""
    scenario = SCENARIOS.get(name)
    if scenario is None:
        raise UnknownScenario(f"no scenario named {name!r}")
    clock = clock if clock is not None else VirtualClock()
    session = session_run(
        scenario.build,
        clock=clock,
        config_label=f"scenario {name} ({clock.mode.value} clock)",
        session_id=name,
    )
    report = build_report([session], cfg=cfg)
    fired = frozenset(
        (w.metric, w.heuristic) for row in report.rows for w in row.warnings
    )
    return ScenarioResult(
        scenario=scenario,
        session=session,
        report=report,
        fired=fired,
        passed=fired == scenario.expected_warnings,
    )
