"""Event/record vocabulary shared by the runtime, codec, and analyzer.

Everything here is an immutable value. The only nontrivial operation is
``correlate``, which folds an ordered event stream into per-task records.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field


class MechanismFamily(enum.Enum):
    """Threading style behind an asynchronous submission mechanism."""

    NON_REUSABLE = "non-reusable"
    LOOPER_HANDLER = "looper-handler"
    POOL_BASED = "pool-based"


class Mechanism(enum.Enum):
    """The six submission mechanisms the runtime instruments.

    The value tuple is (wire tag, family); the family is a pure function
    of the mechanism.
    """

    NEW_THREAD = ("THREAD", MechanismFamily.NON_REUSABLE)
    HANDLER_LOOPER = ("LOOPER", MechanismFamily.LOOPER_HANDLER)
    ASYNC_QUERY = ("AQUERY", MechanismFamily.LOOPER_HANDLER)
    POOL_EXECUTOR = ("POOL", MechanismFamily.POOL_BASED)
    ASYNC_FACADE = ("AFACADE", MechanismFamily.POOL_BASED)
    SERIAL_SERVICE = ("SERVICE", MechanismFamily.LOOPER_HANDLER)

    @property
    def wire_tag(self) -> str:
        return self.value[0]

    @property
    def family(self) -> MechanismFamily:
        return self.value[1]

    @classmethod
    def from_wire_tag(cls, tag: str) -> "Mechanism":
        for m in cls:
            if m.wire_tag == tag:
                return m
        raise KeyError(tag)


class EventKind(enum.Enum):
    SPAWN = "SPAWN"
    SCHEDULE = "SCHED"
    START = "START"
    END = "END"
    CANCEL = "CANCEL"


@dataclass(frozen=True)
class ThreadIdentity:
    """A thread within one trace session.

    ``parent_thread_id`` is the creator thread, when known; the main
    thread is the unique thread with ``is_main`` set and no parent.
    """

    thread_id: int
    parent_thread_id: int | None = None
    is_main: bool = False

    def __post_init__(self) -> None:
        if self.thread_id < 0:
            raise ValueError("thread_id must be non-negative")
        if self.is_main and self.parent_thread_id is not None:
            raise ValueError("main thread cannot have a parent")


def context_fingerprint(frames: tuple[str, ...]) -> int:
    """Stable 64-bit digest of a normalized frame list."""
    digest = hashlib.blake2b(
        "\x1f".join(frames).encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big")


@dataclass(frozen=True)
class ExecutionContext:
    """Call frames captured at schedule time, innermost first.

    Each frame is a ``unit:symbol:line-or-0`` string. The fingerprint is
    an index accelerator only; grouping always compares the full frame
    list, so digest collisions cannot merge distinct contexts.
    """

    frames: tuple[str, ...]
    fingerprint: int = field(default=0)

    @classmethod
    def from_frames(cls, frames: tuple[str, ...]) -> "ExecutionContext":
        return cls(frames=frames, fingerprint=context_fingerprint(frames))

    def as_string(self) -> str:
        return ";".join(self.frames)


@dataclass(frozen=True)
class TaskEvent:
    """One timestamped lifecycle event for a task on a thread.

    ``timestamp_ns`` is monotonic nanoseconds since session start.
    Schedule events carry the submission context; Spawn events announce
    a new thread and carry neither mechanism nor task key.
    """

    timestamp_ns: int
    kind: EventKind
    mechanism: Mechanism | None
    task_key: str | None
    thread: ThreadIdentity
    context: ExecutionContext | None = None
    detail: str | None = None


@dataclass(frozen=True)
class TaskRecord:
    """A correlated task: request, start, and end times plus identity."""

    task_key: str
    mechanism: Mechanism
    context: ExecutionContext
    requested_by: ThreadIdentity
    request_ns: int
    executed_on: ThreadIdentity | None = None
    start_ns: int | None = None
    end_ns: int | None = None
    cancelled: bool = False


@dataclass(frozen=True)
class TraceSession:
    """A complete run: header info plus the ordered event list."""

    session_id: str
    config_label: str
    clock_origin_ns: int
    events: tuple[TaskEvent, ...]


class CorrelationError(Exception):
    """Malformed event stream handed to ``correlate``."""


class DanglingEvent(CorrelationError):
    """Start/End/Cancel with no prior Schedule for its key."""


class DuplicateSchedule(CorrelationError):
    """The same (mechanism, task_key) scheduled twice."""


class OrderViolation(CorrelationError):
    """Lifecycle events out of order for one key (e.g. End before Start)."""


def queuing_time(record: TaskRecord) -> int | None:
    """Nanoseconds between scheduling and start, or None if never started."""
    if record.start_ns is None:
        return None
    return record.start_ns - record.request_ns


def latency(record: TaskRecord) -> int | None:
    """Nanoseconds between start and end, or None if not finished."""
    if record.start_ns is None or record.end_ns is None:
        return None
    return record.end_ns - record.start_ns


class _Open:
    __slots__ = (
        "context", "requested_by", "request_ns",
        "executed_on", "start_ns", "end_ns", "cancelled", "closed", "order",
    )

    def __init__(self, ev: TaskEvent, order: int) -> None:
        self.context = ev.context
        self.requested_by = ev.thread
        self.request_ns = ev.timestamp_ns
        self.executed_on: ThreadIdentity | None = None
        self.start_ns: int | None = None
        self.end_ns: int | None = None
        self.cancelled = False
        self.closed = False
        self.order = order


def correlate(events: list[TaskEvent] | tuple[TaskEvent, ...]) -> list[TaskRecord]:
    """Fold an ordered event stream into one record per scheduled task.

    Raises a ``CorrelationError`` subclass on unmatched or out-of-order
    events; nothing is silently dropped. Records come back sorted by
    request time with submission order as the stable tie-break.
    """
    states: dict[tuple[Mechanism | None, str], _Open] = {}
    order = 0
    for ev in events:
        if ev.kind is EventKind.SPAWN:
            continue
        key = (ev.mechanism, ev.task_key)
        if ev.kind is EventKind.SCHEDULE:
            if key in states:
                raise DuplicateSchedule(f"task {ev.task_key!r} scheduled twice")
            if ev.context is None:
                raise CorrelationError(f"Schedule for {ev.task_key!r} has no context")
            states[key] = _Open(ev, order)
            order += 1
            continue
        st = states.get(key)
        if st is None:
            raise DanglingEvent(f"{ev.kind.name} for unknown task {ev.task_key!r}")
        if ev.kind is EventKind.START:
            if st.closed or st.start_ns is not None:
                raise OrderViolation(f"unexpected Start for {ev.task_key!r}")
            if ev.timestamp_ns < st.request_ns:
                raise OrderViolation(f"Start precedes Schedule for {ev.task_key!r}")
            st.start_ns = ev.timestamp_ns
            st.executed_on = ev.thread
        elif ev.kind is EventKind.END:
            if st.closed:
                raise OrderViolation(f"End after close for {ev.task_key!r}")
            if st.start_ns is None:
                raise OrderViolation(f"End before Start for {ev.task_key!r}")
            if ev.timestamp_ns < st.start_ns:
                raise OrderViolation(f"End precedes Start for {ev.task_key!r}")
            st.end_ns = ev.timestamp_ns
            st.closed = True
        elif ev.kind is EventKind.CANCEL:
            if st.closed:
                raise OrderViolation(f"Cancel after close for {ev.task_key!r}")
            st.cancelled = True
            if st.start_ns is not None:
                if ev.timestamp_ns < st.start_ns:
                    raise OrderViolation(f"Cancel precedes Start for {ev.task_key!r}")
                # A running task closed by cancellation: its running time counts.
                st.end_ns = ev.timestamp_ns
            st.closed = True
    records = [
        TaskRecord(
            task_key=k[1],
            mechanism=k[0],  # type: ignore[arg-type]
            context=st.context,  # type: ignore[arg-type]
            requested_by=st.requested_by,
            request_ns=st.request_ns,
            executed_on=st.executed_on,
            start_ns=st.start_ns,
            end_ns=st.end_ns,
            cancelled=st.cancelled,
        )
        for k, st in sorted(states.items(), key=lambda kv: (kv[1].request_ns, kv[1].order))
    ]
    return records
