"""Line-based trace log format (`.pdt`): writer and parser.

One record per line, '|'-separated fields, ';'-separated context frames,
percent escaping for the delimiter characters. UTF-8, LF line endings.
The format is versioned by the `PD1` prefix.
"""

from __future__ import annotations

from .trace_model import (
    EventKind,
    ExecutionContext,
    Mechanism,
    TaskEvent,
    ThreadIdentity,
    TraceSession,
)

MAGIC = "PD1"
FILE_EXTENSION = ".pdt"

_EVENT_FIELDS = 12  # PD1|EV|seq|ts|kind|mech|key|tid|ptid|is_main|context|detail


class TraceLogError(Exception):
    """Base for codec failures; `line_no` positions the failure (1-based,
    0 when the whole stream is at fault)."""

    def __init__(self, message: str, line_no: int = 0) -> None:
        super().__init__(f"line {line_no}: {message}" if line_no else message)
        self.line_no = line_no


class MissingHeader(TraceLogError):
    pass


class MalformedLine(TraceLogError):
    pass


class NonMonotonicSeq(TraceLogError):
    pass


class UnknownKind(TraceLogError):
    pass


def _escape(value: str) -> str:
    out = (
        value.replace("%", "%25")
        .replace("|", "%7C")
        .replace(";", "%3B")
        .replace("\n", "%0A")
    )
    # A bare underscore is the absent-field sentinel; keep it round-trippable.
    return "%5F" if out == "_" else out


def _unescape(value: str, line_no: int) -> str:
    if "%" not in value:
        return value
    parts = value.split("%")
    out = [parts[0]]
    for chunk in parts[1:]:
        if len(chunk) < 2:
            raise MalformedLine(f"truncated escape near {chunk!r}", line_no)
        try:
            out.append(chr(int(chunk[:2], 16)))
        except ValueError:
            raise MalformedLine(f"bad escape %{chunk[:2]!r}", line_no) from None
        out.append(chunk[2:])
    return "".join(out)


def _opt(value: str | None) -> str:
    return "_" if value is None else _escape(value)


def encode_event(event: TaskEvent, seq: int) -> str:
    """Serialize one event to its log line (without the newline)."""
    if event.context is not None:
        context = ";".join(_escape(f) for f in event.context.frames)
        if context == "_":
            context = "%5F"
    else:
        context = "_"
    thread = event.thread
    return "|".join(
        (
            MAGIC,
            "EV",
            str(seq),
            str(event.timestamp_ns),
            event.kind.value,
            event.mechanism.wire_tag if event.mechanism is not None else "_",
            _opt(event.task_key),
            str(thread.thread_id),
            "_" if thread.parent_thread_id is None else str(thread.parent_thread_id),
            "1" if thread.is_main else "0",
            context,
            _opt(event.detail),
        )
    )


def encode_session(session: TraceSession) -> bytes:
    """Serialize a whole session; deterministic bytes, LF terminated lines."""
    lines = [
        "|".join(
            (
                MAGIC,
                "SESSION",
                _escape(session.session_id),
                _escape(session.config_label),
                str(session.clock_origin_ns),
            )
        )
    ]
    lines.extend(
        encode_event(event, seq) for seq, event in enumerate(session.events, start=1)
    )
    return ("\n".join(lines) + "\n").encode("utf-8")


def _parse_int(text: str, what: str, line_no: int, minimum: int = 0) -> int:
    try:
        value = int(text)
    except ValueError:
        raise MalformedLine(f"{what} is not an integer: {text!r}", line_no) from None
    if value < minimum:
        raise MalformedLine(f"{what} below {minimum}: {value}", line_no)
    return value


def _parse_event_line(fields: list[str], line_no: int) -> tuple[int, TaskEvent]:
    if len(fields) != _EVENT_FIELDS:
        raise MalformedLine(
            f"expected {_EVENT_FIELDS} fields, got {len(fields)}", line_no
        )
    seq = _parse_int(fields[2], "seq", line_no, minimum=1)
    timestamp_ns = _parse_int(fields[3], "timestamp", line_no)
    try:
        kind = EventKind(fields[4])
    except ValueError:
        raise UnknownKind(f"unknown event kind {fields[4]!r}", line_no) from None

    if fields[5] == "_":
        mechanism = None
    else:
        try:
            mechanism = Mechanism.from_wire_tag(fields[5])
        except KeyError:
            raise MalformedLine(f"unknown mechanism {fields[5]!r}", line_no) from None
    task_key = None if fields[6] == "_" else _unescape(fields[6], line_no)

    if kind is EventKind.SPAWN:
        if mechanism is not None or task_key is not None:
            raise MalformedLine("Spawn must not carry mechanism/task_key", line_no)
    else:
        if mechanism is None or task_key is None:
            raise MalformedLine(f"{kind.value} requires mechanism and task_key", line_no)

    thread_id = _parse_int(fields[7], "thread_id", line_no)
    parent = None if fields[8] == "_" else _parse_int(fields[8], "parent_thread_id", line_no)
    if fields[9] not in ("0", "1"):
        raise MalformedLine(f"is_main must be 0 or 1, got {fields[9]!r}", line_no)
    is_main = fields[9] == "1"
    try:
        thread = ThreadIdentity(thread_id, parent, is_main)
    except ValueError as exc:
        raise MalformedLine(str(exc), line_no) from None

    if fields[10] == "_":
        context = None
    else:
        frames = tuple(
            _unescape(frame, line_no) for frame in fields[10].split(";")
        )
        context = ExecutionContext.from_frames(frames)
    if kind is EventKind.SCHEDULE and context is None:
        raise MalformedLine("Schedule requires a context", line_no)
    if kind is not EventKind.SCHEDULE and context is not None:
        raise MalformedLine(f"{kind.value} must not carry a context", line_no)

    detail = None if fields[11] == "_" else _unescape(fields[11], line_no)
    return seq, TaskEvent(
        timestamp_ns=timestamp_ns,
        kind=kind,
        mechanism=mechanism,
        task_key=task_key,
        thread=thread,
        context=context,
        detail=detail,
    )


def parse_trace(data: bytes) -> TraceSession:
    """Decode a `.pdt` byte stream back into a session.

    Every failure is a positioned :class:`TraceLogError`; arbitrary input
    never escapes as another exception type.
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedLine(f"invalid UTF-8: {exc}", 0) from None
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise MissingHeader("empty stream")

    header = lines[0].split("|")
    if len(header) != 5 or header[0] != MAGIC or header[1] != "SESSION":
        raise MissingHeader("stream does not begin with a PD1|SESSION header")
    session_id = _unescape(header[2], 1)
    config_label = _unescape(header[3], 1)
    clock_origin_ns = _parse_int(header[4], "clock_origin_ns", 1)

    events: list[TaskEvent] = []
    last_seq = 0
    for line_no, line in enumerate(lines[1:], start=2):
        fields = line.split("|")
        if len(fields) < 2 or fields[0] != MAGIC or fields[1] != "EV":
            raise MalformedLine("not a PD1|EV record", line_no)
        seq, event = _parse_event_line(fields, line_no)
        if seq <= last_seq:
            raise NonMonotonicSeq(
                f"seq {seq} after {last_seq}", line_no
            )
        last_seq = seq
        events.append(event)
    return TraceSession(
        session_id=session_id,
        config_label=config_label,
        clock_origin_ns=clock_origin_ns,
        events=tuple(events),
    )


def write_trace(session: TraceSession, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_session(session))


def read_trace(path) -> TraceSession:
    with open(path, "rb") as fh:
        return parse_trace(fh.read())
