"""Instrumented asynchronous execution runtime.

Every submission path emits a Schedule event carrying the caller's
captured stack; execution emits Start/End (or Cancel) on the worker.
Under a virtual clock a single-threaded discrete-event scheduler drives
execution, so traces are byte-identical across runs; under the real
clock the same executors run on actual threads.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import sys
import threading
import time
from collections import deque
from contextlib import contextmanager
from dataclasses import dataclass

from .clock import ClockMode, ClockSource, VirtualClock
from .trace_model import (
    EventKind,
    ExecutionContext,
    Mechanism,
    TaskEvent,
    ThreadIdentity,
    TraceSession,
)

DEFAULT_CAPTURE_DEPTH = 32
DEFAULT_CHECK_INTERVAL_NS = 1_000_000  # 1 virtual ms
DEFAULT_KEEP_ALIVE_NS = 10_000_000  # 10 virtual ms

# Modules whose frames are instrumentation plumbing, not user context.
_INTERNAL_MODULES = ("asyncscope.runtime", "asyncscope.clock")


class ProfilerError(Exception):
    """Base for runtime errors."""


class SessionClosed(ProfilerError):
    pass


class WorkerDead(ProfilerError):
    pass


class PoolShutDown(ProfilerError):
    pass


class QueueFull(ProfilerError):
    pass


class UnknownService(ProfilerError):
    pass


class UnknownTask(ProfilerError):
    pass


class DrainTimeout(ProfilerError):
    """Drain gave up waiting; carries the partial session."""

    def __init__(self, message: str, session: TraceSession) -> None:
        super().__init__(message)
        self.session = session


class CancelOutcome(enum.Enum):
    REMOVED_FROM_QUEUE = "removed-from-queue"
    SIGNALLED_RUNNING = "signalled-running"
    TOO_LATE_FINISHED = "too-late-finished"
    NOT_CANCELLABLE = "not-cancellable"


class CancelToken:
    """Cooperative cancellation flag polled by checking task bodies."""

    __slots__ = ("cancelled",)

    def __init__(self) -> None:
        self.cancelled = False

    def is_cancelled(self) -> bool:
        return self.cancelled


@dataclass(frozen=True)
class Task:
    """A developer-intended unit of work submitted for async execution.

    Under a virtual clock, ``synthetic_duration_ns`` stands in for real
    running time (None means the task never finishes). ``body``, when
    given, receives a :class:`CancelToken`; bodies of checking tasks are
    expected to poll it roughly every ``check_interval_ns``.
    """

    label: str
    body: object = None  # Callable[[CancelToken], None] | None
    synthetic_duration_ns: int | None = None
    cancellation_check: bool = False
    check_interval_ns: int = DEFAULT_CHECK_INTERVAL_NS

    def __post_init__(self) -> None:
        if not self.label:
            raise ValueError("task label must be non-empty")
        if self.check_interval_ns <= 0:
            raise ValueError("check_interval_ns must be positive")


class _Status(enum.Enum):
    PENDING = 0
    RUNNING = 1
    DONE = 2
    CANCELLED = 3


class _TaskState:
    __slots__ = (
        "key", "task", "mechanism", "requested_by", "status",
        "token", "gen", "start_ns", "worker", "on_done", "queue",
    )

    def __init__(self, key: str, task: Task, mechanism: Mechanism,
                 requested_by: ThreadIdentity) -> None:
        self.key = key
        self.task = task
        self.mechanism = mechanism
        self.requested_by = requested_by
        self.status = _Status.PENDING
        self.token = CancelToken()
        self.gen = 0  # invalidates stale virtual completion events
        self.start_ns: int | None = None
        self.worker: ThreadIdentity | None = None
        self.on_done = None  # worker-release callback, set at start
        self.queue: deque | None = None  # pending queue holding this task


def _synthetic_body(task: Task):
    """Real-mode stand-in body for tasks declared by duration only."""
    duration = task.synthetic_duration_ns

    def body(token: CancelToken) -> None:
        interval_s = task.check_interval_ns / 1e9
        if duration is None:
            while not (task.cancellation_check and token.cancelled):
                time.sleep(interval_s)
            return
        if not task.cancellation_check:
            time.sleep(duration / 1e9)
            return
        deadline = time.monotonic_ns() + duration
        while time.monotonic_ns() < deadline:
            if token.cancelled:
                return
            remaining_s = (deadline - time.monotonic_ns()) / 1e9
            time.sleep(max(0.0, min(interval_s, remaining_s)))

    return body


class ProfilerSession:
    """One profiled run: executors, event collection, and drain."""

    def __init__(
        self,
        clock: ClockSource | None = None,
        config_label: str = "",
        session_id: str = "session",
        capture_depth: int = DEFAULT_CAPTURE_DEPTH,
        emit_events: bool = True,
        drain_timeout_s: float = 30.0,
    ) -> None:
        self.clock = clock if clock is not None else VirtualClock()
        self.virtual = self.clock.mode is ClockMode.VIRTUAL
        self.config_label = config_label
        self.session_id = session_id
        self.capture_depth = capture_depth
        self.emit_events = emit_events
        self.drain_timeout_s = drain_timeout_s
        self._closed = False
        self._seq = itertools.count().__next__
        self._buffers: list[list] = []
        self._buffer_lock = threading.Lock()
        self._tls = threading.local()
        self._next_tid = itertools.count(1).__next__
        self._key_counters: dict[str, int] = {}
        self._tasks: dict[str, _TaskState] = {}
        self._quiesce = threading.Condition()
        self._outstanding = 0
        self._services: dict[str, SerialQueueExecutor] = {}
        self._executors: list = []
        self._timers: list[threading.Timer] = []
        self._facade: AsyncFacade | None = None
        if self.virtual:
            self._heap: list = []
            self._sim_seq = itertools.count().__next__
        self.main_thread = ThreadIdentity(self._next_tid(), None, True)
        self._tls.ident = self.main_thread

    # -- thread identities ------------------------------------------------

    def current_thread(self) -> ThreadIdentity:
        ident = getattr(self._tls, "ident", None)
        if ident is None:
            # A foreign thread touched the session; give it an identity.
            ident = ThreadIdentity(self._next_tid(), None, False)
            self._tls.ident = ident
        return ident

    def _new_worker_identity(self, parent: ThreadIdentity) -> ThreadIdentity:
        ident = ThreadIdentity(self._next_tid(), parent.thread_id, False)
        self._emit(EventKind.SPAWN, None, None, ident, None, None)
        return ident

    @contextmanager
    def system_thread(self):
        """Run the enclosed block under a thread identity outside the main
        thread's lineage (models platform management threads)."""
        ident = ThreadIdentity(self._next_tid(), None, False)
        prev = self.current_thread()
        self._tls.ident = ident
        try:
            yield ident
        finally:
            self._tls.ident = prev

    # -- event emission ----------------------------------------------------

    def _buffer(self) -> list:
        buf = getattr(self._tls, "buf", None)
        if buf is None:
            buf = []
            with self._buffer_lock:
                self._buffers.append(buf)
            self._tls.buf = buf
        return buf

    def _emit(self, kind, mechanism, task_key, thread, context, detail) -> None:
        if not self.emit_events:
            return
        self._buffer().append(
            (self.clock.now_ns(), self._seq(), kind, mechanism, task_key,
             thread, context, detail)
        )

    def _capture_context(self) -> tuple:
        """Raw (module, symbol, line) triples, innermost first.

        Formatting and fingerprinting are deferred to drain to keep the
        submission path cheap.
        """
        frames: list = []
        depth = self.capture_depth
        f = sys._getframe(2)
        while f is not None and len(frames) < depth:
            module = f.f_globals.get("__name__", "?")
            if not module.startswith(_INTERNAL_MODULES):
                frames.append((module, f.f_code.co_name, f.f_lineno))
            f = f.f_back
        if not frames:
            frames.append(("<unknown>", "<unknown>", 0))
        return tuple(frames)

    # -- task registration ---------------------------------------------------

    def _register_task(self, task: Task, mechanism: Mechanism,
                       requester: ThreadIdentity | None,
                       key_prefix: str | None = None) -> _TaskState:
        if self._closed:
            raise SessionClosed("session is closed")
        if requester is None:
            requester = self.current_thread()
        prefix = key_prefix if key_prefix is not None else mechanism.wire_tag
        n = self._key_counters.get(prefix, 0) + 1
        self._key_counters[prefix] = n
        state = _TaskState(f"{prefix}#{n}", task, mechanism, requester)
        self._tasks[state.key] = state
        with self._quiesce:
            self._outstanding += 1
        context = self._capture_context() if self.emit_events else None
        self._emit(EventKind.SCHEDULE, mechanism, state.key, requester,
                   context, task.label)
        return state

    def _task_finished(self) -> None:
        with self._quiesce:
            self._outstanding -= 1
            if self._outstanding == 0:
                self._quiesce.notify_all()

    # -- virtual engine ------------------------------------------------------

    def _post(self, t_ns: int, fn) -> None:
        heapq.heappush(self._heap, (t_ns, self._sim_seq(), fn))

    def _run_virtual(self) -> None:
        heap = self._heap
        while heap:
            t_ns, _, fn = heapq.heappop(heap)
            self.clock._advance_to(t_ns)
            fn()

    def _start_virtual(self, state: _TaskState, worker: ThreadIdentity, on_done) -> None:
        def action() -> None:
            if state.status is not _Status.PENDING:
                if on_done is not None:
                    on_done(worker)
                return
            now = self.clock.now_ns()
            state.status = _Status.RUNNING
            state.start_ns = now
            state.worker = worker
            state.on_done = on_done
            self._emit(EventKind.START, state.mechanism, state.key, worker, None, None)
            if state.task.body is not None:
                prev = self.current_thread()
                self._tls.ident = worker
                try:
                    state.task.body(state.token)
                finally:
                    self._tls.ident = prev
            duration = state.task.synthetic_duration_ns
            if duration is None:
                return  # never finishes; surfaces at drain as incomplete
            gen = state.gen
            self._post(now + duration,
                       lambda: self._complete_virtual(state, worker, gen))

        self._post(self.clock.now_ns(), action)

    def _complete_virtual(self, state: _TaskState, worker: ThreadIdentity, gen: int) -> None:
        if state.gen != gen or state.status is not _Status.RUNNING:
            return
        state.status = _Status.DONE
        self._emit(EventKind.END, state.mechanism, state.key, worker, None, None)
        self._task_finished()
        if state.on_done is not None:
            state.on_done(worker)

    def _cancel_complete_virtual(self, state: _TaskState) -> None:
        if state.status is not _Status.RUNNING:
            return
        state.status = _Status.CANCELLED
        self._emit(EventKind.CANCEL, state.mechanism, state.key, state.worker,
                   None, "cancelled while running")
        self._task_finished()
        if state.on_done is not None:
            state.on_done(state.worker)

    # -- real engine -----------------------------------------------------------

    def _run_task_real(self, state: _TaskState, worker: ThreadIdentity) -> bool:
        """Execute one task on the calling worker thread. Returns False if
        the task had been cancelled while queued."""
        with self._quiesce:
            if state.status is not _Status.PENDING:
                return False
            state.status = _Status.RUNNING
            state.worker = worker
        state.start_ns = self.clock.now_ns()
        self._emit(EventKind.START, state.mechanism, state.key, worker, None, None)
        body = state.task.body
        if body is None:
            body = _synthetic_body(state.task)
        try:
            body(state.token)
        finally:
            with self._quiesce:
                was_signalled = state.token.cancelled and state.task.cancellation_check
                state.status = _Status.CANCELLED if was_signalled else _Status.DONE
            if was_signalled:
                self._emit(EventKind.CANCEL, state.mechanism, state.key, worker,
                           None, "cancelled while running")
            else:
                self._emit(EventKind.END, state.mechanism, state.key, worker, None, None)
            self._task_finished()
        return True

    # -- submission APIs ---------------------------------------------------------

    def spawn_thread(self, task: Task, requester: ThreadIdentity | None = None) -> str:
        """Run the task on a brand-new thread (non-reusable threading)."""
        if self._closed:
            raise SessionClosed("session is closed")
        if requester is None:
            requester = self.current_thread()
        ident = self._new_worker_identity(requester)
        state = self._register_task(task, Mechanism.NEW_THREAD, requester)
        if self.virtual:
            self._start_virtual(state, ident, None)
        else:
            thread = threading.Thread(
                target=self._real_thread_main, args=(state, ident), daemon=True
            )
            thread.start()
        return state.key

    def _real_thread_main(self, state: _TaskState, ident: ThreadIdentity) -> None:
        self._tls.ident = ident
        self._run_task_real(state, ident)

    def serial_executor(
        self,
        mechanism: Mechanism = Mechanism.HANDLER_LOOPER,
        key_prefix: str | None = None,
    ) -> "SerialQueueExecutor":
        if mechanism.family is not Mechanism.HANDLER_LOOPER.family and \
                mechanism is not Mechanism.ASYNC_FACADE:
            raise ValueError(f"{mechanism} is not a serial-queue mechanism")
        executor = SerialQueueExecutor(self, mechanism, key_prefix)
        self._executors.append(executor)
        return executor

    def pool_executor(
        self,
        core_size: int,
        max_size: int,
        queue_bound: int | None = None,
        keep_alive_ns: int = DEFAULT_KEEP_ALIVE_NS,
    ) -> "PoolExecutor":
        executor = PoolExecutor(self, core_size, max_size, queue_bound, keep_alive_ns)
        self._executors.append(executor)
        return executor

    @property
    def facade(self) -> "AsyncFacade":
        if self._facade is None:
            self._facade = AsyncFacade(self)
        return self._facade

    def register_service(self, service_name: str) -> None:
        if service_name not in self._services:
            self._services[service_name] = self.serial_executor(
                Mechanism.SERIAL_SERVICE, key_prefix=f"SERVICE:{service_name}"
            )

    def dispatch_service(self, service_name: str, task: Task,
                         requester: ThreadIdentity | None = None) -> str:
        executor = self._services.get(service_name)
        if executor is None:
            raise UnknownService(f"no service registered as {service_name!r}")
        return executor.submit(task, requester)

    # -- cancellation -------------------------------------------------------------

    def cancel(self, task_key: str) -> CancelOutcome:
        state = self._tasks.get(task_key)
        if state is None:
            raise UnknownTask(f"unknown task {task_key!r}")
        if self.virtual:
            return self._cancel_virtual(state)
        return self._cancel_real(state)

    def _cancel_virtual(self, state: _TaskState) -> CancelOutcome:
        if state.status in (_Status.DONE, _Status.CANCELLED):
            return CancelOutcome.TOO_LATE_FINISHED
        if state.status is _Status.PENDING:
            state.status = _Status.CANCELLED
            if state.queue is not None:
                try:
                    state.queue.remove(state)
                except ValueError:
                    pass
            self._emit(EventKind.CANCEL, state.mechanism, state.key,
                       self.current_thread(), None, "cancelled while queued")
            self._task_finished()
            return CancelOutcome.REMOVED_FROM_QUEUE
        # running
        if not state.task.cancellation_check:
            return CancelOutcome.NOT_CANCELLABLE
        now = self.clock.now_ns()
        interval = state.task.check_interval_ns
        elapsed = now - state.start_ns
        checks = max(-(-elapsed // interval), 1)  # next poll, ceil
        early_end = state.start_ns + checks * interval
        duration = state.task.synthetic_duration_ns
        if duration is not None and early_end >= state.start_ns + duration:
            return CancelOutcome.SIGNALLED_RUNNING  # finishes naturally first
        state.token.cancelled = True
        state.gen += 1  # drop the natural completion event
        self._post(early_end, lambda: self._cancel_complete_virtual(state))
        return CancelOutcome.SIGNALLED_RUNNING

    def _cancel_real(self, state: _TaskState) -> CancelOutcome:
        with self._quiesce:
            if state.status in (_Status.DONE, _Status.CANCELLED):
                return CancelOutcome.TOO_LATE_FINISHED
            if state.status is _Status.PENDING:
                state.status = _Status.CANCELLED
                self._emit(EventKind.CANCEL, state.mechanism, state.key,
                           self.current_thread(), None, "cancelled while queued")
                self._outstanding -= 1
                if self._outstanding == 0:
                    self._quiesce.notify_all()
                return CancelOutcome.REMOVED_FROM_QUEUE
            if not state.task.cancellation_check:
                return CancelOutcome.NOT_CANCELLABLE
            state.token.cancelled = True
            return CancelOutcome.SIGNALLED_RUNNING

    # -- timed actions ------------------------------------------------------------

    def call_at(self, t_ns: int, fn) -> None:
        """Run ``fn`` at session time ``t_ns`` under the caller's identity."""
        if self._closed:
            raise SessionClosed("session is closed")
        ident = self.current_thread()
        if self.virtual:
            if t_ns < self.clock.now_ns():
                raise ValueError("call_at target is in the past")

            def action() -> None:
                prev = self.current_thread()
                self._tls.ident = ident
                try:
                    fn()
                finally:
                    self._tls.ident = prev

            self._post(t_ns, action)
        else:
            delay_s = max(0.0, (t_ns - self.clock.now_ns()) / 1e9)

            def run() -> None:
                self._tls.ident = ident
                fn()

            timer = threading.Timer(delay_s, run)
            timer.daemon = True
            self._timers.append(timer)
            timer.start()

    # -- drain ----------------------------------------------------------------------

    def wait_idle(self, timeout_s: float | None = None) -> bool:
        """Block until all submitted tasks reached a terminal state."""
        if self.virtual:
            self._run_virtual()
            return self._outstanding == 0
        deadline = None if timeout_s is None else time.monotonic() + timeout_s
        with self._quiesce:
            while self._outstanding > 0:
                remaining = None if deadline is None else deadline - time.monotonic()
                if remaining is not None and remaining <= 0:
                    return False
                self._quiesce.wait(remaining)
        return True

    def drain(self, timeout_s: float | None = None) -> TraceSession:
        """Finish outstanding work, close the session, and assemble the trace.

        Raises :class:`DrainTimeout` (carrying the partial session) when
        tasks never reach a terminal state.
        """
        if not self.virtual:
            for timer in self._timers:
                timer.join()
        quiesced = self.wait_idle(
            timeout_s if timeout_s is not None else self.drain_timeout_s
        )
        self._closed = True
        if not self.virtual:
            for executor in self._executors:
                executor._shutdown_quiet()
        session = self._assemble()
        if not quiesced:
            raise DrainTimeout(
                f"{self._outstanding} task(s) never completed", session
            )
        return session

    def _assemble(self) -> TraceSession:
        with self._buffer_lock:
            raw = [entry for buf in self._buffers for entry in buf]
        raw.sort(key=lambda e: (e[0], e[1]))
        contexts: dict[tuple, ExecutionContext] = {}

        def materialize(triples) -> ExecutionContext:
            ctx = contexts.get(triples)
            if ctx is None:
                ctx = ExecutionContext.from_frames(
                    tuple(f"{m}:{s}:{line}" for m, s, line in triples)
                )
                contexts[triples] = ctx
            return ctx

        events = tuple(
            TaskEvent(
                timestamp_ns=ts, kind=kind, mechanism=mech, task_key=key,
                thread=thread,
                context=materialize(context) if context is not None else None,
                detail=detail,
            )
            for ts, _, kind, mech, key, thread, context, detail in raw
        )
        return TraceSession(
            session_id=self.session_id,
            config_label=self.config_label,
            clock_origin_ns=self.clock.origin_ns,
            events=events,
        )


class SerialQueueExecutor:
    """Single-worker FIFO queue (looper/handler, query handler, service)."""

    def __init__(self, session: ProfilerSession, mechanism: Mechanism,
                 key_prefix: str | None = None) -> None:
        self._session = session
        self.mechanism = mechanism
        self._key_prefix = key_prefix
        self._pending: deque[_TaskState] = deque()
        self._closed = False
        self.worker = session._new_worker_identity(session.current_thread())
        if not session.virtual:
            self._cv = threading.Condition()
            self._thread = threading.Thread(target=self._worker_loop, daemon=True)
            self._thread.start()
        else:
            self._busy = False

    def submit(self, task: Task, requester: ThreadIdentity | None = None) -> str:
        if self._closed:
            raise WorkerDead("serial executor worker is stopped")
        session = self._session
        if session.virtual:
            state = session._register_task(task, self.mechanism, requester,
                                           self._key_prefix)
            if self._busy:
                state.queue = self._pending
                self._pending.append(state)
            else:
                self._busy = True
                session._start_virtual(state, self.worker, self._virtual_done)
            return state.key
        with self._cv:
            if self._closed:
                raise WorkerDead("serial executor worker is stopped")
            state = session._register_task(task, self.mechanism, requester,
                                           self._key_prefix)
            self._pending.append(state)
            self._cv.notify()
        return state.key

    def _virtual_done(self, worker: ThreadIdentity) -> None:
        while self._pending:
            state = self._pending.popleft()
            state.queue = None
            if state.status is _Status.PENDING:
                self._session._start_virtual(state, worker, self._virtual_done)
                return
        self._busy = False

    def _worker_loop(self) -> None:
        session = self._session
        session._tls.ident = self.worker
        while True:
            with self._cv:
                while not self._pending and not self._closed:
                    self._cv.wait()
                if self._closed and not self._pending:
                    return
                state = self._pending.popleft()
            session._run_task_real(state, self.worker)

    def close(self) -> None:
        """Stop the worker; later submissions raise WorkerDead."""
        if self._session.virtual:
            self._closed = True
            return
        with self._cv:
            self._closed = True
            self._cv.notify_all()

    def _shutdown_quiet(self) -> None:
        self.close()
        if not self._session.virtual:
            self._thread.join(timeout=1.0)


class _VirtualWorker:
    __slots__ = ("ident", "idle_gen")

    def __init__(self, ident: ThreadIdentity) -> None:
        self.ident = ident
        self.idle_gen = 0


class PoolExecutor:
    """Bounded worker pool with a pending FIFO for overflow.

    Grows a worker (up to ``max_size``) before queueing; workers above
    ``core_size`` retire after ``keep_alive_ns`` of idleness.
    """

    def __init__(self, session: ProfilerSession, core_size: int, max_size: int,
                 queue_bound: int | None, keep_alive_ns: int) -> None:
        if core_size < 1 or max_size < core_size:
            raise ValueError("need 1 <= core_size <= max_size")
        if queue_bound is not None and queue_bound < 1:
            raise ValueError("queue_bound must be positive or None")
        self._session = session
        self.core_size = core_size
        self.max_size = max_size
        self.queue_bound = queue_bound
        self.keep_alive_ns = keep_alive_ns
        self._pending: deque[_TaskState] = deque()
        self._down = False
        if session.virtual:
            self._idle: list[_VirtualWorker] = []
            self._workers: dict[int, _VirtualWorker] = {}
        else:
            self._cv = threading.Condition()
            self._threads: dict[int, threading.Thread] = {}
            self._nworkers = 0
            self._nidle = 0

    def submit(self, task: Task, requester: ThreadIdentity | None = None,
               mechanism: Mechanism = Mechanism.POOL_EXECUTOR) -> str:
        if self._down:
            raise PoolShutDown("pool executor is shut down")
        session = self._session
        if session.virtual:
            return self._submit_virtual(task, requester, mechanism)
        return self._submit_real(task, requester, mechanism)

    def _submit_virtual(self, task, requester, mechanism) -> str:
        session = self._session
        if not self._idle and len(self._workers) >= self.max_size \
                and self.queue_bound is not None \
                and len(self._pending) >= self.queue_bound:
            raise QueueFull("pool pending queue is at its bound")
        state = session._register_task(task, mechanism, requester)
        if self._idle:
            worker = self._idle.pop(0)
            worker.idle_gen += 1
            session._start_virtual(state, worker.ident, self._virtual_done)
        elif len(self._workers) < self.max_size:
            worker = _VirtualWorker(
                session._new_worker_identity(state.requested_by))
            self._workers[worker.ident.thread_id] = worker
            session._start_virtual(state, worker.ident, self._virtual_done)
        else:
            state.queue = self._pending
            self._pending.append(state)
        return state.key

    def _virtual_done(self, ident: ThreadIdentity) -> None:
        session = self._session
        while self._pending:
            state = self._pending.popleft()
            state.queue = None
            if state.status is _Status.PENDING:
                session._start_virtual(state, ident, self._virtual_done)
                return
        worker = self._workers[ident.thread_id]
        worker.idle_gen += 1
        self._idle.append(worker)
        if len(self._workers) > self.core_size:
            gen = worker.idle_gen
            session._post(session.clock.now_ns() + self.keep_alive_ns,
                          lambda: self._virtual_retire(worker, gen))

    def _virtual_retire(self, worker: _VirtualWorker, gen: int) -> None:
        if worker.idle_gen != gen or len(self._workers) <= self.core_size:
            return
        self._idle.remove(worker)
        del self._workers[worker.ident.thread_id]

    def _submit_real(self, task, requester, mechanism) -> str:
        session = self._session
        with self._cv:
            if self._down:
                raise PoolShutDown("pool executor is shut down")
            grow = self._nidle == 0 and self._nworkers < self.max_size
            if not grow and self._nidle == 0 and self.queue_bound is not None \
                    and len(self._pending) >= self.queue_bound:
                raise QueueFull("pool pending queue is at its bound")
            state = session._register_task(task, requester=requester,
                                           mechanism=mechanism)
            self._pending.append(state)
            if grow:
                ident = session._new_worker_identity(state.requested_by)
                self._nworkers += 1
                thread = threading.Thread(
                    target=self._worker_loop, args=(ident,), daemon=True)
                self._threads[ident.thread_id] = thread
                thread.start()
            else:
                self._cv.notify()
        return state.key

    def _worker_loop(self, ident: ThreadIdentity) -> None:
        session = self._session
        session._tls.ident = ident
        keep_alive_s = self.keep_alive_ns / 1e9
        while True:
            with self._cv:
                self._nidle += 1
                while not self._pending and not self._down:
                    can_retire = self._nworkers > self.core_size
                    notified = self._cv.wait(keep_alive_s if can_retire else None)
                    if not notified and can_retire and not self._pending:
                        self._nidle -= 1
                        self._nworkers -= 1
                        del self._threads[ident.thread_id]
                        return
                self._nidle -= 1
                if self._down and not self._pending:
                    self._nworkers -= 1
                    return
                state = self._pending.popleft()
            session._run_task_real(state, ident)

    def shut_down(self) -> None:
        """Refuse further submissions; real workers exit once drained."""
        self._down = True
        if not self._session.virtual:
            with self._cv:
                self._cv.notify_all()

    def _shutdown_quiet(self) -> None:
        self.shut_down()
        if not self._session.virtual:
            for thread in list(self._threads.values()):
                thread.join(timeout=1.0)


class AsyncFacade:
    """Submission facade whose default path serializes every task on one
    shared FIFO; the explicit path targets a caller-supplied pool."""

    def __init__(self, session: ProfilerSession) -> None:
        self._session = session
        self._default_queue: SerialQueueExecutor | None = None

    def execute_default(self, task: Task,
                        requester: ThreadIdentity | None = None) -> str:
        if self._default_queue is None:
            self._default_queue = self._session.serial_executor(
                Mechanism.ASYNC_FACADE, key_prefix=Mechanism.ASYNC_FACADE.wire_tag
            )
        return self._default_queue.submit(task, requester)

    def execute_on(self, pool: PoolExecutor, task: Task,
                   requester: ThreadIdentity | None = None) -> str:
        return pool.submit(task, requester, mechanism=Mechanism.ASYNC_FACADE)


def session_run(
    workload,
    clock: ClockSource | None = None,
    config_label: str = "",
    session_id: str = "session",
    **session_kwargs,
) -> TraceSession:
    """Run a workload callable against a fresh session and drain it."""
    session = ProfilerSession(
        clock=clock, config_label=config_label, session_id=session_id,
        **session_kwargs,
    )
    workload(session)
    return session.drain()
