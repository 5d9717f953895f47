"""Instrumented cooperative interpreter for the mini language.

The interpreter is a single-threaded stepper with an explicit scheduler, so
every run is exactly reproducible.  Threads auto-advance through
assignments, channel creation and spawns (depth-first, which pins thread
ids) and stop at communication attempts, close commands and main's exit.
The schedule only ever chooses commit moves: which communication fires,
which close runs, and when the main thread is allowed to finish.

Tracing follows the committed-operation scheme: a ``pre`` event is recorded
the moment a select (or plain send/receive) is reached, listing every guard;
the matching post event is recorded when one guard commits.  Senders
transmit their thread id and program counter, receivers record it, which is
what the offline replay uses to re-match the pair.
"""

from __future__ import annotations

import os
import random
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from . import lang
from .lang import Assign, Close, IntLit, MakeChan, PairExpr, RecvGuard, Select, SendGuard, Spawn, Var
from .trace import (
    CLOSED_SENTINEL,
    ChanMake,
    ChannelDecl,
    PostClose,
    PostDefault,
    PostReceive,
    PostSend,
    Pre,
    PrimOp,
    Signal,
    TraceSet,
    Wait,
    write_trace,
)

DEFAULT_MAX_STEPS = 100_000
MAX_STEPS_ENV = "VCREPLAY_MAX_STEPS"


class InterpreterError(RuntimeError):
    pass


class ScheduleError(InterpreterError):
    """An explicit schedule referenced a move that is not enabled."""


class StepLimitExceeded(InterpreterError):
    pass


class RunStatus(Enum):
    MAIN_EXITED = "main_exited"
    DEADLOCK = "deadlock"
    PANIC_SEND_CLOSED = "panic_send_on_closed"


@dataclass(frozen=True)
class ChannelRef:
    id: str


@dataclass
class _Channel:
    id: str
    cap: int
    buffer: deque = field(default_factory=deque)  # (tid, pc, value)
    closed: bool = False


@dataclass
class _PendingCase:
    guard: lang.Guard
    body: list
    value: object = None  # send value, evaluated at attempt time
    channel: str = ""


@dataclass
class _Thread:
    tid: int
    frames: list  # stack of [commands, index]
    env: dict
    trace: list = field(default_factory=list)
    pc: int = 0
    state: str = "running"  # running | at_select | at_close | done
    cases: list = field(default_factory=list)  # _PendingCase, while at_select
    select_pc: int = 0
    close_channel: str = ""
    default_body: list | None = None  # while at a select that has a default


@dataclass(frozen=True)
class Move:
    """One scheduling decision.

    kind: "sync" (rendezvous; tid is the sender), "send"/"recv" (buffered),
    "recv_closed", "panic_send", "default", "close", "exit".
    """

    kind: str
    tid: int
    case: int = -1
    partner: int = -1
    partner_case: int = -1

    def sort_key(self):
        return (self.tid, self.case, self.partner, self.partner_case, self.kind)


@dataclass
class Schedule:
    seed: int | None = None
    moves: list[dict] | None = None

    @classmethod
    def seeded(cls, seed: int) -> "Schedule":
        return cls(seed=seed)

    @classmethod
    def explicit(cls, moves: list[dict]) -> "Schedule":
        return cls(moves=list(moves))


@dataclass
class RunOutcome:
    trace: TraceSet
    status: RunStatus
    final_pc: dict[int, int]
    panic_location: tuple[int, int] | None = None  # (tid, pc)

    def canonical_bytes(self) -> bytes:
        return write_trace(self.trace)


class _Run:
    def __init__(self, program: lang.Program, max_steps: int):
        self.max_steps = max_steps
        self.steps = 0
        self.channels: dict[str, _Channel] = {}
        self.channel_order: list[str] = []
        self.counter = 1  # last assigned thread id / sync counter
        main = _Thread(tid=1, frames=[[list(program), 0]], env={})
        self.threads: dict[int, _Thread] = {1: main}
        self.panic: tuple[int, int] | None = None
        self._advance(main)

    # -- helpers --------------------------------------------------------

    def _tick(self):
        self.steps += 1
        if self.steps > self.max_steps:
            raise StepLimitExceeded(f"exceeded {self.max_steps} interpreter steps")

    def _eval(self, thread: _Thread, expr: lang.Expr):
        if isinstance(expr, IntLit):
            return expr.value
        if isinstance(expr, Var):
            try:
                return thread.env[expr.name]
            except KeyError:
                raise InterpreterError(f"thread {thread.tid}: unbound variable {expr.name!r}") from None
        if isinstance(expr, PairExpr):
            return (self._eval(thread, expr.first), self._eval(thread, expr.second))
        if isinstance(expr, lang.Fst) or isinstance(expr, lang.Snd):
            value = self._eval(thread, expr.inner)
            if not isinstance(value, tuple) or len(value) != 2:
                raise InterpreterError(f"thread {thread.tid}: projection of non-pair {value!r}")
            return value[0] if isinstance(expr, lang.Fst) else value[1]
        raise InterpreterError(f"bad expression {expr!r}")

    def _channel(self, thread: _Thread, name: str) -> _Channel:
        value = thread.env.get(name)
        if not isinstance(value, ChannelRef):
            raise InterpreterError(f"thread {thread.tid}: {name!r} is not a channel")
        return self.channels[value.id]

    def _fresh_channel_id(self, name: str) -> str:
        if name not in self.channels:
            return name
        k = 2
        while f"{name}#{k}" in self.channels:
            k += 1
        return f"{name}#{k}"

    # -- auto-advance ----------------------------------------------------

    def _advance(self, thread: _Thread):
        """Run a thread up to its next scheduling point."""
        while thread.frames:
            frame = thread.frames[-1]
            commands, idx = frame
            if idx >= len(commands):
                thread.frames.pop()
                continue
            frame[1] += 1
            cmd = commands[idx]
            self._tick()
            thread.pc += 1
            if isinstance(cmd, Assign):
                thread.env[cmd.target] = self._eval(thread, cmd.value)
            elif isinstance(cmd, MakeChan):
                cid = self._fresh_channel_id(cmd.target)
                self.channels[cid] = _Channel(cid, cmd.cap)
                self.channel_order.append(cid)
                thread.env[cmd.target] = ChannelRef(cid)
                thread.trace.append(ChanMake(cid, cmd.cap))
            elif isinstance(cmd, Spawn):
                self.counter += 1
                child_id = self.counter
                thread.trace.append(Signal(child_id))
                child = _Thread(
                    tid=child_id,
                    frames=[[list(cmd.body), 0]],
                    env=dict(thread.env),
                    trace=[Wait(child_id)],
                )
                self.threads[child_id] = child
                self._advance(child)
            elif isinstance(cmd, Close):
                thread.state = "at_close"
                thread.close_channel = cmd.channel
                return
            elif isinstance(cmd, Select):
                self._attempt_select(thread, cmd)
                if thread.state == "at_select":
                    return
            else:
                raise InterpreterError(f"unknown command {cmd!r}")
        thread.state = "done"

    def _attempt_select(self, thread: _Thread, cmd: Select):
        cases = []
        ops = []
        for guard, body in cmd.cases:
            chan = self._channel(thread, guard.channel)
            if isinstance(guard, SendGuard):
                value = self._eval(thread, guard.value)
                ops.append(PrimOp("snd", chan.id))
                cases.append(_PendingCase(guard, body, value=value, channel=chan.id))
            else:
                ops.append(PrimOp("rcv", chan.id))
                cases.append(_PendingCase(guard, body, channel=chan.id))
        if cmd.default is not None:
            ops.append(PrimOp("default"))
        thread.trace.append(Pre(tuple(ops)))
        thread.select_pc = thread.pc
        thread.cases = cases
        thread.default_body = list(cmd.default) if cmd.default is not None else None
        thread.state = "at_select"

    def _any_case_enabled(self, thread: _Thread) -> bool:
        return any(self._case_ready(thread, i) for i in range(len(thread.cases)))

    def _case_ready(self, thread: _Thread, case_idx: int) -> bool:
        """Go readiness: could this case commit right now?

        Distinct from :meth:`_case_moves`, which lists rendezvous moves on
        the sender side only; a receive case is ready whenever a matching
        sender is blocked."""
        case = thread.cases[case_idx]
        chan = self.channels[case.channel]
        if isinstance(case.guard, SendGuard):
            if chan.closed or (chan.cap > 0 and len(chan.buffer) < chan.cap):
                return True
            want = RecvGuard
        else:
            if (chan.cap > 0 and chan.buffer) or chan.closed:
                return True
            want = SendGuard
        if chan.cap > 0:
            return False
        for other in self.threads.values():
            if other.tid == thread.tid or other.state != "at_select":
                continue
            for pc in other.cases:
                if isinstance(pc.guard, want) and pc.channel == case.channel:
                    return True
        return False

    # -- move enumeration -------------------------------------------------

    def _case_moves(self, thread: _Thread, case_idx: int) -> list[Move]:
        case = thread.cases[case_idx]
        chan = self.channels[case.channel]
        moves: list[Move] = []
        if isinstance(case.guard, SendGuard):
            if chan.closed:
                moves.append(Move("panic_send", thread.tid, case_idx))
            elif chan.cap > 0:
                if len(chan.buffer) < chan.cap:
                    moves.append(Move("send", thread.tid, case_idx))
            else:
                for other in self.threads.values():
                    if other.tid == thread.tid or other.state != "at_select":
                        continue
                    for j, pc in enumerate(other.cases):
                        if isinstance(pc.guard, RecvGuard) and pc.channel == case.channel:
                            moves.append(Move("sync", thread.tid, case_idx, other.tid, j))
        else:
            if chan.cap > 0 and chan.buffer:
                moves.append(Move("recv", thread.tid, case_idx))
            elif chan.closed:
                moves.append(Move("recv_closed", thread.tid, case_idx))
            # Unbuffered rendezvous moves are listed with the sender as
            # initiator; a bare blocked receive contributes none itself.
        return moves

    def available_moves(self) -> list[Move]:
        moves: list[Move] = []
        for thread in self.threads.values():
            if thread.state == "at_select":
                for i in range(len(thread.cases)):
                    moves.extend(self._case_moves(thread, i))
                # Go: a select with default never blocks; the default is
                # takeable exactly while no case is ready.
                if thread.default_body is not None and not self._any_case_enabled(thread):
                    moves.append(Move("default", thread.tid))
            elif thread.state == "at_close":
                moves.append(Move("close", thread.tid))
        if self.threads[1].state == "done":
            moves.append(Move("exit", 1))
        return sorted(moves, key=Move.sort_key)

    # -- move application --------------------------------------------------

    def apply(self, move: Move) -> RunStatus | None:
        """Apply one move; returns a terminal status or None."""
        self._tick()
        thread = self.threads[move.tid]
        if move.kind == "exit":
            return RunStatus.MAIN_EXITED
        if move.kind == "close":
            chan = self._channel(thread, thread.close_channel)
            if chan.closed:
                raise InterpreterError(f"thread {thread.tid}: close of closed channel {chan.id!r}")
            chan.closed = True
            thread.trace.append(PostClose(chan.id))
            thread.state = "running"
            self._advance(thread)
            return None
        if move.kind == "default":
            thread.trace.append(PostDefault())
            body = thread.default_body or []
            thread.state = "running"
            thread.cases = []
            thread.default_body = None
            if body:
                thread.frames.append([body, 0])
            self._advance(thread)
            return None
        case = thread.cases[move.case]
        chan = self.channels[case.channel]
        if move.kind == "panic_send":
            self.panic = (thread.tid, thread.select_pc)
            return RunStatus.PANIC_SEND_CLOSED
        if move.kind == "send":
            chan.buffer.append((thread.tid, thread.select_pc, case.value))
            thread.trace.append(PostSend(thread.tid, thread.select_pc, chan.id))
            self._commit(thread, case)
            return None
        if move.kind == "recv":
            stid, spc, value = chan.buffer.popleft()
            thread.trace.append(PostReceive(stid, spc, chan.id))
            self._bind(thread, case, value)
            self._commit(thread, case)
            return None
        if move.kind == "recv_closed":
            thread.trace.append(PostReceive(CLOSED_SENTINEL, CLOSED_SENTINEL, chan.id))
            self._bind(thread, case, 0)
            self._commit(thread, case)
            return None
        if move.kind == "sync":
            partner = self.threads[move.partner]
            pcase = partner.cases[move.partner_case]
            thread.trace.append(PostSend(thread.tid, thread.select_pc, chan.id))
            partner.trace.append(PostReceive(thread.tid, thread.select_pc, chan.id))
            self._bind(partner, pcase, case.value)
            self._commit(thread, case)
            self._commit(partner, pcase)
            return None
        raise InterpreterError(f"unknown move {move!r}")

    def _bind(self, thread: _Thread, case: _PendingCase, value):
        target = case.guard.target
        if target is not None:
            thread.env[target] = value

    def _commit(self, thread: _Thread, case: _PendingCase):
        thread.state = "running"
        thread.cases = []
        thread.default_body = None
        if case.body:
            thread.frames.append([list(case.body), 0])
        self._advance(thread)

    # -- results -----------------------------------------------------------

    def outcome(self, status: RunStatus) -> RunOutcome:
        traces = {t.tid: list(t.trace) for t in self.threads.values()}
        ts = TraceSet(
            threads=self.counter,
            channels=[ChannelDecl(cid, self.channels[cid].cap) for cid in self.channel_order],
            traces=traces,
        )
        return RunOutcome(
            trace=ts,
            status=status,
            final_pc={t.tid: t.pc for t in self.threads.values()},
            panic_location=self.panic,
        )

    def snapshot(self):
        chans = {
            cid: (c.cap, tuple(c.buffer), c.closed) for cid, c in self.channels.items()
        }
        threads = {}
        for tid, t in self.threads.items():
            threads[tid] = (
                [list(f) for f in t.frames],
                dict(t.env),
                list(t.trace),
                t.pc,
                t.state,
                list(t.cases),
                t.select_pc,
                t.close_channel,
                t.default_body,
            )
        return (chans, threads, self.counter, list(self.channel_order), self.steps)

    def restore(self, snap):
        chans, threads, self.counter, self.channel_order, self.steps = snap
        self.channel_order = list(self.channel_order)
        self.channels = {
            cid: _Channel(cid, cap, deque(buf), closed) for cid, (cap, buf, closed) in chans.items()
        }
        self.threads = {}
        for tid, (frames, env, trace, pc, state, cases, select_pc, close_channel, default_body) in threads.items():
            self.threads[tid] = _Thread(
                tid=tid,
                frames=[list(f) for f in frames],
                env=dict(env),
                trace=list(trace),
                pc=pc,
                state=state,
                cases=list(cases),
                select_pc=select_pc,
                close_channel=close_channel,
                default_body=default_body,
            )


def _max_steps(max_steps: int | None) -> int:
    if max_steps is not None:
        return max_steps
    return int(os.environ.get(MAX_STEPS_ENV, DEFAULT_MAX_STEPS))


def _match_explicit(want: dict, available: list[Move]) -> Move:
    tid = want.get("tid")
    case = want.get("case")
    matches = [m for m in available if m.tid == tid]
    if case == "default":
        matches = [m for m in matches if m.kind == "default"]
    elif case is not None:
        matches = [m for m in matches if m.case == case]
    else:
        matches = [m for m in matches if m.kind in ("close", "exit")]
    if "partner" in want and want["partner"] is not None:
        matches = [m for m in matches if m.partner == want["partner"]]
    if "partner_case" in want and want["partner_case"] is not None:
        matches = [m for m in matches if m.partner_case == want["partner_case"]]
    if not matches:
        raise ScheduleError(f"scheduled move {want!r} is not enabled (enabled: {available})")
    if len(matches) > 1:
        raise ScheduleError(f"scheduled move {want!r} is ambiguous among {matches}")
    return matches[0]


def run(program: lang.Program | str, schedule: Schedule, max_steps: int | None = None) -> RunOutcome:
    """Execute a program under a controlled schedule and record its trace."""
    if isinstance(program, str):
        program = lang.parse(program)
    r = _Run(program, _max_steps(max_steps))
    if schedule.moves is not None:
        for want in schedule.moves:
            status = r.apply(_match_explicit(want, r.available_moves()))
            if status is not None:
                return r.outcome(status)
        # Schedule exhausted: the main thread either finishes or is stuck.
        if r.threads[1].state == "done":
            return r.outcome(RunStatus.MAIN_EXITED)
        if not r.available_moves():
            return r.outcome(RunStatus.DEADLOCK)
        raise ScheduleError("schedule ended but moves are still enabled and main has not finished")
    rng = random.Random(schedule.seed if schedule.seed is not None else 0)
    while True:
        moves = r.available_moves()
        if not moves:
            return r.outcome(RunStatus.DEADLOCK)
        status = r.apply(rng.choice(moves))
        if status is not None:
            return r.outcome(status)


class BoundExceeded(InterpreterError):
    pass


def enumerate_runs(program: lang.Program | str, bound: int = 10_000, max_outcomes: int = 10_000) -> list[RunOutcome]:
    """Explore every maximal scheduling sequence, deduplicated by trace bytes.

    ``bound`` caps the interpreter steps of any single path; exceeding it is
    an error, since enumeration only makes sense for terminating programs.
    """
    if isinstance(program, str):
        program = lang.parse(program)
    base = _Run(program, max_steps=bound)
    outcomes: list[RunOutcome] = []
    seen: set[bytes] = set()

    def record(outcome: RunOutcome):
        key = outcome.canonical_bytes() + b"|" + outcome.status.value.encode()
        if key not in seen:
            seen.add(key)
            outcomes.append(outcome)
            if len(outcomes) > max_outcomes:
                raise BoundExceeded(f"more than {max_outcomes} distinct outcomes")

    def walk():
        moves = base.available_moves()
        if not moves:
            record(base.outcome(RunStatus.DEADLOCK))
            return
        for move in moves:
            snap = base.snapshot()
            try:
                status = base.apply(move)
            except StepLimitExceeded:
                raise BoundExceeded(f"a schedule exceeded {bound} steps") from None
            if status is not None:
                record(base.outcome(status))
            else:
                walk()
            base.restore(snap)

    walk()
    return outcomes
