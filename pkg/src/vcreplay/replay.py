"""Offline trace replay: annotate every communication event with vector clocks.

Each thread starts from its unit clock.  Replay consumes the thread-local
traces rule by rule; send/receive pairs are re-matched by the recorded
(sender thread id, program counter) link, so any annotation produced here
corresponds to a schedule the program could actually take.

Rule-order freedom is what lets replay explore alternative schedules.  All
rules except buffered sends/receives are confluent with everything else
(they touch no buffer and their clock effects are fixed by trace position),
so the engine applies them eagerly; the only scheduling choices exposed are
which buffered operation fires next.  Replay of a trace with no buffered
channels is therefore fully deterministic.

A replay ends *exhaustive* when every unconsumed residual event is a
dangling pre, *stuck* when committed post events remain unreplayable, and
*completely stuck* when additionally every leading post-receive faces an
all-empty buffer and every leading post-send a full one; the latter implies
the program has a genuinely deadlocking schedule.
"""

from __future__ import annotations

import heapq
import random
from collections import deque
from dataclasses import dataclass, field

from .clock import VectorClock
from .trace import (
    ChanMake,
    PostClose,
    PostDefault,
    PostReceive,
    PostSend,
    Pre,
    Signal,
    TraceSet,
    Wait,
    validate,
)

EXHAUSTIVE = "exhaustive"
STUCK = "stuck"
COMPLETELY_STUCK = "completely_stuck"


@dataclass(frozen=True)
class Origin:
    thread: int
    pos: int  # index of the originating event in the thread's local trace
    guard: int = -1  # guard index within the pre's list; -1 when not a guard
    pc: int | None = None  # program counter where known (committed sends)

    def key(self):
        return (self.thread, self.pos, self.guard)


@dataclass
class AnnotatedEvent:
    thread: int
    kind: str  # send | receive | close | default | init
    channel: str | None
    pre: VectorClock | None
    post: VectorClock | None
    committed: bool
    origin: Origin
    link: tuple[int, int] | None = None  # send identity; None for receive-from-closed
    dangling: bool = False  # trailing pre at program end (vs not-selected case)

    def to_json(self) -> dict:
        return {
            "thread": self.thread,
            "kind": self.kind,
            "ch": self.channel,
            "pre": self.pre.to_list() if self.pre is not None else None,
            "post": self.post.to_list() if self.post is not None else None,
            "committed": self.committed,
            "origin": {"pos": self.origin.pos, "pc": self.origin.pc},
        }


@dataclass
class TerminalClass:
    kind: str  # exhaustive | stuck | completely_stuck
    residual: dict[int, list[str]] = field(default_factory=dict)

    @property
    def exhaustive(self) -> bool:
        return self.kind == EXHAUSTIVE


@dataclass
class ReplayResult:
    events: list[AnnotatedEvent]
    terminal: TerminalClass
    buffers: dict[str, list[tuple]]  # ch -> slots, ("occ", tid, pc, clock) then ("empty", clock)
    clocks: dict[int, VectorClock]
    moves: list[tuple]
    truncated: bool = False

    def assignment(self) -> dict:
        """Per-origin clock assignment, the unit of replay determinism."""
        out = {}
        for ev in self.events:
            key = (ev.origin.thread, ev.origin.pos, ev.origin.guard, ev.kind)
            out[key] = (
                ev.pre.stamps if ev.pre is not None else None,
                ev.post.stamps if ev.post is not None else None,
            )
        return out

    def events_json(self) -> list[dict]:
        return [ev.to_json() for ev in self.events]


@dataclass
class Mode:
    kind: str  # strategy | naive | backtrack | directed
    seed: int = 0
    limit: int = 100_000
    preference: tuple[int, ...] = ()

    @classmethod
    def strategy(cls) -> "Mode":
        return cls("strategy")

    @classmethod
    def naive(cls, seed: int) -> "Mode":
        return cls("naive", seed=seed)

    @classmethod
    def backtrack(cls, limit: int = 100_000) -> "Mode":
        return cls("backtrack", limit=limit)

    @classmethod
    def directed(cls, preference: list[int]) -> "Mode":
        """Favor buffered moves of the given threads, in order (test hook)."""
        return cls("directed", preference=tuple(preference))


class ReplayError(ValueError):
    pass


def _guard_index(pre: Pre, post) -> int:
    for i, op in enumerate(pre.ops):
        if isinstance(post, PostSend) and op.kind == "snd" and op.channel == post.channel:
            return i
        if isinstance(post, PostReceive) and op.kind == "rcv" and op.channel == post.channel:
            return i
        if isinstance(post, PostDefault) and op.kind == "default":
            return i
    raise ReplayError(f"post event {post!r} matches no guard of {pre!r}")


class _Engine:
    def __init__(self, ts: TraceSet, strategy_filter: bool):
        self.ts = ts
        self.n = ts.threads
        self.strategy_filter = strategy_filter
        self.caps = {d.id: d.cap for d in ts.channels}
        self.cursors = {tid: 0 for tid in ts.traces}
        self.clocks = {tid: VectorClock.unit(tid, self.n) for tid in ts.traces}
        # Buffered channels: occupied slots (FIFO) and empty-slot clocks (FIFO).
        self.occ: dict[str, deque] = {}
        self.empty: dict[str, deque] = {}
        for d in ts.channels:
            if d.cap > 0:
                self.occ[d.id] = deque()
                self.empty[d.id] = deque(VectorClock.zero(self.n) for _ in range(d.cap))
        self.events: list[AnnotatedEvent] = []
        self.moves: list[tuple] = []
        # Pending halves of two-sided rules.
        self.sig_half: dict[tuple, int] = {}  # ("sig", n, side) -> tid
        self.sync_half: dict[tuple, int] = {}  # (i, j, ch, side) -> tid
        # Threads whose head is a buffered op, by channel.
        self.wait_send: dict[str, dict[int, tuple]] = {}  # ch -> tid -> (link, guard)
        self.wait_recv: dict[str, dict[int, tuple]] = {}
        self.registered: dict[int, tuple] = {}  # tid -> registration record
        # Receiver position of every send, for the competing-send preference.
        self.recv_pos: dict[tuple[int, int, str], tuple[int, int]] = {}
        for tid, trace in ts.traces.items():
            for pos, ev in enumerate(trace):
                if isinstance(ev, PostReceive) and not ev.from_closed:
                    self.recv_pos[(ev.tid, ev.pc, ev.channel)] = (tid, pos + 1)
        self.queue = deque(sorted(ts.traces))
        self._settle()

    # -- head classification ---------------------------------------------

    def _unregister(self, tid: int):
        reg = self.registered.pop(tid, None)
        if reg is None:
            return
        kind, key = reg
        if kind == "sig":
            self.sig_half.pop(key, None)
        elif kind == "sync":
            self.sync_half.pop(key, None)
        elif kind == "send":
            self.wait_send[key].pop(tid, None)
        elif kind == "recv":
            self.wait_recv[key].pop(tid, None)

    def _touch(self, tid: int):
        self._unregister(tid)
        self.queue.append(tid)

    def _settle(self):
        """Apply every eagerly-applicable rule until only buffered choices remain."""
        while self.queue:
            tid = self.queue.popleft()
            self._classify(tid)

    def _classify(self, tid: int):
        trace = self.ts.traces[tid]
        cur = self.cursors[tid]
        if cur >= len(trace):
            return
        ev = trace[cur]
        if isinstance(ev, ChanMake):
            self._apply_chan_make(tid, cur, ev)
            return
        if isinstance(ev, PostClose):
            self._apply_close(tid, cur, ev)
            return
        if isinstance(ev, Signal):
            other = self.sig_half.pop(("w", ev.n), None)
            if other is not None:
                self.registered.pop(other, None)
                self._apply_signal_wait(tid, other)
            else:
                self.sig_half[("s", ev.n)] = tid
                self.registered[tid] = ("sig", ("s", ev.n))
            return
        if isinstance(ev, Wait):
            other = self.sig_half.pop(("s", ev.n), None)
            if other is not None:
                self.registered.pop(other, None)
                self._apply_signal_wait(other, tid)
            else:
                self.sig_half[("w", ev.n)] = tid
                self.registered[tid] = ("sig", ("w", ev.n))
            return
        if isinstance(ev, Pre):
            post = trace[cur + 1] if cur + 1 < len(trace) else None
            if post is None:
                return  # dangling; annotated at the terminal state
            if isinstance(post, PostDefault):
                self._apply_local(tid, cur, ev, post, kind="default", channel=None)
                return
            if isinstance(post, PostReceive) and post.from_closed:
                self._apply_local(tid, cur, ev, post, kind="receive", channel=post.channel)
                return
            if isinstance(post, PostSend):
                if self.caps.get(post.channel, 0) > 0:
                    self.wait_send.setdefault(post.channel, {})[tid] = ((post.tid, post.pc), _guard_index(ev, post))
                    self.registered[tid] = ("send", post.channel)
                    return
                key = (post.tid, post.pc, post.channel, "r")
                other = self.sync_half.pop(key, None)
                if other is not None:
                    self.registered.pop(other, None)
                    self._apply_sync(tid, other, post)
                else:
                    skey = (post.tid, post.pc, post.channel, "s")
                    self.sync_half[skey] = tid
                    self.registered[tid] = ("sync", skey)
                return
            if isinstance(post, PostReceive):
                if self.caps.get(post.channel, 0) > 0:
                    self.wait_recv.setdefault(post.channel, {})[tid] = ((post.tid, post.pc), _guard_index(ev, post))
                    self.registered[tid] = ("recv", post.channel)
                    return
                key = (post.tid, post.pc, post.channel, "s")
                other = self.sync_half.pop(key, None)
                if other is not None:
                    self.registered.pop(other, None)
                    sender_post = self.ts.traces[other][self.cursors[other] + 1]
                    self._apply_sync(other, tid, sender_post)
                else:
                    rkey = (post.tid, post.pc, post.channel, "r")
                    self.sync_half[rkey] = tid
                    self.registered[tid] = ("sync", rkey)
                return
        raise ReplayError(f"thread {tid}: cannot replay event {ev!r} at position {cur}")

    # -- rule applications --------------------------------------------------

    def _emit_siblings(self, tid: int, pos: int, pre: Pre, chosen: int, cs: VectorClock):
        for i, op in enumerate(pre.ops):
            if i == chosen:
                continue
            kind = {"snd": "send", "rcv": "receive", "default": "default"}[op.kind]
            self.events.append(
                AnnotatedEvent(
                    thread=tid,
                    kind=kind,
                    channel=op.channel,
                    pre=cs,
                    post=None,
                    committed=False,
                    origin=Origin(tid, pos, i),
                )
            )

    def _apply_chan_make(self, tid: int, pos: int, ev: ChanMake):
        # Declaration is not a synchronization: snapshot the clock, no tick.
        self.events.append(
            AnnotatedEvent(
                thread=tid,
                kind="init",
                channel=ev.channel,
                pre=None,
                post=self.clocks[tid],
                committed=True,
                origin=Origin(tid, pos),
            )
        )
        self.moves.append(("chan_make", tid))
        self.cursors[tid] += 1
        self._touch(tid)

    def _apply_close(self, tid: int, pos: int, ev: PostClose):
        cs = self.clocks[tid].inc(tid)
        self.clocks[tid] = cs
        self.events.append(
            AnnotatedEvent(
                thread=tid,
                kind="close",
                channel=ev.channel,
                pre=None,
                post=cs,
                committed=True,
                origin=Origin(tid, pos),
            )
        )
        self.moves.append(("close", tid))
        self.cursors[tid] += 1
        self._touch(tid)

    def _apply_signal_wait(self, signaler: int, waiter: int):
        cs1 = self.clocks[signaler]
        self.clocks[signaler] = cs1.inc(signaler)
        # The waiter inherits the signaler's pre-tick clock.
        self.clocks[waiter] = cs1.inc(waiter)
        self.moves.append(("signal_wait", signaler, waiter))
        self.cursors[signaler] += 1
        self.cursors[waiter] += 1
        self._touch(signaler)
        self._touch(waiter)

    def _apply_local(self, tid: int, pos: int, pre: Pre, post, kind: str, channel: str | None):
        """Receive-from-closed and default: tick only the local clock."""
        chosen = _guard_index(pre, post)
        cs = self.clocks[tid]
        cs2 = cs.inc(tid)
        self.clocks[tid] = cs2
        self.events.append(
            AnnotatedEvent(
                thread=tid,
                kind=kind,
                channel=channel,
                pre=cs,
                post=cs2,
                committed=True,
                origin=Origin(tid, pos, chosen),
                link=None,
            )
        )
        self._emit_siblings(tid, pos, pre, chosen, cs)
        self.moves.append(("recv_closed" if kind == "receive" else "default", tid, chosen))
        self.cursors[tid] += 2
        self._touch(tid)

    def _apply_sync(self, sender: int, receiver: int, post: PostSend | PostReceive):
        strace, rtrace = self.ts.traces[sender], self.ts.traces[receiver]
        spos, rpos = self.cursors[sender], self.cursors[receiver]
        spre, rpre = strace[spos], rtrace[rpos]
        spost, rpost = strace[spos + 1], rtrace[rpos + 1]
        sguard, rguard = _guard_index(spre, spost), _guard_index(rpre, rpost)
        cs1, cs2 = self.clocks[sender], self.clocks[receiver]
        cs = cs1.inc(sender).join(cs2.inc(receiver))
        self.clocks[sender] = cs
        self.clocks[receiver] = cs
        link = (spost.tid, spost.pc)
        self.events.append(
            AnnotatedEvent(sender, "send", spost.channel, cs1, cs, True, Origin(sender, spos, sguard, pc=spost.pc), link)
        )
        self.events.append(
            AnnotatedEvent(receiver, "receive", rpost.channel, cs2, cs, True, Origin(receiver, rpos, rguard), link)
        )
        self._emit_siblings(sender, spos, spre, sguard, cs1)
        self._emit_siblings(receiver, rpos, rpre, rguard, cs2)
        self.moves.append(("sync", sender, receiver, sguard, rguard))
        self.cursors[sender] += 2
        self.cursors[receiver] += 2
        self._touch(sender)
        self._touch(receiver)

    def _apply_buffered_send(self, tid: int):
        trace = self.ts.traces[tid]
        pos = self.cursors[tid]
        pre, post = trace[pos], trace[pos + 1]
        guard = _guard_index(pre, post)
        cs = self.clocks[tid]
        slot = self.empty[post.channel].popleft()
        cs2 = cs.inc(tid).join(slot)
        self.clocks[tid] = cs2
        self.occ[post.channel].append((post.tid, post.pc, cs2))
        self.events.append(
            AnnotatedEvent(tid, "send", post.channel, cs, cs2, True, Origin(tid, pos, guard, pc=post.pc), (post.tid, post.pc))
        )
        self._emit_siblings(tid, pos, pre, guard, cs)
        self.moves.append(("send", tid, guard))
        self.cursors[tid] += 2
        self._touch(tid)

    def _apply_buffered_recv(self, tid: int):
        trace = self.ts.traces[tid]
        pos = self.cursors[tid]
        pre, post = trace[pos], trace[pos + 1]
        guard = _guard_index(pre, post)
        cs = self.clocks[tid]
        stid, spc, slot = self.occ[post.channel].popleft()
        cs2 = cs.inc(tid).join(slot)
        self.clocks[tid] = cs2
        self.empty[post.channel].append(cs2)
        self.events.append(
            AnnotatedEvent(tid, "receive", post.channel, cs, cs2, True, Origin(tid, pos, guard), (stid, spc))
        )
        self._emit_siblings(tid, pos, pre, guard, cs)
        self.moves.append(("recv", tid, guard))
        self.cursors[tid] += 2
        self._touch(tid)

    # -- buffered choice handling --------------------------------------------

    def choices(self) -> list[tuple]:
        """Applicable buffered moves, as ("send"|"recv", tid, ch)."""
        out = []
        for ch, waiting in self.wait_send.items():
            if self.empty[ch]:
                for tid in waiting:
                    out.append(("send", tid, ch))
        for ch, waiting in self.wait_recv.items():
            if self.occ[ch]:
                head = self.occ[ch][0]
                for tid, (link, _) in waiting.items():
                    if (head[0], head[1]) == link:
                        out.append(("recv", tid, ch))
        out.sort()
        return out

    def strategy_allows(self, move: tuple) -> bool:
        """Competing-send preference: a send whose receiver sits later in the
        same thread than a competitor's receiver must wait."""
        kind, tid, ch = move
        if kind != "send":
            return True
        link, _ = self.wait_send[ch][tid]
        mine = self.recv_pos.get(link + (ch,))
        if mine is None:
            return True
        for other, (olink, _) in self.wait_send[ch].items():
            if other == tid:
                continue
            theirs = self.recv_pos.get(olink + (ch,))
            if theirs is not None and theirs[0] == mine[0] and theirs[1] < mine[1]:
                return False
        return True

    def apply_choice(self, move: tuple):
        kind, tid, _ = move
        self._unregister(tid)
        if kind == "send":
            self._apply_buffered_send(tid)
        else:
            self._apply_buffered_recv(tid)
        self._settle()

    # -- terminal -------------------------------------------------------------

    def terminal(self) -> TerminalClass:
        residual: dict[int, list[str]] = {}
        all_pre = True
        completely = True
        any_post = False
        for tid in sorted(self.ts.traces):
            rest = self.ts.traces[tid][self.cursors[tid]:]
            if not rest:
                continue
            residual[tid] = [type(e).__name__ for e in rest]
            if all(isinstance(e, Pre) for e in rest):
                continue
            all_pre = False
            head = rest[0]
            post = rest[1] if isinstance(head, Pre) and len(rest) > 1 else head
            if isinstance(post, PostReceive) and self.caps.get(post.channel, 0) > 0:
                any_post = True
                if self.occ[post.channel]:
                    completely = False
            elif isinstance(post, PostSend) and self.caps.get(post.channel, 0) > 0:
                any_post = True
                if self.empty[post.channel]:
                    completely = False
            else:
                completely = False
        if all_pre:
            return TerminalClass(EXHAUSTIVE, residual)
        if completely and any_post:
            return TerminalClass(COMPLETELY_STUCK, residual)
        return TerminalClass(STUCK, residual)

    def annotate_dangling(self):
        """Turn every trailing pre guard into a not-selected event at the
        thread's terminal clock."""
        for tid in sorted(self.ts.traces):
            trace = self.ts.traces[tid]
            pos = self.cursors[tid]
            if pos == len(trace) - 1 and isinstance(trace[pos], Pre):
                cs = self.clocks[tid]
                for i, op in enumerate(trace[pos].ops):
                    kind = {"snd": "send", "rcv": "receive", "default": "default"}[op.kind]
                    self.events.append(
                        AnnotatedEvent(tid, kind, op.channel, cs, None, False, Origin(tid, pos, i), dangling=True)
                    )

    def buffer_state(self) -> dict[str, list[tuple]]:
        out = {}
        for ch in self.occ:
            slots = [("occ", tid, pc, cs) for tid, pc, cs in self.occ[ch]]
            slots += [("empty", cs) for cs in self.empty[ch]]
            out[ch] = slots
        return out

    def state_key(self):
        return (
            tuple(sorted(self.cursors.items())),
            tuple(sorted((ch, tuple((t, p, c.stamps) for t, p, c in q)) for ch, q in self.occ.items())),
            tuple(sorted((ch, tuple(c.stamps for c in q)) for ch, q in self.empty.items())),
            tuple(sorted((tid, c.stamps) for tid, c in self.clocks.items())),
        )

    def snapshot(self):
        return (
            dict(self.cursors),
            dict(self.clocks),
            {ch: deque(q) for ch, q in self.occ.items()},
            {ch: deque(q) for ch, q in self.empty.items()},
            list(self.events),
            list(self.moves),
            dict(self.sig_half),
            dict(self.sync_half),
            {ch: dict(w) for ch, w in self.wait_send.items()},
            {ch: dict(w) for ch, w in self.wait_recv.items()},
            dict(self.registered),
        )

    def restore(self, snap):
        (
            self.cursors,
            self.clocks,
            occ,
            empty,
            self.events,
            self.moves,
            self.sig_half,
            self.sync_half,
            wait_send,
            wait_recv,
            self.registered,
        ) = (
            dict(snap[0]),
            dict(snap[1]),
            {ch: deque(q) for ch, q in snap[2].items()},
            {ch: deque(q) for ch, q in snap[3].items()},
            list(snap[4]),
            list(snap[5]),
            dict(snap[6]),
            dict(snap[7]),
            {ch: dict(w) for ch, w in snap[8].items()},
            {ch: dict(w) for ch, w in snap[9].items()},
            dict(snap[10]),
        )
        self.occ = occ
        self.empty = empty
        self.wait_send = wait_send
        self.wait_recv = wait_recv


def _check_valid(ts: TraceSet):
    problems = validate(ts)
    if problems:
        raise ReplayError("invalid trace: " + "; ".join(str(p) for p in problems[:5]))


def _finish(engine: _Engine, truncated: bool = False) -> ReplayResult:
    terminal = engine.terminal()
    engine.annotate_dangling()
    return ReplayResult(
        events=engine.events,
        terminal=terminal,
        buffers=engine.buffer_state(),
        clocks=dict(engine.clocks),
        moves=engine.moves,
        truncated=truncated,
    )


def replay(ts: TraceSet, mode: Mode | None = None) -> ReplayResult:
    """Replay a validated trace set under the given rule-selection mode."""
    _check_valid(ts)
    mode = mode or Mode.strategy()
    if mode.kind == "backtrack":
        return _replay_backtrack(ts, mode.limit)
    engine = _Engine(ts, strategy_filter=(mode.kind == "strategy"))
    rng = random.Random(mode.seed) if mode.kind == "naive" else None
    while True:
        choices = engine.choices()
        if not choices:
            return _finish(engine)
        if mode.kind == "strategy":
            allowed = [c for c in choices if engine.strategy_allows(c)] or choices
            engine.apply_choice(allowed[0])
        elif mode.kind == "naive":
            engine.apply_choice(rng.choice(choices))
        elif mode.kind == "directed":
            rank = {tid: i for i, tid in enumerate(mode.preference)}
            engine.apply_choice(min(choices, key=lambda c: (rank.get(c[1], len(rank)), c)))
        else:
            raise ReplayError(f"unknown mode {mode.kind!r}")


def _replay_backtrack(ts: TraceSet, limit: int) -> ReplayResult:
    """Depth-first over buffered choices until an exhaustive terminal.

    Visited states are pruned by a canonical hash; that is sound here because
    only reachability of an exhaustive terminal matters, not which clock
    assignment it carries.
    """
    engine = _Engine(ts, strategy_filter=False)
    seen: set = set()
    visited = 0
    fallback: ReplayResult | None = None

    def walk() -> ReplayResult | None:
        nonlocal visited, fallback
        visited += 1
        if visited > limit:
            return None
        key = engine.state_key()
        if key in seen:
            return None
        seen.add(key)
        choices = engine.choices()
        if not choices:
            result = _finish(engine)
            if result.terminal.exhaustive:
                return result
            if fallback is None:
                fallback = result
            return None
        for choice in choices:
            snap = engine.snapshot()
            engine.apply_choice(choice)
            found = walk()
            engine.restore(snap)
            if found is not None:
                return found
        return None

    found = walk()
    if found is not None:
        found.truncated = visited > limit
        return found
    if fallback is None:
        # Limit exhausted before any terminal: fall back to one greedy run.
        result = replay(ts, Mode.strategy())
        result.truncated = True
        return result
    fallback.truncated = visited > limit
    return fallback


@dataclass
class EnumerationResult:
    assignments: list[dict]
    results: list[ReplayResult]
    count: int
    truncated: bool


def enumerate_annotations(
    ts: TraceSet, limit: int = 1000, strategy_filter: bool = False, max_states: int = 200_000
) -> EnumerationResult:
    """Enumerate the distinct clock assignments of all exhaustive replays.

    Explores every buffered rule order (optionally restricted by the
    competing-send preference, which by the strategy-soundness property must
    not change the outcome); stuck branches contribute nothing.  States are
    not pruned by hash: two converging paths may still carry different
    earlier annotations, so pruning could drop assignments.
    """
    _check_valid(ts)
    engine = _Engine(ts, strategy_filter=strategy_filter)
    assignments: list[dict] = []
    results: list[ReplayResult] = []
    seen: set = set()
    truncated = False
    states = 0

    def walk():
        nonlocal truncated, states
        states += 1
        if states > max_states:
            truncated = True
            return
        choices = engine.choices()
        if strategy_filter:
            choices = [c for c in choices if engine.strategy_allows(c)] or choices
        if not choices:
            snap = engine.snapshot()
            result = _finish(engine)
            engine.restore(snap)
            if result.terminal.exhaustive:
                key = frozenset(result.assignment().items())
                if key not in seen:
                    if len(assignments) >= limit:
                        truncated = True
                        return
                    seen.add(key)
                    assignments.append(result.assignment())
                    results.append(result)
            return
        for choice in choices:
            snap = engine.snapshot()
            engine.apply_choice(choice)
            walk()
            engine.restore(snap)
            if truncated and len(assignments) >= limit:
                return

    walk()
    return EnumerationResult(assignments, results, len(assignments), truncated)


# -- schedules implied by a replay -------------------------------------------


def implied_schedule(result: ReplayResult, ts: TraceSet) -> list[dict]:
    """Translate a replay's rule firing order into an executor schedule.

    Close events carry no clock edge towards the receives they enable, so
    replay may legally fire them "too late"; the moves are re-sorted
    topologically (per-thread order, per-channel FIFO order, communications
    before close, closed-receives after close) before emission.

    Caveat: a committed default is valid only at an instant when none of its
    select's cases is ready, a condition thread-local traces do not order.
    The emitted position preserves replay order and may need manual
    placement for schedules mixing defaults with live counterparts; plain
    send/receive/close traces always round-trip.
    """
    raw: list[tuple] = []
    for move in result.moves:
        if move[0] == "sync":
            _, sender, receiver, sguard, rguard = move
            raw.append(("sync", (sender, receiver), {"tid": sender, "case": sguard, "partner": receiver, "partner_case": rguard}))
        elif move[0] in ("send", "recv", "recv_closed"):
            kind, tid, guard = move
            raw.append((kind, (tid,), {"tid": tid, "case": guard}))
        elif move[0] == "default":
            raw.append(("default", (move[1],), {"tid": move[1], "case": "default"}))
        elif move[0] == "close":
            raw.append(("close", (move[1],), {"tid": move[1]}))
        # chan_make and signal_wait fire automatically in the executor and
        # need no schedule entry.
    if not any(kind == "close" for kind, _, _ in raw):
        return [entry for _, _, entry in raw]

    # Recover per-move channels by replaying cursor positions.
    cursors = {tid: 0 for tid in ts.traces}

    def advance_autos(tid):
        trace = ts.traces[tid]
        while cursors[tid] < len(trace) and isinstance(trace[cursors[tid]], (ChanMake, Signal, Wait)):
            cursors[tid] += 1

    channels: list[str | None] = []
    for kind, threads, entry in raw:
        for tid in threads:
            advance_autos(tid)
        tid = threads[0]
        trace = ts.traces[tid]
        ev = trace[cursors[tid]]
        if isinstance(ev, PostClose):
            channels.append(ev.channel)
            cursors[tid] += 1
        elif kind == "default":
            channels.append(None)
            cursors[tid] += 2
        else:
            post = trace[cursors[tid] + 1]
            channels.append(post.channel)
            for t in threads:
                cursors[t] += 2

    # Topological re-sort, stable in the original firing order.  Constraints:
    # per-thread order; per-channel FIFO order among sends and among normal
    # receives; sends before their channel's close (a later send would
    # panic); closed-receives after the close and after every drain of the
    # channel (the executor only yields the closed sentinel on an empty
    # buffer).  Any valid run of the trace satisfies all of these, so the
    # graph is acyclic.
    m = len(raw)
    edges: dict[int, set[int]] = {i: set() for i in range(m)}
    last_by_thread: dict[int, int] = {}
    last_send: dict[str, int] = {}
    last_recv: dict[str, int] = {}
    close_of: dict[str, int] = {}
    closed_recvs: dict[str, list[int]] = {}
    for i, (kind, threads, entry) in enumerate(raw):
        ch = channels[i]
        if kind == "close":
            close_of[ch] = i
        elif kind == "recv_closed":
            closed_recvs.setdefault(ch, []).append(i)
    for i, (kind, threads, entry) in enumerate(raw):
        for tid in threads:
            if tid in last_by_thread:
                edges[last_by_thread[tid]].add(i)
            last_by_thread[tid] = i
        ch = channels[i]
        if kind in ("sync", "send"):
            if ch in last_send:
                edges[last_send[ch]].add(i)
            last_send[ch] = i
            if ch in close_of:
                edges[i].add(close_of[ch])
        if kind in ("sync", "recv"):
            if ch in last_recv:
                edges[last_recv[ch]].add(i)
            last_recv[ch] = i
            for j in closed_recvs.get(ch, ()):
                edges[i].add(j)
        if kind == "recv_closed" and ch in close_of:
            edges[close_of[ch]].add(i)
    for i in edges:
        edges[i].discard(i)
    indeg = {i: 0 for i in range(m)}
    for src, dsts in edges.items():
        for d in dsts:
            indeg[d] += 1
    ready = [i for i in range(m) if indeg[i] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        i = heapq.heappop(ready)
        order.append(i)
        for d in sorted(edges[i]):
            indeg[d] -= 1
            if indeg[d] == 0:
                heapq.heappush(ready, d)
    if len(order) != m:
        raise ReplayError("cannot order replay moves into a valid schedule")
    return [raw[i][2] for i in order]
