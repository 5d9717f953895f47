"""Event and trace data model plus the on-disk trace format.

A trace set holds one event list per thread.  Committed channel operations
carry the *sender's* thread id and program counter, which is what lets the
offline replay re-match send/receive pairs exactly.  A receive that completed
against a closed channel records the reserved sentinel -1 for both fields.

Trace files are canonical UTF-8 JSON: a single object with keys
``version``/``threads``/``channels``/``traces``, threads in ascending id
order, channels sorted by id, no extra whitespace.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

CLOSED_SENTINEL = -1

SND = "snd"
RCV = "rcv"
DEFAULT = "default"


@dataclass(frozen=True)
class PrimOp:
    """A guard of a select: a send or receive on a channel, or default."""

    kind: str  # "snd" | "rcv" | "default"
    channel: str | None = None

    def __post_init__(self):
        if self.kind == DEFAULT:
            if self.channel is not None:
                raise ValueError("default guard carries no channel")
        elif self.kind not in (SND, RCV):
            raise ValueError(f"bad guard kind {self.kind!r}")
        elif self.channel is None:
            raise ValueError(f"{self.kind} guard needs a channel")


@dataclass(frozen=True)
class Signal:
    n: int


@dataclass(frozen=True)
class Wait:
    n: int


@dataclass(frozen=True)
class Pre:
    ops: tuple[PrimOp, ...]

    def __post_init__(self):
        if not self.ops:
            raise ValueError("pre event needs at least one guard")


@dataclass(frozen=True)
class PostSend:
    tid: int
    pc: int
    channel: str


@dataclass(frozen=True)
class PostReceive:
    tid: int  # sender's thread id, or CLOSED_SENTINEL
    pc: int  # sender's program counter, or CLOSED_SENTINEL
    channel: str

    @property
    def from_closed(self) -> bool:
        return self.tid == CLOSED_SENTINEL and self.pc == CLOSED_SENTINEL


@dataclass(frozen=True)
class PostClose:
    channel: str


@dataclass(frozen=True)
class PostDefault:
    pass


@dataclass(frozen=True)
class ChanMake:
    channel: str
    cap: int


LocalEvent = Union[Signal, Wait, Pre, PostSend, PostReceive, PostClose, PostDefault, ChanMake]

POST_EVENTS = (PostSend, PostReceive, PostDefault)


@dataclass(frozen=True)
class ChannelDecl:
    id: str
    cap: int


@dataclass
class TraceSet:
    threads: int
    channels: list[ChannelDecl]
    traces: dict[int, list[LocalEvent]]

    def capacity(self, channel: str) -> int:
        for decl in self.channels:
            if decl.id == channel:
                return decl.cap
        raise KeyError(f"undeclared channel {channel!r}")

    def total_events(self) -> int:
        return sum(len(t) for t in self.traces.values())


@dataclass(frozen=True)
class Violation:
    thread: int
    index: int
    reason: str

    def __str__(self) -> str:
        return f"thread {self.thread}, event {self.index}: {self.reason}"


def _guard_matches(pre: Pre, event: LocalEvent) -> bool:
    for op in pre.ops:
        if isinstance(event, PostSend) and op.kind == SND and op.channel == event.channel:
            return True
        if isinstance(event, PostReceive) and op.kind == RCV and op.channel == event.channel:
            return True
        if isinstance(event, PostDefault) and op.kind == DEFAULT:
            return True
    return False


def validate(ts: TraceSet) -> list[Violation]:
    """Check the trace-set invariants; an empty list means well formed."""
    out: list[Violation] = []
    declared = {d.id for d in ts.channels}

    def bad(thread: int, index: int, reason: str):
        out.append(Violation(thread, index, reason))

    if sorted(ts.traces) != list(range(1, ts.threads + 1)):
        bad(0, 0, f"thread ids must be dense 1..{ts.threads}, got {sorted(ts.traces)}")

    signals: dict[int, list[int]] = {}
    waits: dict[int, list[int]] = {}
    sends: dict[tuple[int, int], tuple[int, str]] = {}  # (tid,pc) -> (thread, channel)
    receives: list[tuple[int, int, PostReceive]] = []

    for tid in sorted(ts.traces):
        trace = ts.traces[tid]
        for idx, ev in enumerate(trace):
            ch = getattr(ev, "channel", None)
            if ch is not None and ch not in declared:
                bad(tid, idx, f"undeclared channel {ch!r}")
            if isinstance(ev, Signal):
                signals.setdefault(ev.n, []).append(tid)
            elif isinstance(ev, Wait):
                waits.setdefault(ev.n, []).append(tid)
            elif isinstance(ev, PostSend):
                if ev.tid != tid:
                    bad(tid, idx, f"send recorded with foreign thread id {ev.tid}")
                key = (ev.tid, ev.pc)
                if key in sends:
                    bad(tid, idx, f"duplicate send identity {key} on {ev.channel!r}")
                else:
                    sends[key] = (tid, ev.channel)
            elif isinstance(ev, PostReceive) and not ev.from_closed:
                receives.append((tid, idx, ev))
            if isinstance(ev, POST_EVENTS):
                if idx == 0 or not isinstance(trace[idx - 1], Pre):
                    bad(tid, idx, "post event not preceded by a pre event")
                elif not _guard_matches(trace[idx - 1], ev):
                    bad(tid, idx, "post event does not match any pre guard")
            if isinstance(ev, Pre) and idx + 1 < len(trace):
                nxt = trace[idx + 1]
                if not isinstance(nxt, POST_EVENTS):
                    bad(tid, idx, "pre event not followed by a matching post (dangling pre must end the trace)")

    for tid, idx, ev in receives:
        got = sends.get((ev.tid, ev.pc))
        if got is None:
            bad(tid, idx, f"receive of unknown send ({ev.tid},{ev.pc}) on {ev.channel!r}")
        elif got[1] != ev.channel:
            bad(tid, idx, f"receive links send ({ev.tid},{ev.pc}) across channels {got[1]!r} vs {ev.channel!r}")

    seen = sorted(set(signals) | set(waits))
    for n in seen:
        s, w = signals.get(n, []), waits.get(n, [])
        if len(s) != 1 or len(w) != 1:
            bad(0, 0, f"sync counter {n} has {len(s)} signals and {len(w)} waits")
    return out


# -- serialization ----------------------------------------------------------


def _event_to_json(ev: LocalEvent) -> dict:
    if isinstance(ev, Signal):
        return {"t": "signal", "n": ev.n}
    if isinstance(ev, Wait):
        return {"t": "wait", "n": ev.n}
    if isinstance(ev, Pre):
        ops = []
        for op in ev.ops:
            if op.kind == DEFAULT:
                ops.append({"d": "default"})
            else:
                ops.append({"d": op.kind, "ch": op.channel})
        return {"t": "pre", "ops": ops}
    if isinstance(ev, PostSend):
        return {"t": "post_snd", "tid": ev.tid, "pc": ev.pc, "ch": ev.channel}
    if isinstance(ev, PostReceive):
        return {"t": "post_rcv", "tid": ev.tid, "pc": ev.pc, "ch": ev.channel}
    if isinstance(ev, PostClose):
        return {"t": "post_close", "ch": ev.channel}
    if isinstance(ev, PostDefault):
        return {"t": "post_default"}
    if isinstance(ev, ChanMake):
        return {"t": "chan_make", "ch": ev.channel, "cap": ev.cap}
    raise TypeError(f"unknown event {ev!r}")


class TraceFormatError(ValueError):
    """Raised for malformed trace files, with the offending location."""


def _event_from_json(obj: dict, where: str) -> LocalEvent:
    try:
        t = obj["t"]
        if t == "signal":
            return Signal(int(obj["n"]))
        if t == "wait":
            return Wait(int(obj["n"]))
        if t == "pre":
            ops = []
            for op in obj["ops"]:
                if op["d"] == "default":
                    ops.append(PrimOp(DEFAULT))
                else:
                    ops.append(PrimOp(op["d"], op["ch"]))
            return Pre(tuple(ops))
        if t == "post_snd":
            return PostSend(int(obj["tid"]), int(obj["pc"]), obj["ch"])
        if t == "post_rcv":
            return PostReceive(int(obj["tid"]), int(obj["pc"]), obj["ch"])
        if t == "post_close":
            return PostClose(obj["ch"])
        if t == "post_default":
            return PostDefault()
        if t == "chan_make":
            return ChanMake(obj["ch"], int(obj["cap"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise TraceFormatError(f"{where}: bad event {obj!r} ({exc})") from None
    raise TraceFormatError(f"{where}: unknown event type {t!r}")


def write_trace(ts: TraceSet) -> bytes:
    """Serialize to canonical bytes.  The trace set must validate cleanly."""
    problems = validate(ts)
    if problems:
        raise ValueError("refusing to write invalid trace: " + "; ".join(map(str, problems[:3])))
    doc = {
        "version": 1,
        "threads": ts.threads,
        "channels": [{"id": d.id, "cap": d.cap} for d in sorted(ts.channels, key=lambda d: d.id)],
        "traces": {str(tid): [_event_to_json(e) for e in ts.traces[tid]] for tid in sorted(ts.traces)},
    }
    return json.dumps(doc, separators=(",", ":")).encode("utf-8")


def read_trace(data: bytes) -> TraceSet:
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TraceFormatError(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("version") != 1:
        raise TraceFormatError("missing or unsupported version (want 1)")
    try:
        threads = int(doc["threads"])
        channels = [ChannelDecl(c["id"], int(c["cap"])) for c in doc["channels"]]
        traces = {
            int(tid): [_event_from_json(e, f"thread {tid} event {i}") for i, e in enumerate(events)]
            for tid, events in doc["traces"].items()
        }
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, TraceFormatError):
            raise
        raise TraceFormatError(f"malformed trace document: {exc}") from None
    return TraceSet(threads=threads, channels=channels, traces=traces)
