"""Analyses over vector-clock annotated events.

Four scenarios: alternative communications (ac), message contention via the
epoch rewrite rules (mp), alternatives for not-selected select cases (asc),
send-on-closed hazards (sc), plus deadlock-recovery hints (dr).  Counts
accumulate per finding: "ac = 4" may mean four alternatives for one
communication pair or two for each of two pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .clock import Ordering, VectorClock
from .replay import EXHAUSTIVE, AnnotatedEvent, ReplayResult, TerminalClass
from .trace import TraceSet


@dataclass
class MatchPair:
    send: AnnotatedEvent
    receive: AnnotatedEvent
    channel: str
    buffered: bool


@dataclass
class Report:
    ac: int = 0
    mp: int = 0
    asc: int = 0
    sc: int = 0
    dr: bool = False
    findings: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "ac": self.ac,
            "mp": self.mp,
            "asc": self.asc,
            "sc": self.sc,
            "dr": self.dr,
            "findings": self.findings,
        }

    def render_text(self) -> str:
        lines = [
            f"alternative communications (ac): {self.ac}",
            f"message contention (mp):         {self.mp}",
            f"alternative select cases (asc):  {self.asc}",
            f"send on closed channel (sc):     {self.sc}",
            f"deadlocked run (dr):             {'true' if self.dr else 'false'}",
        ]
        if self.findings:
            lines.append("findings:")
            for f in self.findings:
                detail = ", ".join(f"{k}={v}" for k, v in f.items() if k != "scenario")
                lines.append(f"  [{f['scenario']}] {detail}")
        return "\n".join(lines)


def _ref(ev: AnnotatedEvent) -> str:
    state = "committed" if ev.committed else ("dangling" if ev.dangling else "not-selected")
    ch = f" {ev.channel}" if ev.channel else ""
    return f"thread {ev.thread} {ev.kind}{ch} @{ev.origin.pos} ({state})"


def _comm_events(events: list[AnnotatedEvent]) -> list[AnnotatedEvent]:
    """Send/receive events carrying a pre clock; closed-channel receives are
    kept out (they consumed nothing and pair with nobody)."""
    out = []
    for ev in events:
        if ev.kind not in ("send", "receive") or ev.pre is None:
            continue
        if ev.kind == "receive" and ev.committed and ev.link is None:
            continue
        out.append(ev)
    return out


def match_pairs(events: list[AnnotatedEvent], ts: TraceSet) -> list[MatchPair]:
    """Pair every committed receive with its send via the recorded link."""
    sends = {}
    for ev in events:
        if ev.kind == "send" and ev.committed:
            sends[ev.link] = ev
    pairs = []
    for ev in events:
        if ev.kind == "receive" and ev.committed and ev.link is not None:
            send = sends.get(ev.link)
            if send is None:
                raise ValueError(f"receive {_ref(ev)} has no matching send {ev.link}")
            pairs.append(MatchPair(send, ev, ev.channel, ts.capacity(ev.channel) > 0))
    return pairs


def _same_select(a: AnnotatedEvent, b: AnnotatedEvent) -> bool:
    return a.thread == b.thread and a.origin.pos == b.origin.pos


def _concurrent(a: AnnotatedEvent, b: AnnotatedEvent) -> bool:
    return a.pre.compare(b.pre) is Ordering.CONCURRENT


def alternative_communications(events: list[AnnotatedEvent], pairs: list[MatchPair], ts: TraceSet) -> tuple[int, list[dict]]:
    """Count communications some other schedule could realize.

    Unbuffered channels: every send/receive attempt (committed, not selected
    or dangling) counts the opposite-direction attempts whose pre clocks are
    concurrent, except its own match partner and guards of the same select.
    Buffered channels queue messages, so concurrency against the opposite
    side is not enough (a queued-behind send can never reach an earlier
    receive); there the members of each match pair count the concurrent
    *same-direction* attempts, i.e. the candidates that could have swapped
    FIFO slots with them.
    """
    comm = _comm_events(events)
    partner: dict[int, AnnotatedEvent] = {}
    for p in pairs:
        partner[id(p.send)] = p.receive
        partner[id(p.receive)] = p.send
    count = 0
    findings: list[dict] = []

    def note(member: AnnotatedEvent, other: AnnotatedEvent):
        nonlocal count
        count += 1
        findings.append(
            {
                "scenario": "ac",
                "channel": member.channel,
                "event": _ref(member),
                "alternative": _ref(other),
                "pre": member.pre.to_list(),
                "alternative_pre": other.pre.to_list(),
            }
        )

    unbuffered = [ev for ev in comm if ts.capacity(ev.channel) == 0]
    for ev in unbuffered:
        want = "receive" if ev.kind == "send" else "send"
        mate = partner.get(id(ev))
        for other in unbuffered:
            if other.kind != want or other.channel != ev.channel:
                continue
            if other is mate or _same_select(ev, other):
                continue
            if _concurrent(ev, other):
                note(ev, other)

    buffered_members = [
        (p, member) for p in pairs if p.buffered for member in (p.send, p.receive)
    ]
    for p, ev in buffered_members:
        for other in comm:
            if other is ev or other.kind != ev.kind or other.channel != ev.channel:
                continue
            if _same_select(ev, other):
                continue
            if _concurrent(ev, other):
                note(ev, other)
    return count, findings


def alternative_select_cases(events: list[AnnotatedEvent], ts: TraceSet) -> tuple[int, list[dict]]:
    """Alternatives for each not-selected case of a committed select."""
    comm = _comm_events(events)
    count = 0
    findings: list[dict] = []
    for ev in comm:
        if ev.committed or ev.dangling:
            continue
        want = "receive" if ev.kind == "send" else "send"
        alternatives = []
        ordered = []
        for other in comm:
            if other.kind != want or other.channel != ev.channel or _same_select(ev, other):
                continue
            rel = ev.pre.compare(other.pre)
            if rel is Ordering.CONCURRENT:
                alternatives.append(other)
            else:
                ordered.append((other, rel))
        count += len(alternatives)
        finding = {
            "scenario": "asc",
            "channel": ev.channel,
            "case": _ref(ev),
            "alternatives": [_ref(o) for o in alternatives],
        }
        if not alternatives and ordered:
            finding["note"] = "; ".join(
                f"partner {_ref(o)} happens {'after' if rel is Ordering.BEFORE else 'before'} this case"
                for o, rel in ordered
            )
        findings.append(finding)
    return count, findings


# -- message contention (epoch rules) ----------------------------------------


@dataclass
class _Epoch:
    thread: int
    stamp: int
    real: bool  # False for entries seeded from the channel-init clock
    clock: VectorClock | None = None  # kept by the full-clock re-simulation


def _contention_stream(events: list[AnnotatedEvent], full_clocks: bool):
    """Run the epoch rewrite rules over E; yields (event, retained-real) steps.

    The guard is the strict per-component test: an attempt happens after an
    epoch entry only if its pre clock strictly exceeds the entry's stamp at
    the entry's own thread.  A Single step collapses the list to the new
    attempt; a Multiple step keeps exactly the entries not dominated.
    """
    lists: dict[tuple[str, str], list[_Epoch]] = {}
    max_len: dict[tuple[str, str], int] = {}
    steps = []
    for ev in events:
        if ev.kind == "init":
            for direction in ("send", "receive"):
                key = (ev.channel, direction)
                lists[key] = [
                    _Epoch(i, ev.post[i], False, ev.post if full_clocks else None)
                    for i in range(1, len(ev.post) + 1)
                ]
                max_len[key] = max(max_len.get(key, 0), len(lists[key]))
            continue
        if ev.kind not in ("send", "receive") or ev.pre is None:
            continue
        key = (ev.channel, ev.kind)
        es = lists.setdefault(key, [])
        cs = ev.pre
        kept = [e for e in es if not cs[e.thread] > e.stamp]
        new = _Epoch(ev.thread, cs[ev.thread], True, cs if full_clocks else None)
        if not kept:
            lists[key] = [new]
            retained: list[_Epoch] = []
        else:
            retained = [e for e in kept if e.thread != ev.thread]
            lists[key] = [new] + retained
        max_len[key] = max(max_len.get(key, 0), len(lists[key]))
        real_retained = [e for e in retained if e.real]
        steps.append((ev, real_retained, key))
    return steps, max_len


def message_contention(events: list[AnnotatedEvent], ts: TraceSet, full_clocks: bool = False) -> tuple[int, list[dict], dict]:
    """Concurrent same-direction attempts per channel, via epoch lists.

    Returns (cumulative count, findings, per-channel summary).  Cumulative
    counts one per (attempt, retained concurrent predecessor)."""
    steps, max_len = _contention_stream(events, full_clocks)
    count = 0
    findings = []
    per_channel: dict[tuple[str, str], int] = {}
    for ev, retained, key in steps:
        if not retained:
            continue
        count += len(retained)
        per_channel[key] = per_channel.get(key, 0) + len(retained)
        findings.append(
            {
                "scenario": "mp",
                "channel": key[0],
                "direction": key[1],
                "event": _ref(ev),
                "concurrent_with": [f"thread {e.thread}@{e.stamp}" for e in retained],
            }
        )
    summary = {
        "per_channel": {f"{ch}/{d}": n for (ch, d), n in sorted(per_channel.items())},
        "max_epochs": {f"{ch}/{d}": n for (ch, d), n in sorted(max_len.items())},
    }
    return count, findings, summary


def send_on_closed(events: list[AnnotatedEvent], ts: TraceSet) -> tuple[int, list[dict]]:
    """Sends that happen after, or concurrently with, a close of their channel."""
    closes: dict[str, list[AnnotatedEvent]] = {}
    for ev in events:
        if ev.kind == "close":
            closes.setdefault(ev.channel, []).append(ev)
    count = 0
    findings = []
    for ev in events:
        if ev.kind != "send" or ev.pre is None:
            continue
        hits = []
        for close in closes.get(ev.channel, []):
            rel = ev.pre.compare(close.post)
            if rel in (Ordering.AFTER, Ordering.CONCURRENT):
                hits.append((close, rel))
        if hits:
            count += 1
            findings.append(
                {
                    "scenario": "sc",
                    "channel": ev.channel,
                    "send": _ref(ev),
                    "close": [f"{_ref(c)} ({rel.value})" for c, rel in hits],
                    "send_pre": ev.pre.to_list(),
                    "close_post": [c.post.to_list() for c, _ in hits],
                }
            )
    return count, findings


def send_on_closed_epoch(events: list[AnnotatedEvent], ts: TraceSet) -> set[tuple[str, int, int]]:
    """Streaming variant keeping per-thread send epochs and the close clock.

    Returns the flagged send identities (channel, thread, origin pos).  The
    per-thread-latest pruning can drop an earlier send of the same thread,
    so the flags are a subset of the exact computation's.
    """
    send_epochs: dict[str, list[tuple[int, int, tuple]]] = {}  # ch -> (thread, stamp, id)
    close_clocks: dict[str, list[VectorClock]] = {}
    flagged: set[tuple[str, int, int]] = set()
    for ev in events:
        if ev.kind == "close":
            close_clocks.setdefault(ev.channel, []).append(ev.post)
            for thread, stamp, ident in send_epochs.get(ev.channel, []):
                if not ev.post[thread] > stamp:
                    flagged.add(ident)
        elif ev.kind == "send" and ev.pre is not None:
            es = send_epochs.setdefault(ev.channel, [])
            cs = ev.pre
            kept = [e for e in es if not cs[e[0]] > e[1] and e[0] != ev.thread]
            mine = (ev.thread, cs[ev.thread], (ev.channel, ev.thread, ev.origin.pos))
            send_epochs[ev.channel] = [mine] + kept
            for cc in close_clocks.get(ev.channel, []):
                if not cc[ev.thread] > cs[ev.thread]:
                    flagged.add(mine[2])
    return flagged


def run_deadlocked(events: list[AnnotatedEvent], terminal: TerminalClass) -> bool:
    """The recorded run ended in a deadlock: the replay is stuck, or the main
    thread's trace ends in a dangling attempt."""
    if terminal.kind != EXHAUSTIVE:
        return True
    return any(ev.dangling and ev.thread == 1 for ev in events)


def deadlock_recovery(events: list[AnnotatedEvent], terminal: TerminalClass) -> tuple[bool, list[dict]]:
    """Potential partners for every dangling event.

    A partner is a committed or dangling opposite-direction event on the
    same channel whose pre clock is concurrent with (unordered against) the
    dangling pre clock; "no alternatives" is an explicit finding."""
    deadlocked = run_deadlocked(events, terminal)
    findings: list[dict] = []
    comm = [ev for ev in events if ev.kind in ("send", "receive") and ev.pre is not None]
    for ev in comm:
        if not ev.dangling:
            continue
        want = "receive" if ev.kind == "send" else "send"
        partners = []
        for other in comm:
            if other.kind != want or other.channel != ev.channel:
                continue
            if not (other.committed or other.dangling) or _same_select(ev, other):
                continue
            if _concurrent(ev, other):
                partners.append(other)
        finding = {
            "scenario": "dr",
            "channel": ev.channel,
            "blocked": _ref(ev),
            "pre": ev.pre.to_list(),
        }
        if partners:
            finding["partners"] = [_ref(p) for p in partners]
        else:
            finding["no_alternatives"] = True
        findings.append(finding)
    return deadlocked, findings


# -- orchestration -------------------------------------------------------------

ALL_SCENARIOS = ("ac", "mp", "asc", "sc", "dr")


def build_report(
    ts: TraceSet,
    result: ReplayResult,
    scenarios: tuple[str, ...] = ALL_SCENARIOS,
    enumerated: list[ReplayResult] | None = None,
) -> Report:
    """Assemble the per-scenario report from one replay's events.

    When ``enumerated`` is given, send-on-closed flags are unioned over the
    enumerated annotations: clock assignments differ per schedule, so a
    hazard may be visible in only some of them."""
    events = result.events
    report = Report()
    pairs = match_pairs(events, ts)
    if "ac" in scenarios:
        report.ac, f = alternative_communications(events, pairs, ts)
        report.findings.extend(f)
    if "mp" in scenarios:
        report.mp, f, summary = message_contention(events, ts)
        report.findings.extend(f)
    if "asc" in scenarios:
        report.asc, f = alternative_select_cases(events, ts)
        report.findings.extend(f)
    if "sc" in scenarios:
        if enumerated:
            flagged: dict[tuple, dict] = {}
            total: set[tuple] = set()
            for res in enumerated:
                n, f = send_on_closed(res.events, ts)
                for item in f:
                    key = (item["channel"], item["send"])
                    if key not in flagged:
                        flagged[key] = item
                        total.add(key)
            report.sc = len(total)
            report.findings.extend(flagged.values())
        else:
            report.sc, f = send_on_closed(events, ts)
            report.findings.extend(f)
    report.dr = run_deadlocked(events, result.terminal)
    if "dr" in scenarios:
        _, f = deadlock_recovery(events, result.terminal)
        report.findings.extend(f)
    return report
