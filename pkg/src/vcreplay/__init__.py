"""Two-phase dynamic analysis of message-passing programs.

Phase 1 (:mod:`vcreplay.interp`) executes a program under a controlled
schedule and records thread-local event traces.  Phase 2
(:mod:`vcreplay.replay`) replays traces offline into vector-clock annotated
events, over which :mod:`vcreplay.analysis` reports alternative
communications, message contention, send-on-closed hazards and
deadlock-recovery hints.
"""

from .clock import Ordering, VectorClock
from .interp import RunOutcome, RunStatus, Schedule, enumerate_runs, run
from .lang import ParseError, parse
from .replay import (
    AnnotatedEvent,
    EnumerationResult,
    Mode,
    ReplayResult,
    enumerate_annotations,
    implied_schedule,
    replay,
)
from .analysis import Report, build_report, match_pairs
from .trace import TraceSet, read_trace, validate, write_trace

__all__ = [
    "AnnotatedEvent",
    "EnumerationResult",
    "Mode",
    "Ordering",
    "ParseError",
    "Report",
    "ReplayResult",
    "RunOutcome",
    "RunStatus",
    "Schedule",
    "TraceSet",
    "VectorClock",
    "build_report",
    "enumerate_annotations",
    "enumerate_runs",
    "implied_schedule",
    "match_pairs",
    "parse",
    "read_trace",
    "replay",
    "run",
    "validate",
    "write_trace",
]

__version__ = "0.1.0"
