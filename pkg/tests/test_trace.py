import json
import random

import pytest

from vcreplay import Schedule, run, validate
from vcreplay.randprog import random_program
from vcreplay.trace import (
    ChanMake,
    ChannelDecl,
    PostReceive,
    PostSend,
    Pre,
    PrimOp,
    Signal,
    TraceFormatError,
    TraceSet,
    Wait,
    read_trace,
    write_trace,
)

from conftest import run_corpus


def pipeline_trace() -> TraceSet:
    """The five-thread pipeline run, written out by hand."""
    snd = lambda ch: Pre((PrimOp("snd", ch),))
    rcv = lambda ch: Pre((PrimOp("rcv", ch),))
    return TraceSet(
        threads=5,
        channels=[ChannelDecl("x", 0), ChannelDecl("y", 0)],
        traces={
            1: [ChanMake("x", 0), ChanMake("y", 0), Signal(2), Signal(3), Signal(4), Signal(5)],
            2: [Wait(2), snd("x"), PostSend(2, 1, "x")],
            3: [Wait(3), rcv("x"), PostReceive(2, 1, "x"), snd("x"), PostSend(3, 2, "x")],
            4: [Wait(4), snd("y"), PostSend(4, 1, "y"), rcv("x"), PostReceive(3, 2, "x")],
            5: [Wait(5), rcv("y"), PostReceive(4, 1, "y")],
        },
    )


def test_pipeline_trace_is_well_formed():
    assert validate(pipeline_trace()) == []


def test_executor_trace_matches_handwritten_pipeline():
    out = run_corpus("pipeline_sync")
    assert out.trace == pipeline_trace()


def test_round_trip_is_canonical():
    data = write_trace(pipeline_trace())
    assert write_trace(read_trace(data)) == data
    assert read_trace(write_trace(read_trace(data))) == read_trace(data)


def test_empty_program_trace_is_header_only():
    ts = TraceSet(threads=1, channels=[], traces={1: []})
    data = write_trace(ts)
    assert json.loads(data) == {"version": 1, "threads": 1, "channels": [], "traces": {"1": []}}


def test_unmatched_receive_is_flagged():
    ts = pipeline_trace()
    ts.traces[4][4] = PostReceive(7, 9, "x")
    reasons = [v.reason for v in validate(ts)]
    assert any("unknown send (7,9)" in r for r in reasons)


def test_duplicate_send_identity_is_flagged():
    ts = pipeline_trace()
    ts.traces[3][4] = PostSend(3, 2, "x")
    ts.traces[3].extend([Pre((PrimOp("snd", "x"),)), PostSend(3, 2, "x")])
    reasons = [v.reason for v in validate(ts)]
    assert any("duplicate send identity" in r for r in reasons)


def test_undeclared_channel_parses_but_fails_validation():
    ts = pipeline_trace()
    data = write_trace(ts).replace(b'"ch":"y"', b'"ch":"z"')
    loaded = read_trace(data)  # parse is fine
    assert any("undeclared channel" in v.reason for v in validate(loaded))


def test_corrupt_bytes_raise_format_error():
    with pytest.raises(TraceFormatError):
        read_trace(b"{not json")
    with pytest.raises(TraceFormatError):
        read_trace(b'{"version":2}')
    with pytest.raises(TraceFormatError):
        read_trace(b'{"version":1,"threads":1,"channels":[],"traces":{"1":[{"t":"warp"}]}}')


def test_event_encodings_are_exact():
    ts = TraceSet(
        threads=2,
        channels=[ChannelDecl("c", 1)],
        traces={
            1: [
                ChanMake("c", 1),
                Signal(2),
                Pre((PrimOp("snd", "c"), PrimOp("default"))),
                PostSend(1, 3, "c"),
            ],
            2: [Wait(2), Pre((PrimOp("rcv", "c"),)), PostReceive(1, 3, "c")],
        },
    )
    doc = json.loads(write_trace(ts))
    assert doc["traces"]["1"] == [
        {"t": "chan_make", "ch": "c", "cap": 1},
        {"t": "signal", "n": 2},
        {"t": "pre", "ops": [{"d": "snd", "ch": "c"}, {"d": "default"}]},
        {"t": "post_snd", "tid": 1, "pc": 3, "ch": "c"},
    ]
    assert doc["traces"]["2"] == [
        {"t": "wait", "n": 2},
        {"t": "pre", "ops": [{"d": "rcv", "ch": "c"}]},
        {"t": "post_rcv", "tid": 1, "pc": 3, "ch": "c"},
    ]


def test_round_trip_on_random_executor_traces():
    rng = random.Random(1234)
    for i in range(25):
        source = random_program(rng, buffered=(i % 2 == 0))
        outcome = run(source, Schedule.seeded(i))
        assert validate(outcome.trace) == []
        data = write_trace(outcome.trace)
        assert write_trace(read_trace(data)) == data
