import random

import pytest

from vcreplay import Schedule, RunStatus, enumerate_runs, run, validate
from vcreplay.interp import ScheduleError, StepLimitExceeded
from vcreplay.randprog import random_program
from vcreplay.trace import PostReceive, PostSend, Pre

from conftest import corpus_source, run_corpus


def test_deadlock_when_spawned_receiver_wins():
    out = run_corpus("first_come", "deadlock")
    assert out.status is RunStatus.DEADLOCK
    # Main ends blocked on its receive: a dangling pre closes its trace.
    assert isinstance(out.trace.traces[1][-1], Pre)
    assert out.trace.traces[1][-1].ops[0].kind == "rcv"


def test_main_exit_leaves_dangling_receiver():
    out = run_corpus("first_come", "done")
    assert out.status is RunStatus.MAIN_EXITED
    assert isinstance(out.trace.traces[3][-1], Pre)


def test_send_on_closed_panics():
    out = run("x := make(chan, 0); close(x); x <- 1", Schedule.seeded(0))
    assert out.status is RunStatus.PANIC_SEND_CLOSED
    assert out.panic_location == (1, 3)
    # The attempt is on record even though it never committed.
    assert isinstance(out.trace.traces[1][-1], Pre)


def test_receive_from_closed_records_sentinel():
    out = run_corpus("close_race")
    assert out.status is RunStatus.MAIN_EXITED
    last = out.trace.traces[1][-1]
    assert isinstance(last, PostReceive) and last.from_closed


def test_explicit_runs_are_reproducible():
    source = corpus_source("newsreader")
    a = run_corpus("newsreader")
    b = run_corpus("newsreader")
    assert a.canonical_bytes() == b.canonical_bytes()
    assert a.status is b.status is RunStatus.DEADLOCK


def test_seeded_runs_are_reproducible():
    source = corpus_source("pipeline_sync")
    a = run(source, Schedule.seeded(11))
    b = run(source, Schedule.seeded(11))
    assert a.canonical_bytes() == b.canonical_bytes()


def test_schedules_reject_disabled_moves():
    with pytest.raises(ScheduleError):
        run(corpus_source("first_come"), Schedule.explicit([{"tid": 2, "case": 1}]))


def test_step_limit_is_enforced():
    looping = "x := make(chan, 1)\nrepeat 100 { x <- 1; <-x }"
    with pytest.raises(StepLimitExceeded):
        run(looping, Schedule.seeded(0), max_steps=20)


def test_enumerate_intro_race_has_two_outcomes():
    outs = enumerate_runs(corpus_source("first_come"))
    assert len(outs) == 2
    assert sorted(o.status.value for o in outs) == ["deadlock", "main_exited"]


def test_enumerate_single_thread_program():
    outs = enumerate_runs("x := make(chan, 1); x <- 1; <-x")
    assert len(outs) == 1
    assert outs[0].status is RunStatus.MAIN_EXITED


def test_enumerate_fifo_buffer_always_matches_first_send():
    outs = enumerate_runs(corpus_source("fifo_buffered"))
    assert outs
    for out in outs:
        receives = [e for e in out.trace.traces[2] if isinstance(e, PostReceive)]
        if receives:
            # pc 3 is the first send of the main thread.
            assert receives[0].tid == 1 and receives[0].pc == 3


def test_fifo_order_on_one_buffered_channel():
    source = """
    x := make(chan, 3)
    spawn { a := <-x; b := <-x; c := <-x }
    x <- 1
    x <- 2
    x <- 3
    """
    for seed in range(12):
        out = run(source, Schedule.seeded(seed))
        sends = [e.pc for e in out.trace.traces[1] if isinstance(e, PostSend)]
        got = [e.pc for e in out.trace.traces[2] if isinstance(e, PostReceive)]
        assert got == sends[: len(got)]


def test_every_run_produces_valid_traces():
    rng = random.Random(7)
    for i in range(30):
        source = random_program(rng, buffered=(i % 3 == 0))
        out = run(source, Schedule.seeded(i))
        assert validate(out.trace) == []


def test_select_default_fires_only_when_nothing_ready():
    source = """
    x := make(chan, 0)
    select {
      case <-x:
      default: y := 1
    }
    """
    out = run(source, Schedule.seeded(0))
    assert out.status is RunStatus.MAIN_EXITED
    kinds = [type(e).__name__ for e in out.trace.traces[1]]
    assert kinds == ["ChanMake", "Pre", "PostDefault"]

    ready = """
    x := make(chan, 1)
    x <- 1
    select {
      case <-x:
      default: y := 1
    }
    """
    out2 = run(ready, Schedule.seeded(0))
    kinds2 = [type(e).__name__ for e in out2.trace.traces[1]]
    assert "PostDefault" not in kinds2


def test_select_default_suppressed_by_a_blocked_sender():
    # The spawned sender blocks before main reaches its select, so the
    # receive case is ready and the default must not fire.
    source = """
    x := make(chan, 0)
    spawn { x <- 1 }
    select {
      case v := <-x:
      default: y := 1
    }
    """
    out = run(source, Schedule.seeded(0))
    assert out.status is RunStatus.MAIN_EXITED
    kinds = [type(e).__name__ for e in out.trace.traces[1]]
    assert "PostDefault" not in kinds and "PostReceive" in kinds


def test_values_flow_through_pairs():
    source = """
    x := make(chan, 0)
    spawn { x <- (1, (2, 3)) }
    v := <-x
    y := fst(snd(v))
    """
    out = run(source, Schedule.seeded(3))
    assert out.status is RunStatus.MAIN_EXITED
