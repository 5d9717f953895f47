import pytest

from vcreplay.lang import (
    MakeChan,
    ParseError,
    RecvGuard,
    Select,
    SendGuard,
    Spawn,
    parse,
)


def test_three_command_program():
    prog = parse("x := make(chan,0); spawn { x <- 1 }; <-x")
    assert len(prog) == 3
    assert isinstance(prog[0], MakeChan) and prog[0].cap == 0
    assert isinstance(prog[1], Spawn)
    recv = prog[2]
    assert isinstance(recv, Select) and recv.bare
    assert isinstance(recv.cases[0][0], RecvGuard)


def test_intro_style_source_with_comments():
    prog = parse(
        """
        x := make(chan, 0)
        spawn { x <- 1 }   // M1
        spawn { <-x }      // M2
        <-x                // M3
        """
    )
    assert len(prog) == 4
    assert isinstance(prog[1], Spawn) and isinstance(prog[2], Spawn)
    send = prog[1].body[0]
    assert isinstance(send.cases[0][0], SendGuard)


def test_unclosed_select_is_a_syntax_error():
    with pytest.raises(ParseError):
        parse("x := make(chan,0)\nselect { case <-x:")


def test_select_with_default_and_bodies():
    prog = parse(
        """
        x := make(chan, 0)
        select {
          case v := <-x: v := 1
          case x <- 2:
          default: y := 3
        }
        """
    )
    sel = prog[1]
    assert isinstance(sel, Select) and not sel.bare
    assert len(sel.cases) == 2 and sel.default is not None
    guard0, body0 = sel.cases[0]
    assert isinstance(guard0, RecvGuard) and guard0.target == "v" and len(body0) == 1


def test_repeat_unrolls():
    prog = parse("x := make(chan, 1)\nrepeat 3 { x <- 1 }")
    assert len(prog) == 4


def test_pairs_and_projections():
    prog = parse("a := (1, 2); b := fst(a); c := snd((b, 4))")
    assert len(prog) == 3


def test_errors_carry_location():
    try:
        parse("x := make(chan, 0)\nselect }")
        assert False, "expected a parse error"
    except ParseError as exc:
        assert exc.line == 2
