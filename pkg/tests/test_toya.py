import pytest
from hypothesis import given
from hypothesis import strategies as st

from weirdc import compilers as C
from weirdc import toya
from weirdc.gen import ToyCGen
from weirdc.sexpr import ParseError
from weirdc.traces import Terminal, Trace

SMALL = """
(program (pc 100) (sp 1000)
  (proc _start 100)
  (proc f 200 (var a 0))
  (mem 100 (_start (call f 5)))
  (mem 101 (_start halt))
  (mem 200 (f (output (+ a 1))))
  (mem 201 (f return)))
"""


def test_call_return_halt():
    t, steps, m = toya.exec_toya(toya.parse_toya(SMALL))
    assert t == Trace((6,))
    assert steps == 4


def test_frame_holds_saved_pc_and_sp_above_the_variables():
    p = toya.parse_toya(SMALL)
    m = toya.AMachine.load(p)
    m.step()  # the call
    # _start's frame is its two hidden cells at 1000; f's frame follows: a, saved pc, saved sp
    assert m.sp == 1002
    assert (m.mem[1002], m.mem[1003], m.mem[1004]) == (5, 101, 1000)


def test_reading_code_as_data_is_an_error():
    src = SMALL.replace("(output (+ a 1))", "(output (deref 100))")
    assert toya.run_toya(toya.parse_toya(src)).terminal is Terminal.ERROR


def test_jump_to_data_is_an_error():
    src = SMALL.replace("(call f 5)", "(call f 5)").replace("(mem 201 (f return))", "(mem 201 (f (jmpz 0 300)))")
    assert toya.run_toya(toya.parse_toya(src)).terminal is Terminal.ERROR


def test_overlapping_link_is_refused():
    ctx = toya.parse_toya("(context (pc 1) (sp 50) (proc a 1) (mem 1 (a halt)))")
    comp = toya.parse_toya("(component (proc b 1) (mem 1 (b return)))")
    with pytest.raises(toya.AddressOverlap):
        toya.link_toya(ctx, comp)


def test_duplicate_procedure_is_refused():
    ctx = toya.parse_toya("(context (pc 1) (sp 50) (proc a 1) (mem 1 (a halt)))")
    comp = toya.parse_toya("(component (proc a 2) (mem 2 (a return)))")
    with pytest.raises(toya.LinkError):
        toya.link_toya(ctx, comp)


@pytest.mark.parametrize("text", ["(program (proc a 1))", "(component (mem 1 (a frob)))", "(frob)"])
def test_parse_errors(text):
    with pytest.raises(ParseError):
        toya.parse_toya(text)


@given(st.integers(0, 5000))
def test_show_parse_round_trip_of_compiled_programs(seed):
    p = C.compile_toyc_whole(ToyCGen(seed).whole())
    assert toya.parse_toya(toya.show_toya(p)) == p


def test_budget_terminal():
    loop = "(program (pc 1) (sp 50) (proc a 1) (mem 1 (a (output 3))) (mem 2 (a (jmpz 0 1))))"
    t = toya.run_toya(toya.parse_toya(loop), budget=10)
    assert t.terminal is Terminal.BUDGET and len(t.outputs) == 5
