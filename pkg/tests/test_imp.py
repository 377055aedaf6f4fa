import pytest
from hypothesis import given
from hypothesis import strategies as st

from weirdc import imp
from weirdc.gen import ImpGen
from weirdc.sexpr import ParseError
from weirdc.traces import ExplorationBounds, Terminal, Trace


def run(text, budget=1000, **sigma):
    return imp.run_imp(imp.parse_imp(text), sigma, budget)


def test_outputs_and_halt():
    assert run("(seq (assign x 2) (output (+ x 3)) (output (< x 3)))") == Trace((5, True))


def test_number_as_guard_is_stuck():
    assert run("(seq (assign x 1) (if x (output true) (output false)))") == Trace((), Terminal.STUCK)


def test_mixed_equality_is_stuck():
    assert run("(output (= true 1))") == Trace((), Terminal.STUCK)


def test_unbound_variable_is_stuck():
    assert run("(seq (output 1) (output y))") == Trace((1,), Terminal.STUCK)


def test_loop_runs_out_of_budget():
    t = run("(while true (output 1))", budget=30)
    assert t.terminal is Terminal.BUDGET and set(t.outputs) == {1}


def test_budget_counts_small_steps():
    # assign, then the seq-skip step, then output: three steps in total
    p = "(seq (assign x 1) (output x))"
    assert run(p, budget=2).terminal is Terminal.BUDGET
    assert run(p, budget=3) == Trace((1,))


def test_component_and_context_parse():
    u = imp.parse_imp("(component (x) (output x))")
    c = imp.parse_imp("(seq (assign x 4) (hole (x)))")
    assert isinstance(u, imp.ImpComponent) and isinstance(c, imp.ImpContext)
    assert imp.run_imp(imp.link_imp(c, u)) == Trace((4,))


def test_annotation_mismatch_refuses_to_link():
    u = imp.parse_imp("(component (x) (output x))")
    c = imp.parse_imp("(seq (assign y 4) (hole (y)))")
    with pytest.raises(imp.AnnotationMismatch):
        imp.link_imp(c, u)


def test_component_annotation_must_cover_free_vars():
    with pytest.raises(ParseError):
        imp.parse_imp("(component (x) (output y))")


@pytest.mark.parametrize("text", ["(output (- 1 2))", "(assign 3 x)", "(seq (hole (x)) (hole (x)))", "(output -1)"])
def test_rejected_programs(text):
    with pytest.raises(ParseError):
        imp.parse_imp(text)


def test_input_vars_are_live_in_only():
    p = imp.parse_imp("(seq (assign t x) (seq (output t) (output y)))")
    assert imp.input_vars(p) == ["x", "y"]


def test_behavior_covers_the_valuation_grid():
    p = imp.parse_imp("(output x)")
    b = imp.behavior_imp(p, ExplorationBounds(imp_domain=(False, True, 0, 1)))
    assert len(b) == 4
    assert b.get(True) == Trace((True,)) and b.get(1) == Trace((1,))


@given(st.integers(0, 10_000))
def test_show_parse_round_trip(seed):
    p = ImpGen(seed).whole()
    assert imp.parse_imp(imp.show(p)) == p


@given(st.integers(0, 10_000))
def test_step_is_deterministic(seed):
    p = ImpGen(seed).whole()
    sigma = {"x": 2, "y": True}
    assert imp.run_imp(p, sigma, 500) == imp.run_imp(p, sigma, 500)
