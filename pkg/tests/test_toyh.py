from hypothesis import given
from hypothesis import strategies as st

from weirdc import corpus, toyh
from weirdc.sexpr import ParseError
from weirdc.traces import Terminal, Trace

import pytest

INNER = """(program (pc 1) (sp 50) (proc a 1 (var k 0)) (input k 40)
  (mem 1 (a (output (deref 40)))) (mem 2 (a halt)))"""


def test_get_info_binds_trace_and_steps():
    src = f"(seq (assign k 7) (get_info t s {INNER}) (output (index t 0)) (output s) (output (len t)))"
    assert toyh.run_toyh(toyh.parse_toyh(src)) == Trace((7, 2, 1))


def test_trace_values_are_not_outputs():
    src = f"(seq (assign k 7) (get_info t s {INNER}) (output t))"
    assert toyh.run_toyh(toyh.parse_toyh(src)).terminal is Terminal.STUCK


def test_inner_error_does_not_crash_the_host():
    bad = "(program (pc 1) (sp 50) (proc a 1) (mem 1 (a (output (deref 999))))) "
    src = f"(seq (get_info t s {bad}) (output (len t)) (output s))"
    assert toyh.run_toyh(toyh.parse_toyh(src)) == Trace((0, 1))


def test_context_with_a_hole_parses_as_attack():
    site = "(context (pc 1) (sp 50) (proc a 1) (mem 1 (a (call f))) (mem 2 (a halt)))"
    a = toyh.parse_toyh(f"(get_info t s {site})")
    assert isinstance(a, toyh.HAttackContext)


def test_attack_without_hole_is_rejected():
    with pytest.raises(ValueError):
        toyh.HAttackContext(toyh.parse_toyh("(output 1)"))


def test_parse_error_on_component_inside_get_info():
    with pytest.raises(ParseError):
        toyh.parse_toyh("(get_info t s (component))")


@given(st.integers(-20, 20))
def test_get_info_is_pure(k):
    src = f"(seq (assign k {k}) (get_info t s {INNER}) (assign a s) (get_info t s {INNER}) (output (= a s)) " \
          f"(output (index t 0)))"
    assert toyh.run_toyh(toyh.parse_toyh(src)) == Trace((True, k))


@given(st.lists(st.integers(1, 4), min_size=1, max_size=6))
def test_findpass_recovers_within_the_query_bound(pw):
    r = corpus.run_findpass(tuple(pw))
    assert r["ok"]
    assert r["calls"] <= corpus.ALPHABET * len(pw) + corpus.MAX_LEN


def test_step_counts_are_deterministic():
    a = corpus.run_findpass((2, 3, 1, 4))
    b = corpus.run_findpass((2, 3, 1, 4))
    assert a["trace"] == b["trace"] and a["calls"] == b["calls"]
