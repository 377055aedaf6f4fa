import pytest
from hypothesis import given
from hypothesis import strategies as st

from weirdc.compilers import IMP_TOYC, TOYC_TOYA
from weirdc.traces import (BehaviorSample, ExplorationBounds, Terminal, Trace, compose, format_trace,
                           identity_relation, in_property_image, parse_trace, relate_trace, sample_from_json,
                           samples_agree, trace_from_json, TraceProperty, _jsonable)

values = st.one_of(st.booleans(), st.integers(-50, 50))
terminals = st.sampled_from(list(Terminal))
traces = st.builds(lambda o, t: Trace(tuple(o), t), st.lists(values, max_size=6), terminals)


@given(traces)
def test_text_format_round_trips(t):
    assert parse_trace(format_trace(t)) == t


@given(traces)
def test_json_round_trips(t):
    assert trace_from_json(_jsonable(t)) == t


def test_text_format_layout():
    assert format_trace(Trace((True, 3), Terminal.STUCK)) == "true\n3\n# terminal: stuck\n"


def test_true_and_one_are_different_outputs():
    assert Trace((True,)) != Trace((1,))
    assert len({Trace((True,)), Trace((1,))}) == 2


def test_sort_order_is_shortest_then_lexicographic():
    ts = [Trace((2,)), Trace(()), Trace((1, 1)), Trace((True,))]
    assert sorted(ts, key=Trace.sort_key) == [Trace(()), Trace((True,)), Trace((2,)), Trace((1, 1))]


def test_imp_relation_values():
    assert relate_trace(IMP_TOYC, Trace((True, False, 5)), Trace((1, 0, 5)))
    assert not relate_trace(IMP_TOYC, Trace((True,)), Trace((0,)))
    assert not relate_trace(IMP_TOYC, Trace((1,), Terminal.STUCK), Trace((1,), Terminal.STUCK))


def test_error_relates_to_nothing():
    e = Trace((), Terminal.ERROR)
    assert not relate_trace(TOYC_TOYA, e, e)
    assert not relate_trace(TOYC_TOYA, Trace(()), e)


def test_budget_traces_relate_by_prefix():
    cut = Trace((1, 2), Terminal.BUDGET)
    assert relate_trace(TOYC_TOYA, cut, Trace((1, 2, 3)))
    assert relate_trace(TOYC_TOYA, Trace((1, 2, 3)), Trace((1,), Terminal.BUDGET))
    assert not relate_trace(TOYC_TOYA, cut, Trace((1, 3)))
    assert relate_trace(TOYC_TOYA, cut, Trace((1, 2, 3, 4), Terminal.BUDGET))


@given(st.lists(st.one_of(st.booleans(), st.integers(0, 9)), max_size=5))
def test_composition_agrees_with_explicit_intermediate(outs):
    rel13 = compose(IMP_TOYC, TOYC_TOYA)
    t1 = Trace(tuple(outs))
    t2 = Trace(tuple(IMP_TOYC.forward(v) for v in outs))
    for t3 in (t2, Trace(tuple(outs)), Trace(t2.outputs + (0,))):
        via = relate_trace(IMP_TOYC, t1, t2) and relate_trace(TOYC_TOYA, t2, t3)
        assert relate_trace(rel13, t1, t3) == via


def test_property_image_needs_prefix_closure_for_budget_traces():
    no_twos = TraceProperty("no-2", lambda t: 2 not in t.outputs, "test", prefix_closed=True)
    short = TraceProperty("short", lambda t: len(t.outputs) < 2, "test", prefix_closed=False)
    rel = identity_relation()
    cut = Trace((2,), Terminal.BUDGET)
    assert not in_property_image(rel, no_twos, cut)
    assert in_property_image(rel, short, Trace((1, 1, 1), Terminal.BUDGET))


def test_samples_agree_reports_entry_differences():
    a = BehaviorSample.from_runs(("x",), [(0,), (1,)], [Trace((0,)), Trace((1,))])
    b = BehaviorSample.from_runs(("x",), [(0,), (1,)], [Trace((0,)), Trace((2,))])
    assert samples_agree(a, a) == []
    assert len(samples_agree(a, b)) == 1


def test_sample_json_round_trip():
    a = BehaviorSample.from_runs(("x", "y"), [(True, 0), (1, 2)], [Trace((0,)), Trace((1,), Terminal.BUDGET)])
    back = sample_from_json(_jsonable(a))
    assert back.entries == a.entries and back.inputs == a.inputs


def test_bounds_validation_and_profiles():
    with pytest.raises(ValueError):
        ExplorationBounds(budget=0)
    with pytest.raises(ValueError):
        ExplorationBounds.profile("huge")
    assert ExplorationBounds.profile("quick").budget < ExplorationBounds.profile("thorough").budget


def test_profile_from_environment(monkeypatch):
    monkeypatch.setenv("WM_BOUND_PROFILE", "quick")
    assert ExplorationBounds.profile().context_size == 3
