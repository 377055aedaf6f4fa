import itertools
from collections import deque

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weirdc import corpus, fsm


def bfs_behavior(m: fsm.Fsm, q, L: int):
    """Independent oracle: breadth-first over (state, string) configurations."""
    sep = "" if all(len(a) == 1 for a in m.alphabet) else " "

    def configs(init):
        seen = {(init, ())}
        todo = deque(seen)
        while todo:
            p, s = todo.popleft()
            if len(s) == L:
                continue
            for (a, sym, b) in m.delta:
                if a == p and (b, s + (sym,)) not in seen:
                    seen.add((b, s + (sym,)))
                    todo.append((b, s + (sym,)))
        return seen

    x1 = {sep.join(s) for p, s in configs(m.start) if p == q}
    x2 = {sep.join(s) for p, s in configs(q) if p in m.accepting}
    return frozenset(x1), frozenset(x2)


STATES = ["q0", "q1", "q2", "q3"]
SIGMA = ["a", "b"]


@st.composite
def machines(draw):
    n = draw(st.integers(1, 4))
    qs = STATES[:n]
    edges = draw(st.sets(st.tuples(st.sampled_from(qs), st.sampled_from(SIGMA), st.sampled_from(qs)), max_size=10))
    acc = draw(st.sets(st.sampled_from(qs)))
    return fsm.make_fsm(sorted(edges), "q0", sorted(acc), SIGMA, qs)


# ---------------------------------------------------------------- behaviors


@pytest.mark.parametrize("which", ["ifsm", "cpu"])
def test_lock_behaviors_match_bfs(which):
    ifsm, cpu, _ = corpus.fsm_parts()
    m = ifsm if which == "ifsm" else cpu
    for q in sorted(m.states):
        assert fsm.fsm_state_behavior(m, q, 6) == bfs_behavior(m, q, 6)


@settings(max_examples=80)
@given(machines(), st.integers(0, 5))
def test_behavior_matches_bfs_on_random_machines(m, L):
    for q in sorted(m.states):
        assert fsm.fsm_state_behavior(m, q, L) == bfs_behavior(m, q, L)


@settings(max_examples=40)
@given(machines(), st.integers(0, 4))
def test_behavior_grows_with_the_bound(m, L):
    for q in sorted(m.states):
        a1, a2 = fsm.fsm_state_behavior(m, q, L)
        b1, b2 = fsm.fsm_state_behavior(m, q, L + 1)
        assert a1 <= b1 and a2 <= b2


def test_start_state_reaches_itself_with_empty_string():
    m = fsm.make_fsm([("p", "x", "r")], "p", ["r"])
    x1, x2 = fsm.fsm_state_behavior(m, "p", 3)
    assert x1 == {""}
    assert x2 == {"x"}


def test_multi_character_symbols_are_space_separated():
    m = fsm.make_fsm([("p", "go", "p")], "p", ["p"])
    assert fsm.fsm_state_behavior(m, "p", 2)[0] == {"", "go", "go go"}


def test_behavior_errors():
    m = fsm.make_fsm([("p", "x", "r")], "p")
    with pytest.raises(fsm.StateNotInMachine):
        fsm.fsm_state_behavior(m, "zz", 2)
    with pytest.raises(ValueError):
        fsm.fsm_state_behavior(m, "p", -1)


# ---------------------------------------------------------------- text formats


def test_parse_errors():
    with pytest.raises(fsm.FsmFormatError, match="start"):
        fsm.parse_fsm("a x b\n")
    with pytest.raises(fsm.FsmFormatError, match="line 2"):
        fsm.parse_fsm("start a\na x\n")
    with pytest.raises(fsm.FsmFormatError):
        fsm.parse_fsm("start a\nalphabet x\na y b\n")
    with pytest.raises(fsm.FsmFormatError, match="line 1"):
        fsm.parse_gamma("L0 C0\n")


@settings(max_examples=40)
@given(machines())
def test_show_parse_round_trip(m):
    assert fsm.parse_fsm(fsm.show_fsm(m)) == m


def test_gamma_round_trip_and_unknown_states():
    ifsm, cpu, gamma = corpus.fsm_parts()
    assert fsm.parse_gamma(fsm.show_gamma(gamma)) == gamma
    with pytest.raises(fsm.StateNotInMachine):
        fsm.check_gamma(ifsm, cpu, {"L9": frozenset({"C0"})})
    with pytest.raises(fsm.StateNotInMachine):
        fsm.check_gamma(ifsm, cpu, {"L0": frozenset({"C9"})})


# ---------------------------------------------------------------- classification


def _identity(m):
    return {q: frozenset({q}) for q in m.states}


def test_lock_classification():
    ifsm, cpu, gamma = corpus.fsm_parts()
    c = fsm.classify_states(ifsm, cpu, gamma)
    assert c.sane == {"C0", "C1", "CU"}
    assert c.transitory == {"T"}
    assert c.weird == {"M"}
    assert c.evidence["T"]["ifsm_edge"] == ["L1", "2", "U"]
    assert c.evidence["T"]["path"] == ["C1", "T", "CU"]


def test_identity_setup_has_only_sane_states():
    ifsm, _, _ = corpus.fsm_parts()
    c = fsm.classify_states(ifsm, ifsm, _identity(ifsm))
    assert c.sane == set(ifsm.states)
    assert fsm.respects_behaviors(ifsm, ifsm, _identity(ifsm), 6) == (True, [])


def test_gamma_omitting_an_equivalent_state_does_not_respect_behaviors():
    ifsm, _, _ = corpus.fsm_parts()
    gamma = {q: v for q, v in _identity(ifsm).items() if q != "L1"}
    ok, bad = fsm.respects_behaviors(ifsm, ifsm, gamma, 6)
    assert not ok
    assert bad == [{"cpu_state": "L1", "ifsm_state": "L1"}]
    with pytest.raises(fsm.PreconditionFailed):
        fsm.weird_implies_exploit(ifsm, ifsm, gamma, 6)


def test_lock_weird_states_are_exploits():
    ifsm, cpu, gamma = corpus.fsm_parts()
    assert fsm.respects_behaviors(ifsm, cpu, gamma, 6)[0]
    r = fsm.weird_implies_exploit(ifsm, cpu, gamma, 6)
    assert r["all_pass"]
    assert r["weird"] == {"M": {"exploit": True, "simulators": []}}


def test_no_weird_states_is_a_vacuous_pass():
    ifsm, _, _ = corpus.fsm_parts()
    r = fsm.weird_implies_exploit(ifsm, ifsm, _identity(ifsm), 6)
    assert r["weird"] == {} and r["all_pass"]


def test_dead_end_and_cycle_are_weird():
    ifsm = fsm.make_fsm([("A", "x", "A")], "A", ["A"])
    cpu = fsm.make_fsm([("A", "x", "A"), ("A", "y", "D"), ("A", "z", "P"), ("P", "z", "P")], "A", ["A"])
    c = fsm.classify_states(ifsm, cpu, {"A": frozenset({"A"})})
    assert c.weird == {"D", "P"}
    assert "dead end" in c.evidence["D"]
    assert "cycle" in c.evidence["P"]


@settings(max_examples=60)
@given(machines(), machines(), st.integers(0, 4))
def test_weird_states_are_exploits_whenever_behaviors_are_respected(ifsm, cpu, L):
    gamma = {q: frozenset({q}) for q in ifsm.states & cpu.states if q != "q3"}
    if not fsm.respects_behaviors(ifsm, cpu, gamma, L)[0]:
        with pytest.raises(fsm.PreconditionFailed):
            fsm.weird_implies_exploit(ifsm, cpu, gamma, L)
        return
    assert fsm.weird_implies_exploit(ifsm, cpu, gamma, L)["all_pass"]


# ---------------------------------------------------------------- sane-transition gap


def test_gap_identity_is_empty():
    ifsm, _, _ = corpus.fsm_parts()
    assert fsm.sane_transition_gap(ifsm, ifsm, _identity(ifsm)) == []


def test_gap_lock_is_empty_and_variant_lists_the_planted_edge():
    ifsm, cpu, gamma = corpus.fsm_parts()
    assert fsm.sane_transition_gap(ifsm, cpu, gamma) == []
    _, cpu_gap, _ = corpus.fsm_parts(gap=True)
    assert fsm.sane_transition_gap(ifsm, cpu_gap, gamma) == [("C0", "2", "CU")]


@settings(max_examples=40)
@given(machines(), st.sampled_from(STATES), st.sampled_from(SIGMA), st.sampled_from(STATES))
def test_gap_finds_exactly_one_extra_edge(m, p, a, r):
    if p not in m.states or r not in m.states or (p, a, r) in m.delta:
        return
    cpu = fsm.Fsm(m.states, m.alphabet, m.delta | {(p, a, r)}, m.start, m.accepting)
    assert fsm.sane_transition_gap(m, cpu, _identity(m)) == [(p, a, r)]


def test_product_of_lock_strings_sanity():
    # every 2-letter string ending in "12" opens the IFSM lock from L0
    ifsm, _, _ = corpus.fsm_parts()
    _, x2 = fsm.fsm_state_behavior(ifsm, "L0", 3)
    for pre in itertools.product("012", repeat=1):
        assert "".join(pre) + "12" in x2
