import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weirdc import compilers as C
from weirdc import imp, toya, toyc, toyh
from weirdc.gen import ImpGen, ToyCGen, random_pairs, random_wholes
from weirdc.traces import ExplorationBounds, Terminal, Trace, relate_trace

SMALL = ExplorationBounds(imp_domain=(False, True, 0, 1, 2), int_domain=tuple(range(-2, 3)), budget=2000)


# ---------------------------------------------------------------- stage 1


@pytest.mark.parametrize("op,a,b", list(itertools.product(["and", "or"], [False, True], [False, True])))
def test_boolean_operators_lower_to_arithmetic(op, a, b):
    e = imp.BinOp(op, imp.BoolLit(a), imp.BoolLit(b))
    p = imp.Output(e)
    want = C.IMP_TOYC.forward(imp.eval_imp(e, {}))
    assert toyc.run_toyc(C.compile_imp_whole(p), []) == Trace((want,))


def test_components_take_their_variables_by_reference():
    u = imp.parse_imp("(component (x y) (assign x y))")
    hole = C.compile_imp_toyc(u).get("hole")
    assert [t for _, t in hole.params] == [toyc.PtrT(toyc.INT)] * 2


def test_whole_program_inputs_are_live_in_variables():
    p = imp.parse_imp("(seq (assign t 1) (output (+ t x)))")
    main = C.compile_imp_whole(p).get("main")
    assert [n for n, _ in main.params] == ["x"]
    assert [n for n, _ in main.locals] == ["t"]


def test_boolean_branch_program_is_a_correctness_counterexample():
    p = imp.parse_imp("(seq (assign x 1) (if x (output true) (output false)))")
    assert imp.run_imp(p) == Trace((), Terminal.STUCK)
    assert toyc.run_toyc(C.compile_imp_whole(p), []) == Trace((1,))
    assert C.check_correct_whole(C.STAGE1, [p], SMALL)["counterexamples"]
    assert not C.check_preserves_traces(C.STAGE1, [p], SMALL)["counterexamples"]


@given(st.integers(0, 100_000))
@settings(max_examples=40)
def test_stage1_preserves_traces(seed):
    assert not C.check_preserves_traces(C.STAGE1, [ImpGen(seed).whole()], SMALL)["counterexamples"]


@given(st.integers(0, 100_000))
@settings(max_examples=25)
def test_stage1_is_modular(seed):
    assert not C.check_modularity(C.STAGE1, [ImpGen(seed).pair()], SMALL)["counterexamples"]


def test_relation_report_facts():
    r = C.relation_report(C.IMP_TOYC, (False, True, 0, 1, 2), (-1, 0, 1, 2))
    assert r["forward"][:2] == [["false", "0"], ["true", "1"]]
    assert {"target": "1", "sources": ["true", "1"]} in r["noninjective"]
    assert r["no_preimage"] == ["-1"]
    assert r["counterexamples"] == []


# ---------------------------------------------------------------- stage 2


def test_stage2_ub_program_runs_once_compiled():
    p = toyc.parse_toyc("(proc main () ((a (array int 1))) (seq (assign (deref (+ a 9)) 5) (output 1)))")
    assert toyc.run_toyc(p, []) == Trace((), Terminal.ERROR)
    assert toya.run_toya(C.compile_toyc_whole(p)) == Trace((1,))


@given(st.integers(0, 100_000))
@settings(max_examples=25)
def test_stage2_preserves_traces(seed):
    assert not C.check_preserves_traces(C.STAGE2, [ToyCGen(seed).whole()], SMALL)["counterexamples"]


@given(st.integers(0, 100_000))
@settings(max_examples=25)
def test_stage2_is_modular_even_with_undefined_behavior(seed):
    assert not C.check_modularity(C.STAGE2, [ToyCGen(seed).pair()], SMALL)["counterexamples"]


def test_stage2_is_correct_on_safe_programs():
    progs = [ToyCGen(s, safe=True).whole() for s in range(15)]
    assert not C.check_correct_whole(C.STAGE2, progs, SMALL)["counterexamples"]


def test_layout_report_resolves_labels():
    store = toyc.parse_toyc("""
(proc store ((p (ptr int))) () (assign (deref p) 42))
(proc show ((p (ptr int)) (n int)) ((buf (array int 2))) (output (deref p)))""")
    comp, rep = C.compile_toyc_toya(store, with_layout=True)
    g = rep.resolve("store.gadget_42")
    assert toya.show_instr(comp.memory[g].instr) == "(assign (deref p) 42)"
    assert rep.resolve("show.@buf") == 2
    assert rep.resolve("show.size") == 6 and rep.resolve("show.ret") == 4
    assert rep.resolve("show.output") == rep.resolve("show.entry")
    assert rep.render().startswith("# weirdc layout v1\n")
    with pytest.raises(KeyError):
        rep.resolve("store.gadget_7")


def test_code_slots_are_name_keyed():
    a = toyc.parse_toyc("(proc f () () (output 1)) (proc g () () (output 2))")
    b = toyc.parse_toyc("(proc g () () (output 2))")
    la = C.compile_toyc_toya(a, with_layout=True)[1]
    lb = C.compile_toyc_toya(b, with_layout=True)[1]
    assert la.resolve("g.entry") == lb.resolve("g.entry") == C.slot_of("g")


def _balanced(cmds):
    if len(cmds) == 1:
        return cmds[0]
    mid = len(cmds) // 2
    return toyc.CSeq(_balanced(cmds[:mid]), _balanced(cmds[mid:]))


def test_oversized_procedure_is_a_layout_error():
    body = _balanced([toyc.COutput(toyc.CInt(1))] * (C.SLOT_SIZE + 5))
    with pytest.raises(C.LayoutError):
        C.compile_toyc_toya(toyc.CStore((toyc.CProc("big", (), (), body),)))


def test_constant_stage_breaks_preservation():
    p = toyc.parse_toyc("(proc main () () (output 3))")
    assert C.check_preserves_traces(C.CONSTANT_STAGE, [p])["counterexamples"]


# ---------------------------------------------------------------- stage 3


def test_stage3_reemits_the_inner_trace():
    p = C.compile_toyc_whole(toyc.parse_toyc("(proc main ((x int)) () (seq (output x) (output (* x x))))"))
    h = C.compile_toya_toyh(p)
    assert toyh.run_toyh(h, {"x": -3}) == Trace((-3, 9))


@given(st.integers(0, 100_000))
@settings(max_examples=20)
def test_stage3_is_correct(seed):
    p = C.compile_toyc_whole(ToyCGen(seed, safe=True).whole())
    assert not C.check_correct_whole(C.STAGE3, [p], SMALL)["counterexamples"]


def test_stage3_is_modular():
    assert not C.check_modularity(C.STAGE3, random_pairs("toya->toyh", 8, seed=5), SMALL)["counterexamples"]


# ---------------------------------------------------------------- composition


def test_stage_lookup_and_composition():
    s = C.stage_by_name("imp->toyh")
    assert s.source.name == "imp" and s.target.name == "toyh"
    with pytest.raises(KeyError):
        C.stage_by_name("toyh->imp")
    with pytest.raises(ValueError):
        C.compose_stages(C.STAGE2, C.STAGE1)


@pytest.mark.parametrize("seed", range(6))
def test_composed_relation_matches_explicit_intermediate(seed):
    p = ImpGen(seed).whole()
    b1 = C.IMP.behavior(p, SMALL).traces()
    p2 = C.STAGE1.whole(p)
    b2 = C.TOYC.behavior(p2, C.STAGE1.target_bounds(SMALL)).traces()
    b3 = C.TOYA.behavior(C.STAGE2.whole(p2), C.STAGE1.target_bounds(SMALL)).traces()
    rel13 = C.compose_stages(C.STAGE1, C.STAGE2).relation
    for t1, t3 in itertools.product(b1, b3):
        if t1.is_prefix or t3.is_prefix:
            continue
        via = any(relate_trace(C.IMP_TOYC, t1, t2) and relate_trace(C.TOYC_TOYA, t2, t3) for t2 in b2)
        if via:
            assert relate_trace(rel13, t1, t3)


def test_invertibility_holds_on_random_programs():
    r = C.check_invertibility_stages(C.STAGE1, C.STAGE2, random_wholes("imp->toyc", 10, seed=2), SMALL)
    assert r["counterexamples"] == []
