import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weirdc import compilers as C
from weirdc import corpus, imp, oracle, toyc
from weirdc.gen import ImpGen
from weirdc.traces import (BehaviorSample, ExploitVerdict, ExplorationBounds, Terminal, Trace, TraceProperty,
                           VerdictKind)


# ---------------------------------------------------------------- context enumeration


@settings(max_examples=30)
@given(st.integers(1, 3), st.integers(0, 4), st.integers(1, 4))
def test_closed_form_count_matches_enumeration(n_vars, n_lits, size):
    names = ("x", "y", "z")[:n_vars]
    lits = (False, True, 0, 1)[:n_lits]
    enum_ = oracle.ImpContextEnumerator(names, lits)
    assert oracle.count_imp_contexts(n_vars, n_lits, size) == sum(1 for _ in enum_(size))


@pytest.mark.parametrize("size,count", [(1, 1), (2, 1), (3, 13), (4, 173), (5, 2339)])
def test_dop_class_sizes_are_frozen(size, count):
    # cumulative counts over J's six variables and four literals; size 3 by hand is
    # the bare hole, hole;skip, skip;hole and while over each of the ten atoms
    names = ["a", "b", "d", "r", "x", "y"]
    assert oracle.count_imp_contexts(6, 4, size) == count
    assert sum(1 for _ in oracle.ImpContextEnumerator(names)(size)) == count


def test_enumeration_is_deterministic_and_has_one_hole():
    e1 = list(oracle.ImpContextEnumerator(["x"])(4))
    e2 = list(oracle.ImpContextEnumerator(["x"])(4))
    assert e1 == e2
    assert all(repr(c).count("Hole") == 1 for c in e1)


def test_zero_context_size_admits_no_context():
    cls = oracle.imp_context_class(["x"])
    assert cls.contexts(ExplorationBounds().with_(context_size=0)) == []


# ---------------------------------------------------------------- certification


@pytest.fixture(scope="module")
def dop_cert():
    j, a = corpus.dop_parts()
    cls = oracle.imp_context_class(j.vars)
    v = oracle.certify_by_property(j, a, corpus.PI_R_GE_Y, C.STAGE1, cls, corpus.DOP_TARGET, corpus.DOP_SOURCE)
    return j, a, cls, v


def test_dop_attack_is_certified_with_a_violating_witness(dop_cert):
    _, _, _, v = dop_cert
    assert v.kind is VerdictKind.CERTIFIED
    w = v.evidence["witness"]
    assert not corpus.PI_R_GE_Y(w)
    assert v.evidence["spot_check"]["contexts"] == 173
    assert v.evidence["spot_check"]["violations"] == 0


def test_valid_certificate_has_no_problems(dop_cert):
    _, _, _, v = dop_cert
    assert oracle.validate_certificate(v, corpus.PI_R_GE_Y, C.IMP_TOYC) == []


def test_tampered_witness_is_rejected(dop_cert):
    _, _, _, v = dop_cert
    fake = ExploitVerdict(v.kind, dict(v.evidence, witness=Trace((3, 4, 1, 9), Terminal.HALTED)))
    assert "witness lies inside the property image" in oracle.validate_certificate(fake, corpus.PI_R_GE_Y, C.IMP_TOYC)


def test_tampered_spot_log_is_rejected(dop_cert):
    _, _, _, v = dop_cert
    spot = dict(v.evidence["spot_check"], violations=1)
    fake = ExploitVerdict(v.kind, dict(v.evidence, spot_check=spot))
    assert oracle.validate_certificate(fake, corpus.PI_R_GE_Y, C.IMP_TOYC)


def test_certificate_names_its_property(dop_cert):
    _, _, _, v = dop_cert
    assert oracle.validate_certificate(v, corpus.PI_NONNEG, C.IMP_TOYC)


def test_non_certified_verdict_does_not_validate():
    v = ExploitVerdict(VerdictKind.UNKNOWN, {})
    assert oracle.validate_certificate(v, corpus.PI_NONNEG, C.IMP_TOYC) == ["verdict is not Certified"]


def test_false_property_is_caught_by_the_spot_check(dop_cert):
    j, a, cls, _ = dop_cert
    with pytest.raises(oracle.PropertyNotUniversal) as exc:
        oracle.certify_by_property(j, a, corpus.PI_EMPTY, C.STAGE1, cls, corpus.DOP_TARGET,
                                   corpus.DOP_SOURCE.with_(context_size=1))
    assert exc.value.prop == "empty-trace"
    assert exc.value.trace.outputs


def test_no_contexts_gives_unknown(dop_cert):
    j, a, cls, _ = dop_cert
    zero = corpus.DOP_SOURCE.with_(context_size=0)
    v = oracle.certify_by_property(j, a, corpus.PI_R_GE_Y, C.STAGE1, cls, corpus.DOP_TARGET, zero)
    assert v.kind is VerdictKind.UNKNOWN
    v = oracle.texploit_check(j, a, C.STAGE1, cls, corpus.DOP_TARGET, zero)
    assert v.kind is VerdictKind.UNKNOWN


# ---------------------------------------------------------------- texploit soundness


def _all_halted(sample: BehaviorSample) -> bool:
    return all(t.terminal is Terminal.HALTED for t in sample.traces())


@settings(max_examples=25)
@given(st.integers(0, 10_000))
def test_compiled_context_is_simulated_by_its_source(seed):
    # the source context itself simulates its own compilation, so no certificate
    c, u = ImpGen(seed).pair()
    b = ExplorationBounds().with_(imp_domain=(False, True, 0, 1), budget=2000)
    cls = oracle.ContextClass("self", "imp", lambda _b: [c])
    v = oracle.texploit_check(u, C.compile_imp_context(c), C.STAGE1, cls, b)
    assert v.kind is not VerdictKind.CERTIFIED
    if _all_halted(oracle.source_behavior(C.STAGE1, c, u, b)):
        assert v.kind is VerdictKind.REFUTED


def test_mitigated_component_is_refuted():
    v = imp.parse_imp(corpus.read("mitigation-skip.imp"))
    attack = next(iter(corpus.dop_init_class().contexts(ExplorationBounds().with_(int_domain=(0,)))))
    r = oracle.texploit_check(v, attack, C.STAGE1, oracle.imp_init_class("x"), ExplorationBounds())
    assert r.kind is VerdictKind.REFUTED
    assert r.evidence["simulators"]


# ---------------------------------------------------------------- behavior level


def test_exploit_check_accepts_a_valid_trace_certificate(dop_cert):
    j, a, cls, v = dop_cert
    r = oracle.exploit_check(j, a, C.STAGE1, cls, corpus.DOP_TARGET, corpus.DOP_SOURCE,
                             trace_evidence=v, trace_property=corpus.PI_R_GE_Y)
    assert r.kind is VerdictKind.CERTIFIED
    assert r.evidence["via"] == "texploit"


def test_exploit_check_needs_the_property_with_trace_evidence(dop_cert):
    j, a, cls, v = dop_cert
    with pytest.raises(ValueError):
        oracle.exploit_check(j, a, C.STAGE1, cls, corpus.DOP_TARGET, corpus.DOP_SOURCE, trace_evidence=v)


def test_timing_hyper_certificate_validates():
    v, hyper, s13 = corpus.timing_classification()
    assert v.kind is VerdictKind.CERTIFIED
    assert v.evidence["via"] == "hyperproperty"
    assert oracle.validate_hyper_certificate(v, hyper, s13.relation) == []


def test_timing_hyper_certificate_rejects_a_satisfying_sample():
    v, hyper, s13 = corpus.timing_classification()
    slow = BehaviorSample.from_runs(("password",), [(i,) for i in range(4)],
                                    [Trace((0,) * i + (1,), Terminal.HALTED) for i in range(4)])
    fake = ExploitVerdict(v.kind, dict(v.evidence, witness_sample=slow))
    assert "pulled-back witness sample satisfies the hyperproperty" in \
        oracle.validate_hyper_certificate(fake, hyper, s13.relation)


# ---------------------------------------------------------------- full abstraction


def test_swapped_declarations_give_an_fa_witness():
    v, v_alt, a = corpus.fa_parts()
    r = oracle.fa_exploit_check(v, v_alt, a, C.STAGE2, corpus.fa_source_class(), corpus.FA_BOUNDS)
    assert r.kind is oracle.FAKind.WITNESS


def test_identical_pair_is_not_an_fa_witness():
    v, _, a = corpus.fa_parts()
    r = oracle.fa_exploit_check(v, v, a, C.STAGE2, corpus.fa_source_class(), corpus.FA_BOUNDS)
    assert r.kind is oracle.FAKind.NOT_WITNESS


def test_inequivalent_pair_is_reported():
    v, _, a = corpus.fa_parts()
    other = toyc.parse_toyc(corpus.read("fa-auth.toyc").replace("(assign secret 7)", "(assign secret 5)"))
    r = oracle.fa_exploit_check(v, other, a, C.STAGE2, corpus.fa_source_class(), corpus.FA_BOUNDS)
    assert r.kind is oracle.FAKind.NOT_EQUIVALENT
    assert r.evidence["context"].strip() == "(proc main () ()\n  (call check 5))"


# ---------------------------------------------------------------- WM sampling


@pytest.mark.parametrize("fid,want", [
    ("output-neg", {frozenset({Trace((-i,), Terminal.HALTED)}) for i in range(1, 9)}),
    ("mitigation-skip", {frozenset({Trace((), Terminal.HALTED)})}),
    ("mitigation-zero", set()),
])
def test_wm_trio(fid, want):
    wm = corpus.wm_trio(fid + ".imp")
    assert wm.behaviors() == want


# ---------------------------------------------------------------- propagation


@pytest.mark.parametrize("name", sorted(corpus.PROPAGATIONS))
def test_propagation_instances(name):
    p = corpus.PROPAGATIONS[name]()
    assert p.hypothesis.certified
    assert all(v["ok"] for v in p.preconditions.values())
    assert p.conclusion.certified


def test_constant_stage_fails_the_preservation_precondition():
    with pytest.raises(oracle.PreconditionFailed) as exc:
        corpus.bad_stage_const()
    assert exc.value.predicate == "preserves-traces"


def test_propagated_to_json_round_trip_keys():
    p = corpus.dop_up()
    d = p.to_json()
    assert set(d) == {"hypothesis", "preconditions", "conclusion", "propagated"}
    assert d["propagated"] is True


def test_property_helper_is_a_callable():
    pi = TraceProperty("t", lambda t: True, "always")
    assert pi(Trace((), Terminal.HALTED))
