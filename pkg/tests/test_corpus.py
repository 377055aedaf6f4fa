import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weirdc import compilers as C
from weirdc import corpus, toya, toyc
from weirdc.traces import Terminal, VerdictKind


@pytest.fixture(scope="module")
def reports():
    return {fid: corpus.run_fixture(fid) for fid in corpus.fixture_ids()}


def test_every_fixture_has_a_runner():
    assert set(corpus.fixture_ids()) == set(corpus.RUNNERS)


def test_unknown_fixture():
    with pytest.raises(corpus.UnknownFixture):
        corpus.load_fixture("no-such-fixture")


def test_manifest_entries_name_existing_files():
    for fid, e in corpus.manifest().items():
        for f in e["files"].values():
            assert (corpus.CORPUS_DIR / f).is_file(), (fid, f)
        assert e["provenance"]


@pytest.mark.parametrize("fid", [f for f in corpus.fixture_ids() if f != "dop-division"])
def test_fixture_reproduces_its_expectations(reports, fid):
    rep = reports[fid]
    assert rep.checks
    assert rep.ok, [c for c in rep.checks if not c["ok"]]


def test_dop_fixture_diverges_only_on_the_printed_trace(reports):
    # the recorded third output is 1, not 2: 4 = 1*3 + 1 for every faithful division
    rep = reports["dop-division"]
    bad = [c for c in rep.checks if not c["ok"]]
    assert [c["check"] for c in bad] == ["main(3,4) trace"]
    assert bad[0]["expected"] == [3, 4, 1, 2]
    assert bad[0]["actual"] == [3, 4, 1, 1]
    assert rep.verdicts["certify"].kind is VerdictKind.CERTIFIED


def test_reports_serialise(reports):
    for rep in reports.values():
        d = json.loads(json.dumps(rep.to_json()))
        assert d["fixture"] == rep.fixture


# ---------------------------------------------------------------- templates


def test_render_stack_labels():
    sp0 = toyc.STACK_BASE
    assert corpus.render_template("${SP0} ${SP0-1} ${V} ${V+3}") == f"{sp0} {sp0 - 1} {sp0 + 2} {sp0 + 5}"


def test_render_layout_labels():
    store, _, layout, _, _ = corpus.rop_parts()
    gadget = layout.resolve("store.gadget_42")
    assert corpus.render_template("${store.gadget_42+1}", layout) == str(gadget + 1)
    with pytest.raises(KeyError):
        corpus.render_template("${store.gadget_42}")


def test_text_without_holes_is_unchanged():
    assert corpus.render_template("(halt) $ {x}") == "(halt) $ {x}"


# ---------------------------------------------------------------- ROP


def test_rop_returns_into_the_gadget():
    store, comp, layout, attack, _ = corpus.rop_parts()
    gadget = layout.resolve("store.gadget_42")
    linked = toya.link_toya(attack, comp)
    cell = linked.memory[gadget]
    assert cell.owner == "store"
    assert toya.show_instr(cell.instr) == "(assign (deref p) 42)"
    t, _, _ = toya.exec_toya(linked, 10_000)
    assert t.terminal is Terminal.BUDGET
    assert list(t.outputs[:100]) == [42] * 100


def test_rop_layout_depends_on_the_compiler_not_the_fixture():
    store, _, layout, _, _ = corpus.rop_parts()
    _, again = C.compile_toyc_toya(store, with_layout=True)
    assert again.resolve("store.gadget_42") == layout.resolve("store.gadget_42")


# ---------------------------------------------------------------- timing


def test_findpass_default_password():
    r = corpus.run_findpass((4, 3, 2, 1))
    assert r["ok"]
    assert r["calls"] <= corpus.ALPHABET * 4 + corpus.MAX_LEN


@settings(max_examples=25)
@given(st.lists(st.integers(1, corpus.ALPHABET), min_size=1, max_size=6))
def test_findpass_recovers_any_password_in_linear_calls(pw):
    r = corpus.run_findpass(tuple(pw))
    assert r["recovered"] == pw
    assert r["calls"] <= corpus.ALPHABET * len(pw) + corpus.MAX_LEN


@pytest.mark.slow
def test_findpass_recovers_weird_over_full_alphabet():
    pw = tuple(ord(c) - 96 for c in "weird")
    r = corpus.run_findpass(pw, alphabet=26)
    assert r["recovered"] == list(pw)
    assert r["calls"] <= 26 * 5 + corpus.MAX_LEN


def test_passwords_are_deterministic_and_distinct_when_asked():
    assert corpus.passwords(5, seed=1) == corpus.passwords(5, seed=1)
    ps = corpus.passwords(32, seed=7, distinct=True)
    assert len(set(ps)) == 32


def test_linear_guessing_hyper_on_guess_only_contexts():
    hyper = corpus.linear_guessing_hyper(4)
    pws = [(1, 1, 1, 1), (1, 1, 1, 2), (1, 1, 1, 3), (1, 1, 1, 4)]
    cls = corpus.guess_only_class(4)

    def src(c, pw):
        return toyc.run_toyc(toyc.link_toyc(c, corpus.check_pass(pw)), [], 10_000)

    sample = corpus.password_sampler(src, pws)
    for c in cls.contexts(C.ExplorationBounds()):
        assert hyper(sample(c))


def test_trace_label():
    from weirdc.traces import Trace
    assert corpus.trace_label(Trace((-1, 2), Terminal.HALTED)) == "-1 2 halted"
    assert corpus.trace_label(Trace((), Terminal.HALTED)) == "halted"
