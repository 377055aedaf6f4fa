"""Executable fixtures: the worked examples with their expected classifications.

Source files live in the ``corpus`` directory next to this module and are
listed in ``corpus/manifest.json``. Toy^A attack files are templates:
``${label}`` and ``${label+n}`` are resolved against the layout report of the
compiled component (``store.gadget_42``, ``print.entry``), plus ``SP0`` (the
initial stack pointer) and ``V`` (the frame base of the first procedure a
frameless attack procedure calls).

Each fixture runner returns a :class:`FixtureReport` whose checks compare
what actually happened with what the manifest expects.
"""

from __future__ import annotations

import itertools
import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from . import compilers as C
from . import fsm, imp, oracle, toya, toyc, toyh
from .traces import (BehaviorSample, ExploitVerdict, ExplorationBounds, Terminal, Trace, TraceProperty,
                     render_value)

CORPUS_DIR = Path(__file__).parent / "corpus"
PAYLOAD_BASE = 600_000


class UnknownFixture(KeyError):
    pass


def read(name: str) -> str:
    return (CORPUS_DIR / name).read_text()


def manifest() -> dict:
    return json.loads(read("manifest.json"))


# ---------------------------------------------------------------- templates

_HOLE = re.compile(r"\$\{([A-Za-z_][\w.@]*)([+-]\d+)?\}")


def render_template(text: str, layout: C.LayoutReport | None = None, frame_base: int = 2) -> str:
    sp0 = toyc.STACK_BASE

    def sub(m):
        label, off = m.group(1), int(m.group(2) or 0)
        if label == "SP0":
            base = sp0
        elif label == "V":
            base = sp0 + frame_base
        elif layout is None:
            raise KeyError(f"label {label!r} needs a layout report")
        else:
            base = layout.resolve(label)
        return str(base + off)

    return _HOLE.sub(sub, text)


def load_toya_attack(name: str, layout: C.LayoutReport):
    return toya.parse_toya(render_template(read(name), layout))


# ---------------------------------------------------------------- properties


def _nat(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool) and v >= 0


def _r_ge_y(t: Trace) -> bool:
    o = t.outputs
    if len(o) != 4:
        return True
    return _nat(o[1]) and _nat(o[3]) and o[3] >= o[1]


PI_R_GE_Y = TraceProperty(
    "r-ge-y", _r_ge_y,
    "J sets r := y and only ever adds a, an IMP natural, to r, so any four-output run of J "
    "ends with r >= y; at the spot-check bound no context can emit four outputs without J",
    prefix_closed=False)

PI_NONNEG = TraceProperty(
    "nonnegative-outputs", lambda t: all(not isinstance(v, int) or isinstance(v, bool) or v >= 0
                                         for v in t.outputs),
    "IMP has no negative values: literals are naturals and + and * stay natural", prefix_closed=True)

PI_NONEMPTY = TraceProperty(
    "nonempty-or-not-halted", lambda t: bool(t.outputs) or t.terminal is not Terminal.HALTED,
    "after x := v the guard either outputs the natural x or gets stuck on a boolean, "
    "so no source run halts silently", prefix_closed=False)

PI_EMPTY = TraceProperty(
    "empty-trace", lambda t: not t.outputs,
    "contexts that only pass arguments to vulnerable never reach an output in the ROP store: "
    "vulnerable has no output and larger lengths are undefined", prefix_closed=True)

PI_AT_MOST_ONE = TraceProperty(
    "at-most-one-output", lambda t: len(t.outputs) <= 1,
    "an initialising context runs the component exactly once and the component outputs once",
    prefix_closed=True)

PI_BITS = TraceProperty(
    "outputs-are-bits", lambda t: all(v in (0, 1) and not isinstance(v, bool) for v in t.outputs),
    "a guess-only context observes check_pass only through its accept bit", prefix_closed=True)

PROPERTIES = {p.name: p for p in (PI_R_GE_Y, PI_NONNEG, PI_NONEMPTY, PI_EMPTY, PI_AT_MOST_ONE, PI_BITS)}


# ---------------------------------------------------------------- classes


def dop_init_class() -> oracle.ContextClass:
    """Toy^C ``x := i; hole(x)`` for each integer i of the bound's domain."""

    def gen(b: ExplorationBounds):
        for i in b.int_domain:
            body = toyc.cseq(toyc.CAssign(toyc.CVar("x"), toyc.CInt(i)),
                             toyc.CCall("hole", (toyc.CAddr(toyc.CVar("x")),)))
            yield toyc.CStore((toyc.CProc("main", (), (("x", toyc.INT),), body),))

    return oracle.ContextClass("dop-init", "toyc", gen, interface="x")


def rop_arg_class(values=(0, 42), lengths=(0, 1, 2, 3)) -> oracle.ContextClass:
    """Toy^C contexts that fill a small local array and call ``vulnerable`` once."""

    def gen(b: ExplorationBounds):
        for k in (1, 2):
            for vals in itertools.product(values, repeat=k):
                for n in lengths:
                    writes = [toyc.CAssign(toyc.CDeref(toyc.CBin("+", toyc.CVar("a"), toyc.CInt(i))),
                                           toyc.CInt(v)) for i, v in enumerate(vals)]
                    body = toyc.cseq(*writes, toyc.CCall("vulnerable", (toyc.CVar("a"), toyc.CInt(n))))
                    yield toyc.CStore((toyc.CProc("main", (), (("a", toyc.ArrayT(toyc.INT, k)),), body),))

    return oracle.ContextClass("rop-arg-only", "toyc", gen, interface="vulnerable")


def imp_pair_init_class(values=(False, True, 0, 1, 2)) -> oracle.ContextClass:
    def gen(b: ExplorationBounds):
        for v, w in itertools.product(values, repeat=2):
            lit = [imp.BoolLit(u) if isinstance(u, bool) else imp.NatLit(u) for u in (v, w)]
            yield imp.ImpContext(imp.seq(imp.Assign("x", lit[0]), imp.Assign("y", lit[1]), imp.Hole(("x", "y"))))

    return oracle.ContextClass("imp-init-xy", "imp", gen, interface="x y")


def toyc_pair_init_class(values=(-1, 0, 1, 2)) -> oracle.ContextClass:
    def gen(b: ExplorationBounds):
        for v, w in itertools.product(values, repeat=2):
            body = toyc.cseq(toyc.CAssign(toyc.CVar("x"), toyc.CInt(v)), toyc.CAssign(toyc.CVar("y"), toyc.CInt(w)),
                             toyc.CCall("hole", (toyc.CAddr(toyc.CVar("x")), toyc.CAddr(toyc.CVar("y")))))
            yield toyc.CStore((toyc.CProc("main", (), (("x", toyc.INT), ("y", toyc.INT)), body),))

    return oracle.ContextClass("toyc-init-xy", "toyc", gen, interface="hole(x*, y*)")


def fa_source_class() -> oracle.ContextClass:
    def gen(b: ExplorationBounds):
        for i in b.int_domain:
            body = toyc.CCall("check", (toyc.CInt(i),))
            yield toyc.CStore((toyc.CProc("main", (), (), body),))

    return oracle.ContextClass("call-check", "toyc", gen, interface="check(int)")


# ---------------------------------------------------------------- timing side channel

ALPHABET = 4
PW_LEN = 4
MAX_LEN = 8


def check_pass_source(password) -> str:
    """Toy^C ``check_pass(g, n)``: compares ``n`` characters against the secret, stopping early."""
    L = len(password)
    fills = " ".join(f"(assign (deref (+ secret {i})) {c})" for i, c in enumerate(password))
    return f"""
(proc check_pass ((g (ptr int)) (n int)) ((secret (array int {L})) (i int) (ok int))
  (seq
    {fills}
    (if (= n {L})
      (seq
        (assign ok 1)
        (assign i 0)
        (while (* ok (< i {L}))
          (if (= (deref (+ g i)) (deref (+ secret i)))
            (assign i (+ i 1))
            (assign ok 0)))
        (output ok))
      (output 0))))
"""


def check_pass(password) -> toyc.CStore:
    return toyc.parse_toyc(check_pass_source(password))


def check_pass_site() -> toya.AContext:
    """Toy^A context: guess cells g0..g7, length cell n, one call to check_pass."""
    inputs = tuple((f"g{i}", PAYLOAD_BASE + i) for i in range(MAX_LEN)) + (("n", PAYLOAD_BASE + MAX_LEN),)
    mem = {C.CONTEXT_BASE: toya.Tagged("_attack", toya.ACall(
        "check_pass", (toyc.CInt(PAYLOAD_BASE), toyc.CDeref(toyc.CInt(PAYLOAD_BASE + MAX_LEN))))),
        C.CONTEXT_BASE + 1: toya.Tagged("_attack", toya.HALT)}
    return toya.AContext(C.CONTEXT_BASE, toyc.STACK_BASE, (toya.AProcDecl("_attack", C.CONTEXT_BASE, ()),),
                         mem, inputs)


def findpass_source(alphabet: int = ALPHABET, max_len: int = MAX_LEN) -> str:
    """Toy^H findpass, unrolled: length by slowest rejection, then each position by slowest rejection."""
    site = toya.show_toya(check_pass_site())
    q = f"(get_info t s {site})"
    parts = [f"(assign g{i} 1)" for i in range(max_len)]
    parts += ["(assign best 0)", "(assign bestn 1)", "(assign done 0)"]
    for n in range(1, max_len + 1):
        parts.append(f"""
(if (= done 0)
  (seq (assign n {n}) {q} (output (index t 0))
       (if (= (index t 0) 1)
         (seq (assign done 1) (assign bestn {n}))
         (if (< best s) (seq (assign best s) (assign bestn {n})) skip)))
  skip)""")
    parts.append("(assign n bestn)")
    for k in range(max_len):
        trials = []
        for c in range(1, alphabet + 1):
            trials.append(f"""
    (if (= done 0)
      (seq (assign g{k} {c}) {q} (output (index t 0))
           (if (= (index t 0) 1)
             (seq (assign done 1) (assign bestc {c}))
             (if (< best s) (seq (assign best s) (assign bestc {c})) skip)))
      skip)""")
        parts.append(f"""
(if (and (< {k} n) (= done 0))
  (seq (assign best 0) (assign bestc 1) {' '.join(trials)} (assign g{k} bestc))
  skip)""")
    for k in range(max_len):
        parts.append(f"(if (< {k} n) (output g{k}) skip)")
    return "(seq " + " ".join(parts) + ")"


def probe_source() -> str:
    """Toy^H attack that prints the step count of one guess: a value no guess-only context can print."""
    site = toya.show_toya(check_pass_site())
    sets = " ".join([f"(assign g{i} 1)" for i in range(MAX_LEN)] + [f"(assign n {PW_LEN})"])
    return f"(seq {sets} (get_info t s {site}) (output s))"


def run_findpass(password, budget: int = 100_000, alphabet: int = ALPHABET) -> dict:
    comp = C.compile_toyc_toya(check_pass(password))
    attack = toyh.parse_toyh(findpass_source(alphabet))
    trace, machine = toyh.exec_toyh(toyh.link_toyh(attack, comp), {}, budget, 10_000)
    calls = len(machine.log)
    outs = list(trace.outputs)
    bits, rest = outs[:calls], outs[calls:]
    return {"password": list(password), "recovered": rest, "calls": calls, "bits": bits, "trace": trace,
            "ok": rest == list(password)}


def passwords(n: int, seed: int = 0, length: int = PW_LEN, alphabet: int = ALPHABET, distinct: bool = False) -> list:
    rng = random.Random(seed)
    if distinct:
        return rng.sample(list(itertools.product(range(1, alphabet + 1), repeat=length)), n)
    return [tuple(rng.randint(1, alphabet) for _ in range(length)) for _ in range(n)]


def _pw_key(pw) -> int:
    return int("".join(str(c) for c in pw))


def guess_only_class(max_guesses: int = 8, length: int = PW_LEN) -> oracle.ContextClass:
    """Toy^C contexts that submit a fixed list of guesses, in lexicographic order."""
    words = list(itertools.product(range(1, ALPHABET + 1), repeat=length))

    def gen(b: ExplorationBounds):
        for k in range(1, max_guesses + 1):
            cmds = []
            for w in words[:k]:
                cmds += [toyc.CAssign(toyc.CDeref(toyc.CBin("+", toyc.CVar("g"), toyc.CInt(i))), toyc.CInt(c))
                         for i, c in enumerate(w)]
                cmds.append(toyc.CCall("check_pass", (toyc.CVar("g"), toyc.CInt(length))))
            yield toyc.CStore((toyc.CProc("main", (), (("g", toyc.ArrayT(toyc.INT, MAX_LEN)),), toyc.cseq(*cmds)),))

    return oracle.ContextClass("guess-only", "toyc", gen, interface="check_pass(g*, n)")


def compiled_class(cls: oracle.ContextClass) -> oracle.ContextClass:
    return oracle.ContextClass(cls.name + "↓", "toya", lambda b: [C.compile_toyc_context(c) for c in cls.contexts(b)],
                               interface=cls.interface)


def _rejections_before_accept(t: Trace):
    for i, v in enumerate(t.outputs):
        if v == 1 and not isinstance(v, bool):
            return i
    return float("inf")


def linear_guessing_hyper(n_passwords: int) -> oracle.BehaviorProperty:
    def pred(b: BehaviorSample) -> bool:
        worst = max((_rejections_before_accept(t) for _, t in b.items()), default=float("inf"))
        return worst >= len(b) - 1

    return oracle.BehaviorProperty(
        "no-fast-guessing", pred,
        "a context that only sees accept bits rules out one candidate per rejection, so over "
        f"{n_passwords} candidate passwords its worst case rejects at least {n_passwords - 1} times")


def password_sampler(run_one: Callable, pws) -> Callable:
    """A sampler building a behavior keyed by password from per-password runs."""
    def sample(ctx) -> BehaviorSample:
        grid = [(_pw_key(pw),) for pw in pws]
        traces = [run_one(ctx, pw) for pw in pws]
        return BehaviorSample.from_runs(("password",), grid, traces)
    return sample


# ---------------------------------------------------------------- fixture plumbing


@dataclass
class Certificate:
    verdict: ExploitVerdict
    prop: TraceProperty | None
    stage: C.CompilerStage
    v: object = None
    a: object = None
    source_class: oracle.ContextClass | None = None
    bounds: ExplorationBounds | None = None
    source_bounds: ExplorationBounds | None = None
    hyper: oracle.BehaviorProperty | None = None


@dataclass
class FixtureReport:
    fixture: str
    checks: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)
    certificates: list = field(default_factory=list)
    data: dict = field(default_factory=dict)

    def check(self, name: str, expected, actual, ok: bool | None = None):
        ok = (expected == actual) if ok is None else ok
        self.checks.append({"check": name, "expected": expected, "actual": actual, "ok": bool(ok)})
        return ok

    @property
    def ok(self) -> bool:
        return all(c["ok"] for c in self.checks)

    def to_json(self) -> dict:
        from .traces import _jsonable
        return _jsonable({"fixture": self.fixture, "ok": self.ok, "checks": self.checks,
                          "verdicts": {k: v.to_json() if hasattr(v, "to_json") else v
                                       for k, v in self.verdicts.items()}})


@dataclass
class Fixture:
    id: str
    languages: list
    files: dict
    attacker_class: str
    expected: dict
    provenance: str


def load_fixture(fid: str) -> Fixture:
    m = manifest()
    if fid not in m:
        raise UnknownFixture(fid)
    e = m[fid]
    return Fixture(fid, e["languages"], e["files"], e.get("attacker_class", ""), e["expected"], e["provenance"])


def fixture_ids() -> list:
    return sorted(manifest())


# ---------------------------------------------------------------- DOP


DOP_TARGET = ExplorationBounds().with_(per_input={"x": range(1, 5), "y": range(0, 9), "a": [0], "b": [0],
                                                  "d": [0], "r": [0]})
DOP_SOURCE = ExplorationBounds().with_(imp_domain=(False, True, 0, 1, 2), budget=300, context_size=4)


def dop_parts():
    j = imp.parse_imp(read("dop-J.imp"))
    a = toyc.parse_toyc(read("dop-attack.toyc"))
    return j, a


def run_dop(fx: Fixture, rep: FixtureReport):
    j, a = dop_parts()
    linked = toyc.link_toyc(a, C.compile_imp_toyc(j))
    t = toyc.run_toyc(linked, [3, 4, 0, 0, 0, 0], DOP_TARGET.budget)
    rep.data["main(3,4)"] = list(t.outputs)
    rep.check("main(3,4) trace", fx.expected["trace_main_3_4"], list(t.outputs))
    cls = oracle.imp_context_class(j.vars)
    v = oracle.certify_by_property(j, a, PI_R_GE_Y, C.STAGE1, cls, DOP_TARGET, DOP_SOURCE)
    rep.verdicts["certify"] = v
    rep.certificates.append(Certificate(v, PI_R_GE_Y, C.STAGE1, j, a, cls, DOP_TARGET, DOP_SOURCE))
    rep.check("verdict", fx.expected["verdict"], v.kind.value)
    rep.check("spot-check contexts", fx.expected["spot_check_contexts"], v.evidence.get("spot_check", {}).get("contexts"))
    w = v.evidence.get("witness")
    if w is not None:
        rep.check("witness violates r >= y", True, not _r_ge_y(w))


# ---------------------------------------------------------------- WM trio

TRIO_BOUNDS = ExplorationBounds()


def wm_trio(component_file: str, bounds: ExplorationBounds = TRIO_BOUNDS) -> oracle.WMSample:
    v = imp.parse_imp(read(component_file))
    return oracle.wm_sample(v, dop_init_class(), C.STAGE1, oracle.imp_init_class("x"),
                            [PI_NONNEG, PI_NONEMPTY], bounds, bounds)


def trace_label(t: Trace) -> str:
    """One-line form used by the manifest: outputs then terminal."""
    return " ".join([render_value(v) for v in t.outputs] + [t.terminal.value])


def _run_trio(component_file: str, fx: Fixture, rep: FixtureReport):
    s = wm_trio(component_file)
    got = sorted(sorted(trace_label(t) for t in b) for b in s.behaviors())
    rep.data["wm"] = got
    want = sorted(sorted(x) for x in fx.expected["wm"])
    rep.check("sampled weird machine", want, got)
    rep.check("unknown attacks", fx.expected.get("unknown", 0), len(s.unknown))
    v = imp.parse_imp(read(component_file))
    for i, (a, _, verdict) in enumerate(s.certified):
        prop = PROPERTIES[verdict.evidence["property"]]
        rep.verdicts[f"attack{i}"] = verdict
        rep.certificates.append(Certificate(verdict, prop, C.STAGE1, v, a, oracle.imp_init_class("x"),
                                            TRIO_BOUNDS, TRIO_BOUNDS))


# ---------------------------------------------------------------- ROP

ROP_BOUNDS = ExplorationBounds()
ROP_SOURCE = ExplorationBounds().with_(budget=2_000)


def rop_parts():
    store = toyc.parse_toyc(read("rop-store.toyc"))
    comp, layout = C.compile_toyc_toya(store, with_layout=True)
    attack = load_toya_attack("rop-attack.toya", layout)
    empty = load_toya_attack("rop-attack-empty.toya", layout)
    return store, comp, layout, attack, empty


def run_rop(fx: Fixture, rep: FixtureReport):
    store, comp, layout, attack, empty = rop_parts()
    t, steps, _ = toya.exec_toya(toya.link_toya(attack, comp), ROP_BOUNDS.budget)
    rep.data["outputs"] = len(t.outputs)
    rep.check("terminal", fx.expected["terminal"], t.terminal.value)
    rep.check("only 42", True, set(t.outputs) == {42})
    rep.check("at least 100 outputs", True, len(t.outputs) >= fx.expected["min_outputs"])
    gadget = layout.resolve("store.gadget_42")
    rep.data["gadget"] = {"label": "store.gadget_42", "address": gadget,
                          "instruction": toya.show_instr(toya.link_toya(attack, comp).memory[gadget].instr)}
    te, _, _ = toya.exec_toya(toya.link_toya(empty, comp), ROP_BOUNDS.budget)
    rep.check("payload removed", fx.expected["without_payload"], [list(te.outputs), te.terminal.value])
    cls = rop_arg_class()
    v = oracle.certify_by_property(store, attack, PI_EMPTY, C.STAGE2, cls, ROP_BOUNDS, ROP_SOURCE)
    rep.verdicts["certify"] = v
    rep.certificates.append(Certificate(v, PI_EMPTY, C.STAGE2, store, attack, cls, ROP_BOUNDS, ROP_SOURCE))
    rep.check("verdict", fx.expected["verdict"], v.kind.value)


# ---------------------------------------------------------------- timing

TIMING_SAMPLE = 32


def timing_classification(n_passwords: int = TIMING_SAMPLE, guesses: int = 8):
    """Behavior-level exploit check of findpass over a sample of passwords."""
    pws = passwords(n_passwords, seed=7, distinct=True)
    s13 = C.compose_stages(C.STAGE2, C.STAGE3)
    b = ExplorationBounds()
    attack = toyh.parse_toyh(findpass_source())

    def tgt(a, pw):
        return toyh.run_toyh(toyh.link_toyh(a, C.compile_toyc_toya(check_pass(pw))), {}, 100_000, 10_000)

    def src(c, pw):
        return toyc.run_toyc(toyc.link_toyc(c, check_pass(pw)), [], b.budget)

    hyper = linear_guessing_hyper(n_passwords)
    cls = guess_only_class(guesses)
    v = oracle.exploit_check(None, attack, s13, cls, b, b, hyper=hyper,
                             target_sampler=password_sampler(tgt, pws), source_sampler=password_sampler(src, pws))
    return v, hyper, s13


def run_timing(fx: Fixture, rep: FixtureReport):
    runs = [run_findpass(pw) for pw in passwords(fx.expected["passwords"], seed=fx.expected["seed"])]
    rep.data["runs"] = [{"password": r["password"], "recovered": r["recovered"], "calls": r["calls"]} for r in runs]
    rep.check("all recovered", True, all(r["ok"] for r in runs))
    worst = max(r["calls"] for r in runs)
    rep.check("get_info calls within 4*4+8", True, worst <= fx.expected["max_calls"])
    v, hyper, s13 = timing_classification()
    rep.verdicts["exploit"] = v
    rep.certificates.append(Certificate(v, None, s13, hyper=hyper))
    rep.check("verdict", fx.expected["verdict"], v.kind.value)


# ---------------------------------------------------------------- small ones


def run_boolean_branch(fx: Fixture, rep: FixtureReport):
    p = imp.parse_imp(read("lemma-a1.imp"))
    t = imp.run_imp(p, {}, 100)
    rep.check("IMP trace", fx.expected["imp"], [list(t.outputs), t.terminal.value])
    tc = toyc.run_toyc(C.compile_imp_whole(p), [], 100)
    rep.check("compiled trace", fx.expected["toyc"], [list(tc.outputs), tc.terminal.value])
    r = C.check_correct_whole(C.STAGE1, [p])
    rep.check("correctness counterexample", True, bool(r["counterexamples"]))


def run_stage2_ub(fx: Fixture, rep: FixtureReport):
    p = toyc.parse_toyc(read("stage2-ub.toyc"))
    t = toyc.run_toyc(p, [], 100)
    ta = toya.run_toya(C.compile_toyc_whole(p), 1000)
    rep.check("Toy^C trace", fx.expected["toyc"], [list(t.outputs), t.terminal.value])
    rep.check("Toy^A trace", fx.expected["toya"], [list(ta.outputs), ta.terminal.value])
    rep.check("correctness counterexample", True, bool(C.check_correct_whole(C.STAGE2, [p])["counterexamples"]))
    rep.check("preserves traces", [], C.check_preserves_traces(C.STAGE2, [p])["counterexamples"])


FA_BOUNDS = ExplorationBounds().with_(int_domain=tuple(range(-3, 9)))


def fa_parts():
    v = toyc.parse_toyc(read("fa-auth.toyc"))
    v_alt = toyc.parse_toyc(read("fa-auth-swapped.toyc"))
    _, layout = C.compile_toyc_toya(v, with_layout=True)
    return v, v_alt, load_toya_attack("fa-attack.toya", layout)


def run_fa(fx: Fixture, rep: FixtureReport):
    v, v_alt, a = fa_parts()
    r = oracle.fa_exploit_check(v, v_alt, a, C.STAGE2, fa_source_class(), FA_BOUNDS)
    rep.verdicts["fa"] = r
    rep.check("verdict", fx.expected["verdict"], r.kind.value)
    same = oracle.fa_exploit_check(v, v, a, C.STAGE2, fa_source_class(), FA_BOUNDS)
    rep.check("identical pair", fx.expected["identical_pair"], same.kind.value)


def fsm_parts(gap: bool = False):
    ifsm = fsm.parse_fsm(read("fsm-lock.ifsm"))
    cpu = fsm.parse_fsm(read("fsm-lock-gap.cpu" if gap else "fsm-lock.cpu"))
    gamma = fsm.parse_gamma(read("fsm-lock.gamma"))
    return ifsm, cpu, gamma


def run_fsm(fx: Fixture, rep: FixtureReport):
    ifsm, cpu, gamma = fsm_parts()
    cls = fsm.classify_states(ifsm, cpu, gamma)
    got = {k: sorted(getattr(cls, k)) for k in ("sane", "transitory", "weird")}
    rep.check("classification", fx.expected["classes"], got)
    L = fx.expected["bound"]
    ok, bad = fsm.respects_behaviors(ifsm, cpu, gamma, L, cls)
    rep.check("respects behaviors", True, ok)
    w = fsm.weird_implies_exploit(ifsm, cpu, gamma, L)
    rep.check("weird states are exploits", True, w["all_pass"])
    ifsm, cpu_gap, gamma = fsm_parts(gap=True)
    gap = [list(e) for e in fsm.sane_transition_gap(ifsm, cpu_gap, gamma)]
    rep.check("sane transition gap", fx.expected["gap"], gap)
    rep.check("no gap without the planted edge", [], fsm.sane_transition_gap(ifsm, cpu, gamma))


# ---------------------------------------------------------------- compositionality


def dop_up():
    j, a = dop_parts()
    return oracle.propagate_texploit_up(a, j, C.STAGE1, C.STAGE2, PI_R_GE_Y, oracle.imp_context_class(j.vars),
                                        DOP_TARGET, DOP_TARGET, DOP_SOURCE)


REFLECT_BOUNDS = ExplorationBounds().with_(budget=2_000)


def reflect_parts():
    u = imp.parse_imp(read("reflect.imp"))
    _, layout = C.compile_toyc_toya(C.compile_imp_toyc(u), with_layout=True)
    return u, load_toya_attack("reflect-attack.toya", layout)


def reflect_down():
    u, a = reflect_parts()
    return oracle.propagate_texploit_down(a, u, C.STAGE1, C.STAGE2, PI_AT_MOST_ONE, imp_pair_init_class(),
                                          toyc_pair_init_class(), REFLECT_BOUNDS, REFLECT_BOUNDS, REFLECT_BOUNDS)


def rop_exploit_up():
    store, _, _, attack, _ = rop_parts()
    return oracle.propagate_exploit(attack, store, C.STAGE2, C.STAGE3, PI_EMPTY, rop_arg_class(),
                                    ROP_BOUNDS, ROP_BOUNDS, ROP_SOURCE)


def probe_down():
    v = check_pass(passwords(1, seed=3)[0])
    cls1 = guess_only_class(4)
    b = ExplorationBounds()
    probe = toyh.parse_toyh(probe_source())
    return oracle.propagate_texploit_down(probe, v, C.STAGE2, C.STAGE3, PI_BITS, cls1, compiled_class(cls1), b, b, b)


def bad_stage_const():
    j, a = dop_parts()
    return oracle.propagate_texploit_up(a, j, C.STAGE1, C.CONSTANT_STAGE, PI_R_GE_Y,
                                        oracle.imp_context_class(j.vars), DOP_TARGET, DOP_TARGET, DOP_SOURCE)


PROPAGATIONS = {"dop-up": dop_up, "reflect-down": reflect_down, "rop-exploit-up": rop_exploit_up,
                "probe-down": probe_down}


def _record_propagation(rep: FixtureReport, name: str, p: oracle.Propagation, prop: TraceProperty):
    rep.verdicts[name + ".hypothesis"] = p.hypothesis
    rep.verdicts[name + ".conclusion"] = p.conclusion
    rep.check(name + " propagated", True, p.propagated)


def run_compositionality(fx: Fixture, rep: FixtureReport):
    props = {"dop-up": PI_R_GE_Y, "reflect-down": PI_AT_MOST_ONE, "rop-exploit-up": PI_EMPTY, "probe-down": PI_BITS}
    for name in fx.expected["propagates"]:
        try:
            p = PROPAGATIONS[name]()
        except oracle.PreconditionFailed as exc:
            rep.check(name + " propagated", True, False)
            rep.data[name] = {"precondition_failed": exc.predicate}
            continue
        _record_propagation(rep, name, p, props[name])


def run_bad_stage(fx: Fixture, rep: FixtureReport):
    try:
        bad_stage_const()
    except oracle.PreconditionFailed as exc:
        rep.check("precondition failed", fx.expected["precondition"], exc.predicate)
        return
    rep.check("precondition failed", fx.expected["precondition"], None)


# ---------------------------------------------------------------- corpus pairs


def corpus_pairs(stage_name: str) -> list:
    """Every (context, component) pair the corpus builds, in a stage's source language."""
    b = ExplorationBounds()
    trio = [imp.parse_imp(read(f)) for f in ("output-neg.imp", "mitigation-skip.imp", "mitigation-zero.imp")]
    reflect = imp.parse_imp(read("reflect.imp"))
    if stage_name == "imp->toyc":
        out = [(c, u) for u in trio for c in oracle.imp_init_class("x").contexts(b)]
        out += [(c, reflect) for c in imp_pair_init_class().contexts(b)]
        return out
    store = toyc.parse_toyc(read("rop-store.toyc"))
    fa = [toyc.parse_toyc(read(f)) for f in ("fa-auth.toyc", "fa-auth-swapped.toyc")]
    pw = check_pass(passwords(1, seed=3)[0])
    toyc_pairs = [(c, store) for c in rop_arg_class().contexts(b)]
    toyc_pairs += [(c, u) for u in fa for c in fa_source_class().contexts(FA_BOUNDS)]
    toyc_pairs += [(c, pw) for c in guess_only_class(4).contexts(b)]
    toyc_pairs += [(c, C.compile_imp_toyc(reflect)) for c in toyc_pair_init_class().contexts(b)]
    toyc_pairs += [(c, C.compile_imp_toyc(u)) for u in trio for c in dop_init_class().contexts(b)]
    if stage_name == "toyc->toya":
        return toyc_pairs
    if stage_name == "toya->toyh":
        out = [(C.compile_toyc_context(c), C.compile_toyc_toya(u)) for c, u in toyc_pairs]
        _, comp, _, attack, empty = rop_parts()
        out += [(attack, comp), (empty, comp)]
        fv, fv_alt, fa_attack = fa_parts()
        out += [(fa_attack, C.compile_toyc_toya(fv)), (fa_attack, C.compile_toyc_toya(fv_alt))]
        u, reflect_attack = reflect_parts()
        out.append((reflect_attack, C.compile_toyc_toya(C.compile_imp_toyc(u))))
        # check_pass_site is left out: its nine input cells are 17^9 runs at default bounds
        return out
    raise ValueError(f"no corpus pairs for stage {stage_name!r}")


RUNNERS = {
    "dop-division": run_dop,
    "output-neg": lambda fx, rep: _run_trio("output-neg.imp", fx, rep),
    "mitigation-skip": lambda fx, rep: _run_trio("mitigation-skip.imp", fx, rep),
    "mitigation-zero": lambda fx, rep: _run_trio("mitigation-zero.imp", fx, rep),
    "rop-loop": run_rop,
    "timing-findpass": run_timing,
    "lemma-a1": run_boolean_branch,
    "stage2-ub": run_stage2_ub,
    "fa-layout": run_fa,
    "fsm-lock": run_fsm,
    "compositionality": run_compositionality,
    "bad-stage-const": run_bad_stage,
}


def run_fixture(fid: str) -> FixtureReport:
    fx = load_fixture(fid)
    rep = FixtureReport(fid)
    RUNNERS[fid](fx, rep)
    return rep
