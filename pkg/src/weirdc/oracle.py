"""Exploit classification: Exploit, TExploit, FAExploit, weird-machine sampling
and the compositionality checks.

Membership in an exploit class quantifies over every source context, so no
bounded search can decide it. Verdicts are three-valued: a refutation names a
simulating source context found within the bound, and certification only
happens through a universal trace property that every source behavior
satisfies (supplied with a justification and spot-checked here) but the
attack's behavior violates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable

from . import imp, toya, toyc
from .compilers import CompilerStage, _program_text, check_correct_whole, check_preserves_traces, compose_stages
from .traces import (BehaviorSample, ExploitVerdict, ExplorationBounds, Terminal, Trace, TraceProperty,
                     VerdictKind, behavior_related, check_invertibility, format_trace, in_property_image,
                     related_somewhere, sample_from_json, samples_agree, trace_from_json)


class LinkFailure(Exception):
    pass


class PropertyNotUniversal(Exception):
    def __init__(self, prop: str, context: str, trace: Trace):
        super().__init__(f"property {prop!r} fails on source context {context!r}: {trace!r}")
        self.prop = prop
        self.context = context
        self.trace = trace


class PreconditionFailed(Exception):
    def __init__(self, predicate: str, detail=None):
        super().__init__(f"precondition failed: {predicate}")
        self.predicate = predicate
        self.detail = detail


# ---------------------------------------------------------------- context classes


@dataclass(frozen=True)
class ContextClass:
    """A deterministic, bounded stream of contexts of one language.

    Used both for attacker classes and for the source contexts searched as
    simulators. ``generate`` receives the exploration bounds.
    """

    name: str
    language: str
    generate: Callable[[ExplorationBounds], Iterable]
    member: Callable[[object], bool] = lambda c: True
    interface: str = ""

    def contexts(self, bounds: ExplorationBounds) -> list:
        # a zero size bound admits no context at all
        if bounds.context_size == 0:
            return []
        return list(self.generate(bounds))


AttackerClass = ContextClass


# IMP contexts by AST size ----------------------------------------------------


def _sum_splits(n: int, parts: int):
    """All ``parts``-tuples of positive sizes summing to ``n``."""
    if parts == 1:
        if n >= 1:
            yield (n,)
        return
    for a in range(1, n - parts + 2):
        for rest in _sum_splits(n - a, parts - 1):
            yield (a,) + rest


class ImpContextEnumerator:
    """IMP contexts with exactly one hole, in increasing size.

    Assignments target the hole variables; expressions are built from the
    hole variables and the given literals with every binary operator.
    Within one size the order is fixed by construction, so the stream is
    deterministic.
    """

    def __init__(self, hole_vars, literals=(False, True, 0, 1)):
        self.hole_vars = tuple(hole_vars)
        self.literals = tuple(literals)
        self._e: dict = {}
        self._c: dict = {}
        self._x: dict = {}

    def atoms(self) -> list:
        out = [imp.Var(v) for v in self.hole_vars]
        for lit in self.literals:
            out.append(imp.BoolLit(lit) if isinstance(lit, bool) else imp.NatLit(lit))
        return out

    def exprs(self, n: int) -> list:
        if n not in self._e:
            if n == 1:
                out = self.atoms()
            else:
                out = [imp.BinOp(op, l, r) for op in imp.OPS for a, b in _sum_splits(n - 1, 2)
                       for l in self.exprs(a) for r in self.exprs(b)]
            self._e[n] = out
        return self._e[n]

    def cmds(self, n: int) -> list:
        if n not in self._c:
            out = []
            if n == 1:
                out.append(imp.SKIP)
            out += [imp.Assign(v, e) for v in self.hole_vars for e in self.exprs(n - 1)] if n > 1 else []
            out += [imp.Output(e) for e in self.exprs(n - 1)] if n > 1 else []
            for a, b in _sum_splits(n - 1, 2):
                out += [imp.Seq(x, y) for x in self.cmds(a) for y in self.cmds(b)]
            for a, b, c in _sum_splits(n - 1, 3):
                out += [imp.If(e, x, y) for e in self.exprs(a) for x in self.cmds(b) for y in self.cmds(c)]
            for a, b in _sum_splits(n - 1, 2):
                out += [imp.While(e, x) for e in self.exprs(a) for x in self.cmds(b)]
            self._c[n] = out
        return self._c[n]

    def holes(self, n: int) -> list:
        """Commands of size ``n`` containing exactly one hole."""
        if n not in self._x:
            out = []
            if n == 1:
                out.append(imp.Hole(self.hole_vars))
            for a, b in _sum_splits(n - 1, 2):
                out += [imp.Seq(x, y) for x in self.holes(a) for y in self.cmds(b)]
                out += [imp.Seq(x, y) for x in self.cmds(a) for y in self.holes(b)]
            for a, b, c in _sum_splits(n - 1, 3):
                out += [imp.If(e, x, y) for e in self.exprs(a) for x in self.holes(b) for y in self.cmds(c)]
                out += [imp.If(e, x, y) for e in self.exprs(a) for x in self.cmds(b) for y in self.holes(c)]
            for a, b in _sum_splits(n - 1, 2):
                out += [imp.While(e, x) for e in self.exprs(a) for x in self.holes(b)]
            self._x[n] = out
        return self._x[n]

    def __call__(self, max_size: int):
        for n in range(1, max_size + 1):
            for c in self.holes(n):
                yield imp.ImpContext(c)


def count_imp_contexts(n_vars: int, n_lits: int, max_size: int) -> int:
    """Closed-form count of the grammar above, computed without building any AST."""
    n_ops = len(imp.OPS)

    @lru_cache(maxsize=None)
    def E(n):
        if n == 1:
            return n_vars + n_lits
        return n_ops * sum(E(a) * E(n - 1 - a) for a in range(1, n - 1))

    def pairs(f, g, n):
        return sum(f(a) * g(n - 1 - a) for a in range(1, n - 1))

    def triples(f, g, h, n):
        return sum(f(a) * g(b) * h(n - 1 - a - b) for a in range(1, n) for b in range(1, n) if n - 1 - a - b >= 1)

    @lru_cache(maxsize=None)
    def K(n):
        total = 1 if n == 1 else (n_vars + 1) * E(n - 1)
        return total + pairs(K, K, n) + triples(E, K, K, n) + pairs(E, K, n)

    @lru_cache(maxsize=None)
    def X(n):
        total = 1 if n == 1 else 0
        return (total + pairs(X, K, n) + pairs(K, X, n) + triples(E, X, K, n) + triples(E, K, X, n)
                + pairs(E, X, n))

    return sum(X(n) for n in range(1, max_size + 1))


def imp_context_class(hole_vars, literals=(False, True, 0, 1), name: str | None = None) -> ContextClass:
    enum_ = ImpContextEnumerator(hole_vars, literals)
    return ContextClass(name or f"imp-contexts{tuple(hole_vars)}", "imp",
                        lambda b: enum_(b.context_size),
                        lambda c: isinstance(c, imp.ImpContext) and imp.cmd_size(c.cmd) >= 1,
                        " ".join(hole_vars))


def imp_init_class(var: str, name: str = "imp-init") -> ContextClass:
    """``var := v; □`` for every IMP value of the bound's IMP domain and
    every natural number of its integer domain."""

    def gen(b: ExplorationBounds):
        vals = list(b.imp_domain) + [v for v in b.int_domain if v >= 0 and v not in b.imp_domain]
        for v in vals:
            lit = imp.BoolLit(v) if isinstance(v, bool) else imp.NatLit(v)
            yield imp.ImpContext(imp.Seq(imp.Assign(var, lit), imp.Hole((var,))))

    return ContextClass(name, "imp", gen, interface=var)


# ---------------------------------------------------------------- behaviours


def _link(fn, ctx, comp):
    try:
        return fn(ctx, comp)
    except (imp.AnnotationMismatch, toyc.DuplicateName, toya.AddressOverlap, toya.LinkError,
            TypeError, ValueError) as exc:
        raise LinkFailure(str(exc)) from exc


def target_behavior(stage: CompilerStage, v, a, bounds: ExplorationBounds) -> BehaviorSample:
    """B(A[V↓])."""
    return stage.target.behavior(_link(stage.link_target, a, stage.component(v)), bounds)


def source_behavior(stage: CompilerStage, c, v, bounds: ExplorationBounds) -> BehaviorSample:
    """B(C[V])."""
    return stage.source.behavior(_link(stage.link_source, c, v), bounds)


def _ctx_text(c) -> str:
    try:
        return _program_text(c)
    except Exception:  # pragma: no cover - display only
        return repr(c)


def _relevant(stage: CompilerStage, t: Trace, pi: TraceProperty) -> bool:
    """Source traces a certificate must cover: those that can relate to anything."""
    if t.terminal is Terminal.ERROR:
        return False
    if t.is_prefix:
        return pi.prefix_closed
    return any(s is t.terminal for s, _ in stage.relation.terminals)


def spot_check(v, pi: TraceProperty, stage: CompilerStage, source_class: ContextClass,
               source_bounds: ExplorationBounds, source_sampler=None) -> list:
    """Run every source context of the class with ``v``; raise on a violation of ``pi``.

    Returns the log: one record per context.
    """
    sampler = source_sampler or (lambda c: source_behavior(stage, c, v, source_bounds))
    log = []
    for i, c in enumerate(source_class.contexts(source_bounds)):
        traces = sampler(c).sorted_traces()
        checked = [t for t in traces if _relevant(stage, t, pi)]
        bad = next((t for t in checked if not pi(t)), None)
        if bad is not None:
            raise PropertyNotUniversal(pi.name, _ctx_text(c), bad)
        log.append({"index": i, "context": _ctx_text(c), "traces": len(traces), "checked": len(checked),
                    "violation": None})
    return log


# ---------------------------------------------------------------- verdicts


def texploit_check(v, a, stage: CompilerStage, source_class: ContextClass,
                   bounds: ExplorationBounds | None = None, source_bounds: ExplorationBounds | None = None,
                   target_sample: BehaviorSample | None = None) -> ExploitVerdict:
    """Search for a target trace of A[V↓] no sampled source context can produce."""
    bounds = bounds or ExplorationBounds()
    source_bounds = source_bounds or bounds
    contexts = source_class.contexts(source_bounds)
    base = {"mode": "texploit", "stage": stage.name, "source_class": source_class.name,
            "contexts": len(contexts), "bounds": bounds, "source_bounds": source_bounds}
    if not contexts:
        return ExploitVerdict(VerdictKind.UNKNOWN, dict(base, reason="no source contexts at this bound"))
    b_t = target_sample if target_sample is not None else target_behavior(stage, v, a, bounds)
    witnesses = b_t.sorted_traces()
    pending = list(witnesses)
    simulators: dict = {}
    for i, c in enumerate(contexts):
        if not pending:
            break
        pool = source_behavior(stage, c, v, source_bounds).traces()
        still = []
        for t in pending:
            if related_somewhere(stage.relation, t, pool, source_side=False) is not None:
                simulators[format_trace(t)] = {"index": i, "context": _ctx_text(c)}
            else:
                still.append(t)
        pending = still
    if pending:
        return ExploitVerdict(VerdictKind.UNKNOWN, dict(base, witness=pending[0], surviving=len(pending)))
    return ExploitVerdict(VerdictKind.REFUTED, dict(base, simulators=simulators))


def certify_by_property(v, a, pi: TraceProperty, stage: CompilerStage, source_class: ContextClass,
                        bounds: ExplorationBounds | None = None,
                        source_bounds: ExplorationBounds | None = None,
                        target_sample: BehaviorSample | None = None, spot_log: list | None = None,
                        source_sampler=None) -> ExploitVerdict:
    """Certified when some trace of A[V↓] lies outside the image of ``pi``.

    ``pi`` must hold of every source behavior; that is the caller's
    justification, spot-checked here over ``source_class``. Without a
    violating target trace the result is whatever :func:`texploit_check` says.
    """
    bounds = bounds or ExplorationBounds()
    source_bounds = source_bounds or bounds
    log = spot_log if spot_log is not None else spot_check(v, pi, stage, source_class, source_bounds,
                                                           source_sampler)
    if not log:
        return ExploitVerdict(VerdictKind.UNKNOWN, {"mode": "texploit", "stage": stage.name, "property": pi.name,
                                                    "reason": "no source contexts at this bound"})
    b_t = target_sample if target_sample is not None else target_behavior(stage, v, a, bounds)
    for t in b_t.sorted_traces():
        if not in_property_image(stage.relation, pi, t):
            return ExploitVerdict(VerdictKind.CERTIFIED, {
                "mode": "texploit", "stage": stage.name, "witness": t, "property": pi.name,
                "justification": pi.justification, "prefix_closed": pi.prefix_closed,
                "spot_check": {"class": source_class.name, "contexts": len(log),
                               "violations": sum(1 for r in log if r["violation"] is not None), "log": log},
                "bounds": bounds, "source_bounds": source_bounds})
    if source_sampler is not None:
        return ExploitVerdict(VerdictKind.UNKNOWN, {"mode": "texploit", "stage": stage.name,
                                                    "property": pi.name, "reason": "no violating trace"})
    return texploit_check(v, a, stage, source_class, bounds, source_bounds, target_sample=b_t)


def validate_certificate(verdict: ExploitVerdict, pi: TraceProperty, relation) -> list:
    """Re-check a Certified verdict from its evidence alone. Returns the problems found."""
    problems = []
    if verdict.kind is not VerdictKind.CERTIFIED:
        return ["verdict is not Certified"]
    ev = verdict.to_json()["evidence"]
    if ev.get("property") != pi.name:
        problems.append(f"evidence names property {ev.get('property')!r}, not {pi.name!r}")
    w = ev.get("witness")
    if w is None:
        return problems + ["no witness trace"]
    witness = trace_from_json(w)
    if in_property_image(relation, pi, witness):
        problems.append("witness lies inside the property image")
    spot = ev.get("spot_check") or {}
    if spot.get("violations", 1) != 0:
        problems.append("spot-check log records violations")
    if any(r.get("violation") is not None for r in spot.get("log", [])):
        problems.append("spot-check log entry carries a violation")
    if not spot.get("log") and spot.get("contexts", 0) == 0:
        problems.append("spot-check log is empty")
    return problems


def validate_hyper_certificate(verdict: ExploitVerdict, hyper: "BehaviorProperty", relation) -> list:
    """Re-check a hyperproperty certificate from its evidence alone."""
    if verdict.kind is not VerdictKind.CERTIFIED:
        return ["verdict is not Certified"]
    ev = verdict.to_json()["evidence"]
    problems = []
    if ev.get("property") != hyper.name:
        problems.append(f"evidence names property {ev.get('property')!r}, not {hyper.name!r}")
    if "witness_sample" not in ev:
        return problems + ["no witness sample"]
    pulled = _pull_back(relation, sample_from_json(ev["witness_sample"]))
    if pulled is None:
        problems.append("witness sample does not pull back uniquely")
    elif hyper(pulled):
        problems.append("pulled-back witness sample satisfies the hyperproperty")
    spot = ev.get("spot_check") or {}
    if spot.get("violations", 1) != 0 or any(r.get("violation") is not None for r in spot.get("log", [])):
        problems.append("spot-check log records violations")
    if not spot.get("log"):
        problems.append("spot-check log is empty")
    return problems


@dataclass(frozen=True)
class BehaviorProperty:
    """A hyperproperty: a predicate over whole behavior samples."""

    name: str
    predicate: Callable[[BehaviorSample], bool]
    justification: str

    def __call__(self, b: BehaviorSample) -> bool:
        return bool(self.predicate(b))


def _pull_back(relation, b_t: BehaviorSample) -> BehaviorSample | None:
    """The unique source sample relating to ``b_t`` when the relation is injective on it."""
    entries = {}
    for k, t in b_t.entries.items():
        outs = []
        for val in t.outputs:
            pre = list(relation.preimage(val)) if relation.preimage else []
            if len(pre) != 1:
                return None
            outs.append(pre[0])
        terms = [Terminal.BUDGET] if t.is_prefix else relation.source_terminals_for(t.terminal)
        if len(terms) != 1:
            return None
        entries[k] = Trace(tuple(outs), terms[0])
    return BehaviorSample(b_t.inputs, entries, b_t.bounds)


def exploit_check(v, a, stage: CompilerStage, source_class: ContextClass,
                  bounds: ExplorationBounds | None = None, source_bounds: ExplorationBounds | None = None,
                  trace_evidence: ExploitVerdict | None = None, trace_property: TraceProperty | None = None,
                  hyper: BehaviorProperty | None = None,
                  target_sampler=None, source_sampler=None) -> ExploitVerdict:
    """Behavior-level classification.

    A certified trace witness (with its property) is accepted as evidence,
    since a trace no source context can produce rules out every source
    behavior. A hyperproperty ``hyper`` certifies directly when the target
    sample pulled back through an injective relation violates it.
    """
    bounds = bounds or ExplorationBounds()
    source_bounds = source_bounds or bounds
    b_t = target_sampler(a) if target_sampler else target_behavior(stage, v, a, bounds)
    base = {"mode": "exploit", "stage": stage.name, "source_class": source_class.name,
            "bounds": bounds, "source_bounds": source_bounds}
    if trace_evidence is not None:
        if trace_property is None:
            raise ValueError("trace evidence needs the property it was certified with")
        problems = validate_certificate(trace_evidence, trace_property, stage.relation)
        w = trace_from_json(trace_evidence.to_json()["evidence"]["witness"])
        if not problems and w in b_t.traces():
            return ExploitVerdict(VerdictKind.CERTIFIED, dict(base, via="texploit", witness=w,
                                                              evidence=trace_evidence.to_json()))
    sample_src = source_sampler or (lambda c: source_behavior(stage, c, v, source_bounds))
    contexts = source_class.contexts(source_bounds)
    log = []
    for i, c in enumerate(contexts):
        b_s = sample_src(c)
        entry = {"index": i, "context": _ctx_text(c), "violation": None}
        if hyper is not None and not hyper(b_s):
            raise PropertyNotUniversal(hyper.name, _ctx_text(c), Trace(()))
        if behavior_related(stage.relation, b_s, b_t):
            return ExploitVerdict(VerdictKind.REFUTED, dict(base, simulator={"index": i, "context": _ctx_text(c)}))
        log.append(entry)
    if hyper is not None:
        pulled = _pull_back(stage.relation, b_t)
        if pulled is not None and not hyper(pulled):
            return ExploitVerdict(VerdictKind.CERTIFIED, dict(
                base, via="hyperproperty", property=hyper.name, justification=hyper.justification,
                witness_sample=b_t,
                spot_check={"class": source_class.name, "contexts": len(log), "violations": 0, "log": log}))
    return ExploitVerdict(VerdictKind.UNKNOWN, dict(base, contexts=len(contexts)))


# ---------------------------------------------------------------- full abstraction


class FAKind(enum.Enum):
    WITNESS = "FAWitness"
    NOT_WITNESS = "NotWitnessAtBound"
    NOT_EQUIVALENT = "PairNotEquivalentAtBound"


@dataclass
class FAVerdict:
    kind: FAKind
    evidence: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return ExploitVerdict(VerdictKind.UNKNOWN, self.evidence).to_json() | {"verdict": self.kind.value}


def fa_exploit_check(v, v_alt, a, stage: CompilerStage, source_class: ContextClass,
                     bounds: ExplorationBounds | None = None,
                     source_bounds: ExplorationBounds | None = None) -> FAVerdict:
    bounds = bounds or ExplorationBounds()
    source_bounds = source_bounds or bounds
    contexts = source_class.contexts(source_bounds)
    for i, c in enumerate(contexts):
        diff = samples_agree(source_behavior(stage, c, v, source_bounds),
                             source_behavior(stage, c, v_alt, source_bounds))
        if diff:
            return FAVerdict(FAKind.NOT_EQUIVALENT, {"context": _ctx_text(c), "index": i, "difference": diff[0]})
    diff = samples_agree(target_behavior(stage, v, a, bounds), target_behavior(stage, v_alt, a, bounds))
    ev = {"stage": stage.name, "contexts": len(contexts), "bounds": bounds, "source_bounds": source_bounds}
    if diff:
        return FAVerdict(FAKind.WITNESS, dict(ev, difference=diff[0]))
    return FAVerdict(FAKind.NOT_WITNESS, ev)


# ---------------------------------------------------------------- weird machines


@dataclass
class WMSample:
    certified: list = field(default_factory=list)  # (attack, BehaviorSample, verdict)
    unknown: list = field(default_factory=list)
    refuted: int = 0
    rejected_properties: list = field(default_factory=list)

    def behaviors(self) -> set:
        """The sampled weird machine: the set of certified behaviors, each a frozenset of traces."""
        return {frozenset(b.traces()) for _, b, _ in self.certified}


def wm_sample(v, attacker_class: ContextClass, stage: CompilerStage, source_class: ContextClass,
              properties: Iterable[TraceProperty], bounds: ExplorationBounds | None = None,
              source_bounds: ExplorationBounds | None = None) -> WMSample:
    bounds = bounds or ExplorationBounds()
    source_bounds = source_bounds or bounds
    logs = {}
    out = WMSample()
    for pi in properties:
        try:
            logs[pi.name] = (pi, spot_check(v, pi, stage, source_class, source_bounds))
        except PropertyNotUniversal as exc:
            out.rejected_properties.append({"property": pi.name, "context": exc.context, "trace": exc.trace})
    for a in attacker_class.contexts(bounds):
        b_t = target_behavior(stage, v, a, bounds)
        verdict = None
        for pi, log in logs.values():
            verdict = certify_by_property(v, a, pi, stage, source_class, bounds, source_bounds,
                                          target_sample=b_t, spot_log=log)
            if verdict.certified:
                break
        if verdict is None:
            verdict = texploit_check(v, a, stage, source_class, bounds, source_bounds, target_sample=b_t)
        if verdict.certified:
            out.certified.append((a, b_t, verdict))
        elif verdict.kind is VerdictKind.UNKNOWN:
            out.unknown.append((a, b_t, verdict))
        else:
            out.refuted += 1
    return out


# ---------------------------------------------------------------- compositionality


@dataclass
class Propagation:
    hypothesis: ExploitVerdict
    preconditions: dict
    conclusion: ExploitVerdict

    @property
    def propagated(self) -> bool:
        return self.hypothesis.certified and self.conclusion.certified

    def to_json(self) -> dict:
        return {"hypothesis": self.hypothesis.to_json(), "preconditions": self.preconditions,
                "conclusion": self.conclusion.to_json(), "propagated": self.propagated}


def _trace_pool(samples) -> set:
    out = set()
    for s in samples:
        out |= s.traces()
    return out


def _require(name: str, report: dict, key: str = "counterexamples") -> dict:
    if report[key]:
        raise PreconditionFailed(name, report[key][:3])
    return {"check": name, "ok": True, "programs": report.get("programs")}


def propagate_texploit_up(a2, v1, s12: CompilerStage, s23: CompilerStage, pi: TraceProperty,
                          source_class: ContextClass, bounds2: ExplorationBounds,
                          bounds3: ExplorationBounds | None = None,
                          source_bounds: ExplorationBounds | None = None) -> Propagation:
    """A2 ∈ TExploit(1→2) and stage 2→3 preserving traces give A2↓ ∈ TExploit(1→3)."""
    bounds3 = bounds3 or bounds2
    source_bounds = source_bounds or bounds2
    hyp = certify_by_property(v1, a2, pi, s12, source_class, bounds2, source_bounds)
    s13 = compose_stages(s12, s23)
    p2 = _link(s12.link_target, a2, s12.component(v1))
    pre = {"preserves-traces": _require("preserves-traces", check_preserves_traces(s23, [p2], bounds2))}
    a3 = s23.context(a2)
    t1 = _trace_pool(source_behavior(s12, c, v1, source_bounds) for c in source_class.contexts(source_bounds))
    t2 = target_behavior(s12, v1, a2, bounds2).traces()
    b3 = target_behavior(s13, v1, a3, bounds3)
    inv = check_invertibility(s12.relation, s23.relation, s13.relation, t1, t2, b3.traces())
    if inv:
        raise PreconditionFailed("invertibility", inv[:3])
    pre["invertibility"] = {"check": "invertibility", "ok": True}
    concl = certify_by_property(v1, a3, pi, s13, source_class, bounds3, source_bounds, target_sample=b3)
    return Propagation(hyp, pre, concl)


def propagate_texploit_down(a3, v1, s12: CompilerStage, s23: CompilerStage, pi: TraceProperty,
                            source_class1: ContextClass, source_class2: ContextClass,
                            bounds3: ExplorationBounds, source_bounds1: ExplorationBounds | None = None,
                            source_bounds2: ExplorationBounds | None = None) -> Propagation:
    """A3 ∈ TExploit(2→3)(V1↓) and stage 1→2 preserving traces give A3 ∈ TExploit(1→3)(V1)."""
    source_bounds1 = source_bounds1 or bounds3
    source_bounds2 = source_bounds2 or source_bounds1
    v2 = s12.component(v1)
    hyp = certify_by_property(v2, a3, pi, s23, source_class2, bounds3, source_bounds2)
    progs = [_link(s12.link_source, c, v1) for c in source_class1.contexts(source_bounds1)]
    pre = {"preserves-traces": _require("preserves-traces",
                                        check_preserves_traces(s12, progs, source_bounds1))}
    s13 = compose_stages(s12, s23)
    t1 = _trace_pool(source_behavior(s12, c, v1, source_bounds1) for c in source_class1.contexts(source_bounds1))
    t2 = _trace_pool(source_behavior(s23, c, v2, source_bounds2) for c in source_class2.contexts(source_bounds2))
    b3 = target_behavior(s13, v1, a3, bounds3)
    inv = check_invertibility(s12.relation, s23.relation, s13.relation, t1, t2, b3.traces())
    if inv:
        raise PreconditionFailed("invertibility", inv[:3])
    pre["invertibility"] = {"check": "invertibility", "ok": True}
    concl = certify_by_property(v1, a3, pi, s13, source_class1, bounds3, source_bounds1, target_sample=b3)
    return Propagation(hyp, pre, concl)


def propagate_exploit(a2, v1, s12: CompilerStage, s23: CompilerStage, pi: TraceProperty,
                      source_class: ContextClass, bounds2: ExplorationBounds,
                      bounds3: ExplorationBounds | None = None,
                      source_bounds: ExplorationBounds | None = None) -> Propagation:
    """Behavior-level upward propagation; needs stage 2→3 correct (not just preserving)."""
    bounds3 = bounds3 or bounds2
    source_bounds = source_bounds or bounds2
    hyp_t = certify_by_property(v1, a2, pi, s12, source_class, bounds2, source_bounds)
    hyp = exploit_check(v1, a2, s12, source_class, bounds2, source_bounds, trace_evidence=hyp_t,
                        trace_property=pi)
    p2 = _link(s12.link_target, a2, s12.component(v1))
    pre = {"correct-whole": _require("correct-whole", check_correct_whole(s23, [p2], bounds2))}
    s13 = compose_stages(s12, s23)
    a3 = s23.context(a2)
    t1 = _trace_pool(source_behavior(s12, c, v1, source_bounds) for c in source_class.contexts(source_bounds))
    t2 = target_behavior(s12, v1, a2, bounds2).traces()
    b3 = target_behavior(s13, v1, a3, bounds3)
    inv = check_invertibility(s12.relation, s23.relation, s13.relation, t1, t2, b3.traces())
    if inv:
        raise PreconditionFailed("invertibility", inv[:3])
    pre["invertibility"] = {"check": "invertibility", "ok": True}
    concl_t = certify_by_property(v1, a3, pi, s13, source_class, bounds3, source_bounds, target_sample=b3)
    concl = exploit_check(v1, a3, s13, source_class, bounds3, source_bounds, trace_evidence=concl_t,
                          trace_property=pi, target_sampler=lambda _a: b3)
    return Propagation(hyp, pre, concl)
