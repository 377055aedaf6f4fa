"""The three compiler stages IMP -> Toy^C -> Toy^A -> Toy^H and their relations.

Stage 1 (IMP -> Toy^C)
    Booleans become 0/1. A component ``(c, x1..xn)`` becomes
    ``hole(x1: *Int, ..., xn: *Int){c'}`` where every variable access goes
    through its pointer, so the component shares the caller's variables the
    way an IMP hole shares the store. A context or a whole program becomes
    ``main(x...: Int)`` over its variables in lexicographic order; the hole is
    the call ``hole(&x1, ..., &xn)``.

Stage 2 (Toy^C -> Toy^A)
    Each procedure becomes a frame plus a run of instructions; ``if`` and
    ``while`` lower to ``jmpz``. A procedure's code lives in a slot chosen from
    its name alone, so compiling a context and a component separately and
    linking gives the very same memory image as compiling the linked program.
    A boot procedure ``_start`` at :data:`CONTEXT_BASE` calls ``main`` with the
    contents of the input cells at :data:`INPUT_BASE` and then halts.

Stage 3 (Toy^A -> Toy^H)
    A whole program ``P`` becomes ``get_info(P)`` followed by a loop that
    re-emits the inner outputs; contexts are wrapped the same way around their
    hole; components are unchanged.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Callable

from . import imp, toya, toyc, toyh
from .toyc import CAddr, CBin, CDeref, CInt, CVar
from .traces import (ExplorationBounds, Terminal, Trace, TraceRelation, behavior_mismatches, check_invertibility,
                     compose, identity_relation, relate_trace, render_value, same_value, samples_agree)

CONTEXT_BASE = 500_000
INPUT_BASE = 400_000
SLOT_SIZE = 1000
SLOTS = INPUT_BASE // SLOT_SIZE
BOOT = "_start"
LAYOUT_VERSION = 1


# ---------------------------------------------------------------- relations


def _imp_forward(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, int) and v >= 0:
        return v
    return None


def _imp_preimage(v):
    if isinstance(v, bool) or v < 0:
        return []
    if v == 0:
        return [False, 0]
    if v == 1:
        return [True, 1]
    return [v]


def _int_forward(v):
    return None if isinstance(v, bool) else v


def _int_preimage(v):
    return [] if isinstance(v, bool) else [v]


_HALT_ONLY = frozenset({(Terminal.HALTED, Terminal.HALTED)})

IMP_TOYC = TraceRelation("imp->toyc", _imp_forward, _imp_preimage, _HALT_ONLY)
TOYC_TOYA = TraceRelation("toyc->toya", _int_forward, _int_preimage, _HALT_ONLY)
TOYA_TOYH = TraceRelation("toya->toyh", _int_forward, _int_preimage, _HALT_ONLY)


# ---------------------------------------------------------------- stage 1


def _truth(e):
    # normalise any integer to 0/1
    return CBin("=", CInt(0), CBin("=", CInt(0), e))


def lower_imp_expr(e, by_ref: bool):
    if isinstance(e, imp.Var):
        return CDeref(CVar(e.name)) if by_ref else CVar(e.name)
    if isinstance(e, imp.BoolLit):
        return CInt(int(e.value))
    if isinstance(e, imp.NatLit):
        return CInt(e.value)
    left, right = lower_imp_expr(e.left, by_ref), lower_imp_expr(e.right, by_ref)
    if e.op == "and":
        return CBin("*", _truth(left), _truth(right))
    if e.op == "or":
        return _truth(CBin("+", _truth(left), _truth(right)))
    return CBin(e.op, left, right)


def lower_imp_cmd(c, by_ref: bool):
    if isinstance(c, imp.Assign):
        lv = CDeref(CVar(c.var)) if by_ref else CVar(c.var)
        return toyc.CAssign(lv, lower_imp_expr(c.expr, by_ref))
    if isinstance(c, imp.Output):
        return toyc.COutput(lower_imp_expr(c.expr, by_ref))
    if isinstance(c, imp.Skip):
        return toyc.CSKIP
    if isinstance(c, imp.Seq):
        return toyc.CSeq(lower_imp_cmd(c.first, by_ref), lower_imp_cmd(c.second, by_ref))
    if isinstance(c, imp.If):
        return toyc.CIf(lower_imp_expr(c.cond, by_ref), lower_imp_cmd(c.then, by_ref),
                        lower_imp_cmd(c.orelse, by_ref))
    if isinstance(c, imp.While):
        return toyc.CWhile(lower_imp_expr(c.cond, by_ref), lower_imp_cmd(c.body, by_ref))
    if isinstance(c, imp.Hole):
        return toyc.CCall("hole", tuple(CAddr(CVar(x)) for x in c.vars))
    raise TypeError(f"cannot compile {c!r}")


def compile_imp_toyc(u: imp.ImpComponent) -> toyc.CStore:
    params = tuple((x, toyc.PtrT(toyc.INT)) for x in u.vars)
    return toyc.CStore((toyc.CProc("hole", params, (), lower_imp_cmd(u.body, True)),))


def compile_imp_whole(p) -> toyc.CStore:
    cmd = p.cmd if isinstance(p, imp.ImpContext) else p
    inputs = imp.input_vars(cmd)
    params = tuple((x, toyc.INT) for x in inputs)
    local = tuple((x, toyc.INT) for x in sorted(imp.free_vars(cmd)) if x not in inputs)
    return toyc.CStore((toyc.CProc("main", params, local, lower_imp_cmd(cmd, False)),))


def compile_imp_context(c: imp.ImpContext) -> toyc.CStore:
    return compile_imp_whole(c)


# ---------------------------------------------------------------- stage 2


@dataclass
class ProcLayout:
    name: str
    entry: int
    frame: tuple
    size: int
    ret_offset: int
    instrs: list = field(default_factory=list)  # (address, text, instr)


@dataclass
class LayoutReport:
    """Where the Toy^C -> Toy^A compiler put every procedure and instruction."""

    procs: list = field(default_factory=list)

    def proc(self, name: str) -> ProcLayout:
        for p in self.procs:
            if p.name == name:
                return p
        raise KeyError(f"no procedure {name!r} in layout")

    def find(self, proc: str, text: str) -> int:
        """Address of the first instruction of ``proc`` whose text contains ``text``."""
        for addr, t, _ in self.proc(proc).instrs:
            if text in t:
                return addr
        raise KeyError(f"no instruction matching {text!r} in {proc}")

    def resolve(self, label: str) -> int:
        """Symbolic labels.

        ``p.entry``            entry address of ``p``
        ``p.size``             frame size of ``p``
        ``p.ret``              offset of the saved-PC cell in ``p``'s frame
        ``p.@x``               frame offset of variable ``x``
        ``p.output``           first ``output`` instruction of ``p``
        ``p.gadget_N``         first store of the constant ``N`` through a pointer
        ``p.iK``               the K-th instruction of ``p``
        """
        name, _, what = label.partition(".")
        pl = self.proc(name)
        if what == "entry":
            return pl.entry
        if what == "size":
            return pl.size
        if what == "ret":
            return pl.ret_offset
        if what.startswith("@"):
            for e in pl.frame:
                if e.name == what[1:]:
                    return e.offset
            raise KeyError(label)
        if what == "output":
            return self.find(name, "(output ")
        if what.startswith("gadget_"):
            n = int(what[len("gadget_"):])
            for addr, _, ins in pl.instrs:
                if (isinstance(ins, toya.AAssign) and isinstance(ins.lv, CDeref)
                        and isinstance(ins.expr, CInt) and ins.expr.value == n):
                    return addr
            raise KeyError(label)
        if what.startswith("i") and what[1:].isdigit():
            return pl.instrs[int(what[1:])][0]
        raise KeyError(f"unknown label {label!r}")

    def render(self) -> str:
        lines = [f"# weirdc layout v{LAYOUT_VERSION}"]
        for p in self.procs:
            lines.append(f"proc {p.name} entry={p.entry} size={p.size} "
                         f"saved_pc=+{p.ret_offset} saved_sp=+{p.ret_offset + 1}")
            for e in p.frame:
                if e.kind == "var":
                    lines.append(f"  var {e.name} @{e.offset}")
                else:
                    lines.append(f"  array {e.name} @{e.offset} len={e.length}")
            for addr, text, _ in p.instrs:
                lines.append(f"  {addr:>8}  {text}")
        return "\n".join(lines) + "\n"


def frame_of(proc: toyc.CProc) -> tuple:
    out = []
    for n, (off, t) in proc.layout().items():
        if isinstance(t, toyc.ArrayT):
            out.append(toya.FrameEntry("array", n, off, t.length))
        else:
            out.append(toya.FrameEntry("var", n, off))
    return tuple(out)


def lower_proc(proc: toyc.CProc, base: int) -> tuple[toya.AProcDecl, list]:
    code: list = []

    def emit(i):
        code.append(i)
        return len(code) - 1

    def go(c):
        if isinstance(c, toyc.CAssign):
            emit(toya.AAssign(c.lv, c.expr))
        elif isinstance(c, toyc.COutput):
            emit(toya.AOutput(c.expr))
        elif isinstance(c, toyc.CSkip):
            emit(toya.SKIP)
        elif isinstance(c, toyc.CCall):
            emit(toya.ACall(c.proc, c.args))
        elif isinstance(c, toyc.CSeq):
            go(c.first)
            go(c.second)
        elif isinstance(c, toyc.CIf):
            j = emit(None)
            go(c.then)
            k = emit(None)
            code[j] = toya.AJmpz(c.cond, base + len(code))
            go(c.orelse)
            code[k] = toya.AJmpz(CInt(0), base + len(code))
        elif isinstance(c, toyc.CWhile):
            top = emit(None)
            go(c.body)
            emit(toya.AJmpz(CInt(0), base + top))
            code[top] = toya.AJmpz(c.cond, base + len(code))
        else:
            raise TypeError(f"cannot compile {c!r}")

    go(proc.body)
    emit(toya.RETURN)
    return toya.AProcDecl(proc.name, base, frame_of(proc)), code


class LayoutError(Exception):
    pass


def slot_of(name: str) -> int:
    return SLOT_SIZE * (zlib.crc32(name.encode()) % SLOTS)


def _emit_procs(procs, report: LayoutReport) -> tuple[list, dict]:
    decls, mem = [], {}
    for p in procs:
        addr = slot_of(p.name)
        decl, code = lower_proc(p, addr)
        if len(code) > SLOT_SIZE:
            raise LayoutError(f"procedure {p.name} needs {len(code)} cells, slot holds {SLOT_SIZE}")
        decls.append(decl)
        pl = ProcLayout(p.name, addr, decl.frame, decl.size, decl.ret_offset)
        for k, ins in enumerate(code):
            if addr + k in mem:
                raise LayoutError(f"code slot of {p.name} overlaps another procedure")
            mem[addr + k] = toya.Tagged(p.name, ins)
            pl.instrs.append((addr + k, toya.show_instr(ins), ins))
        report.procs.append(pl)
    return decls, mem


def compile_toyc_toya(u: toyc.CStore, with_layout: bool = False):
    report = LayoutReport()
    decls, mem = _emit_procs(u.procs, report)
    comp = toya.AComponent(tuple(decls), mem)
    return (comp, report) if with_layout else comp


def boot_context(params, procs=(), report: LayoutReport | None = None) -> toya.AContext:
    """``_start: main(*IN0, ..., *INk); halt`` plus the given Toy^C procedures."""
    report = report if report is not None else LayoutReport()
    inputs = tuple((n, INPUT_BASE + i) for i, n in enumerate(params))
    args = tuple(CDeref(CInt(a)) for _, a in inputs)
    mem = {CONTEXT_BASE: toya.Tagged(BOOT, toya.ACall("main", args)),
           CONTEXT_BASE + 1: toya.Tagged(BOOT, toya.HALT)}
    boot = toya.AProcDecl(BOOT, CONTEXT_BASE, ())
    report.procs.append(ProcLayout(BOOT, CONTEXT_BASE, (), boot.size, boot.ret_offset,
                                   [(a, toya.show_instr(mem[a].instr), mem[a].instr) for a in sorted(mem)]))
    decls, more = _emit_procs(procs, report)
    mem.update(more)
    return toya.AContext(CONTEXT_BASE, toyc.STACK_BASE, (boot,) + tuple(decls), mem, inputs)


def compile_toyc_context(c: toyc.CStore, with_layout: bool = False):
    main = toyc.check_whole(c)
    report = LayoutReport()
    ctx = boot_context([n for n, _ in main.params], c.procs, report)
    return (ctx, report) if with_layout else ctx


def compile_toyc_whole(p: toyc.CStore) -> toya.AProgram:
    main = toyc.check_whole(p)
    return toya.link_toya(boot_context([n for n, _ in main.params]), compile_toyc_toya(p))


# ---------------------------------------------------------------- stage 3

_T, _N, _I = "_t", "_n", "_i"


def _reemit(getinfo: toyh.HGetInfo) -> toyh.HCmd:
    loop = toyh.HWhile(
        toyh.HBin("<", toyh.HVar(_I), toyh.HLen(toyh.HVar(_T))),
        toyh.hseq(toyh.HOutput(toyh.HIndex(toyh.HVar(_T), toyh.HVar(_I))),
                  toyh.HAssign(_I, toyh.HBin("+", toyh.HVar(_I), toyh.HLit(1)))))
    return toyh.hseq(getinfo, toyh.HAssign(_I, toyh.HLit(0)), loop)


def compile_toya_toyh(p: toya.AProgram) -> toyh.HCmd:
    return _reemit(toyh.HGetInfo(_T, _N, p))


def compile_toya_context(c: toya.AContext) -> toyh.HAttackContext:
    return toyh.HAttackContext(_reemit(toyh.HGetInfo(_T, _N, c)))


def compile_toya_component(u: toya.AComponent) -> toya.AComponent:
    return u


# ---------------------------------------------------------------- languages and stages


@dataclass(frozen=True)
class Language:
    name: str
    link: Callable
    behavior: Callable  # (whole program, bounds) -> BehaviorSample


IMP = Language("imp", imp.link_imp, imp.behavior_imp)
TOYC = Language("toyc", toyc.link_toyc, toyc.behavior_toyc)
TOYA = Language("toya", toya.link_toya, toya.behavior_toya)
TOYH = Language("toyh", toyh.link_toyh, toyh.behavior_toyh)
LANGUAGES = {lang.name: lang for lang in (IMP, TOYC, TOYA, TOYH)}


@dataclass(frozen=True)
class CompilerStage:
    name: str
    source: Language
    target: Language
    whole: Callable
    component: Callable
    context: Callable
    relation: TraceRelation
    # map source exploration bounds to the target bounds that sample P↓
    target_bounds: Callable = lambda b: b

    def link_source(self, ctx, comp):
        return self.source.link(ctx, comp)

    def link_target(self, ctx, comp):
        return self.target.link(ctx, comp)


def _imp_target_bounds(b: ExplorationBounds) -> ExplorationBounds:
    """Toy^C inputs range over the image of the IMP domain."""
    def image(vals):
        return tuple(sorted({_imp_forward(v) for v in vals if _imp_forward(v) is not None}))

    return b.with_(int_domain=image(b.imp_domain),
                   per_input=tuple((n, image(vs)) for n, vs in b.per_input))


STAGE1 = CompilerStage("imp->toyc", IMP, TOYC, compile_imp_whole, compile_imp_toyc, compile_imp_context,
                       IMP_TOYC, _imp_target_bounds)
STAGE2 = CompilerStage("toyc->toya", TOYC, TOYA, compile_toyc_whole, compile_toyc_toya, compile_toyc_context,
                       TOYC_TOYA)
STAGE3 = CompilerStage("toya->toyh", TOYA, TOYH, compile_toya_toyh, compile_toya_component,
                       compile_toya_context, TOYA_TOYH)
STAGES = {s.name: s for s in (STAGE1, STAGE2, STAGE3)}


def compose_stages(s12: CompilerStage, s23: CompilerStage) -> CompilerStage:
    if s12.target is not s23.source:
        raise ValueError(f"cannot compose {s12.name} with {s23.name}")
    return CompilerStage(
        f"{s12.source.name}->{s23.target.name}", s12.source, s23.target,
        lambda p: s23.whole(s12.whole(p)),
        lambda u: s23.component(s12.component(u)),
        lambda c: s23.context(s12.context(c)),
        compose(s12.relation, s23.relation, f"{s12.relation.name};{s23.relation.name}"),
        lambda b: s23.target_bounds(s12.target_bounds(b)))


def identity_stage(lang: Language) -> CompilerStage:
    rel = identity_relation(f"id-{lang.name}", {(Terminal.HALTED, Terminal.HALTED),
                                                (Terminal.STUCK, Terminal.STUCK)})
    ident = lambda x: x  # noqa: E731
    return CompilerStage(f"id-{lang.name}", lang, lang, ident, ident, ident, rel)


def stage_by_name(name: str) -> CompilerStage:
    if name in STAGES:
        return STAGES[name]
    src, _, tgt = name.partition("->")
    order = ["imp", "toyc", "toya", "toyh"]
    if src in order and tgt in order and order.index(src) < order.index(tgt):
        chain = [STAGES[f"{order[i]}->{order[i + 1]}"] for i in range(order.index(src), order.index(tgt))]
        out = chain[0]
        for s in chain[1:]:
            out = compose_stages(out, s)
        return out
    raise KeyError(f"unknown stage {name!r}")


# The deliberately broken stage: every Toy^C component compiles to nothing and
# every context to a lone halt. Stage-2 relation, so preservation fails.
_CONST_CONTEXT = toya.AContext(CONTEXT_BASE, toyc.STACK_BASE, (toya.AProcDecl(BOOT, CONTEXT_BASE, ()),),
                               {CONTEXT_BASE: toya.Tagged(BOOT, toya.HALT)})

CONSTANT_STAGE = CompilerStage(
    "toyc->toya(const)", TOYC, TOYA,
    lambda p: toya.link_toya(_CONST_CONTEXT, toya.AComponent()),
    lambda u: toya.AComponent(),
    lambda c: _CONST_CONTEXT,
    TOYC_TOYA)


# ---------------------------------------------------------------- checks


def _program_text(p) -> str:
    if isinstance(p, imp.ImpContext) or not isinstance(p, (toyc.CStore, toya.AProgram, toyh.HSeq)):
        try:
            return imp.show(p)
        except TypeError:
            pass
    if isinstance(p, toyc.CStore):
        return toyc.show_toyc(p)
    if isinstance(p, toya.AProgram):
        return toya.show_toya(p)
    try:
        return toyh.show_toyh(p)
    except TypeError:
        return repr(p)


def stage_samples(stage: CompilerStage, p, bounds: ExplorationBounds):
    b_s = stage.source.behavior(p, bounds)
    b_t = stage.target.behavior(stage.whole(p), stage.target_bounds(bounds))
    return b_s, b_t


def _exempt(rel: TraceRelation, t: Trace) -> bool:
    """Source traces the relation maps to nothing (undefined or ill-sorted runs)."""
    if t.terminal is Terminal.ERROR:
        return True
    if t.is_prefix:
        return False
    return not any(s is t.terminal for s, _ in rel.terminals)


def check_correct_whole(stage: CompilerStage, programs, bounds: ExplorationBounds | None = None) -> dict:
    bounds = bounds or ExplorationBounds()
    bad = []
    n = 0
    for p in programs:
        n += 1
        b_s, b_t = stage_samples(stage, p, bounds)
        mism = behavior_mismatches(stage.relation, b_s.traces(), b_t.traces())
        if mism:
            bad.append({"program": _program_text(p), "mismatches": mism})
    return {"check": "correct-whole", "stage": stage.name, "programs": n, "counterexamples": bad,
            "bounds": bounds}


def check_preserves_traces(stage: CompilerStage, programs, bounds: ExplorationBounds | None = None) -> dict:
    bounds = bounds or ExplorationBounds()
    bad = []
    n = 0
    for p in programs:
        n += 1
        b_s, b_t = stage_samples(stage, p, bounds)
        tgt = b_t.traces()
        for ts in b_s.sorted_traces():
            if _exempt(stage.relation, ts):
                continue
            if not any(relate_trace(stage.relation, ts, tt) for tt in tgt):
                bad.append({"program": _program_text(p), "source_trace": ts})
    return {"check": "preserves-traces", "stage": stage.name, "programs": n, "counterexamples": bad,
            "bounds": bounds}


def check_modularity(stage: CompilerStage, pairs, bounds: ExplorationBounds | None = None) -> dict:
    """B(C↓[U↓]) against B(C[U]↓), entry by entry on shared inputs."""
    bounds = bounds or ExplorationBounds()
    tb = stage.target_bounds(bounds)
    bad = []
    n = 0
    for ctx, comp in pairs:
        n += 1
        sep = stage.target.behavior(stage.link_target(stage.context(ctx), stage.component(comp)), tb)
        whole = stage.target.behavior(stage.whole(stage.link_source(ctx, comp)), tb)
        mism = samples_agree(sep, whole, budget_prefix=True)
        if mism:
            bad.append({"context": _program_text(ctx), "component": _program_text(comp), "mismatches": mism})
    return {"check": "modularity", "stage": stage.name, "pairs": n, "counterexamples": bad, "bounds": bounds}


def relation_report(rel: TraceRelation, source_domain, target_domain) -> dict:
    """Exhaustive value-level facts about a relation on bounded domains."""
    forward, inconsistent = [], []
    for v in source_domain:
        w = rel.forward(v)
        forward.append([render_value(v), None if w is None else render_value(w)])
        if w is not None and not any(same_value(v, u) for u in rel.preimage(w)):
            inconsistent.append(render_value(v))
    merged, orphans = [], []
    for w in target_domain:
        pre = list(rel.preimage(w))
        if len(pre) > 1:
            merged.append({"target": render_value(w), "sources": [render_value(u) for u in pre]})
        if not pre:
            orphans.append(render_value(w))
        for u in pre:
            if not same_value(rel.forward(u), w):
                inconsistent.append(render_value(u))
    return {"check": "relation", "relation": rel.name, "forward": forward, "noninjective": merged,
            "no_preimage": orphans, "counterexamples": inconsistent}


def check_invertibility_stages(s12: CompilerStage, s23: CompilerStage, programs,
                               bounds: ExplorationBounds | None = None) -> dict:
    """Invertibility of the two relations against their composite on whole programs."""
    bounds = bounds or ExplorationBounds()
    s13 = compose_stages(s12, s23)
    bad, n = [], 0
    for p in programs:
        n += 1
        b1 = s12.source.behavior(p, bounds)
        p2 = s12.whole(p)
        b2 = s23.source.behavior(p2, s12.target_bounds(bounds))
        b3 = s23.target.behavior(s23.whole(p2), s13.target_bounds(bounds))
        found = check_invertibility(s12.relation, s23.relation, s13.relation, b1.traces(), b2.traces(), b3.traces())
        if found:
            bad.append({"program": _program_text(p), "triples": found[:3]})
    return {"check": "invertibility", "stage": s13.name, "programs": n, "counterexamples": bad, "bounds": bounds}
