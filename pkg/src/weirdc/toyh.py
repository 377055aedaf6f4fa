"""Toy^H: an IMP-like driver language over Toy^A programs with a timing probe.

``(get_info x1 x2 P)`` runs the embedded Toy^A program ``P`` and binds ``x1``
to its output trace (a :class:`TraceVal`) and ``x2`` to the exact number of
Toy^A steps it took. Inner errors and budget exhaustion do not stop the outer
program; they are recorded in the machine's diagnostics log.

Concrete syntax::

    e ::= x | true | false | i | (op e e) | (len e) | (index e e)
          op ::= + - * < = and or
    c ::= (assign x e) | (output e) | skip | (seq c ...) | (if e c c) | (while e c)
        | (get_info x1 x2 P)
    P ::= (program ...)          ; a whole Toy^A program (see weirdc.toya)
        | (context ...)          ; attack contexts only: the hole is the Toy^A component

A Toy^A program's ``input`` cells are filled from the Toy^H variables of the
same name when ``get_info`` runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from . import sexpr, toya
from .sexpr import Atom, fail, head
from .traces import BehaviorSample, ExplorationBounds, Terminal, Trace, render_value, valuations

OPS = ("+", "-", "*", "<", "=", "and", "or")


@dataclass(frozen=True)
class TraceVal:
    """Opaque inner trace; observable through length, indexing and equality."""

    items: tuple = ()

    def __len__(self):
        return len(self.items)


# ---------------------------------------------------------------- syntax


@dataclass(frozen=True)
class HVar:
    name: str


@dataclass(frozen=True)
class HLit:
    value: object  # bool or int


@dataclass(frozen=True)
class HBin:
    op: str
    left: "HExpr"
    right: "HExpr"


@dataclass(frozen=True)
class HLen:
    expr: "HExpr"


@dataclass(frozen=True)
class HIndex:
    expr: "HExpr"
    index: "HExpr"


HExpr = Union[HVar, HLit, HBin, HLen, HIndex]


@dataclass(frozen=True)
class HAssign:
    var: str
    expr: HExpr


@dataclass(frozen=True)
class HOutput:
    expr: HExpr


@dataclass(frozen=True)
class HSkip:
    pass


@dataclass(frozen=True)
class HSeq:
    first: "HCmd"
    second: "HCmd"


@dataclass(frozen=True)
class HIf:
    cond: HExpr
    then: "HCmd"
    orelse: "HCmd"


@dataclass(frozen=True)
class HWhile:
    cond: HExpr
    body: "HCmd"


@dataclass(frozen=True)
class HGetInfo:
    trace_var: str
    steps_var: str
    program: object  # toya.AProgram, or toya.AContext when this is a hole site


HCmd = Union[HAssign, HOutput, HSkip, HSeq, HIf, HWhile, HGetInfo]
HSKIP = HSkip()


def hseq(*cmds) -> HCmd:
    cmds = [c for c in cmds if not isinstance(c, HSkip)] or [HSKIP]
    out = cmds[-1]
    for c in reversed(cmds[:-1]):
        out = HSeq(c, out)
    return out


def is_hole_site(c) -> bool:
    return isinstance(c, HGetInfo) and isinstance(c.program, toya.AContext)


def count_holes(c) -> int:
    if is_hole_site(c):
        return 1
    return sum(count_holes(s) for s in _children(c))


def _children(c):
    if isinstance(c, HSeq):
        return (c.first, c.second)
    if isinstance(c, HIf):
        return (c.then, c.orelse)
    if isinstance(c, HWhile):
        return (c.body,)
    return ()


@dataclass(frozen=True)
class HAttackContext:
    """A Toy^H program whose holes sit only inside ``get_info``."""

    cmd: HCmd

    def __post_init__(self):
        if count_holes(self.cmd) == 0:
            raise ValueError("a Toy^H attack context needs at least one get_info hole")


def link_toyh(a: HAttackContext, u: toya.AComponent) -> HCmd:
    def fill(c):
        if is_hole_site(c):
            return HGetInfo(c.trace_var, c.steps_var, toya.link_toya(c.program, u))
        if isinstance(c, HSeq):
            return HSeq(fill(c.first), fill(c.second))
        if isinstance(c, HIf):
            return HIf(c.cond, fill(c.then), fill(c.orelse))
        if isinstance(c, HWhile):
            return HWhile(c.cond, fill(c.body))
        return c

    return fill(a.cmd)


# ---------------------------------------------------------------- printing


def show_expr(e) -> str:
    if isinstance(e, HVar):
        return e.name
    if isinstance(e, HLit):
        return render_value(e.value)
    if isinstance(e, HBin):
        return f"({e.op} {show_expr(e.left)} {show_expr(e.right)})"
    if isinstance(e, HLen):
        return f"(len {show_expr(e.expr)})"
    if isinstance(e, HIndex):
        return f"(index {show_expr(e.expr)} {show_expr(e.index)})"
    raise TypeError(e)


def show_toyh(c, indent: int = 0) -> str:
    pad = " " * indent
    if isinstance(c, HAttackContext):
        return show_toyh(c.cmd, indent)
    if isinstance(c, HAssign):
        return f"{pad}(assign {c.var} {show_expr(c.expr)})"
    if isinstance(c, HOutput):
        return f"{pad}(output {show_expr(c.expr)})"
    if isinstance(c, HSkip):
        return pad + "skip"
    if isinstance(c, HSeq):
        parts = []
        while isinstance(c, HSeq):
            parts.append(c.first)
            c = c.second
        parts.append(c)
        return f"{pad}(seq\n" + "\n".join(show_toyh(p, indent + 2) for p in parts) + ")"
    if isinstance(c, HIf):
        return (f"{pad}(if {show_expr(c.cond)}\n{show_toyh(c.then, indent + 2)}\n"
                f"{show_toyh(c.orelse, indent + 2)})")
    if isinstance(c, HWhile):
        return f"{pad}(while {show_expr(c.cond)}\n{show_toyh(c.body, indent + 2)})"
    if isinstance(c, HGetInfo):
        inner = toya.show_toya(c.program).rstrip("\n")
        inner = "\n".join(pad + "  " + line for line in inner.splitlines())
        return f"{pad}(get_info {c.trace_var} {c.steps_var}\n{inner})"
    raise TypeError(c)


# ---------------------------------------------------------------- parsing


def _parse_expr(node) -> HExpr:
    if isinstance(node, Atom):
        if node.text in ("true", "false"):
            return HLit(node.text == "true")
        n = sexpr.as_int(node)
        if n is not None:
            return HLit(n)
        return HVar(node.text)
    form = head(node)
    if form in OPS:
        sexpr.expect_len(node, 3, form)
        return HBin(form, _parse_expr(node[1]), _parse_expr(node[2]))
    if form == "len":
        sexpr.expect_len(node, 2, form)
        return HLen(_parse_expr(node[1]))
    if form == "index":
        sexpr.expect_len(node, 3, form)
        return HIndex(_parse_expr(node[1]), _parse_expr(node[2]))
    fail(node, f"unknown Toy^H expression {form!r}")


def _parse_cmd(node) -> HCmd:
    if isinstance(node, Atom):
        if node.text == "skip":
            return HSKIP
        fail(node, f"expected a command, found {node.text!r}")
    form = head(node)
    if form == "skip":
        return HSKIP
    if form == "assign":
        sexpr.expect_len(node, 3, form)
        return HAssign(sexpr.symbol(node[1], "variable"), _parse_expr(node[2]))
    if form == "output":
        sexpr.expect_len(node, 2, form)
        return HOutput(_parse_expr(node[1]))
    if form == "seq":
        if len(node) < 2:
            fail(node, "'seq' needs at least one command")
        return hseq(*(_parse_cmd(n) for n in node[1:]))
    if form == "if":
        sexpr.expect_len(node, 4, form)
        return HIf(_parse_expr(node[1]), _parse_cmd(node[2]), _parse_cmd(node[3]))
    if form == "while":
        sexpr.expect_len(node, 3, form)
        return HWhile(_parse_expr(node[1]), _parse_cmd(node[2]))
    if form == "get_info":
        sexpr.expect_len(node, 4, form)
        prog = toya.parse_toya_node(node[3])
        if isinstance(prog, toya.AComponent):
            fail(node[3], "get_info needs a whole program or an attack context")
        return HGetInfo(sexpr.symbol(node[1]), sexpr.symbol(node[2]), prog)
    fail(node, f"unknown Toy^H command {form!r}")


def parse_toyh(text: str):
    """A whole program, or an attack context when some get_info holds a context."""
    cmd = _parse_cmd(sexpr.read_one(text))
    return HAttackContext(cmd) if count_holes(cmd) else cmd


# ---------------------------------------------------------------- semantics


class _Stuck(Exception):
    pass


class _Budget(Exception):
    pass


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def eval_toyh(e, sigma: dict):
    if isinstance(e, HLit):
        return e.value
    if isinstance(e, HVar):
        if e.name not in sigma:
            raise _Stuck(f"unbound {e.name}")
        return sigma[e.name]
    if isinstance(e, HLen):
        v = eval_toyh(e.expr, sigma)
        if not isinstance(v, TraceVal):
            raise _Stuck("length of a non-trace")
        return len(v)
    if isinstance(e, HIndex):
        v, i = eval_toyh(e.expr, sigma), eval_toyh(e.index, sigma)
        if not isinstance(v, TraceVal) or not _is_int(i) or not 0 <= i < len(v):
            raise _Stuck("bad trace index")
        return v.items[i]
    a, b = eval_toyh(e.left, sigma), eval_toyh(e.right, sigma)
    op = e.op
    if op in ("+", "-", "*", "<"):
        if not (_is_int(a) and _is_int(b)):
            raise _Stuck(f"{op} on non-integers")
        return {"+": a + b, "-": a - b, "*": a * b, "<": a < b}[op]
    if op == "=":
        if type(a) is not type(b):
            raise _Stuck("= across sorts")
        return a == b
    if not (isinstance(a, bool) and isinstance(b, bool)):
        raise _Stuck(f"{op} on non-booleans")
    return (a and b) if op == "and" else (a or b)


@dataclass
class HMachine:
    budget: int
    inner_budget: int
    sigma: dict = field(default_factory=dict)
    steps: int = 0
    outputs: list = field(default_factory=list)
    # one (inner terminal, inner steps) entry per get_info
    log: list = field(default_factory=list)

    def get_info(self, c: HGetInfo):
        prog = c.program
        if isinstance(prog, toya.AContext):
            raise _Stuck("get_info over an unfilled hole")
        inputs = {}
        for name, _ in prog.inputs:
            if name not in self.sigma or not _is_int(self.sigma[name]):
                raise _Stuck(f"Toy^A input {name} is not an integer")
            inputs[name] = self.sigma[name]
        t, steps, _ = toya.exec_toya(prog, self.inner_budget, inputs)
        self.log.append((t.terminal, steps))
        self.sigma[c.trace_var] = TraceVal(tuple(t.outputs))
        self.sigma[c.steps_var] = steps

    def run(self, c: HCmd):
        kont = [c]
        while kont:
            c = kont.pop()
            if isinstance(c, HSeq):
                kont.append(c.second)
                kont.append(c.first)
                continue
            if self.steps >= self.budget:
                raise _Budget()
            self.steps += 1
            if isinstance(c, HAssign):
                self.sigma[c.var] = eval_toyh(c.expr, self.sigma)
            elif isinstance(c, HOutput):
                v = eval_toyh(c.expr, self.sigma)
                if isinstance(v, TraceVal):
                    raise _Stuck("traces are not output values")
                self.outputs.append(v)
            elif isinstance(c, HSkip):
                pass
            elif isinstance(c, HIf):
                v = eval_toyh(c.cond, self.sigma)
                if not isinstance(v, bool):
                    raise _Stuck("non-boolean guard")
                kont.append(c.then if v else c.orelse)
            elif isinstance(c, HWhile):
                v = eval_toyh(c.cond, self.sigma)
                if not isinstance(v, bool):
                    raise _Stuck("non-boolean guard")
                if v:
                    kont.append(c)
                    kont.append(c.body)
            elif isinstance(c, HGetInfo):
                self.get_info(c)
            else:
                raise _Stuck(f"cannot run {c!r}")


def exec_toyh(p: HCmd, sigma: dict | None = None, budget: int = 10_000,
              inner_budget: int | None = None) -> tuple[Trace, HMachine]:
    if budget <= 0 or (inner_budget is not None and inner_budget <= 0):
        raise ValueError("budgets must be positive")
    m = HMachine(budget, inner_budget or budget, dict(sigma or {}))
    term = Terminal.HALTED
    try:
        m.run(p)
    except _Stuck:
        term = Terminal.STUCK
    except _Budget:
        term = Terminal.BUDGET
    return Trace(tuple(m.outputs), term), m


def run_toyh(p: HCmd, sigma: dict | None = None, budget: int = 10_000,
             inner_budget: int | None = None) -> Trace:
    return exec_toyh(p, sigma, budget, inner_budget)[0]


def _expr_vars(e) -> set:
    if isinstance(e, HVar):
        return {e.name}
    if isinstance(e, HBin):
        return _expr_vars(e.left) | _expr_vars(e.right)
    if isinstance(e, HLen):
        return _expr_vars(e.expr)
    if isinstance(e, HIndex):
        return _expr_vars(e.expr) | _expr_vars(e.index)
    return set()


def _live_in(c, defined: frozenset):
    if isinstance(c, HAssign):
        return _expr_vars(c.expr) - defined, defined | {c.var}
    if isinstance(c, HOutput):
        return _expr_vars(c.expr) - defined, defined
    if isinstance(c, HGetInfo):
        reads = {n for n, _ in c.program.inputs} - defined
        return reads, defined | {c.trace_var, c.steps_var}
    if isinstance(c, HSeq):
        r1, d1 = _live_in(c.first, defined)
        r2, d2 = _live_in(c.second, d1)
        return r1 | r2, d2
    if isinstance(c, HIf):
        r1, d1 = _live_in(c.then, defined)
        r2, d2 = _live_in(c.orelse, defined)
        return (_expr_vars(c.cond) - defined) | r1 | r2, d1 & d2
    if isinstance(c, HWhile):
        r1, _ = _live_in(c.body, defined)
        return (_expr_vars(c.cond) - defined) | r1, defined
    return set(), defined


def input_vars(c) -> list:
    return sorted(_live_in(c, frozenset())[0])


def behavior_toyh(p: HCmd, bounds: ExplorationBounds | None = None) -> BehaviorSample:
    bounds = bounds or ExplorationBounds()
    names = tuple(input_vars(p))
    grid = list(valuations(names, lambda n: bounds.domain_for(n, bounds.int_domain)))
    traces = [run_toyh(p, dict(zip(names, vals)), bounds.budget, bounds.budget) for vals in grid]
    return BehaviorSample.from_runs(names, grid, traces, bounds)
