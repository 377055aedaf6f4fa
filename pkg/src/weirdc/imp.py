"""IMP: naturals, booleans, assignments, output, structured control flow.

Concrete syntax (S-expressions)::

    e ::= x | true | false | n | (+ e e) | (* e e) | (< e e) | (= e e) | (and e e) | (or e e)
    c ::= (assign x e) | (output e) | skip | (seq c c ...) | (if e c c) | (while e c)
        | (hole (x ...))                        ; contexts only
    component ::= (component (x ...) c)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from . import sexpr
from .sexpr import Atom, SList, fail, head
from .traces import BehaviorSample, ExplorationBounds, Terminal, Trace, render_value, valuations

OPS = ("+", "*", "<", "=", "and", "or")


# ---------------------------------------------------------------- syntax


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class NatLit:
    value: int

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("IMP natural literals are nonnegative")


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "ImpExpr"
    right: "ImpExpr"


ImpExpr = Union[Var, BoolLit, NatLit, BinOp]


@dataclass(frozen=True)
class Assign:
    var: str
    expr: ImpExpr


@dataclass(frozen=True)
class Output:
    expr: ImpExpr


@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class Seq:
    first: "ImpCmd"
    second: "ImpCmd"


@dataclass(frozen=True)
class If:
    cond: ImpExpr
    then: "ImpCmd"
    orelse: "ImpCmd"


@dataclass(frozen=True)
class While:
    cond: ImpExpr
    body: "ImpCmd"


@dataclass(frozen=True)
class Hole:
    vars: tuple


ImpCmd = Union[Assign, Output, Skip, Seq, If, While, Hole]
SKIP = Skip()


@dataclass(frozen=True)
class ImpComponent:
    body: ImpCmd
    vars: tuple

    def __post_init__(self):
        missing = free_vars(self.body) - set(self.vars)
        if missing:
            raise ValueError(f"component annotation misses free variables {sorted(missing)}")


@dataclass(frozen=True)
class ImpContext:
    cmd: ImpCmd

    def __post_init__(self):
        if count_holes(self.cmd) != 1:
            raise ValueError("an IMP context has exactly one hole")

    @property
    def hole_vars(self) -> tuple:
        return find_hole(self.cmd).vars


class AnnotationMismatch(Exception):
    pass


def seq(*cmds: ImpCmd) -> ImpCmd:
    if not cmds:
        return SKIP
    out = cmds[-1]
    for c in reversed(cmds[:-1]):
        out = Seq(c, out)
    return out


def expr_vars(e) -> set:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, BinOp):
        return expr_vars(e.left) | expr_vars(e.right)
    return set()


def free_vars(c) -> set:
    if isinstance(c, Assign):
        return {c.var} | expr_vars(c.expr)
    if isinstance(c, Output):
        return expr_vars(c.expr)
    if isinstance(c, Seq):
        return free_vars(c.first) | free_vars(c.second)
    if isinstance(c, If):
        return expr_vars(c.cond) | free_vars(c.then) | free_vars(c.orelse)
    if isinstance(c, While):
        return expr_vars(c.cond) | free_vars(c.body)
    if isinstance(c, Hole):
        return set(c.vars)
    return set()


def _live_in(c, defined: frozenset) -> tuple[set, frozenset]:
    if isinstance(c, Assign):
        return expr_vars(c.expr) - defined, defined | {c.var}
    if isinstance(c, Output):
        return expr_vars(c.expr) - defined, defined
    if isinstance(c, Seq):
        r1, d1 = _live_in(c.first, defined)
        r2, d2 = _live_in(c.second, d1)
        return r1 | r2, d2
    if isinstance(c, If):
        r1, d1 = _live_in(c.then, defined)
        r2, d2 = _live_in(c.orelse, defined)
        return (expr_vars(c.cond) - defined) | r1 | r2, d1 & d2
    if isinstance(c, While):
        r1, _ = _live_in(c.body, defined)
        return (expr_vars(c.cond) - defined) | r1, defined
    if isinstance(c, Hole):
        return set(c.vars) - defined, defined
    return set(), defined


def input_vars(c) -> list:
    """Free variables whose initial value can be read before any assignment."""
    reads, _ = _live_in(c, frozenset())
    return sorted(reads)


def count_holes(c) -> int:
    if isinstance(c, Hole):
        return 1
    if isinstance(c, Seq):
        return count_holes(c.first) + count_holes(c.second)
    if isinstance(c, If):
        return count_holes(c.then) + count_holes(c.orelse)
    if isinstance(c, While):
        return count_holes(c.body)
    return 0


def find_hole(c) -> Hole | None:
    if isinstance(c, Hole):
        return c
    for sub in _children(c):
        h = find_hole(sub)
        if h is not None:
            return h
    return None


def _children(c):
    if isinstance(c, Seq):
        return (c.first, c.second)
    if isinstance(c, If):
        return (c.then, c.orelse)
    if isinstance(c, While):
        return (c.body,)
    return ()


def plug(c, filler: ImpCmd) -> ImpCmd:
    if isinstance(c, Hole):
        return filler
    if isinstance(c, Seq):
        return Seq(plug(c.first, filler), plug(c.second, filler))
    if isinstance(c, If):
        return If(c.cond, plug(c.then, filler), plug(c.orelse, filler))
    if isinstance(c, While):
        return While(c.cond, plug(c.body, filler))
    return c


def link_imp(ctx: ImpContext, comp: ImpComponent) -> ImpCmd:
    hv = ctx.hole_vars
    if tuple(hv) != tuple(comp.vars):
        raise AnnotationMismatch(f"hole expects {list(hv)}, component declares {list(comp.vars)}")
    return plug(ctx.cmd, comp.body)


def expr_size(e) -> int:
    if isinstance(e, BinOp):
        return 1 + expr_size(e.left) + expr_size(e.right)
    return 1


def cmd_size(c) -> int:
    """AST node count: every command, expression node and hole counts one."""
    if isinstance(c, (Assign, Output)):
        return 1 + expr_size(c.expr)
    if isinstance(c, Seq):
        return 1 + cmd_size(c.first) + cmd_size(c.second)
    if isinstance(c, If):
        return 1 + expr_size(c.cond) + cmd_size(c.then) + cmd_size(c.orelse)
    if isinstance(c, While):
        return 1 + expr_size(c.cond) + cmd_size(c.body)
    return 1


# ---------------------------------------------------------------- printing


def show_expr(e) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, (BoolLit, NatLit)):
        return render_value(e.value)
    return f"({e.op} {show_expr(e.left)} {show_expr(e.right)})"


def show(c) -> str:
    if isinstance(c, ImpComponent):
        return f"(component ({' '.join(c.vars)}) {show(c.body)})"
    if isinstance(c, ImpContext):
        return show(c.cmd)
    if isinstance(c, Assign):
        return f"(assign {c.var} {show_expr(c.expr)})"
    if isinstance(c, Output):
        return f"(output {show_expr(c.expr)})"
    if isinstance(c, Skip):
        return "skip"
    if isinstance(c, Seq):
        return f"(seq {show(c.first)} {show(c.second)})"
    if isinstance(c, If):
        return f"(if {show_expr(c.cond)} {show(c.then)} {show(c.orelse)})"
    if isinstance(c, While):
        return f"(while {show_expr(c.cond)} {show(c.body)})"
    if isinstance(c, Hole):
        return f"(hole ({' '.join(c.vars)}))"
    raise TypeError(c)


# ---------------------------------------------------------------- parsing


def _parse_expr(node) -> ImpExpr:
    if isinstance(node, Atom):
        if node.text == "true":
            return BoolLit(True)
        if node.text == "false":
            return BoolLit(False)
        n = sexpr.as_int(node)
        if n is not None:
            if n < 0:
                fail(node, "IMP has no negative literals")
            return NatLit(n)
        return Var(node.text)
    op = head(node)
    if op not in OPS:
        fail(node, f"unknown IMP operator {op!r}")
    sexpr.expect_len(node, 3, op)
    return BinOp(op, _parse_expr(node[1]), _parse_expr(node[2]))


def _parse_cmd(node) -> ImpCmd:
    if isinstance(node, Atom):
        if node.text == "skip":
            return SKIP
        fail(node, f"expected a command, found {node.text!r}")
    form = head(node)
    if form == "skip":
        sexpr.expect_len(node, 1, "skip")
        return SKIP
    if form == "assign":
        sexpr.expect_len(node, 3, form)
        return Assign(sexpr.symbol(node[1], "variable"), _parse_expr(node[2]))
    if form == "output":
        sexpr.expect_len(node, 2, form)
        return Output(_parse_expr(node[1]))
    if form == "seq":
        if len(node) < 2:
            fail(node, "'seq' needs at least one command")
        return seq(*(_parse_cmd(n) for n in node[1:]))
    if form == "if":
        sexpr.expect_len(node, 4, form)
        return If(_parse_expr(node[1]), _parse_cmd(node[2]), _parse_cmd(node[3]))
    if form == "while":
        sexpr.expect_len(node, 3, form)
        return While(_parse_expr(node[1]), _parse_cmd(node[2]))
    if form == "hole":
        sexpr.expect_len(node, 2, form)
        if not isinstance(node[1], SList):
            fail(node[1], "hole annotation must be a variable list")
        return Hole(tuple(sexpr.symbol(v, "variable") for v in node[1]))
    fail(node, f"unknown IMP command {form!r}")


def parse_imp(text: str):
    """Parse a component, a context (one hole) or a plain command."""
    node = sexpr.read_one(text)
    if head(node) == "component":
        sexpr.expect_len(node, 3, "component")
        if not isinstance(node[1], SList):
            fail(node[1], "component annotation must be a variable list")
        vars_ = tuple(sexpr.symbol(v, "variable") for v in node[1])
        body = _parse_cmd(node[2])
        if count_holes(body):
            fail(node, "components cannot contain holes")
        try:
            return ImpComponent(body, vars_)
        except ValueError as e:
            fail(node, str(e))
    cmd = _parse_cmd(node)
    holes = count_holes(cmd)
    if holes == 0:
        return cmd
    if holes > 1:
        fail(node, "a context has exactly one hole")
    return ImpContext(cmd)


# ---------------------------------------------------------------- semantics


class _StuckType:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "STUCK"


STUCK = _StuckType()


def _is_nat(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def eval_imp(e, sigma: dict):
    if isinstance(e, Var):
        return sigma.get(e.name, STUCK)
    if isinstance(e, (BoolLit, NatLit)):
        return e.value
    a = eval_imp(e.left, sigma)
    if a is STUCK:
        return STUCK
    b = eval_imp(e.right, sigma)
    if b is STUCK:
        return STUCK
    op = e.op
    if op in ("+", "*", "<"):
        if not (_is_nat(a) and _is_nat(b)):
            return STUCK
        return a + b if op == "+" else a * b if op == "*" else a < b
    if op == "=":
        if isinstance(a, bool) != isinstance(b, bool):
            return STUCK
        return a == b
    if not (isinstance(a, bool) and isinstance(b, bool)):
        return STUCK
    return (a and b) if op == "and" else (a or b)


@dataclass(frozen=True)
class Step:
    emitted: object  # None when the step is silent
    cmd: ImpCmd
    store: dict


def step_imp(c: ImpCmd, sigma: dict):
    """One small step of ``c/σ``; returns :data:`STUCK` when no rule applies."""
    if isinstance(c, Assign):
        v = eval_imp(c.expr, sigma)
        if v is STUCK:
            return STUCK
        s2 = dict(sigma)
        s2[c.var] = v
        return Step(None, SKIP, s2)
    if isinstance(c, Output):
        v = eval_imp(c.expr, sigma)
        if v is STUCK:
            return STUCK
        return Step(v, SKIP, sigma)
    if isinstance(c, Seq):
        if isinstance(c.first, Skip):
            return Step(None, c.second, sigma)
        r = step_imp(c.first, sigma)
        if r is STUCK:
            return STUCK
        return Step(r.emitted, Seq(r.cmd, c.second), r.store)
    if isinstance(c, If):
        v = eval_imp(c.cond, sigma)
        if not isinstance(v, bool):
            return STUCK
        return Step(None, c.then if v else c.orelse, sigma)
    if isinstance(c, While):
        return Step(None, If(c.cond, Seq(c.body, c), SKIP), sigma)
    return STUCK


def run_imp(c: ImpCmd, sigma: dict | None = None, budget: int = 10_000) -> Trace:
    if budget <= 0:
        raise ValueError("budget must be positive")
    sigma = dict(sigma or {})
    out = []
    steps = 0
    while True:
        if isinstance(c, Skip):
            return Trace(tuple(out), Terminal.HALTED)
        if steps >= budget:
            return Trace(tuple(out), Terminal.BUDGET)
        r = step_imp(c, sigma)
        if r is STUCK:
            return Trace(tuple(out), Terminal.STUCK)
        if r.emitted is not None:
            out.append(r.emitted)
        c, sigma = r.cmd, r.store
        steps += 1


def behavior_imp(p: ImpCmd, bounds: ExplorationBounds | None = None) -> BehaviorSample:
    """Run ``p`` under every valuation of its input variables.

    Variables that are always written before being read cannot influence the
    trace and are left out of the valuation grid.
    """
    from . import kernels

    bounds = bounds or ExplorationBounds()
    names = tuple(input_vars(p))
    grid = list(valuations(names, lambda n: bounds.domain_for(n, bounds.imp_domain)))
    traces = kernels.run_imp_batch(p, names, grid, bounds.budget)
    return BehaviorSample.from_runs(names, grid, traces, bounds)
