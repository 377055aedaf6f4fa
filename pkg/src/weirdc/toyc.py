"""Toy^C: a C-like language with procedures, pointers and error-on-UB.

Concrete syntax::

    store ::= proc*
    proc  ::= (proc name ((x type) ...) ((y type) ...) c)
    type  ::= int | (ptr type) | (array simple n)
    e     ::= x | i | null | (op e e) | (deref e) | (addr lv)      op ::= + - * < =
    lv    ::= x | (deref lv)
    c     ::= (call p e ...) | (assign lv e) | (output e) | skip
            | (seq c ...) | (if e c c) | (while e c)

Memory is one linear array of integer cells. A call lays out the callee's
frame at the current stack top: parameters, then locals (arrays contiguous),
then two hidden cells that the assembly back end uses for the saved PC and
saved SP. The Toy^A compiler reuses exactly this layout, so pointer values
(stack addresses) agree across the two languages.

Pointers carry provenance: the extent of the variable they were derived from
and the frame that owns it. Dereferencing outside that extent, through a dead
frame, or through a plain integer is undefined behavior and ends the run with
an ``error`` terminal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from . import sexpr
from .sexpr import Atom, SList, fail, head
from .traces import BehaviorSample, ExplorationBounds, Terminal, Trace, valuations

OPS = ("+", "-", "*", "<", "=")

# Shared with the Toy^A back end.
STACK_BASE = 1_000_000
BOOT_FRAME = 2
HIDDEN_CELLS = 2


class DuplicateName(Exception):
    pass


class MissingMain(Exception):
    pass


class ArityMismatch(Exception):
    pass


# ---------------------------------------------------------------- types


@dataclass(frozen=True)
class IntT:
    def __str__(self):
        return "int"


@dataclass(frozen=True)
class PtrT:
    to: "CType"

    def __str__(self):
        return f"(ptr {self.to})"


@dataclass(frozen=True)
class ArrayT:
    elem: Union[IntT, PtrT]
    length: int

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError("array lengths are positive")

    def __str__(self):
        return f"(array {self.elem} {self.length})"


CType = Union[IntT, PtrT, ArrayT]
INT = IntT()


def cells(t: CType) -> int:
    return t.length if isinstance(t, ArrayT) else 1


# ---------------------------------------------------------------- syntax


@dataclass(frozen=True)
class CVar:
    name: str


@dataclass(frozen=True)
class CInt:
    value: int


@dataclass(frozen=True)
class CNull:
    pass


@dataclass(frozen=True)
class CBin:
    op: str
    left: "CExpr"
    right: "CExpr"


@dataclass(frozen=True)
class CDeref:
    expr: "CExpr"


@dataclass(frozen=True)
class CAddr:
    lv: "CExpr"  # CVar or CDeref


CExpr = Union[CVar, CInt, CNull, CBin, CDeref, CAddr]
NULL = CNull()


@dataclass(frozen=True)
class CCall:
    proc: str
    args: tuple


@dataclass(frozen=True)
class CAssign:
    lv: CExpr
    expr: CExpr


@dataclass(frozen=True)
class COutput:
    expr: CExpr


@dataclass(frozen=True)
class CSkip:
    pass


@dataclass(frozen=True)
class CSeq:
    first: "CCmd"
    second: "CCmd"


@dataclass(frozen=True)
class CIf:
    cond: CExpr
    then: "CCmd"
    orelse: "CCmd"


@dataclass(frozen=True)
class CWhile:
    cond: CExpr
    body: "CCmd"


CCmd = Union[CCall, CAssign, COutput, CSkip, CSeq, CIf, CWhile]
CSKIP = CSkip()


def cseq(*cmds) -> CCmd:
    cmds = [c for c in cmds if not isinstance(c, CSkip)] or [CSKIP]
    out = cmds[-1]
    for c in reversed(cmds[:-1]):
        out = CSeq(c, out)
    return out


@dataclass(frozen=True)
class CProc:
    name: str
    params: tuple  # ((name, type), ...), simple types only
    locals: tuple
    body: CCmd

    def __post_init__(self):
        names = [n for n, _ in self.params + self.locals]
        if len(names) != len(set(names)):
            raise DuplicateName(f"repeated variable in procedure {self.name!r}")
        for n, t in self.params:
            if isinstance(t, ArrayT):
                raise ValueError(f"parameter {n!r} of {self.name!r} must have a simple type")

    @property
    def arity(self) -> int:
        return len(self.params)

    def layout(self) -> dict:
        """name -> (offset, type). Parameters first, then locals."""
        out, off = {}, 0
        for n, t in self.params + self.locals:
            out[n] = (off, t)
            off += cells(t)
        return out

    @property
    def var_cells(self) -> int:
        return sum(cells(t) for _, t in self.params + self.locals)

    @property
    def frame_size(self) -> int:
        return self.var_cells + HIDDEN_CELLS


@dataclass(frozen=True)
class CStore:
    """A global store G: components, contexts and whole programs alike."""

    procs: tuple = ()

    def __post_init__(self):
        names = [p.name for p in self.procs]
        dup = {n for n in names if names.count(n) > 1}
        if dup:
            raise DuplicateName(f"procedure(s) declared twice: {sorted(dup)}")

    def get(self, name: str) -> CProc | None:
        for p in self.procs:
            if p.name == name:
                return p
        return None

    @property
    def names(self) -> list:
        return [p.name for p in self.procs]

    def __len__(self):
        return len(self.procs)


def link_toyc(ctx: CStore, comp: CStore) -> CStore:
    clash = set(ctx.names) & set(comp.names)
    if clash:
        raise DuplicateName(f"both sides declare {sorted(clash)}")
    return CStore(ctx.procs + comp.procs)


# ---------------------------------------------------------------- printing


def show_expr(e) -> str:
    if isinstance(e, CVar):
        return e.name
    if isinstance(e, CInt):
        return str(e.value)
    if isinstance(e, CNull):
        return "null"
    if isinstance(e, CBin):
        return f"({e.op} {show_expr(e.left)} {show_expr(e.right)})"
    if isinstance(e, CDeref):
        return f"(deref {show_expr(e.expr)})"
    if isinstance(e, CAddr):
        return f"(addr {show_expr(e.lv)})"
    raise TypeError(e)


def show_cmd(c, indent: int = 0) -> str:
    pad = " " * indent
    if isinstance(c, CCall):
        return pad + "(call " + " ".join([c.proc] + [show_expr(a) for a in c.args]) + ")"
    if isinstance(c, CAssign):
        return f"{pad}(assign {show_expr(c.lv)} {show_expr(c.expr)})"
    if isinstance(c, COutput):
        return f"{pad}(output {show_expr(c.expr)})"
    if isinstance(c, CSkip):
        return pad + "skip"
    if isinstance(c, CSeq):
        parts = []
        while isinstance(c, CSeq):
            parts.append(c.first)
            c = c.second
        parts.append(c)
        inner = "\n".join(show_cmd(p, indent + 2) for p in parts)
        return f"{pad}(seq\n{inner})"
    if isinstance(c, CIf):
        return (f"{pad}(if {show_expr(c.cond)}\n{show_cmd(c.then, indent + 2)}\n"
                f"{show_cmd(c.orelse, indent + 2)})")
    if isinstance(c, CWhile):
        return f"{pad}(while {show_expr(c.cond)}\n{show_cmd(c.body, indent + 2)})"
    raise TypeError(c)


def show_toyc(g: CStore) -> str:
    out = []
    for p in g.procs:
        ps = " ".join(f"({n} {t})" for n, t in p.params)
        ls = " ".join(f"({n} {t})" for n, t in p.locals)
        out.append(f"(proc {p.name} ({ps}) ({ls})\n{show_cmd(p.body, 2)})")
    return "\n".join(out) + ("\n" if out else "")


# ---------------------------------------------------------------- parsing


def _parse_type(node, simple_only=False) -> CType:
    if isinstance(node, Atom):
        if node.text == "int":
            return INT
        fail(node, f"unknown type {node.text!r}")
    form = head(node)
    if form == "ptr":
        sexpr.expect_len(node, 2, "ptr")
        return PtrT(_parse_type(node[1]))
    if form == "array":
        if simple_only:
            fail(node, "parameters must have simple types")
        sexpr.expect_len(node, 3, "array")
        elem = _parse_type(node[1], simple_only=True)
        n = sexpr.as_int(node[2])
        if n is None or n <= 0:
            fail(node[2], "array length must be a positive integer")
        return ArrayT(elem, n)
    fail(node, "malformed type")


def _parse_expr(node) -> CExpr:
    if isinstance(node, Atom):
        n = sexpr.as_int(node)
        if n is not None:
            return CInt(n)
        if node.text == "null":
            return NULL
        return CVar(node.text)
    form = head(node)
    if form in OPS:
        sexpr.expect_len(node, 3, form)
        return CBin(form, _parse_expr(node[1]), _parse_expr(node[2]))
    if form == "deref":
        sexpr.expect_len(node, 2, form)
        return CDeref(_parse_expr(node[1]))
    if form == "addr":
        sexpr.expect_len(node, 2, form)
        return CAddr(_parse_lvalue(node[1]))
    fail(node, f"unknown Toy^C expression {form!r}")


def _parse_lvalue(node) -> CExpr:
    if isinstance(node, Atom):
        return CVar(sexpr.symbol(node, "l-value"))
    if head(node) == "deref":
        sexpr.expect_len(node, 2, "deref")
        inner = node[1]
        # (deref e) with an arbitrary expression is accepted as an l-value: *e
        return CDeref(_parse_expr(inner))
    fail(node, "expected an l-value")


def _parse_cmd(node) -> CCmd:
    if isinstance(node, Atom):
        if node.text == "skip":
            return CSKIP
        fail(node, f"expected a command, found {node.text!r}")
    form = head(node)
    if form == "skip":
        return CSKIP
    if form == "call":
        if len(node) < 2:
            fail(node, "'call' needs a procedure name")
        return CCall(sexpr.symbol(node[1], "procedure name"), tuple(_parse_expr(a) for a in node[2:]))
    if form == "assign":
        sexpr.expect_len(node, 3, form)
        return CAssign(_parse_lvalue(node[1]), _parse_expr(node[2]))
    if form == "output":
        sexpr.expect_len(node, 2, form)
        return COutput(_parse_expr(node[1]))
    if form == "seq":
        if len(node) < 2:
            fail(node, "'seq' needs at least one command")
        return cseq(*(_parse_cmd(n) for n in node[1:]))
    if form == "if":
        sexpr.expect_len(node, 4, form)
        return CIf(_parse_expr(node[1]), _parse_cmd(node[2]), _parse_cmd(node[3]))
    if form == "while":
        sexpr.expect_len(node, 3, form)
        return CWhile(_parse_expr(node[1]), _parse_cmd(node[2]))
    fail(node, f"unknown Toy^C command {form!r}")


def _parse_decls(node, simple_only) -> tuple:
    if not isinstance(node, SList):
        fail(node, "expected a declaration list")
    out = []
    for d in node:
        if not isinstance(d, SList) or len(d) != 2:
            fail(d, "declarations look like (name type)")
        out.append((sexpr.symbol(d[0], "variable"), _parse_type(d[1], simple_only)))
    return tuple(out)


def parse_proc(node) -> CProc:
    if head(node) != "proc":
        fail(node, "expected (proc ...)")
    sexpr.expect_len(node, 5, "proc")
    name = sexpr.symbol(node[1], "procedure name")
    try:
        return CProc(name, _parse_decls(node[2], True), _parse_decls(node[3], False),
                     _parse_cmd(node[4]))
    except DuplicateName as e:
        fail(node, str(e))


def parse_toyc(text: str) -> CStore:
    procs = [parse_proc(n) for n in sexpr.read_all(text)]
    names = [p.name for p in procs]
    for p in procs:
        if names.count(p.name) > 1:
            raise DuplicateName(f"procedure {p.name!r} declared twice")
    return CStore(tuple(procs))


# ---------------------------------------------------------------- semantics


@dataclass(frozen=True)
class Ptr:
    """A pointer value: address plus the extent and frame it may touch."""

    addr: int
    lo: int
    hi: int
    frame: int

    def shift(self, k: int) -> "Ptr":
        return Ptr(self.addr + k, self.lo, self.hi, self.frame)


class UB(Exception):
    """Undefined behavior; surfaces as the ``error`` terminal."""


class _Budget(Exception):
    pass


def as_int(v) -> int:
    return v.addr if isinstance(v, Ptr) else v


@dataclass
class _Frame:
    proc: CProc
    base: int
    ident: int
    layout: dict


@dataclass
class CMachine:
    """Interpreter state. ``mem`` maps addresses to ints or Ptrs."""

    store: CStore
    budget: int
    mem: dict = field(default_factory=dict)
    frames: list = field(default_factory=list)
    live: set = field(default_factory=set)
    top: int = STACK_BASE + BOOT_FRAME
    steps: int = 0
    outputs: list = field(default_factory=list)
    next_id: int = 0
    # every cell access is recorded when this is a list
    accesses: list | None = None

    # -- memory -------------------------------------------------------
    def _check(self, p, write: bool):
        if not isinstance(p, Ptr):
            raise UB(f"{'write' if write else 'read'} through non-pointer {p!r}")
        if p.frame not in self.live:
            raise UB(f"access through dangling pointer {p.addr}")
        if not (p.lo <= p.addr < p.hi):
            raise UB(f"out-of-bounds access at {p.addr} (object [{p.lo},{p.hi}))")
        if self.accesses is not None:
            self.accesses.append((p.addr, write))

    def load(self, p):
        self._check(p, False)
        return self.mem[p.addr]

    def store_(self, p, v):
        self._check(p, True)
        self.mem[p.addr] = v

    # -- frames -------------------------------------------------------
    def push_frame(self, proc: CProc, args: list):
        ident = self.next_id
        self.next_id += 1
        base = self.top
        layout = {}
        for n, (off, t) in proc.layout().items():
            layout[n] = (base + off, t)
        for i, (n, _) in enumerate(proc.params):
            self.mem[base + i] = args[i]
        for n, t in proc.locals:
            a, _ = layout[n]
            for k in range(cells(t)):
                self.mem[a + k] = 0
        for k in range(HIDDEN_CELLS):
            self.mem[base + proc.var_cells + k] = 0
        self.frames.append(_Frame(proc, base, ident, layout))
        self.live.add(ident)
        self.top = base + proc.frame_size

    def pop_frame(self):
        f = self.frames.pop()
        self.live.discard(f.ident)
        for a in range(f.base, f.base + f.proc.frame_size):
            self.mem.pop(a, None)
        self.top = f.base

    # -- expressions --------------------------------------------------
    def var_ptr(self, name: str) -> Ptr:
        f = self.frames[-1]
        if name not in f.layout:
            raise UB(f"unknown variable {name!r} in {f.proc.name}")
        a, t = f.layout[name]
        return Ptr(a, a, a + cells(t), f.ident)

    def lvalue(self, lv) -> Ptr:
        if isinstance(lv, CVar):
            _, t = self.frames[-1].layout.get(lv.name, (None, None))
            if isinstance(t, ArrayT):
                raise UB(f"array {lv.name!r} is not assignable")
            return self.var_ptr(lv.name)
        if isinstance(lv, CDeref):
            p = self.eval(lv.expr)
            if not isinstance(p, Ptr):
                raise UB("dereference of a non-pointer")
            return p
        raise UB(f"not an l-value: {lv!r}")

    def eval(self, e):
        if isinstance(e, CInt):
            return e.value
        if isinstance(e, CVar):
            _, t = self.frames[-1].layout.get(e.name, (None, None))
            p = self.var_ptr(e.name)
            if isinstance(t, ArrayT):
                return p  # arrays decay to a pointer to their first cell
            return self.load(p)
        if isinstance(e, CNull):
            return 0
        if isinstance(e, CDeref):
            return self.load(self.eval(e.expr))
        if isinstance(e, CAddr):
            if isinstance(e.lv, CVar):
                return self.var_ptr(e.lv.name)
            return self.lvalue(e.lv)
        if isinstance(e, CBin):
            a, b = self.eval(e.left), self.eval(e.right)
            return binop(e.op, a, b)
        raise UB(f"cannot evaluate {e!r}")

    def truth(self, e) -> bool:
        return as_int(self.eval(e)) != 0

    # -- commands -----------------------------------------------------
    def tick(self):
        if self.steps >= self.budget:
            raise _Budget()
        self.steps += 1

    def call(self, name: str, args: list):
        proc = self.store.get(name)
        if proc is None:
            raise UB(f"call to undeclared procedure {name!r}")
        if proc.arity != len(args):
            raise UB(f"{name} expects {proc.arity} argument(s), got {len(args)}")
        self.push_frame(proc, args)
        return proc

    def run(self, entry: str, args: list):
        proc = self.call(entry, args)
        kont: list = [_RET, proc.body]
        while kont:
            c = kont.pop()
            self.tick()
            if c is _RET:
                self.pop_frame()
            elif isinstance(c, CSeq):
                kont.append(c.second)
                kont.append(c.first)
            elif isinstance(c, CAssign):
                p = self.lvalue(c.lv)
                self.store_(p, self.eval(c.expr))
            elif isinstance(c, COutput):
                self.outputs.append(as_int(self.eval(c.expr)))
            elif isinstance(c, CSkip):
                pass
            elif isinstance(c, CIf):
                kont.append(c.then if self.truth(c.cond) else c.orelse)
            elif isinstance(c, CWhile):
                if self.truth(c.cond):
                    kont.append(c)
                    kont.append(c.body)
            elif isinstance(c, CCall):
                args = [self.eval(a) for a in c.args]
                callee = self.call(c.proc, args)
                kont.append(_RET)
                kont.append(callee.body)
            else:
                raise UB(f"unknown command {c!r}")


_RET = object()


def binop(op: str, a, b):
    if op == "+":
        if isinstance(a, Ptr) and not isinstance(b, Ptr):
            return a.shift(b)
        if isinstance(b, Ptr) and not isinstance(a, Ptr):
            return b.shift(a)
        return as_int(a) + as_int(b)
    if op == "-":
        if isinstance(a, Ptr) and not isinstance(b, Ptr):
            return a.shift(-b)
        return as_int(a) - as_int(b)
    if op == "*":
        return as_int(a) * as_int(b)
    if op == "<":
        return int(as_int(a) < as_int(b))
    if op == "=":
        return int(as_int(a) == as_int(b))
    raise UB(f"unknown operator {op!r}")


def check_whole(p: CStore, nargs: int | None = None) -> CProc:
    main = p.get("main")
    if main is None:
        raise MissingMain("whole Toy^C programs need a 'main' procedure")
    if nargs is not None and nargs != main.arity:
        raise ArityMismatch(f"main takes {main.arity} argument(s), got {nargs}")
    return main


def run_toyc(p: CStore, args=(), budget: int = 10_000, machine: list | None = None) -> Trace:
    """Run ``main(args)``. Pass a list as ``machine`` to receive the final state."""
    check_whole(p, len(args))
    m = CMachine(p, budget)
    if machine is not None:
        machine.append(m)
    try:
        m.run("main", list(args))
    except UB:
        return Trace(tuple(m.outputs), Terminal.ERROR)
    except _Budget:
        return Trace(tuple(m.outputs), Terminal.BUDGET)
    return Trace(tuple(m.outputs), Terminal.HALTED)


def behavior_toyc(p: CStore, bounds: ExplorationBounds | None = None) -> BehaviorSample:
    bounds = bounds or ExplorationBounds()
    main = check_whole(p)
    names = tuple(n for n, _ in main.params)
    grid = list(valuations(names, lambda n: bounds.domain_for(n, bounds.int_domain)))
    traces = [run_toyc(p, vals, bounds.budget) for vals in grid]
    return BehaviorSample.from_runs(names, grid, traces, bounds)
