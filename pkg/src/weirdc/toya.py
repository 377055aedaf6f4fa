"""Toy^A: instructions live in memory next to data; PC and SP are explicit.

Expressions are Toy^C's (see :mod:`weirdc.toyc`), evaluated over plain
integers: a pointer is just an address. Variables resolve through the frame
of the procedure that owns the instruction being executed, at ``SP + offset``.

Calling convention (stack grows upward)::

    callee SP   = caller SP + caller frame size
    SP + 0 ..   arguments, in order
    ...         remaining variable cells, zeroed
    SP + k      saved PC   (k = number of variable cells)
    SP + k + 1  saved SP

``return`` reloads PC and SP from those two cells without any check.

Concrete syntax::

    (component (proc p entry (var x off) (array a off len) ...) ... (mem addr obj) ...)
    (context (pc n) (sp n) (proc ...) ... (input x addr) ... (mem addr obj) ...)
    (program (pc n) (sp n) (proc ...) ... (input x addr) ... (mem addr obj) ...)
    obj   ::= integer | (p instr)
    instr ::= (call p e ...) | return | halt | (assign lv e) | (output e) | skip | (jmpz e addr)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Union

from . import sexpr, toyc
from .sexpr import Atom, fail, head
from .toyc import CAddr, CBin, CDeref, CInt, CNull, CVar, show_expr
from .traces import BehaviorSample, ExplorationBounds, Terminal, Trace, valuations

HIDDEN_CELLS = toyc.HIDDEN_CELLS


class AddressOverlap(Exception):
    pass


class LinkError(Exception):
    pass


# ---------------------------------------------------------------- syntax


@dataclass(frozen=True)
class ACall:
    proc: str
    args: tuple


@dataclass(frozen=True)
class AReturn:
    pass


@dataclass(frozen=True)
class AHalt:
    pass


@dataclass(frozen=True)
class AAssign:
    lv: object
    expr: object


@dataclass(frozen=True)
class AOutput:
    expr: object


@dataclass(frozen=True)
class ASkip:
    pass


@dataclass(frozen=True)
class AJmpz:
    cond: object
    target: int


AInstr = Union[ACall, AReturn, AHalt, AAssign, AOutput, ASkip, AJmpz]
RETURN, HALT, SKIP = AReturn(), AHalt(), ASkip()


@dataclass(frozen=True)
class Tagged:
    """An instruction object ``p ▷ c`` stored in memory."""

    owner: str
    instr: AInstr


@dataclass(frozen=True)
class FrameEntry:
    kind: str  # "var" | "array"
    name: str
    offset: int
    length: int = 1


@dataclass(frozen=True)
class AProcDecl:
    name: str
    entry: int
    frame: tuple = ()

    def __post_init__(self):
        taken: set = set()
        for e in self.frame:
            span = set(range(e.offset, e.offset + e.length))
            if span & taken:
                raise ValueError(f"overlapping frame entries in {self.name!r}")
            taken |= span

    @property
    def var_cells(self) -> int:
        return max((e.offset + e.length for e in self.frame), default=0)

    @property
    def ret_offset(self) -> int:
        return self.var_cells

    @property
    def size(self) -> int:
        return self.var_cells + HIDDEN_CELLS

    def entry_for(self, name: str) -> FrameEntry | None:
        for e in self.frame:
            if e.name == name:
                return e
        return None


def _check_procs(procs) -> dict:
    out: dict = {}
    for p in procs:
        if p.name in out:
            raise LinkError(f"procedure {p.name!r} declared twice")
        out[p.name] = p
    return out


@dataclass(frozen=True)
class AComponent:
    procs: tuple = ()
    memory: Mapping = field(default_factory=dict)

    def __post_init__(self):
        _check_procs(self.procs)


@dataclass(frozen=True)
class AContext:
    pc: int
    sp: int
    procs: tuple = ()
    memory: Mapping = field(default_factory=dict)
    inputs: tuple = ()  # ((name, address), ...) cells seeded per valuation

    def __post_init__(self):
        _check_procs(self.procs)


@dataclass(frozen=True)
class AProgram:
    procs: tuple
    pc: int
    sp: int
    memory: Mapping
    inputs: tuple = ()

    def __post_init__(self):
        _check_procs(self.procs)

    def proc_table(self) -> dict:
        return {p.name: p for p in self.procs}


def link_toya(ctx: AContext, comp: AComponent) -> AProgram:
    overlap = set(ctx.memory) & set(comp.memory)
    if overlap:
        raise AddressOverlap(f"context and component both define address(es) {sorted(overlap)[:5]}")
    names = {p.name for p in ctx.procs} & {p.name for p in comp.procs}
    if names:
        raise LinkError(f"context and component both declare {sorted(names)}")
    mem = dict(ctx.memory)
    mem.update(comp.memory)
    return AProgram(ctx.procs + comp.procs, ctx.pc, ctx.sp, mem, ctx.inputs)


# ---------------------------------------------------------------- printing


def show_instr(i: AInstr) -> str:
    if isinstance(i, ACall):
        return "(call " + " ".join([i.proc] + [show_expr(a) for a in i.args]) + ")"
    if isinstance(i, AReturn):
        return "return"
    if isinstance(i, AHalt):
        return "halt"
    if isinstance(i, AAssign):
        return f"(assign {show_expr(i.lv)} {show_expr(i.expr)})"
    if isinstance(i, AOutput):
        return f"(output {show_expr(i.expr)})"
    if isinstance(i, ASkip):
        return "skip"
    if isinstance(i, AJmpz):
        return f"(jmpz {show_expr(i.cond)} {i.target})"
    raise TypeError(i)


def _show_proc(p: AProcDecl) -> str:
    parts = [f"(proc {p.name} {p.entry}"]
    for e in p.frame:
        if e.kind == "var":
            parts.append(f"(var {e.name} {e.offset})")
        else:
            parts.append(f"(array {e.name} {e.offset} {e.length})")
    return " ".join(parts) + ")"


def _show_obj(o) -> str:
    if isinstance(o, Tagged):
        return f"({o.owner} {show_instr(o.instr)})"
    return str(o)


def show_toya(x) -> str:
    if isinstance(x, AComponent):
        lines = ["(component"]
    elif isinstance(x, AContext):
        lines = ["(context", f"  (pc {x.pc}) (sp {x.sp})"]
    else:
        lines = ["(program", f"  (pc {x.pc}) (sp {x.sp})"]
    lines += ["  " + _show_proc(p) for p in x.procs]
    lines += [f"  (input {n} {a})" for n, a in getattr(x, "inputs", ())]
    lines += [f"  (mem {a} {_show_obj(x.memory[a])})" for a in sorted(x.memory)]
    lines[-1] += ")"
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- parsing


def _parse_instr(node) -> AInstr:
    if isinstance(node, Atom):
        if node.text == "return":
            return RETURN
        if node.text == "halt":
            return HALT
        if node.text == "skip":
            return SKIP
        fail(node, f"unknown instruction {node.text!r}")
    form = head(node)
    if form == "call":
        if len(node) < 2:
            fail(node, "'call' needs a procedure name")
        return ACall(sexpr.symbol(node[1]), tuple(toyc._parse_expr(a) for a in node[2:]))
    if form == "assign":
        sexpr.expect_len(node, 3, form)
        return AAssign(toyc._parse_lvalue(node[1]), toyc._parse_expr(node[2]))
    if form == "output":
        sexpr.expect_len(node, 2, form)
        return AOutput(toyc._parse_expr(node[1]))
    if form == "jmpz":
        sexpr.expect_len(node, 3, form)
        target = sexpr.as_int(node[2])
        if target is None:
            fail(node[2], "jump target must be an address")
        return AJmpz(toyc._parse_expr(node[1]), target)
    if form in ("return", "halt", "skip"):
        return {"return": RETURN, "halt": HALT, "skip": SKIP}[form]
    fail(node, f"unknown instruction {form!r}")


def _int(node, what) -> int:
    n = sexpr.as_int(node)
    if n is None:
        fail(node, f"expected {what}")
    return n


def _parse_proc(node) -> AProcDecl:
    if len(node) < 3:
        fail(node, "(proc name entry frame-entry ...)")
    entries = []
    for e in node[3:]:
        kind = head(e)
        if kind == "var":
            sexpr.expect_len(e, 3, "var")
            entries.append(FrameEntry("var", sexpr.symbol(e[1]), _int(e[2], "offset")))
        elif kind == "array":
            sexpr.expect_len(e, 4, "array")
            entries.append(FrameEntry("array", sexpr.symbol(e[1]), _int(e[2], "offset"),
                                      _int(e[3], "length")))
        else:
            fail(e, "frame entries are (var x n) or (array x n len)")
    try:
        return AProcDecl(sexpr.symbol(node[1]), _int(node[2], "entry address"), tuple(entries))
    except ValueError as err:
        fail(node, str(err))


def parse_toya(text: str):
    """Parse a Toy^A component, context or whole program."""
    node = sexpr.read_one(text)
    return parse_toya_node(node)


def parse_toya_node(node):
    kind = head(node)
    if kind not in ("component", "context", "program"):
        fail(node, "expected (component ...), (context ...) or (program ...)")
    procs, mem, inputs = [], {}, []
    pc = sp = None
    for item in node[1:]:
        form = head(item)
        if form == "proc":
            procs.append(_parse_proc(item))
        elif form == "mem":
            sexpr.expect_len(item, 3, "mem")
            addr = _int(item[1], "address")
            if addr in mem:
                fail(item, f"address {addr} defined twice")
            obj = item[2]
            if isinstance(obj, Atom):
                mem[addr] = _int(obj, "value")
            else:
                if len(obj) != 2:
                    fail(obj, "instruction objects look like (owner instr)")
                mem[addr] = Tagged(sexpr.symbol(obj[0], "owner"), _parse_instr(obj[1]))
        elif form == "input":
            sexpr.expect_len(item, 3, "input")
            inputs.append((sexpr.symbol(item[1]), _int(item[2], "address")))
        elif form in ("pc", "sp") and kind != "component":
            sexpr.expect_len(item, 2, form)
            if form == "pc":
                pc = _int(item[1], "address")
            else:
                sp = _int(item[1], "address")
        else:
            fail(item, f"unexpected {form!r} in {kind}")
    try:
        if kind == "component":
            return AComponent(tuple(procs), mem)
        if pc is None or sp is None:
            fail(node, f"a {kind} needs (pc n) and (sp n)")
        cls = AContext if kind == "context" else AProgram
        if cls is AContext:
            return AContext(pc, sp, tuple(procs), mem, tuple(inputs))
        return AProgram(tuple(procs), pc, sp, mem, tuple(inputs))
    except LinkError as err:
        fail(node, str(err))


# ---------------------------------------------------------------- semantics


class ErrorSignal(Exception):
    pass


class HaltSignal(Exception):
    pass


@dataclass
class AMachine:
    procs: dict
    pc: int
    sp: int
    mem: dict
    steps: int = 0
    outputs: list = field(default_factory=list)

    @classmethod
    def load(cls, p: AProgram, inputs: Mapping | None = None) -> "AMachine":
        mem = dict(p.memory)
        for name, addr in p.inputs:
            if inputs is None or name not in inputs:
                continue
            mem[addr] = int(inputs[name])
        return cls(p.proc_table(), p.pc, p.sp, mem)

    def read(self, addr: int) -> int:
        o = self.mem.get(addr)
        if o is None:
            raise ErrorSignal(f"read of unmapped address {addr}")
        if isinstance(o, Tagged):
            raise ErrorSignal(f"read of instruction cell {addr} as data")
        return o

    def owner_frame(self, owner: str) -> AProcDecl:
        p = self.procs.get(owner)
        if p is None:
            raise ErrorSignal(f"instruction owned by undeclared procedure {owner!r}")
        return p

    def addr_of(self, frame: AProcDecl, name: str) -> FrameEntry:
        e = frame.entry_for(name)
        if e is None:
            raise ErrorSignal(f"{frame.name} has no variable {name!r}")
        return e

    def eval(self, frame: AProcDecl, e) -> int:
        if isinstance(e, CInt):
            return e.value
        if isinstance(e, CVar):
            ent = self.addr_of(frame, e.name)
            a = self.sp + ent.offset
            return a if ent.kind == "array" else self.read(a)
        if isinstance(e, CNull):
            return 0
        if isinstance(e, CDeref):
            return self.read(self.eval(frame, e.expr))
        if isinstance(e, CAddr):
            return self.lvalue(frame, e.lv)
        if isinstance(e, CBin):
            a, b = self.eval(frame, e.left), self.eval(frame, e.right)
            if e.op == "+":
                return a + b
            if e.op == "-":
                return a - b
            if e.op == "*":
                return a * b
            if e.op == "<":
                return int(a < b)
            if e.op == "=":
                return int(a == b)
        raise ErrorSignal(f"cannot evaluate {e!r}")

    def lvalue(self, frame: AProcDecl, lv) -> int:
        if isinstance(lv, CVar):
            return self.sp + self.addr_of(frame, lv.name).offset
        if isinstance(lv, CDeref):
            return self.eval(frame, lv.expr)
        raise ErrorSignal(f"not an l-value: {lv!r}")

    def step(self):
        """Execute one instruction; returns the emitted value or None."""
        o = self.mem.get(self.pc)
        if not isinstance(o, Tagged):
            raise ErrorSignal(f"PC {self.pc} does not hold an instruction")
        frame = self.owner_frame(o.owner)
        i = o.instr
        self.steps += 1
        if isinstance(i, AHalt):
            raise HaltSignal()
        if isinstance(i, AOutput):
            v = self.eval(frame, i.expr)
            self.outputs.append(v)
            self.pc += 1
            return v
        if isinstance(i, AAssign):
            a = self.lvalue(frame, i.lv)
            self.mem[a] = self.eval(frame, i.expr)
            self.pc += 1
        elif isinstance(i, ASkip):
            self.pc += 1
        elif isinstance(i, AJmpz):
            self.pc = i.target if self.eval(frame, i.cond) == 0 else self.pc + 1
        elif isinstance(i, ACall):
            callee = self.procs.get(i.proc)
            if callee is None:
                raise ErrorSignal(f"call to undeclared procedure {i.proc!r}")
            args = [self.eval(frame, a) for a in i.args]
            new_sp = self.sp + frame.size
            for k, v in enumerate(args):
                self.mem[new_sp + k] = v
            for k in range(len(args), callee.var_cells):
                self.mem[new_sp + k] = 0
            self.mem[new_sp + callee.ret_offset] = self.pc + 1
            self.mem[new_sp + callee.ret_offset + 1] = self.sp
            self.sp = new_sp
            self.pc = callee.entry
        elif isinstance(i, AReturn):
            base = self.sp + frame.ret_offset
            pc, sp = self.read(base), self.read(base + 1)
            self.pc, self.sp = pc, sp
        else:
            raise ErrorSignal(f"unknown instruction {i!r}")
        return None


def exec_toya(p: AProgram, budget: int = 10_000, inputs: Mapping | None = None):
    """Run ``p``; returns ``(trace, steps, machine)``."""
    m = AMachine.load(p, inputs)
    term = Terminal.BUDGET
    try:
        while m.steps < budget:
            m.step()
    except HaltSignal:
        term = Terminal.HALTED
    except ErrorSignal:
        term = Terminal.ERROR
    return Trace(tuple(m.outputs), term), m.steps, m


def run_toya(p: AProgram, budget: int = 10_000, inputs: Mapping | None = None) -> Trace:
    return exec_toya(p, budget, inputs)[0]


def behavior_toya(p: AProgram, bounds: ExplorationBounds | None = None) -> BehaviorSample:
    """Sample over the program's input cells, each drawn from the integer domain."""
    bounds = bounds or ExplorationBounds()
    names = tuple(n for n, _ in p.inputs)
    grid = list(valuations(names, lambda n: bounds.domain_for(n, bounds.int_domain)))
    traces = [run_toya(p, bounds.budget, dict(zip(names, vals))) for vals in grid]
    return BehaviorSample.from_runs(names, grid, traces, bounds)
