"""Seeded random program generators for the compiler checks.

Loops are always counted (a fresh counter that the body never writes) so
random programs terminate well inside the default step budget.
"""

from __future__ import annotations

import random

from . import imp, toyc
from .toyc import CAddr, CBin, CDeref, CInt, CVar


class ImpGen:
    def __init__(self, seed: int = 0, names=("x", "y"), temp: str = "t"):
        self.rng = random.Random(seed)
        self.names = tuple(names)
        self.temp = temp
        self._counter = 0

    def _fresh(self) -> str:
        self._counter += 1
        return f"i{self._counter}"

    def readable(self) -> tuple:
        return self.names + ((self.temp,) if self.temp else ())

    def nat(self, d: int):
        r = self.rng
        if d <= 0 or r.random() < 0.35:
            if r.random() < 0.5:
                return imp.Var(r.choice(self.readable()))
            return imp.NatLit(r.randint(0, 3))
        return imp.BinOp(r.choice("+*"), self.nat(d - 1), self.nat(d - 1))

    def boolean(self, d: int):
        r = self.rng
        if d <= 0 or r.random() < 0.25:
            if r.random() < 0.3:
                # untyped on purpose: a variable may hold a number
                return imp.Var(r.choice(self.readable()))
            return imp.BoolLit(r.random() < 0.5)
        op = r.choice(["<", "=", "=", "and", "or"])
        if op in ("and", "or"):
            return imp.BinOp(op, self.boolean(d - 1), self.boolean(d - 1))
        if op == "=" and r.random() < 0.3:
            return imp.BinOp(op, self.boolean(d - 1), self.boolean(d - 1))
        return imp.BinOp(op, self.nat(d - 1), self.nat(d - 1))

    def expr(self, d: int = 2):
        return self.nat(d) if self.rng.random() < 0.6 else self.boolean(d)

    def cmd(self, d: int = 3, writable=None, hole=None):
        """A random command; ``hole`` (a Hole) is placed exactly once if given."""
        r = self.rng
        writable = self.readable() if writable is None else writable
        if hole is not None:
            shape = r.choice(["bare", "seq_l", "seq_r", "if_t", "if_e", "loop"]) if d > 0 else "bare"
            if shape == "bare":
                return hole
            if shape == "seq_l":
                return imp.Seq(self.cmd(d - 1, writable, hole), self.cmd(d - 1, writable))
            if shape == "seq_r":
                return imp.Seq(self.cmd(d - 1, writable), self.cmd(d - 1, writable, hole))
            if shape == "if_t":
                return imp.If(self.boolean(1), self.cmd(d - 1, writable, hole), self.cmd(d - 1, writable))
            if shape == "if_e":
                return imp.If(self.boolean(1), self.cmd(d - 1, writable), self.cmd(d - 1, writable, hole))
            return self.loop(d, writable, hole)
        if d <= 0:
            k = r.random()
            if k < 0.45:
                return imp.Assign(r.choice(writable), self.expr())
            if k < 0.9:
                return imp.Output(self.expr())
            return imp.SKIP
        k = r.random()
        if k < 0.4:
            return imp.Seq(self.cmd(d - 1, writable), self.cmd(d - 1, writable))
        if k < 0.65:
            return imp.If(self.boolean(2), self.cmd(d - 1, writable), self.cmd(d - 1, writable))
        if k < 0.8:
            return self.loop(d, writable)
        return self.cmd(0, writable)

    def loop(self, d: int, writable, hole=None):
        i = self._fresh()
        n = self.rng.randint(0, 3)
        body = self.cmd(d - 1, writable, hole)
        w = imp.While(imp.BinOp("<", imp.Var(i), imp.NatLit(n)),
                      imp.Seq(body, imp.Assign(i, imp.BinOp("+", imp.Var(i), imp.NatLit(1)))))
        return imp.Seq(imp.Assign(i, imp.NatLit(0)), w)

    def whole(self, d: int = 3):
        """``t := e(x, y); c`` so that at most the named inputs are live-in."""
        self._counter = 0
        init = imp.Assign(self.temp, self.nat(1))
        return imp.Seq(init, self.cmd(d))

    def component(self, vars_, d: int = 2) -> imp.ImpComponent:
        sub = ImpGen(self.rng.random(), names=tuple(vars_), temp=None)
        sub.rng = self.rng
        sub._counter = 100 + self._counter

        def no_loops(depth):
            k = self.rng.random()
            if depth <= 0 or k < 0.3:
                return sub.cmd(0, tuple(vars_))
            if k < 0.7:
                return imp.Seq(no_loops(depth - 1), no_loops(depth - 1))
            return imp.If(sub.boolean(1), no_loops(depth - 1), no_loops(depth - 1))

        return imp.ImpComponent(no_loops(d), tuple(vars_))

    def pair(self, d: int = 2):
        """A random context and a component sharing the hole annotation."""
        self._counter = 0
        k = self.rng.randint(1, len(self.names))
        vars_ = tuple(sorted(self.rng.sample(self.names, k)))
        comp = self.component(vars_)
        body = imp.Seq(imp.Assign(self.temp, self.nat(1)), self.cmd(d, hole=imp.Hole(vars_)))
        return imp.ImpContext(body), comp


# ---------------------------------------------------------------- Toy^C


class ToyCGen:
    """Random Toy^C programs over ``main(x, y)`` with a two-cell array and a helper.

    With ``safe=False`` array indices may depend on inputs, so some runs read or
    write out of bounds (undefined behavior in the source).
    """

    def __init__(self, seed: int = 0, safe: bool = False, params=("x", "y")):
        self.rng = random.Random(seed)
        self.safe = safe
        self.params = tuple(params)
        self._counter = 0

    def _fresh(self):
        self._counter += 1
        return f"i{self._counter}"

    def ints(self):
        return self.params + ("t",)

    def index(self):
        if self.safe or self.rng.random() < 0.6:
            return CInt(self.rng.randint(0, 1))
        return CVar(self.rng.choice(self.params))

    def expr(self, d: int = 2):
        r = self.rng
        if d <= 0 or r.random() < 0.3:
            k = r.random()
            if k < 0.45:
                return CVar(r.choice(self.ints()))
            if k < 0.8:
                return CInt(r.randint(-2, 3))
            return CDeref(CBin("+", CVar("a"), self.index()))
        return CBin(r.choice("+-*<="), self.expr(d - 1), self.expr(d - 1))

    def hole_expr(self, d: int = 1):
        r = self.rng
        if d <= 0 or r.random() < 0.4:
            return r.choice([CVar("v"), CDeref(CVar("q")), CInt(r.randint(-2, 3))])
        return CBin(r.choice("+-*<="), self.hole_expr(d - 1), self.hole_expr(d - 1))

    def cmd(self, d: int = 3, hole_args=None):
        r = self.rng
        if hole_args is not None:
            shape = r.choice(["bare", "seq_l", "seq_r", "if", "loop"]) if d > 0 else "bare"
            call = toyc.CCall("hole", hole_args)
            if shape == "bare":
                return call
            if shape == "seq_l":
                return toyc.CSeq(self.cmd(d - 1, hole_args), self.cmd(d - 1))
            if shape == "seq_r":
                return toyc.CSeq(self.cmd(d - 1), self.cmd(d - 1, hole_args))
            if shape == "if":
                return toyc.CIf(self.expr(1), self.cmd(d - 1, hole_args), self.cmd(d - 1))
            return self.loop(d, hole_args)
        if d <= 0:
            k = r.random()
            if k < 0.3:
                return toyc.CAssign(CVar(r.choice(self.ints())), self.expr())
            if k < 0.5:
                return toyc.CAssign(CDeref(CBin("+", CVar("a"), self.index())), self.expr())
            if k < 0.6:
                return toyc.cseq(toyc.CAssign(CVar("p"), CAddr(CVar("t"))),
                                 toyc.CAssign(CDeref(CVar("p")), self.expr()))
            if k < 0.72:
                target = CAddr(CVar("t")) if r.random() < 0.5 else CBin("+", CVar("a"), self.index())
                return toyc.CCall("h", (target, self.expr(1)))
            return toyc.COutput(self.expr())
        k = r.random()
        if k < 0.4:
            return toyc.CSeq(self.cmd(d - 1), self.cmd(d - 1))
        if k < 0.65:
            return toyc.CIf(self.expr(2), self.cmd(d - 1), self.cmd(d - 1))
        if k < 0.8:
            return self.loop(d)
        return self.cmd(0)

    def loop(self, d: int, hole_args=None):
        i = self._fresh()
        self._loops.append(i)
        body = self.cmd(d - 1, hole_args)
        w = toyc.CWhile(CBin("<", CVar(i), CInt(self.rng.randint(0, 3))),
                        toyc.CSeq(body, toyc.CAssign(CVar(i), CBin("+", CVar(i), CInt(1)))))
        return toyc.CSeq(toyc.CAssign(CVar(i), CInt(0)), w)

    def helper(self) -> toyc.CProc:
        body = toyc.cseq(toyc.CAssign(CDeref(CVar("q")), CBin("+", CDeref(CVar("q")), CVar("v"))),
                         toyc.COutput(CDeref(CVar("q"))))
        return toyc.CProc("h", (("q", toyc.PtrT(toyc.INT)), ("v", toyc.INT)), (), body)

    def _main(self, body) -> toyc.CProc:
        local = [("t", toyc.INT), ("a", toyc.ArrayT(toyc.INT, 2)), ("p", toyc.PtrT(toyc.INT))]
        local += [(i, toyc.INT) for i in self._loops]
        return toyc.CProc("main", tuple((x, toyc.INT) for x in self.params), tuple(local), body)

    def whole(self, d: int = 3) -> toyc.CStore:
        self._counter, self._loops = 0, []
        body = self.cmd(d)
        return toyc.CStore((self._main(body), self.helper()))

    def pair(self, d: int = 2):
        """Context ``main`` calling ``hole(q, v)`` and a component defining it."""
        self._counter, self._loops = 0, []
        target = CAddr(CVar("t")) if self.rng.random() < 0.5 else CBin("+", CVar("a"), self.index())
        body = self.cmd(d, (target, self.expr(1)))
        ctx = toyc.CStore((self._main(body), self.helper()))
        hb = self.rng.choice([
            toyc.CAssign(CDeref(CVar("q")), self.hole_expr()),
            toyc.COutput(CBin("+", CDeref(CVar("q")), self.hole_expr())),
            toyc.CIf(self.hole_expr(), toyc.COutput(CDeref(CVar("q"))), toyc.CAssign(CVar("v"), CInt(1))),
        ])
        hb = toyc.cseq(hb, toyc.COutput(CVar("v")))
        hole = toyc.CProc("hole", (("q", toyc.PtrT(toyc.INT)), ("v", toyc.INT)), (), hb)
        return ctx, toyc.CStore((hole,))


# ---------------------------------------------------------------- per stage


def random_wholes(stage_name: str, n: int, seed: int = 0) -> list:
    """Whole source programs for a stage: IMP, unsafe Toy^C, or compiled safe Toy^C."""
    from . import compilers

    src = stage_name.partition("->")[0]
    if src == "imp":
        g = ImpGen(seed)
        return [g.whole() for _ in range(n)]
    if src == "toyc":
        g = ToyCGen(seed)
        return [g.whole() for _ in range(n)]
    if src == "toya":
        g = ToyCGen(seed, safe=True)
        return [compilers.compile_toyc_whole(g.whole()) for _ in range(n)]
    raise ValueError(f"no generator for source language {src!r}")


def random_pairs(stage_name: str, n: int, seed: int = 0) -> list:
    """(context, component) pairs in a stage's source language."""
    from . import compilers

    src = stage_name.partition("->")[0]
    if src == "imp":
        g = ImpGen(seed)
        return [g.pair() for _ in range(n)]
    if src == "toyc":
        g = ToyCGen(seed)
        return [g.pair() for _ in range(n)]
    if src == "toya":
        g = ToyCGen(seed, safe=True)
        out = []
        for _ in range(n):
            c, u = g.pair()
            out.append((compilers.compile_toyc_context(c), compilers.compile_toyc_toya(u)))
        return out
    raise ValueError(f"no generator for source language {src!r}")
