"""Batch execution kernels for behavior sampling.

Sampling a behavior means running one program under every valuation of its
inputs, thousands of times per oracle query. IMP programs are flattened to a
small bytecode and executed by :func:`_imp_vm`, which is compiled with numba
when it is importable and ``WEIRDC_JIT`` is not ``0``. The same function runs
as plain Python otherwise. Both paths are checked against the small-step
reference interpreter in :mod:`weirdc.imp`.

Step accounting in the bytecode mirrors the small-step rules exactly, so
budget-truncated traces agree with the reference as well.
"""

from __future__ import annotations

import os

import numpy as np

from .traces import Terminal, Trace

try:  # pragma: no cover - exercised implicitly
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False


def jit_enabled() -> bool:
    return HAVE_NUMBA and os.environ.get("WEIRDC_JIT", "1") != "0"


# opcodes
CHECK, PUSH_VAR, PUSH_CONST, BIN, ASSIGN, OUTPUT, BRANCH_FALSE, JUMP, TICK, HALT = range(10)
# binary operators
OP_CODES = {"+": 0, "*": 1, "<": 2, "=": 3, "and": 4, "or": 5}
# value tags
T_UNBOUND, T_BOOL, T_NAT = -1, 0, 1
# terminal codes returned by the VM
R_HALTED, R_STUCK, R_BUDGET, R_OVERFLOW, R_FULL = 0, 1, 2, 3, 4
# per-row output capacity in batch mode; longer traces rerun one at a time
BATCH_CAP = 64

_LIMIT = 1 << 62


def compile_imp(cmd, names: list) -> tuple[np.ndarray, list]:
    """Flatten ``cmd`` into an ``(n, 3)`` int64 instruction array.

    Returns the code and the variable order (``names`` first, then any other
    variable of the program).
    """
    from . import imp

    order = list(names) + sorted(imp.free_vars(cmd) - set(names))
    slot = {n: i for i, n in enumerate(order)}
    code: list = []

    def emit(op, a=0, b=0):
        code.append([op, a, b])
        return len(code) - 1

    def expr(e):
        if isinstance(e, imp.Var):
            emit(PUSH_VAR, slot[e.name])
        elif isinstance(e, imp.BoolLit):
            emit(PUSH_CONST, T_BOOL, int(e.value))
        elif isinstance(e, imp.NatLit):
            emit(PUSH_CONST, T_NAT, e.value)
        else:
            expr(e.left)
            expr(e.right)
            emit(BIN, OP_CODES[e.op])

    def cmd_(c):
        if isinstance(c, imp.Assign):
            emit(CHECK)
            expr(c.expr)
            emit(ASSIGN, slot[c.var])
        elif isinstance(c, imp.Output):
            emit(CHECK)
            expr(c.expr)
            emit(OUTPUT)
        elif isinstance(c, imp.Seq):
            cmd_(c.first)
            emit(TICK)
            cmd_(c.second)
        elif isinstance(c, imp.If):
            emit(CHECK)
            expr(c.cond)
            br = emit(BRANCH_FALSE)
            cmd_(c.then)
            j = emit(JUMP)
            code[br][1] = len(code)
            cmd_(c.orelse)
            code[j][1] = len(code)
        elif isinstance(c, imp.While):
            top = emit(TICK)
            emit(CHECK)
            expr(c.cond)
            br = emit(BRANCH_FALSE)
            cmd_(c.body)
            emit(TICK)
            emit(JUMP, top)
            code[br][1] = len(code)
        elif isinstance(c, imp.Skip):
            pass
        else:
            raise TypeError(f"cannot run {type(c).__name__}")

    cmd_(cmd)
    emit(HALT)
    return np.asarray(code, dtype=np.int64).reshape(-1, 3), order


def _imp_vm(code, tags, vals, budget, out_tags, out_vals):
    """Run one valuation. ``tags``/``vals`` are mutated. Returns (terminal, n_out)."""
    stack_t = np.empty(code.shape[0] + 1, dtype=np.int64)
    stack_v = np.empty(code.shape[0] + 1, dtype=np.int64)
    sp = 0
    pc = 0
    steps = 0
    n_out = 0
    while True:
        op = code[pc, 0]
        if op == 0:  # CHECK
            if steps >= budget:
                return 2, n_out
            pc += 1
        elif op == 1:  # PUSH_VAR
            i = code[pc, 1]
            if tags[i] < 0:
                return 1, n_out
            stack_t[sp] = tags[i]
            stack_v[sp] = vals[i]
            sp += 1
            pc += 1
        elif op == 2:  # PUSH_CONST
            stack_t[sp] = code[pc, 1]
            stack_v[sp] = code[pc, 2]
            sp += 1
            pc += 1
        elif op == 3:  # BIN
            sp -= 1
            bt = stack_t[sp]
            bv = stack_v[sp]
            at = stack_t[sp - 1]
            av = stack_v[sp - 1]
            o = code[pc, 1]
            if o <= 2:
                if at != 1 or bt != 1:
                    return 1, n_out
                if o == 0:
                    if av > 4611686018427387904 - bv:
                        return 3, n_out
                    stack_v[sp - 1] = av + bv
                elif o == 1:
                    if bv != 0 and av > 4611686018427387904 // bv:
                        return 3, n_out
                    stack_v[sp - 1] = av * bv
                else:
                    stack_t[sp - 1] = 0
                    stack_v[sp - 1] = 1 if av < bv else 0
            elif o == 3:
                if at != bt:
                    return 1, n_out
                stack_t[sp - 1] = 0
                stack_v[sp - 1] = 1 if av == bv else 0
            else:
                if at != 0 or bt != 0:
                    return 1, n_out
                if o == 4:
                    stack_v[sp - 1] = 1 if (av != 0 and bv != 0) else 0
                else:
                    stack_v[sp - 1] = 1 if (av != 0 or bv != 0) else 0
            pc += 1
        elif op == 4:  # ASSIGN
            sp -= 1
            i = code[pc, 1]
            tags[i] = stack_t[sp]
            vals[i] = stack_v[sp]
            steps += 1
            pc += 1
        elif op == 5:  # OUTPUT
            if n_out >= out_tags.shape[0]:
                return 4, n_out
            sp -= 1
            out_tags[n_out] = stack_t[sp]
            out_vals[n_out] = stack_v[sp]
            n_out += 1
            steps += 1
            pc += 1
        elif op == 6:  # BRANCH_FALSE
            sp -= 1
            if stack_t[sp] != 0:
                return 1, n_out
            steps += 1
            if stack_v[sp] == 0:
                pc = code[pc, 1]
            else:
                pc += 1
        elif op == 7:  # JUMP
            pc = code[pc, 1]
        elif op == 8:  # TICK
            if steps >= budget:
                return 2, n_out
            steps += 1
            pc += 1
        else:  # HALT
            return 0, n_out


def _make_batch(vm):
    def batch(code, tags0, vals0, budget, cap):
        n = tags0.shape[0]
        terms = np.empty(n, dtype=np.int64)
        counts = np.empty(n, dtype=np.int64)
        out_t = np.zeros((n, cap), dtype=np.int64)
        out_v = np.zeros((n, cap), dtype=np.int64)
        for r in range(n):
            tags = tags0[r].copy()
            vals = vals0[r].copy()
            term, k = vm(code, tags, vals, budget, out_t[r], out_v[r])
            terms[r] = term
            counts[r] = k
        return terms, counts, out_t, out_v
    return batch


_imp_vm_py = _imp_vm
_imp_batch_py = _make_batch(_imp_vm_py)
if HAVE_NUMBA:
    _imp_vm_jit = numba.njit(cache=True)(_imp_vm)
    _imp_batch_jit = numba.njit(cache=True)(_make_batch(_imp_vm_jit))
else:  # pragma: no cover
    _imp_vm_jit = _imp_batch_jit = None

_TERMINALS = {R_HALTED: Terminal.HALTED, R_STUCK: Terminal.STUCK, R_BUDGET: Terminal.BUDGET}


def _encode(v) -> tuple[int, int]:
    if isinstance(v, bool):
        return T_BOOL, int(v)
    return T_NAT, int(v)


def _decode(tag: int, val: int):
    return bool(val) if tag == T_BOOL else int(val)


def run_imp_batch(cmd, names, grid, budget: int, backend: str | None = None) -> list:
    """Traces of ``cmd`` for each valuation in ``grid`` (tuples ordered as ``names``).

    ``backend`` is ``"jit"``, ``"python"`` (same bytecode VM, interpreted) or
    ``"reference"`` (small-step tree interpreter); by default the JIT is used
    when available.
    """
    from . import imp

    if backend is None:
        backend = "jit" if jit_enabled() else "python"
    if backend == "reference":
        return [imp.run_imp(cmd, dict(zip(names, vals)), budget) for vals in grid]
    if backend == "jit" and not HAVE_NUMBA:
        backend = "python"
    code, order = compile_imp(cmd, list(names))
    nvars = max(len(order), 1)
    rows = len(grid)
    tags0 = np.full((rows, nvars), T_UNBOUND, dtype=np.int64)
    vals0 = np.zeros((rows, nvars), dtype=np.int64)
    for r, vals in enumerate(grid):
        for i, v in enumerate(vals):
            tags0[r, i], vals0[r, i] = _encode(v)
    if backend == "jit":
        terms, counts, out_t, out_v = _imp_batch_jit(code, tags0, vals0, budget, BATCH_CAP)
        vm = _imp_vm_jit
    else:
        terms, counts, out_t, out_v = _imp_batch_py(code, tags0, vals0, budget, BATCH_CAP)
        vm = _imp_vm_py
    traces = []
    cache: dict = {}
    for r in range(rows):
        term = int(terms[r])
        if term == R_FULL:
            full_t = np.zeros(budget + 1, dtype=np.int64)
            full_v = np.zeros(budget + 1, dtype=np.int64)
            term, n = vm(code, tags0[r].copy(), vals0[r].copy(), budget, full_t, full_v)
            row_t, row_v = full_t[:n], full_v[:n]
        else:
            n = int(counts[r])
            row_t, row_v = out_t[r, :n], out_v[r, :n]
        if term == R_OVERFLOW:
            traces.append(imp.run_imp(cmd, dict(zip(names, grid[r])), budget))
            continue
        key = (term, row_t.tobytes(), row_v.tobytes())
        t = cache.get(key)
        if t is None:
            outs = tuple(_decode(int(a), int(b)) for a, b in zip(row_t, row_v))
            t = cache[key] = Trace(outs, _TERMINALS[int(term)])
        traces.append(t)
    return traces
