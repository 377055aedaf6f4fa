"""Traces, bounded behaviors, cross-language trace relations and verdicts.

Output values are plain Python ``bool`` or ``int``. Because ``True == 1`` in
Python, every comparison and hash in this module goes through :func:`vkey`,
which tags booleans so ``[true]`` and ``[1]`` stay distinct traces.
"""

from __future__ import annotations

import enum
import itertools
import json
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping, Sequence


class Terminal(enum.Enum):
    HALTED = "halted"
    STUCK = "stuck"
    ERROR = "error"
    BUDGET = "budget"


def vkey(v) -> tuple:
    if isinstance(v, bool):
        return (0, int(v))
    return (1, int(v))


def same_value(a, b) -> bool:
    return vkey(a) == vkey(b)


def render_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def parse_value(text: str):
    if text == "true":
        return True
    if text == "false":
        return False
    return int(text)


@dataclass(frozen=True, eq=False)
class Trace:
    outputs: tuple = ()
    terminal: Terminal = Terminal.HALTED

    def __post_init__(self):
        if not isinstance(self.outputs, tuple):
            object.__setattr__(self, "outputs", tuple(self.outputs))

    @property
    def key(self) -> tuple:
        return (tuple(vkey(v) for v in self.outputs), self.terminal.value)

    def __eq__(self, other):
        return isinstance(other, Trace) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __len__(self):
        return len(self.outputs)

    @property
    def is_prefix(self) -> bool:
        return self.terminal is Terminal.BUDGET

    def sort_key(self):
        """Shortest first, then lexicographic (booleans before integers)."""
        return (len(self.outputs), tuple(vkey(v) for v in self.outputs), self.terminal.value)

    def __repr__(self):
        body = ",".join(render_value(v) for v in self.outputs)
        return f"Trace([{body}] {self.terminal.value})"


def format_trace(t: Trace) -> str:
    lines = [render_value(v) for v in t.outputs]
    lines.append(f"# terminal: {t.terminal.value}")
    return "\n".join(lines) + "\n"


def parse_trace(text: str) -> Trace:
    outputs = []
    terminal = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            _, _, rest = line.partition("terminal:")
            terminal = Terminal(rest.strip())
            continue
        outputs.append(parse_value(line))
    if terminal is None:
        raise ValueError("trace text lacks a '# terminal:' line")
    return Trace(tuple(outputs), terminal)


def sample_from_json(d) -> "BehaviorSample":
    """Inverse of the JSON rendering of a behavior sample."""
    grid = [tuple(parse_value(v) for v in e["values"]) for e in d["entries"]]
    return BehaviorSample.from_runs(d["inputs"], grid, [trace_from_json(e["trace"]) for e in d["entries"]])


def trace_from_json(d) -> Trace:
    """Inverse of the JSON rendering used in verdict evidence."""
    if isinstance(d, Trace):
        return d
    return Trace(tuple(parse_value(v) for v in d["outputs"]), Terminal(d["terminal"]))


# --------------------------------------------------------------------------
# Bounds

IMP_DOMAIN: tuple = (False, True, 0, 1, 2, 3, 4, 5, 6, 7)
INT_DOMAIN: tuple = tuple(range(-8, 9))

_PROFILES = {
    "quick": dict(imp_domain=(False, True, 0, 1, 2, 3), int_domain=tuple(range(-3, 4)),
                  budget=2_000, context_size=3),
    "default": dict(imp_domain=IMP_DOMAIN, int_domain=INT_DOMAIN, budget=10_000, context_size=4),
    "thorough": dict(imp_domain=IMP_DOMAIN + (8, 9), int_domain=tuple(range(-12, 13)),
                     budget=50_000, context_size=5),
}


@dataclass(frozen=True)
class ExplorationBounds:
    imp_domain: tuple = IMP_DOMAIN
    int_domain: tuple = INT_DOMAIN
    budget: int = 10_000
    context_size: int = 4
    # per-input overrides: ((name, (values...)), ...)
    per_input: tuple = ()

    def __post_init__(self):
        if self.budget <= 0:
            raise ValueError("step budget must be positive")
        if self.context_size < 0:
            raise ValueError("context size bound must be nonnegative")

    def domain_for(self, name: str, default: Sequence) -> tuple:
        for n, vals in self.per_input:
            if n == name:
                return tuple(vals)
        return tuple(default)

    def with_(self, **kw) -> "ExplorationBounds":
        data = dict(imp_domain=self.imp_domain, int_domain=self.int_domain, budget=self.budget,
                    context_size=self.context_size, per_input=self.per_input)
        if "per_input" in kw and isinstance(kw["per_input"], Mapping):
            kw["per_input"] = tuple((k, tuple(v)) for k, v in kw["per_input"].items())
        data.update(kw)
        return ExplorationBounds(**data)

    @classmethod
    def profile(cls, name: str | None = None) -> "ExplorationBounds":
        name = name or os.environ.get("WM_BOUND_PROFILE", "default")
        if name not in _PROFILES:
            raise ValueError(f"unknown bound profile {name!r}; choose from {sorted(_PROFILES)}")
        return cls(**_PROFILES[name])

    def to_json(self) -> dict:
        return {
            "imp_domain": [render_value(v) for v in self.imp_domain],
            "int_domain": [self.int_domain[0], self.int_domain[-1]] if self.int_domain else [],
            "budget": self.budget,
            "context_size": self.context_size,
            "per_input": {n: [render_value(v) for v in vals] for n, vals in self.per_input},
        }


def valuations(names: Sequence[str], domain_of: Callable[[str], Sequence]) -> Iterator[tuple]:
    """Cartesian product in the order of ``names``; each domain enumerated as given."""
    yield from itertools.product(*(domain_of(n) for n in names))


def unkey(k: tuple):
    tag, v = k
    return bool(v) if tag == 0 else v


@dataclass
class BehaviorSample:
    """Bounded approximation of B(P): input valuation -> trace.

    ``entries`` is keyed by tagged valuations (see :func:`vkey`) so that
    ``true`` and ``1`` are different inputs.
    """

    inputs: tuple
    entries: dict
    bounds: ExplorationBounds = field(default_factory=ExplorationBounds)

    @classmethod
    def from_runs(cls, inputs, grid, traces, bounds=None) -> "BehaviorSample":
        entries = {tuple(vkey(v) for v in vals): t for vals, t in zip(grid, traces)}
        return cls(tuple(inputs), entries, bounds or ExplorationBounds())

    def items(self):
        for k, t in self.entries.items():
            yield tuple(unkey(x) for x in k), t

    def traces(self) -> set:
        return set(self.entries.values())

    def sorted_traces(self) -> list:
        return sorted(self.traces(), key=Trace.sort_key)

    def get(self, *values, **named) -> Trace:
        if named:
            values = tuple(named[n] for n in self.inputs)
        return self.entries[tuple(vkey(v) for v in values)]

    def __len__(self):
        return len(self.entries)


def _budget_compatible(x: "Trace", y: "Trace") -> bool:
    # a budget cut may land at a different point when step counts differ
    if x == y:
        return True
    if x.is_prefix and y.is_prefix:
        n = min(len(x), len(y))
        return x.key[0][:n] == y.key[0][:n]
    if x.is_prefix:
        return y.terminal is not Terminal.ERROR and _is_prefix(x.key[0], y.key[0])
    if y.is_prefix:
        return x.terminal is not Terminal.ERROR and _is_prefix(y.key[0], x.key[0])
    return False


def _sets_agree(xs, ys, budget_prefix: bool) -> bool:
    if xs == ys:
        return True
    if not budget_prefix or xs is None or ys is None:
        return False
    return (all(any(_budget_compatible(x, y) for y in ys) for x in xs)
            and all(any(_budget_compatible(x, y) for x in xs) for y in ys))


def samples_agree(a: BehaviorSample, b: BehaviorSample, budget_prefix: bool = False) -> list:
    """Entry-by-entry comparison of two samples over possibly different input sets.

    Inputs present on only one side must not influence the trace; entries are
    matched on the shared inputs. With ``budget_prefix`` a budget-truncated
    trace agrees with any trace it is a prefix of. Returns the list of mismatches.
    """
    shared = [n for n in a.inputs if n in b.inputs]
    ia = [a.inputs.index(n) for n in shared]
    ib = [b.inputs.index(n) for n in shared]

    def project(sample, idx):
        out: dict = {}
        for k, t in sample.entries.items():
            out.setdefault(tuple(k[i] for i in idx), set()).add(t)
        return out

    pa, pb = project(a, ia), project(b, ib)
    mismatches = []
    for k in sorted(set(pa) | set(pb)):
        if not _sets_agree(pa.get(k), pb.get(k), budget_prefix):
            mismatches.append({"inputs": dict(zip(shared, (unkey(x) for x in k))),
                               "left": sorted(pa.get(k, ()), key=Trace.sort_key),
                               "right": sorted(pb.get(k, ()), key=Trace.sort_key)})
    return mismatches


# --------------------------------------------------------------------------
# Relations


class PreimageNotEnumerable(Exception):
    pass


@dataclass(frozen=True)
class TraceRelation:
    """Per-element value relation lifted to traces.

    ``forward`` maps a source value to its target value or ``None``;
    ``preimage`` enumerates the finite set of source values mapping to a target
    value (``None`` when the relation cannot enumerate). ``terminals`` lists the
    compatible (source, target) terminal pairs for complete traces.
    """

    name: str
    forward: Callable
    preimage: Callable | None
    terminals: frozenset

    def terminal_ok(self, ts: Terminal, tt: Terminal) -> bool:
        return (ts, tt) in self.terminals

    def source_terminals_for(self, tt: Terminal) -> list:
        return sorted({s for s, t in self.terminals if t is tt}, key=lambda x: x.value)

    def image(self, t_s: Trace):
        out = []
        for v in t_s.outputs:
            w = self.forward(v)
            if w is None:
                return None
            out.append(w)
        return tuple(out)


def _is_prefix(short: tuple, long: tuple) -> bool:
    return len(short) <= len(long) and all(same_value(a, b) for a, b in zip(short, long))


def relate_trace(rel: TraceRelation, t_s: Trace, t_t: Trace) -> bool:
    if t_s.terminal is Terminal.ERROR or t_t.terminal is Terminal.ERROR:
        return False
    img = rel.image(t_s)
    if img is None:
        return False
    s_pre, t_pre = t_s.is_prefix, t_t.is_prefix
    if s_pre or t_pre:
        # a budget-truncated trace stands for every extension of its outputs
        if s_pre and t_pre:
            return _is_prefix(img, t_t.outputs) or _is_prefix(t_t.outputs, img)
        if s_pre:
            return _is_prefix(img, t_t.outputs) and t_t.terminal is not Terminal.STUCK
        return _is_prefix(t_t.outputs, img) and t_s.terminal is not Terminal.STUCK
    if len(img) != len(t_t.outputs) or not all(same_value(a, b) for a, b in zip(img, t_t.outputs)):
        return False
    return rel.terminal_ok(t_s.terminal, t_t.terminal)


def _relates_to_something(rel: TraceRelation, ts: Trace) -> bool:
    if ts.terminal is Terminal.ERROR:
        return False
    if ts.is_prefix:
        return True
    return any(s is ts.terminal for s, _ in rel.terminals)


def related_somewhere(rel: TraceRelation, t: Trace, pool: Iterable[Trace], source_side: bool) -> Trace | None:
    for other in pool:
        ok = relate_trace(rel, t, other) if source_side else relate_trace(rel, other, t)
        if ok:
            return other
    return None


def behavior_related(rel: TraceRelation, b_s, b_t) -> bool:
    """The set-lifted relation: both directions of the ∀∃ decomposition."""
    src = b_s.traces() if isinstance(b_s, BehaviorSample) else set(b_s)
    tgt = b_t.traces() if isinstance(b_t, BehaviorSample) else set(b_t)
    return not behavior_mismatches(rel, src, tgt)


def behavior_mismatches(rel: TraceRelation, src: set, tgt: set) -> list:
    bad = []
    for ts in sorted(src, key=Trace.sort_key):
        if related_somewhere(rel, ts, tgt, source_side=True) is None:
            bad.append(("unmatched-source", ts))
    for tt in sorted(tgt, key=Trace.sort_key):
        if related_somewhere(rel, tt, src, source_side=False) is None:
            bad.append(("unmatched-target", tt))
    return bad


def identity_relation(name: str = "identity", terminals: Iterable = None) -> TraceRelation:
    if terminals is None:
        terminals = {(Terminal.HALTED, Terminal.HALTED), (Terminal.STUCK, Terminal.STUCK)}
    return TraceRelation(name, lambda v: v, lambda v: [v], frozenset(terminals))


def compose(rel12: TraceRelation, rel23: TraceRelation, name: str | None = None) -> TraceRelation:
    """Value-level composition; the preimage enumerates through the intermediate."""

    def fwd(v):
        w = rel12.forward(v)
        return None if w is None else rel23.forward(w)

    if rel12.preimage is None or rel23.preimage is None:
        pre = None
    else:
        def pre(v):
            seen, out = set(), []
            for w in rel23.preimage(v):
                for u in rel12.preimage(w):
                    if vkey(u) not in seen:
                        seen.add(vkey(u))
                        out.append(u)
            return out

    terms = frozenset((a, c) for a, b in rel12.terminals for b2, c in rel23.terminals if b is b2)
    return TraceRelation(name or f"{rel12.name};{rel23.name}", fwd, pre, terms)


# --------------------------------------------------------------------------
# Properties


@dataclass(frozen=True)
class TraceProperty:
    name: str
    predicate: Callable[[Trace], bool]
    justification: str
    # whether a violating prefix implies every extension violates
    prefix_closed: bool = False

    def __call__(self, t: Trace) -> bool:
        return bool(self.predicate(t))


def preimage_traces(rel: TraceRelation, t_t: Trace) -> Iterator[Trace]:
    if rel.preimage is None:
        raise PreimageNotEnumerable(rel.name)
    per = [list(rel.preimage(v)) for v in t_t.outputs]
    if t_t.is_prefix:
        terms = [Terminal.BUDGET]
    else:
        terms = rel.source_terminals_for(t_t.terminal)
    for combo in itertools.product(*per):
        for term in terms:
            yield Trace(tuple(combo), term)


def in_property_image(rel: TraceRelation, pi: TraceProperty, t_t: Trace) -> bool:
    """Membership of ``t_t`` in the image of ``pi`` under ``rel``.

    A budget-truncated ``t_t`` only counts as outside the image when ``pi`` is
    prefix-closed; otherwise some extension might still land inside.
    """
    if t_t.terminal is Terminal.ERROR:
        return False
    if t_t.is_prefix and not pi.prefix_closed:
        return True
    for t_s in preimage_traces(rel, t_t):
        if relate_trace(rel, t_s, t_t) and pi(t_s):
            return True
    return False


def check_invertibility(rel12: TraceRelation, rel23: TraceRelation, rel13: TraceRelation,
                        traces1: Iterable[Trace], traces2: Iterable[Trace],
                        traces3: Iterable[Trace]) -> list:
    """Counterexamples to: t1 ↦13 t3 implies (t1 ↦12 t2 iff t2 ↦23 t3) for all t2."""
    traces2 = list(traces2)
    traces3 = list(traces3)
    bad = []
    for t1 in traces1:
        for t3 in traces3:
            if not relate_trace(rel13, t1, t3):
                continue
            for t2 in traces2:
                if relate_trace(rel12, t1, t2) != relate_trace(rel23, t2, t3):
                    bad.append((t1, t2, t3))
    return bad


# --------------------------------------------------------------------------
# Verdicts


class VerdictKind(enum.Enum):
    CERTIFIED = "Certified"
    REFUTED = "RefutedUpToBound"
    UNKNOWN = "UnknownAtBound"


@dataclass
class ExploitVerdict:
    kind: VerdictKind
    evidence: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.kind is VerdictKind.CERTIFIED

    def to_json(self) -> dict:
        return {"verdict": self.kind.value, "evidence": _jsonable(self.evidence)}

    def to_jsonl(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def _jsonable(x):
    if isinstance(x, Trace):
        return {"outputs": [render_value(v) for v in x.outputs], "terminal": x.terminal.value}
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, set, frozenset)):
        items = [_jsonable(v) for v in x]
        return items if not isinstance(x, (set, frozenset)) else sorted(items, key=str)
    if isinstance(x, enum.Enum):
        return x.value
    if isinstance(x, ExplorationBounds):
        return x.to_json()
    if isinstance(x, BehaviorSample):
        return {"inputs": list(x.inputs),
                "entries": [{"values": [render_value(v) for v in vals], "trace": _jsonable(t)}
                            for vals, t in sorted(x.items(), key=lambda e: [vkey(v) for v in e[0]])]}
    if isinstance(x, (bool, int, float, str)) or x is None:
        return x
    return str(x)
