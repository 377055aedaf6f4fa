"""Finite state machines, representation maps and weird-state classification.

An FSM is ``(Q, Sigma, delta, q0, QA)`` with ``delta`` a relation. The
behavior of a state is the pair (strings reaching it from q0, strings
accepted from it), both cut at a length bound.

Text format, one item per line, ``#`` starts a comment::

    start q0
    accept q3 q4
    alphabet a b          # optional, defaults to the symbols used
    states q0 q1 q2       # optional, for states with no edges
    q0 a q1               # a transition

A representation map file has lines ``qS -> qT1 qT2 ...``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class StateNotInMachine(KeyError):
    pass


class FsmFormatError(ValueError):
    pass


class PreconditionFailed(Exception):
    def __init__(self, predicate: str, detail=None):
        super().__init__(f"precondition failed: {predicate}")
        self.predicate = predicate
        self.detail = detail


@dataclass(frozen=True)
class Fsm:
    states: frozenset
    alphabet: tuple
    delta: frozenset  # of (q, sym, q')
    start: str
    accepting: frozenset

    def __post_init__(self):
        if self.start not in self.states:
            raise FsmFormatError(f"start state {self.start!r} not in Q")
        if not self.accepting <= self.states:
            raise FsmFormatError(f"accepting states {sorted(self.accepting - self.states)} not in Q")
        for q, s, r in self.delta:
            if q not in self.states or r not in self.states or s not in self.alphabet:
                raise FsmFormatError(f"transition {q} {s} {r} leaves Q x Sigma x Q")

    def succ(self, q, s=None) -> set:
        return {r for (p, t, r) in self.delta if p == q and (s is None or t == s)}

    def edges_from(self, q) -> list:
        return sorted((t, r) for (p, t, r) in self.delta if p == q)

    def step(self, qs: frozenset, s) -> frozenset:
        return frozenset(r for (p, t, r) in self.delta if p in qs and t == s)


def make_fsm(transitions, start, accepting=(), alphabet=None, states=()) -> Fsm:
    transitions = [tuple(t) for t in transitions]
    qs = set(states) | {start} | set(accepting)
    for q, _, r in transitions:
        qs |= {q, r}
    sigma = tuple(alphabet) if alphabet is not None else tuple(sorted({s for _, s, _ in transitions}))
    return Fsm(frozenset(qs), sigma, frozenset(transitions), start, frozenset(accepting))


# ---------------------------------------------------------------- text format


def parse_fsm(text: str) -> Fsm:
    start, accepting, alphabet, states, trans = None, [], None, [], []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].split()
        if not line:
            continue
        key, rest = line[0], line[1:]
        if key == "start":
            if len(rest) != 1:
                raise FsmFormatError(f"line {n}: start takes one state")
            start = rest[0]
        elif key == "accept":
            accepting += rest
        elif key == "alphabet":
            alphabet = rest
        elif key == "states":
            states += rest
        elif len(line) == 3:
            trans.append(tuple(line))
        else:
            raise FsmFormatError(f"line {n}: expected 'q sym q2', got {raw.strip()!r}")
    if start is None:
        raise FsmFormatError("missing 'start' line")
    return make_fsm(trans, start, accepting, alphabet, states)


def show_fsm(m: Fsm) -> str:
    lines = [f"start {m.start}"]
    if m.accepting:
        lines.append("accept " + " ".join(sorted(m.accepting)))
    lines.append("alphabet " + " ".join(m.alphabet))
    lines.append("states " + " ".join(sorted(m.states)))
    lines += [f"{q} {s} {r}" for q, s, r in sorted(m.delta)]
    return "\n".join(lines) + "\n"


def parse_gamma(text: str) -> dict:
    gamma: dict = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        lhs, arrow, rhs = line.partition("->")
        if not arrow or not lhs.strip():
            raise FsmFormatError(f"line {n}: expected 'qS -> qT ...'")
        gamma.setdefault(lhs.strip(), set()).update(rhs.split())
    return {k: frozenset(v) for k, v in gamma.items()}


def show_gamma(gamma: dict) -> str:
    return "".join(f"{k} -> {' '.join(sorted(v))}\n" for k, v in sorted(gamma.items()))


def check_gamma(ifsm: Fsm, cpu: Fsm, gamma: dict) -> None:
    for k, v in gamma.items():
        if k not in ifsm.states:
            raise StateNotInMachine(f"gamma maps unknown IFSM state {k!r}")
        if not v <= cpu.states:
            raise StateNotInMachine(f"gamma({k}) names unknown CPU states {sorted(v - cpu.states)}")


# ---------------------------------------------------------------- behaviours


def _strings_from(m: Fsm, init: frozenset, L: int, keep) -> set:
    """Strings of length <= L whose reachable set from ``init`` satisfies ``keep``."""
    out = set()
    frontier = [((), init)]
    while frontier:
        s, qs = frontier.pop()
        if keep(qs):
            out.add("".join(s) if all(len(a) == 1 for a in s) else " ".join(s))
        if len(s) < L:
            for a in m.alphabet:
                nxt = m.step(qs, a)
                if nxt:
                    frontier.append((s + (a,), nxt))
    return out


def fsm_state_behavior(m: Fsm, q, L: int) -> tuple[frozenset, frozenset]:
    """(X1, X2) at bound L: strings reaching ``q`` from the start, strings accepted from ``q``.

    Strings over single-character symbols are joined without separator,
    otherwise with spaces.
    """
    if q not in m.states:
        raise StateNotInMachine(q)
    if L < 0:
        raise ValueError("length bound must be nonnegative")
    x1 = _strings_from(m, frozenset({m.start}), L, lambda qs: q in qs)
    x2 = _strings_from(m, frozenset({q}), L, lambda qs: bool(qs & m.accepting))
    return frozenset(x1), frozenset(x2)


# ---------------------------------------------------------------- classification


class StateClass(enum.Enum):
    SANE = "Sane"
    TRANSITORY = "Transitory"
    WEIRD = "Weird"


@dataclass
class StateClassification:
    classes: dict  # CPU state -> StateClass
    evidence: dict = field(default_factory=dict)  # state -> witness path or reason

    def of(self, cls: StateClass) -> set:
        return {q for q, c in self.classes.items() if c is cls}

    @property
    def sane(self):
        return self.of(StateClass.SANE)

    @property
    def transitory(self):
        return self.of(StateClass.TRANSITORY)

    @property
    def weird(self):
        return self.of(StateClass.WEIRD)


def gamma_image(gamma: dict) -> set:
    out = set()
    for v in gamma.values():
        out |= v
    return out


def _all_paths_exit(cpu: Fsm, qt, image: set, bound: int):
    """Follow every transition sequence from ``qt`` through non-image states.

    Returns (exits, reason): ``exits`` is the set of image states reached;
    ``reason`` is set when some sequence cycles, dead-ends or outruns the bound.
    """
    exits: set = set()
    stack = [(qt, (qt,))]
    while stack:
        q, path = stack.pop()
        succ = cpu.succ(q)
        if not succ:
            return exits, f"dead end at {q}"
        for r in sorted(succ):
            if r in image:
                exits.add(r)
            elif r in path:
                return exits, f"cycle through {' '.join(path[path.index(r):])} {r}"
            elif len(path) > bound:
                return exits, "path bound exceeded"
            else:
                stack.append((r, path + (r,)))
    return exits, None


def _entry_path(cpu: Fsm, q1, qt, image: set, bound: int):
    """Shortest path q1 -> ... -> qt whose intermediate states avoid the image."""
    frontier = [(q1, (q1,))]
    seen = {q1}
    while frontier:
        nxt = []
        for q, path in frontier:
            for r in sorted(cpu.succ(q)):
                if r == qt:
                    return path + (r,)
                if r in image or r in seen or len(path) > bound:
                    continue
                seen.add(r)
                nxt.append((r, path + (r,)))
        frontier = nxt
    return None


def classify_states(ifsm: Fsm, cpu: Fsm, gamma: dict, bound: int = 16) -> StateClassification:
    check_gamma(ifsm, cpu, gamma)
    image = gamma_image(gamma)
    classes, evidence = {}, {}
    for qt in sorted(cpu.states):
        if qt in image:
            classes[qt] = StateClass.SANE
            evidence[qt] = "in image of gamma"
            continue
        exits, reason = _all_paths_exit(cpu, qt, image, bound)
        found = None
        if reason is None and len(exits) == 1:
            (q2t,) = exits
            for (q1s, s, q2s) in sorted(ifsm.delta):
                if q2t not in gamma.get(q2s, ()):
                    continue
                for q1t in sorted(gamma.get(q1s, ())):
                    entry = _entry_path(cpu, q1t, qt, image, bound)
                    if entry is not None:
                        found = {"ifsm_edge": [q1s, s, q2s], "path": list(entry) + [q2t]}
                        break
                if found:
                    break
        if found:
            classes[qt] = StateClass.TRANSITORY
            evidence[qt] = found
        else:
            classes[qt] = StateClass.WEIRD
            evidence[qt] = reason or (f"exits to {sorted(exits)}" if len(exits) != 1
                                      else "no entry from a sane state implementing an IFSM edge")
    return StateClassification(classes, evidence)


def respects_behaviors(ifsm: Fsm, cpu: Fsm, gamma: dict, L: int,
                       classification: StateClassification | None = None) -> tuple[bool, list]:
    """γ respects behaviors: CPU states behaving like some IFSM state are sane or transitory."""
    cls = classification or classify_states(ifsm, cpu, gamma)
    src = {qs: fsm_state_behavior(ifsm, qs, L) for qs in sorted(ifsm.states)}
    bad = []
    for qt in sorted(cpu.states):
        if cls.classes[qt] is not StateClass.WEIRD:
            continue
        b = fsm_state_behavior(cpu, qt, L)
        for qs, bs in src.items():
            if bs == b:
                bad.append({"cpu_state": qt, "ifsm_state": qs})
    return not bad, bad


def weird_implies_exploit(ifsm: Fsm, cpu: Fsm, gamma: dict, L: int) -> dict:
    """Every weird state's bounded behavior matches no IFSM state's."""
    cls = classify_states(ifsm, cpu, gamma)
    ok, bad = respects_behaviors(ifsm, cpu, gamma, L, cls)
    if not ok:
        raise PreconditionFailed("respects_behaviors", bad)
    src = {qs: fsm_state_behavior(ifsm, qs, L) for qs in sorted(ifsm.states)}
    results = {}
    for qw in sorted(cls.weird):
        b = fsm_state_behavior(cpu, qw, L)
        sims = [qs for qs, bs in src.items() if bs == b]
        results[qw] = {"exploit": not sims, "simulators": sims}
    return {"bound": L, "weird": results, "all_pass": all(r["exploit"] for r in results.values())}


def sane_transition_gap(ifsm: Fsm, cpu: Fsm, gamma: dict) -> list:
    """CPU transitions between sane states that no IFSM transition accounts for."""
    check_gamma(ifsm, cpu, gamma)
    image = gamma_image(gamma)
    out = []
    for (q1t, s, q2t) in sorted(cpu.delta):
        if q1t not in image or q2t not in image:
            continue
        covered = any(q1t in gamma.get(a, ()) and q2t in gamma.get(b, ()) for (a, t, b) in ifsm.delta if t == s)
        if not covered:
            out.append((q1t, s, q2t))
    return out
