"""Command-line entry point: ``weirdc <subcommand> ...``.

Exit codes: 0 success, 1 when an analysis disagrees with the expectation
(a failing fixture check, an unexpected verdict or counterexample), 2 on
usage or parse errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import compilers as C
from . import corpus, fsm, gen, imp, oracle, toya, toyc, toyh
from .sexpr import ParseError
from .traces import ExplorationBounds, _jsonable, format_trace, parse_value

LANGS = ("imp", "toyc", "toya", "toyh")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- helpers


def resolve_path(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    alt = corpus.CORPUS_DIR / p.name
    if p.parts[:1] == ("corpus",) and alt.exists():
        return alt
    if not p.parent.parts and alt.exists():
        return alt
    raise UsageError(f"no such file: {name}")


def read_text(name: str) -> str:
    return resolve_path(name).read_text()


PARSERS = {"imp": imp.parse_imp, "toyc": toyc.parse_toyc, "toya": toya.parse_toya, "toyh": toyh.parse_toyh}
SHOW = {"imp": imp.show, "toyc": toyc.show_toyc, "toya": toya.show_toya}


def show(lang: str, x) -> str:
    if lang == "imp":
        if isinstance(x, imp.ImpComponent):
            return f"(component ({' '.join(x.vars)})\n  {imp.show(x.body)})"
        if isinstance(x, imp.ImpContext):
            return imp.show(x.cmd)
        return imp.show(x)
    if lang == "toyh":
        return toyh.show_toyh(x.cmd if isinstance(x, toyh.HAttackContext) else x)
    return SHOW[lang](x)


def load(lang: str, name: str, layout_from=None):
    """Parse a source file; Toy^A templates are resolved against ``layout_from``'s layout."""
    text = read_text(name)
    if lang == "toya" and "${" in text:
        if layout_from is None:
            raise UsageError(f"{name} is a template; pass the Toy^C component it targets")
        _, layout = C.compile_toyc_toya(layout_from, with_layout=True)
        text = corpus.render_template(text, layout)
    return PARSERS[lang](text)


def bounds_from(args) -> ExplorationBounds:
    b = ExplorationBounds.profile(args.profile)
    kw = {}
    if args.budget is not None:
        kw["budget"] = args.budget
    if args.domain is not None:
        lo, _, hi = args.domain.partition(":")
        try:
            kw["int_domain"] = tuple(range(int(lo), int(hi) + 1))
        except ValueError:
            raise UsageError("--domain takes LO:HI") from None
    if args.input_domain:
        per = {}
        for item in args.input_domain:
            name, eq, rng = item.partition("=")
            lo, colon, hi = rng.partition(":")
            if not eq:
                raise UsageError("--input-domain takes NAME=LO:HI or NAME=V")
            try:
                per[name] = tuple(range(int(lo), int(hi) + 1)) if colon else (int(lo),)
            except ValueError:
                raise UsageError("--input-domain takes NAME=LO:HI or NAME=V") from None
        kw["per_input"] = per
    if getattr(args, "bound", None) is not None:
        kw["context_size"] = args.bound
    if args.context_size is not None:
        kw["context_size"] = args.context_size
    try:
        return b.with_(**kw) if kw else b
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def emit(args, record: dict, text: str | None = None):
    if args.json:
        print(json.dumps(_jsonable(record), sort_keys=True))
    else:
        print(text if text is not None else json.dumps(_jsonable(record), sort_keys=True, indent=2))


def parse_args_kv(pairs) -> dict:
    out = {}
    for p in pairs or ():
        k, eq, v = p.partition("=")
        if not eq:
            raise UsageError(f"--arg expects name=value, got {p!r}")
        out[k] = parse_value(v)
    return out


# ---------------------------------------------------------------- subcommands


def cmd_parse(args) -> int:
    x = load(args.lang, args.file)
    emit(args, {"kind": type(x).__name__, "text": show(args.lang, x)}, show(args.lang, x))
    return 0


def cmd_run(args) -> int:
    vals = parse_args_kv(args.arg)
    budget = bounds_from(args).budget
    comp = toyc.parse_toyc(read_text(args.component)) if args.component else None
    x = load(args.lang, args.file, comp)
    if args.lang == "imp":
        if isinstance(x, (imp.ImpComponent, imp.ImpContext)):
            raise UsageError("run needs a whole IMP program")
        t = imp.run_imp(x, vals, budget)
    elif args.lang == "toyc":
        main = toyc.check_whole(x)
        missing = [n for n, _ in main.params if n not in vals]
        if missing:
            raise UsageError(f"main needs --arg for {', '.join(missing)}")
        t = toyc.run_toyc(x, [vals[n] for n, _ in main.params], budget)
    elif args.lang == "toya":
        if isinstance(x, toya.AContext) and comp is not None:
            x = toya.link_toya(x, C.compile_toyc_toya(comp))
        if not isinstance(x, toya.AProgram):
            raise UsageError("run needs a whole Toy^A program (or a context plus --component)")
        t = toya.run_toya(x, budget, vals)
    else:
        if isinstance(x, toyh.HAttackContext):
            raise UsageError("run needs a whole Toy^H program")
        t = toyh.run_toyh(x, vals, budget)
    emit(args, {"trace": t}, format_trace(t).rstrip("\n"))
    return 0


def _compile_one(src: str, x, layout: bool):
    """One stage forward; returns (target language, result, layout report or None)."""
    if src == "imp":
        if isinstance(x, imp.ImpComponent):
            return "toyc", C.compile_imp_toyc(x), None
        if isinstance(x, imp.ImpContext):
            return "toyc", C.compile_imp_context(x), None
        return "toyc", C.compile_imp_whole(x), None
    if src == "toyc":
        if any(p.name == "main" for p in x.procs) and not layout:
            return "toya", C.compile_toyc_whole(x), None
        if any(p.name == "main" for p in x.procs):
            res, rep = C.compile_toyc_context(x, with_layout=True)
            return "toya", res, rep
        res, rep = C.compile_toyc_toya(x, with_layout=True)
        return "toya", res, rep
    if src == "toya":
        if isinstance(x, toya.AProgram):
            return "toyh", C.compile_toya_toyh(x), None
        if isinstance(x, toya.AContext):
            return "toyh", C.compile_toya_context(x), None
        return "toya", C.compile_toya_component(x), None
    raise UsageError(f"nothing compiles from {src}")


def cmd_compile(args) -> int:
    if LANGS.index(args.to) <= LANGS.index(getattr(args, "from")):
        raise UsageError("--to must be a later language than --from")
    lang, x, report = getattr(args, "from"), load(getattr(args, "from"), args.file), None
    while lang != args.to:
        lang_next, x, rep = _compile_one(lang, x, args.emit_layout)
        report = rep or report
        if lang_next == lang:  # components are unchanged by the last stage
            break
        lang = lang_next
    text = show(args.to, x)
    if args.emit_layout:
        if report is None:
            raise UsageError("--emit-layout applies to Toy^C -> Toy^A")
        text = report.render()
    emit(args, {"to": args.to, "text": text}, text)
    return 0


def cmd_link(args) -> int:
    lang = args.lang
    # Toy^H contexts hold Toy^A components
    comp_target = "toya" if lang == "toyh" else lang
    comp_lang = args.component_lang or comp_target
    if LANGS.index(comp_lang) > LANGS.index(comp_target):
        raise UsageError(f"a {comp_lang} component cannot fill a {lang} context")
    comp = load(comp_lang, args.component)
    layout_src = comp if comp_lang == "toyc" else None
    while comp_lang != comp_target:
        nxt = LANGS[LANGS.index(comp_lang) + 1]
        comp = C.stage_by_name(f"{comp_lang}->{nxt}").component(comp)
        comp_lang = nxt
        if comp_lang == "toyc":
            layout_src = comp
    ctx = load(lang, args.context, layout_src)
    linked = C.LANGUAGES[lang].link(ctx, comp)
    emit(args, {"text": show(lang, linked)}, show(lang, linked))
    return 0


def source_class(name: str | None, stage: C.CompilerStage, v) -> oracle.ContextClass:
    if name is None:
        if stage.source.name != "imp":
            raise UsageError(f"--source-class is required for {stage.name}; choose from {sorted(CLASSES)}")
        name = "imp-contexts"
    if name not in CLASSES:
        raise UsageError(f"unknown class {name!r}; choose from {sorted(CLASSES)}")
    return CLASSES[name](v)


CLASSES = {
    "imp-contexts": lambda v: oracle.imp_context_class(v.vars),
    "imp-init": lambda v: oracle.imp_init_class(v.vars[0]),
    "imp-init-xy": lambda v: corpus.imp_pair_init_class(),
    "dop-init": lambda v: corpus.dop_init_class(),
    "rop-arg-only": lambda v: corpus.rop_arg_class(),
    "call-check": lambda v: corpus.fa_source_class(),
    "toyc-init-xy": lambda v: corpus.toyc_pair_init_class(),
    "guess-only": lambda v: corpus.guess_only_class(),
}


def _stage(name: str) -> C.CompilerStage:
    try:
        return C.stage_by_name(name)
    except KeyError:
        raise UsageError(f"unknown stage {name!r}") from None


def _verdict_text(v) -> str:
    ev = v.to_json()["evidence"]
    lines = [f"verdict: {v.to_json()['verdict']}"]
    for k in ("stage", "property", "via", "reason"):
        if ev.get(k) is not None:
            lines.append(f"{k}: {ev[k]}")
    w = ev.get("witness")
    if isinstance(w, dict) and "outputs" in w:
        outs = w["outputs"]
        shown = " ".join(outs[:12]) + (f" ... ({len(outs)} outputs)" if len(outs) > 12 else "")
        lines.append(f"witness: {shown} # {w['terminal']}")
    spot = ev.get("spot_check")
    if spot:
        lines.append(f"spot-check: {spot['contexts']} contexts of {spot['class']}, {spot['violations']} violations")
    if "difference" in ev:
        lines.append(f"difference: {json.dumps(ev['difference'], sort_keys=True)}")
    return "\n".join(lines)


def cmd_classify(args) -> int:
    stage = _stage(args.stage)
    b = bounds_from(args)
    v = load(stage.source.name, args.component)
    a = load(stage.target.name, args.attack, v if stage.target.name == "toya" and stage.source.name == "toyc" else None)
    cls = source_class(args.source_class, stage, v)
    if args.mode == "fa":
        if not args.alt:
            raise UsageError("--mode fa needs --alt")
        verdict = oracle.fa_exploit_check(v, load(stage.source.name, args.alt), a, stage, cls, b)
    else:
        prop = None
        if args.property:
            if args.property not in corpus.PROPERTIES:
                raise UsageError(f"unknown property {args.property!r}; choose from {sorted(corpus.PROPERTIES)}")
            prop = corpus.PROPERTIES[args.property]
        if prop is not None:
            verdict = oracle.certify_by_property(v, a, prop, stage, cls, b, b)
        else:
            verdict = oracle.texploit_check(v, a, stage, cls, b, b)
        if args.mode == "exploit":
            ev = verdict if verdict.certified else None
            verdict = oracle.exploit_check(v, a, stage, cls, b, b, trace_evidence=ev, trace_property=prop)
    emit(args, verdict.to_json(), _verdict_text(verdict))
    if args.expect and verdict.to_json()["verdict"] != args.expect:
        return 1
    return 0


def cmd_wm_sample(args) -> int:
    stage = _stage(args.stage)
    b = bounds_from(args)
    v = load(stage.source.name, args.component)
    props = [corpus.PROPERTIES[p] for p in (args.property or ["nonnegative-outputs", "nonempty-or-not-halted"])]
    s = oracle.wm_sample(v, CLASSES[args.attacker_class](v), stage, CLASSES[args.source_class](v), props, b, b)
    beh = sorted(sorted(corpus.trace_label(t) for t in x) for x in s.behaviors())
    rec = {"behaviors": beh, "certified": len(s.certified), "unknown": len(s.unknown), "refuted": s.refuted,
           "rejected_properties": s.rejected_properties}
    text = "\n".join(["{" + ", ".join(x) + "}" for x in beh] or ["(empty)"])
    text += f"\n# certified {len(s.certified)}, unknown {len(s.unknown)}, refuted {s.refuted}"
    emit(args, rec, text)
    return 0


def cmd_fsm(args) -> int:
    ifsm = fsm.parse_fsm(read_text(args.ifsm))
    cpu = fsm.parse_fsm(read_text(args.cpu))
    gamma = fsm.parse_gamma(read_text(args.gamma))
    if args.action == "gap":
        gap = fsm.sane_transition_gap(ifsm, cpu, gamma)
        emit(args, {"gap": gap}, "\n".join(" ".join(e) for e in gap) or "(none)")
        return 0
    cls = fsm.classify_states(ifsm, cpu, gamma)
    rec = {"classes": {q: c.value for q, c in sorted(cls.classes.items())}, "evidence": cls.evidence}
    ok, bad = fsm.respects_behaviors(ifsm, cpu, gamma, args.bound, cls)
    rec["respects_behaviors"] = {"bound": args.bound, "ok": ok, "violations": bad}
    if ok:
        rec["weird_exploits"] = fsm.weird_implies_exploit(ifsm, cpu, gamma, args.bound)
    lines = [f"{q} {c.value}" for q, c in sorted(cls.classes.items())]
    lines.append(f"# respects behaviors at L={args.bound}: {'yes' if ok else 'no'}")
    emit(args, rec, "\n".join(lines))
    return 0 if ok else 1


def cmd_fixture(args) -> int:
    if args.action == "list":
        m = corpus.manifest()
        emit(args, {"fixtures": m}, "\n".join(f"{k}  {m[k]['provenance']}" for k in sorted(m)))
        return 0
    if args.action == "findpass":
        pw = args.password
        if not 1 <= args.alphabet <= 26:
            raise UsageError("--alphabet takes 1..26")
        if not pw.isascii() or not pw.isalpha() or not pw.islower() or any(ord(c) - 96 > args.alphabet for c in pw):
            raise UsageError(f"--password takes letters a..{chr(96 + args.alphabet)}")
        if len(pw) > corpus.MAX_LEN:
            raise UsageError(f"passwords are at most {corpus.MAX_LEN} letters")
        r = corpus.run_findpass(tuple(ord(c) - 96 for c in pw), alphabet=args.alphabet)
        got = "".join(chr(96 + c) for c in r["recovered"] if isinstance(c, int) and 1 <= c <= 26)
        emit(args, {"password": pw, "recovered": got, "get_info_calls": r["calls"]},
             f"recovered: {got}\nget_info calls: {r['calls']}")
        return 0 if got == pw else 1
    if not args.id:
        raise UsageError("fixture run needs an id")
    try:
        rep = corpus.run_fixture(args.id)
    except corpus.UnknownFixture:
        raise UsageError(f"unknown fixture {args.id!r}; see 'fixture list'") from None
    lines = [f"{'ok  ' if c['ok'] else 'FAIL'} {c['check']}: expected {json.dumps(_jsonable(c['expected']))}, "
             f"got {json.dumps(_jsonable(c['actual']))}" for c in rep.checks]
    for name, v in rep.verdicts.items():
        lines.append(f"[{name}] " + _verdict_text(v).replace("\n", "; "))
    emit(args, rep.to_json(), "\n".join(lines))
    return 0 if rep.ok else 1


def cmd_check_stage(args) -> int:
    stage = _stage(args.stage)
    b = bounds_from(args)
    src = stage.source.name
    if args.check == "relation":
        tgt_dom = stage.target_bounds(b).int_domain if src != "imp" else b.int_domain
        dom = b.imp_domain if src == "imp" else b.int_domain
        rep = C.relation_report(stage.relation, dom, tgt_dom)
    elif args.check == "modularity":
        if args.program:
            raise UsageError("modularity runs on generated pairs")
        try:
            pairs = corpus.corpus_pairs(stage.name)
        except ValueError:
            pairs = []
        rep = C.check_modularity(stage, pairs + gen.random_pairs(stage.name, args.programs, args.seed), b)
    else:
        progs = [load(src, f) for f in args.program] if args.program else gen.random_wholes(stage.name, args.programs,
                                                                                           args.seed)
        if args.check == "correct":
            rep = C.check_correct_whole(stage, progs, b)
        elif args.check == "preserves":
            rep = C.check_preserves_traces(stage, progs, b)
        else:
            if not args.next:
                raise UsageError("invertibility needs --next STAGE")
            rep = C.check_invertibility_stages(stage, _stage(args.next), progs, b)
    n = len(rep["counterexamples"])
    text = f"{rep['check']} {rep.get('stage', rep.get('relation'))}: {n} counterexample(s)"
    if rep["check"] == "relation":
        text += "\n" + "\n".join(f"{a} -> {b_}" for a, b_ in rep["forward"])
        text += "\nnoninjective: " + "; ".join(f"{m['sources']} -> {m['target']}" for m in rep["noninjective"])
        text += "\nno preimage: " + " ".join(rep["no_preimage"])
    elif n:
        text += "\nfirst: " + json.dumps(_jsonable(rep["counterexamples"][0]), sort_keys=True)[:2000]
    emit(args, rep, text)
    return 0 if (n == 0) == (args.expect == "pass") else 1


# ---------------------------------------------------------------- argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="JSON-lines output")
    common.add_argument("--profile", choices=["quick", "default", "thorough"], default=None,
                        help="bound preset (default: $WM_BOUND_PROFILE or 'default')")
    common.add_argument("--budget", type=int, help="step budget")
    common.add_argument("--domain", help="integer input domain LO:HI")
    common.add_argument("--context-size", type=int, help="context size bound")
    common.add_argument("--input-domain", action="append", metavar="NAME=LO:HI",
                        help="domain for one input (repeatable)")

    p = argparse.ArgumentParser(prog="weirdc", description="Weird machines and exploits across a toy compiler stack")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("parse", parents=[common], help="parse and pretty-print a source file")
    s.add_argument("--lang", choices=LANGS, required=True)
    s.add_argument("file")
    s.set_defaults(fn=cmd_parse)

    s = sub.add_parser("run", parents=[common], help="run a whole program and print its trace")
    s.add_argument("--lang", choices=LANGS, required=True)
    s.add_argument("--arg", action="append", help="input name=value (repeatable)")
    s.add_argument("--component", help="Toy^C component for a Toy^A context or template")
    s.add_argument("file")
    s.set_defaults(fn=cmd_run)

    s = sub.add_parser("compile", parents=[common], help="compile to a later language")
    s.add_argument("--from", choices=LANGS, required=True)
    s.add_argument("--to", choices=LANGS, required=True)
    s.add_argument("--emit-layout", action="store_true", help="print the Toy^A layout report instead")
    s.add_argument("file")
    s.set_defaults(fn=cmd_compile)

    s = sub.add_parser("link", parents=[common], help="link a context with a component")
    s.add_argument("--lang", choices=LANGS, required=True)
    s.add_argument("--context", required=True)
    s.add_argument("--component", required=True)
    s.add_argument("--component-lang", choices=LANGS, help="compile the component from this language first")
    s.set_defaults(fn=cmd_link)

    s = sub.add_parser("classify", parents=[common], help="classify an attack against a component")
    s.add_argument("--mode", choices=["texploit", "exploit", "fa"], required=True)
    s.add_argument("--component", required=True)
    s.add_argument("--attack", required=True)
    s.add_argument("--stage", required=True)
    s.add_argument("--property", help=f"one of {sorted(corpus.PROPERTIES)}")
    s.add_argument("--source-class", help=f"one of {sorted(CLASSES)}")
    s.add_argument("--alt", help="alternative component for --mode fa")
    s.add_argument("--bound", type=int, help="context size bound")
    s.add_argument("--expect", help="exit 1 unless this verdict comes out")
    s.set_defaults(fn=cmd_classify)

    s = sub.add_parser("wm-sample", parents=[common], help="sample the weird machine of a component")
    s.add_argument("--component", required=True)
    s.add_argument("--stage", default="imp->toyc")
    s.add_argument("--attacker-class", default="dop-init", choices=sorted(CLASSES))
    s.add_argument("--source-class", default="imp-init", choices=sorted(CLASSES))
    s.add_argument("--property", action="append", choices=sorted(corpus.PROPERTIES))
    s.set_defaults(fn=cmd_wm_sample)

    s = sub.add_parser("fsm", parents=[common], help="finite state machine analysis")
    s.add_argument("action", choices=["classify", "gap"])
    s.add_argument("--ifsm", required=True)
    s.add_argument("--cpu", required=True)
    s.add_argument("--gamma", required=True)
    s.add_argument("--bound", type=int, default=6, help="length bound L")
    s.set_defaults(fn=cmd_fsm)

    s = sub.add_parser("fixture", parents=[common], help="list or run corpus fixtures")
    s.add_argument("action", choices=["list", "run", "findpass"])
    s.add_argument("id", nargs="?")
    s.add_argument("--password", default="dcba")
    s.add_argument("--alphabet", type=int, default=4, help="letters a.. in the findpass search")
    s.set_defaults(fn=cmd_fixture)

    s = sub.add_parser("check-stage", parents=[common], help="bounded compiler-stage checks")
    s.add_argument("--stage", required=True)
    s.add_argument("--check", choices=["correct", "preserves", "modularity", "invertibility", "relation"],
                   required=True)
    s.add_argument("--program", action="append", help="check these programs instead of random ones")
    s.add_argument("--programs", type=int, default=200, help="number of random programs")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--next", help="second stage for --check invertibility")
    s.add_argument("--expect", choices=["pass", "fail"], default="pass",
                   help="whether zero counterexamples is the expected outcome")
    s.set_defaults(fn=cmd_check_stage)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        return args.fn(args)
    except (UsageError, ParseError, fsm.FsmFormatError, fsm.StateNotInMachine, oracle.LinkFailure,
            toyc.MissingMain, toyc.ArityMismatch, toyc.DuplicateName, toya.LinkError, toya.AddressOverlap,
            C.LayoutError) as exc:
        print(f"weirdc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
