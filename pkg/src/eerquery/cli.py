"""Command-line interface: ``eerquery <command> [options]``.

Commands::

    translate  --schema S.eer                       conceptual dependencies
    check      --schema S --data D.facts            does the chase exist?
    chase      --schema S --data D.facts            chase facts with levels
    rewrite    --schema S --query Q.cq              the compiled Datalog program
    answer     --schema S --data D.facts --query Q  certain answers
    validate   --schema S                           schema report

``S`` is an EER file (``.eer``) or a constraint file (``.cds``).  Exit status
is 0 on success, 1 on a domain failure and 2 on usage or parse errors; errors
are reported on stderr as a single ``ERROR <code>: <message>`` line.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .cds import CDSet, recognize_cds
from .chase import build_chase, build_eq_chase, chase_exists
from .eer import EERSchema, parse_eer
from .errors import EERQueryError, EERSemanticError, NotCDError, ParseError, SchemaError
from .pipeline import (AUTO, BOTH, CHASE, REWRITE, certain_answers, not_cd_reasons,
                       resolve_constraints)
from .relational import Constraints, Database, join_graph_components
from .rewriter import DERIVABLE, LITERAL, rewrite
from .textio import parse_constraints, parse_database, parse_query, render_constraints, render_facts
from .translation import to_constraints

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# input loading ----------------------------------------------------------------

def _read(path: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p.read_text(encoding="utf-8")


def _is_eer(path: str, text: str) -> bool:
    if path.endswith(".eer"):
        return True
    if path.endswith(".cds"):
        return False
    for line in text.splitlines():
        word = line.split("#", 1)[0].strip().split(" ", 1)[0]
        if word:
            return word in ("entity", "relationship", "attribute")
    return False


def load_schema(path: str) -> EERSchema | Constraints:
    text = _read(path)
    if _is_eer(path, text):
        try:
            return parse_eer(text)
        except ParseError as exc:
            exc.source = path
            raise ParseError(exc.message, exc.line, exc.col, path) from None
    return parse_constraints(text, source=path)


def load_constraints(path: str):
    schema = load_schema(path)
    return resolve_constraints(schema)


def load_data(path: str, cons: Constraints) -> Database:
    return parse_database(_read(path), cons.schema, source=path)


def load_query(path: str):
    return parse_query(_read(path), source=path)


# output -----------------------------------------------------------------------

def _tuple_text(t) -> str:
    return ",".join(str(c) for c in t)


def _fact_json(f) -> dict:
    return {"pred": f.pred, "args": [str(c) for c in f.args], "level": f.level}


def emit_json(command: str, status: str, answers=None, diagnostics=None, result=None) -> str:
    env = {"command": command, "status": status,
           "answers": [[str(c) for c in t] for t in answers] if answers is not None else None,
           "diagnostics": diagnostics or {}, "result": result}
    return json.dumps(env, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def chase_dot(res) -> str:
    """The chase forest as a Graphviz digraph."""
    lines = ["digraph chase {", "  node [shape=box, fontname=\"monospace\"];"]
    ids: dict = {}
    for f in res.sorted_facts():
        ids[f] = f"n{len(ids)}"
        lines.append(f"  {ids[f]} [label={json.dumps(f'{f} @{f.level}', ensure_ascii=False)}];")
    for parent, child, label in res.forest:
        if parent in ids and child in ids:
            lines.append(f"  {ids[parent]} -> {ids[child]} [label={json.dumps(label)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


# commands -----------------------------------------------------------------------

def cmd_translate(args, out) -> int:
    schema = load_schema(args.schema)
    cons = to_constraints(schema) if isinstance(schema, EERSchema) else schema
    res = recognize_cds(cons)
    text = render_constraints(res if isinstance(res, CDSet) else cons)
    if args.emit == "json":
        deps = [{"label": d.label, "text": d.render(), "rule": d.rule} for d in cons.dependencies]
        result = {"schema": dict(cons.schema), "dependencies": deps, "text": text}
        if isinstance(res, CDSet):
            result["partition"] = dict(sorted(res.partition.items()))
        out.write(emit_json("translate", "ok", result=result))
    else:
        out.write(text)
    return EXIT_OK


def cmd_check(args, out) -> int:
    cons = load_constraints(args.schema)
    if args.strict_cds and not isinstance(cons, CDSet):
        raise NotCDError(not_cd_reasons(cons))
    db = load_data(args.data, cons)
    cert = chase_exists(db, cons)
    verdict = "chase exists" if cert.exists else "chase does not exist"
    if not cert.exact and cert.exists:
        verdict += " (not guaranteed: the constraints are not CDs)"
    if args.emit == "json":
        result = {"exists": cert.exists, "exact": cert.exact, "method": cert.method, "level": cert.level,
                  "witness": [str(f) for f in cert.witness] if cert.witness else None,
                  "kd": cert.failure.kd.label if cert.failure else None}
        out.write(emit_json("check", "ok" if cert.exists else "inconsistent", result=result))
    else:
        out.write(verdict + "\n")
        if cert.failure is not None:
            a, b = cert.witness
            out.write(f"witness: {a} {b}\n")
            out.write(f"violated: {cert.failure.kd.label} ({cert.failure.kd.render()})\n")
    return EXIT_OK if cert.exists else EXIT_DOMAIN


def cmd_chase(args, out) -> int:
    cons = load_constraints(args.schema)
    if args.strict_cds and not isinstance(cons, CDSet):
        raise NotCDError(not_cd_reasons(cons))
    db = load_data(args.data, cons)
    runner = build_eq_chase if args.eq else build_chase
    res = runner(db, cons, max_level=args.max_level)
    facts = res.sorted_facts()
    eq_facts = sorted(getattr(res, "eq_facts", ()), key=lambda f: f.sort_key())
    if args.emit == "json":
        result = {"chase_status": res.status, "facts": [_fact_json(f) for f in facts],
                  "eq_facts": [_fact_json(f) for f in eq_facts] if args.eq else None,
                  "steps": list(res.steps),
                  "failure": str(res.failure) if res.failure else None,
                  "forest": [[str(p), str(c), lab] for p, c, lab in res.forest]}
        out.write(emit_json("chase", "inconsistent" if res.failed else "ok", result=result))
    elif args.emit == "dot":
        out.write(chase_dot(res))
    else:
        out.write(f"status: {res.status}\n")
        if args.log:
            for s in res.steps:
                out.write(f"step: {s}\n")
        if res.failed:
            out.write(f"failure: {res.failure}\n")
        else:
            out.write(render_facts(facts, with_levels=True))
            if args.eq:
                out.write(render_facts(eq_facts, with_levels=True))
    return EXIT_DOMAIN if res.failed else EXIT_OK


def cmd_rewrite(args, out) -> int:
    cons = load_constraints(args.schema)
    if not isinstance(cons, CDSet):
        raise NotCDError(not_cd_reasons(cons))
    q = load_query(args.query)
    q.check_schema(cons.schema)
    if args.cd_bound is not None:
        c_d = args.cd_bound
    elif args.data:
        c_d = join_graph_components(load_data(args.data, cons))[1]
    else:
        raise UsageError("rewrite needs --data or --cd-bound to fix the size of the largest data component")
    from .chase import compute_level_bound

    bound = compute_level_bound(cons, q, max(c_d, 1))
    depth = args.max_level if args.max_level is not None else bound.delta_m
    bundle = rewrite(q, cons, depth, variants=args.variants)
    stages = bundle.stages()
    if args.emit == "json":
        result = {"query_predicate": str(bundle.pi_fin.query_pred), "rules": len(bundle.pi_fin.rules),
                  "program": stages["pi_fin"], "dummy_chase_depth": depth}
        if args.stages:
            result["stages"] = stages
        out.write(emit_json("rewrite", "ok", diagnostics={"level_bound": bound.as_dict()}, result=result))
        return EXIT_OK
    if args.stages:
        for name in ("pi_eq", "pi_kd", "pi_id", "q_eq", "pi_dc", "pi_base"):
            out.write(f"% {name}\n{stages[name]}\n")
        out.write("% pi_fin\n")
    out.write(f"% query predicate: {bundle.pi_fin.query_pred}\n")
    out.write(stages["pi_fin"])
    return EXIT_OK


def cmd_answer(args, out) -> int:
    cons = load_constraints(args.schema)
    db = load_data(args.data, cons)
    q = load_query(args.query)
    res = certain_answers(cons, db, q, path=args.path, max_level=args.max_level, cd_bound=args.cd_bound,
                          strict_cds=args.strict_cds, allow_large_bound=args.allow_large_bound,
                          conservative=args.conservative)
    diagnostics = dict(res.diagnostics)
    timings = diagnostics.pop("timings", None)
    if args.timings and timings is not None:
        diagnostics["timings"] = timings
    diagnostics["path"] = res.path
    diagnostics["exact"] = res.exact
    if args.emit == "json":
        result = {"witness": [str(f) for f in res.witness.witness] if res.witness else None}
        out.write(emit_json("answer", res.status, list(res.answers) if res.consistent else None,
                            diagnostics, result))
    elif res.consistent:
        for t in res.answers:
            out.write(_tuple_text(t) + "\n")
        if not res.exact:
            print("note: answers sound but possibly incomplete (chase cut off on non-CD constraints)",
                  file=sys.stderr)
    else:
        out.write("inconsistent: the chase does not exist\n")
        if res.witness is not None:
            a, b = res.witness.witness
            out.write(f"witness: {a} {b}\n")
    if diagnostics.get("paths_agree") is False:
        print("ERROR disagreement: rewriting and chase paths returned different answers", file=sys.stderr)
        return EXIT_DOMAIN
    if not res.consistent and args.fail_on_inconsistent:
        return EXIT_DOMAIN
    return EXIT_OK


def cmd_validate(args, out) -> int:
    text = _read(args.schema)
    if _is_eer(args.schema, text):
        try:
            schema = parse_eer(text)
            problems: list[str] = []
        except EERSemanticError as exc:
            schema, problems = None, exc.violations
        if args.emit == "json":
            result = {"kind": "eer", "valid": not problems, "problems": problems}
            if schema is not None:
                result.update(entities=len(schema.entities), relationships=len(schema.relationships),
                              attributes=len(schema.attributes))
            out.write(emit_json("validate", "ok" if not problems else "invalid", result=result))
        elif problems:
            out.write(f"invalid: {len(problems)} problem{'s' if len(problems) != 1 else ''}\n")
            for p in problems:
                out.write(f"  {p}\n")
        else:
            out.write(f"valid: {len(schema.entities)} entities, {len(schema.relationships)} relationships, "
                      f"{len(schema.attributes)} attributes\n")
        return EXIT_OK if not problems else EXIT_DOMAIN
    cons = parse_constraints(text, source=args.schema)
    res = recognize_cds(cons)
    ok = isinstance(res, CDSet)
    problems = [] if ok else [str(v) for v in res]
    if args.emit == "json":
        result = {"kind": "cds", "valid": ok, "problems": problems,
                  "partition": dict(sorted(res.partition.items())) if ok else None}
        out.write(emit_json("validate", "ok" if ok else "invalid", result=result))
    elif ok:
        kinds = {"E": "entity", "R": "relationship", "A": "attribute"}
        out.write("valid: the dependencies are CDs\n")
        for p, k in sorted(res.partition.items()):
            out.write(f"  {p}: {kinds[k]}\n")
    else:
        out.write("invalid: not a set of CDs\n")
        for p in problems:
            out.write(f"  {p}\n")
    return EXIT_OK if ok else EXIT_DOMAIN


COMMANDS = {"translate": cmd_translate, "check": cmd_check, "chase": cmd_chase, "rewrite": cmd_rewrite,
            "answer": cmd_answer, "validate": cmd_validate}


class _Parser(argparse.ArgumentParser):
    """Reports bad invocations with the same ``ERROR <code>:`` prefix as everything else."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eerquery", description="Certain answers under EER constraints.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, help_text, data=False, query=False, emit=("text", "json")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--schema", required=True, help="EER (.eer) or constraint (.cds) file")
        if data:
            p.add_argument("--data", required=data is True, help="fact file")
        if query:
            p.add_argument("--query", required=True, help="conjunctive query file")
        p.add_argument("--emit", choices=emit, default="text", help="output format")
        return p

    add("translate", "translate an EER schema into conceptual dependencies")
    p = add("check", "decide whether the chase exists", data=True)
    p.add_argument("--strict-cds", action="store_true", help="refuse constraint sets that are not CDs")
    p = add("chase", "compute the chase", data=True, emit=("text", "json", "dot"))
    p.add_argument("--max-level", type=int, help="do not apply IDs to facts at this level or above")
    p.add_argument("--eq", action="store_true", help="chase with explicit eq atoms instead of merging")
    p.add_argument("--log", action="store_true", help="print every rule application")
    p.add_argument("--strict-cds", action="store_true", help="refuse constraint sets that are not CDs")
    p = add("rewrite", "compile a query into function-free Datalog", data="optional", query=True)
    p.add_argument("--cd-bound", type=int, help="size of the largest join-graph component")
    p.add_argument("--max-level", type=int, help="dummy-chase depth (default: the computed bound)")
    p.add_argument("--stages", "--emit-stages", action="store_true", help="also print intermediate programs")
    p.add_argument("--variants", choices=(DERIVABLE, LITERAL), default=DERIVABLE,
                   help="annotated rule variants: only those that can fire, or every template combination")
    p = add("answer", "compute certain answers", data=True, query=True)
    p.add_argument("--path", choices=(AUTO, REWRITE, CHASE, BOTH), default=AUTO)
    p.add_argument("--max-level", type=int, help="override the computed depth")
    p.add_argument("--cd-bound", type=int, help="override the largest join-graph component size")
    p.add_argument("--strict-cds", action="store_true", help="refuse constraint sets that are not CDs")
    p.add_argument("--fail-on-inconsistent", action="store_true", help="exit 1 when the chase does not exist")
    p.add_argument("--allow-large-bound", action="store_true", help="accept very large level bounds")
    p.add_argument("--conservative", action="store_true", help="answer attribute queries by the chase")
    p.add_argument("--timings", action="store_true", help="include timings in JSON diagnostics")
    add("validate", "check an EER schema or a constraint file")
    return parser


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    except UsageError as exc:
        print(f"ERROR usage: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"ERROR usage: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, EERSemanticError, SchemaError) as exc:
        print(f"ERROR {exc.code}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EERQueryError as exc:
        print(f"ERROR {exc.code}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
