"""The textual EER definition language: AST, parser, printer and validator.

Grammar (keywords are lower case and reserved; layout is free)::

    schema       ::= definition*
    definition   ::= "entity" NAME entity-clause*
                   | "relationship" NAME "among" NAME ("," NAME)+ rel-clause*
                   | "attribute" NAME "of" NAME ("functional" | "mandatory")*
    entity-clause::= "isa" ":" NAME ("," NAME)*
                   | "participates" "(" (">=" | "≥") "1" ")" ":" part ("," part)*
                   | "participates" "(" ("<=" | "≤") "1" ")" ":" part ("," part)*
    part         ::= NAME ":" INT
    rel-clause   ::= "isa" ":" NAME "[" INT ("," INT)* "]" ("," ...)*

Clauses may appear in any order and repeated clauses are merged.  ``#``
starts a comment that runs to the end of the line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import EERSemanticError, ParseError

KEYWORDS = {"entity", "relationship", "attribute", "isa", "participates", "among", "of",
            "functional", "mandatory"}


@dataclass(frozen=True)
class EntityDef:
    name: str
    isa: frozenset[str] = frozenset()
    participates_at_least_once: frozenset[tuple[str, int]] = frozenset()
    participates_at_most_once: frozenset[tuple[str, int]] = frozenset()


@dataclass(frozen=True)
class RelationshipDef:
    name: str
    among: tuple[str, ...]
    isa: frozenset[tuple[str, tuple[int, ...]]] = frozenset()

    @property
    def arity(self) -> int:
        return len(self.among)


@dataclass(frozen=True)
class AttributeDef:
    name: str
    owner: str
    functional: bool = False
    mandatory: bool = False


@dataclass
class EERSchema:
    """An EER schema; the three maps are keyed by name (order is cosmetic)."""

    entities: dict[str, EntityDef] = field(default_factory=dict)
    relationships: dict[str, RelationshipDef] = field(default_factory=dict)
    attributes: dict[str, AttributeDef] = field(default_factory=dict)

    def names(self) -> list[str]:
        return [*self.entities, *self.relationships, *self.attributes]


# lexer -----------------------------------------------------------------

_TOK = re.compile(r"""
    (?P<ws>[ \t\r]+) | (?P<nl>\n) | (?P<comment>\#[^\n]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*) | (?P<int>[0-9]+)
  | (?P<op>>=|<=|≥|≤|[():,\[\]])
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _lex(text: str) -> list[_Tok]:
    out, pos, line, start = [], 0, 1, 0
    while pos < len(text):
        m = _TOK.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            start = m.end()
        elif kind not in ("ws", "comment"):
            out.append(_Tok(kind, m.group(), line, pos - start + 1))
        pos = m.end()
    out.append(_Tok("eof", "", line, pos - start + 1))
    return out


class _EERParser:
    def __init__(self, text: str):
        self.toks = _lex(text)
        self.i = 0
        self.problems: list[str] = []

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str, tok: _Tok | None = None) -> ParseError:
        t = tok or self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        return ParseError(f"{msg} (found {found})", t.line, t.col)

    def is_kw(self, word: str) -> bool:
        return self.tok.kind == "ident" and self.tok.text == word

    def take_kw(self, word: str) -> None:
        if not self.is_kw(word):
            raise self.error(f"expected '{word}'")
        self.i += 1

    def take_op(self, *ops: str) -> str:
        if self.tok.kind != "op" or self.tok.text not in ops:
            raise self.error("expected " + " or ".join(repr(o) for o in ops))
        t = self.tok.text
        self.i += 1
        return t

    def at_op(self, op: str) -> bool:
        return self.tok.kind == "op" and self.tok.text == op

    def name(self) -> str:
        t = self.tok
        if t.kind != "ident":
            raise self.error("expected a name")
        if t.text in KEYWORDS:
            raise self.error(f"'{t.text}' is a reserved word and cannot be used as a name")
        self.i += 1
        return t.text

    def integer(self) -> int:
        t = self.tok
        if t.kind != "int":
            raise self.error("expected an integer")
        self.i += 1
        return int(t.text)

    def parse(self) -> EERSchema:
        schema = EERSchema()
        seen: dict[str, str] = {}
        while self.tok.kind != "eof":
            start = self.tok
            if self.is_kw("entity"):
                d = self.entity()
                target = schema.entities
            elif self.is_kw("relationship"):
                d = self.relationship()
                target = schema.relationships
            elif self.is_kw("attribute"):
                d = self.attribute()
                target = schema.attributes
            else:
                raise self.error("expected 'entity', 'relationship' or 'attribute'")
            if d.name in seen:
                self.problems.append(f"duplicate name: {d.name} is defined more than once "
                                     f"(line {start.line})")
                continue
            seen[d.name] = start.text
            target[d.name] = d
        return schema

    def entity(self) -> EntityDef:
        self.take_kw("entity")
        name = self.name()
        isa: set[str] = set()
        least: set[tuple[str, int]] = set()
        most: set[tuple[str, int]] = set()
        while True:
            if self.is_kw("isa"):
                self.i += 1
                self.take_op(":")
                isa.add(self.name())
                while self.at_op(","):
                    self.i += 1
                    isa.add(self.name())
            elif self.is_kw("participates"):
                self.i += 1
                self.take_op("(")
                op = self.take_op(">=", "≥", "<=", "≤")
                one = self.tok
                if self.integer() != 1:
                    raise self.error("only participation bounds (>=1) and (<=1) are supported", one)
                self.take_op(")")
                self.take_op(":")
                bucket = least if op in (">=", "≥") else most
                bucket.add(self.participation())
                while self.at_op(","):
                    self.i += 1
                    bucket.add(self.participation())
            elif self.tok.kind == "ident" and self.tok.text not in ("entity", "relationship", "attribute"):
                raise self.error(f"unknown clause in entity {name}")
            else:
                break
        return EntityDef(name, frozenset(isa), frozenset(least), frozenset(most))

    def participation(self) -> tuple[str, int]:
        rel = self.name()
        self.take_op(":")
        return (rel, self.integer())

    def relationship(self) -> RelationshipDef:
        self.take_kw("relationship")
        name = self.name()
        self.take_kw("among")
        among = [self.name()]
        while self.at_op(","):
            self.i += 1
            among.append(self.name())
        isa: set[tuple[str, tuple[int, ...]]] = set()
        while True:
            if self.is_kw("isa"):
                self.i += 1
                self.take_op(":")
                isa.add(self.rel_isa())
                while self.at_op(","):
                    self.i += 1
                    isa.add(self.rel_isa())
            elif self.tok.kind == "ident" and self.tok.text not in ("entity", "relationship", "attribute"):
                raise self.error(f"unknown clause in relationship {name}")
            else:
                break
        return RelationshipDef(name, tuple(among), frozenset(isa))

    def rel_isa(self) -> tuple[str, tuple[int, ...]]:
        target = self.name()
        self.take_op("[")
        perm = [self.integer()]
        while self.at_op(","):
            self.i += 1
            perm.append(self.integer())
        self.take_op("]")
        return (target, tuple(perm))

    def attribute(self) -> AttributeDef:
        self.take_kw("attribute")
        name = self.name()
        self.take_kw("of")
        owner = self.name()
        functional = mandatory = False
        while self.tok.kind == "ident" and self.tok.text not in ("entity", "relationship", "attribute"):
            word = self.tok.text
            if word == "functional":
                functional = True
            elif word == "mandatory":
                mandatory = True
            else:
                raise self.error(f"unknown qualification for attribute {name}")
            self.i += 1
        return AttributeDef(name, owner, functional, mandatory)


def parse_eer(text: str) -> EERSchema:
    """Parse and validate; raise :class:`ParseError` or :class:`EERSemanticError`."""
    p = _EERParser(text)
    schema = p.parse()
    problems = p.problems + validate_eer(schema)
    if problems:
        raise EERSemanticError(problems)
    return schema


def validate_eer(schema: EERSchema) -> list[str]:
    """One message per violated invariant; empty when the schema is valid."""
    out: list[str] = []
    ents, rels, atts = schema.entities, schema.relationships, schema.attributes
    for n in ents:
        if n in rels:
            out.append(f"duplicate name: {n} is both an entity and a relationship")
        if n in atts:
            out.append(f"duplicate name: {n} is both an entity and an attribute")
    for n in rels:
        if n in atts:
            out.append(f"duplicate name: {n} is both a relationship and an attribute")

    for e in ents.values():
        for sup in sorted(e.isa):
            if sup not in ents:
                out.append(f"undefined reference: entity {e.name} isa undefined entity {sup}")
        for kind, parts in (("(>=1)", e.participates_at_least_once), ("(<=1)", e.participates_at_most_once)):
            for rel, comp in sorted(parts):
                r = rels.get(rel)
                if r is None:
                    out.append(f"undefined reference: entity {e.name} participates{kind} in undefined relationship {rel}")
                elif not 1 <= comp <= r.arity:
                    out.append(f"bad component: {rel}:{comp} in entity {e.name} is outside 1..{r.arity}")
                elif r.among[comp - 1] != e.name:
                    out.append(f"participation mismatch: component {comp} of {rel} is {r.among[comp - 1]}, not {e.name}")

    for r in rels.values():
        if r.arity < 2:
            out.append(f"arity mismatch: relationship {r.name} needs at least two components")
        for e in r.among:
            if e not in ents:
                out.append(f"undefined reference: relationship {r.name} among undefined entity {e}")
        for target, perm in sorted(r.isa):
            t = rels.get(target)
            if t is None:
                out.append(f"undefined reference: relationship {r.name} isa undefined relationship {target}")
                continue
            if sorted(perm) != list(range(1, len(perm) + 1)):
                out.append(f"not a permutation: {list(perm)} in {r.name} isa {target}")
            elif len(perm) != r.arity:
                out.append(f"arity mismatch: permutation {list(perm)} has length {len(perm)}, {r.name} has arity {r.arity}")
            if t.arity != r.arity:
                out.append(f"arity mismatch: {r.name} has arity {r.arity} but isa target {target} has arity {t.arity}")

    for a in atts.values():
        if a.owner not in ents and a.owner not in rels:
            out.append(f"undefined reference: attribute {a.name} of undefined owner {a.owner}")
    return out


def format_eer(schema: EERSchema) -> str:
    """Pretty-print a schema in the concrete syntax accepted by :func:`parse_eer`."""
    lines: list[str] = []
    for e in schema.entities.values():
        lines.append(f"entity {e.name}")
        if e.isa:
            lines.append("  isa: " + ", ".join(sorted(e.isa)))
        if e.participates_at_least_once:
            lines.append("  participates(>=1): " + ", ".join(f"{r}:{c}" for r, c in sorted(e.participates_at_least_once)))
        if e.participates_at_most_once:
            lines.append("  participates(<=1): " + ", ".join(f"{r}:{c}" for r, c in sorted(e.participates_at_most_once)))
    for r in schema.relationships.values():
        lines.append(f"relationship {r.name} among {', '.join(r.among)}")
        if r.isa:
            lines.append("  isa: " + ", ".join(f"{t}[{','.join(map(str, p))}]" for t, p in sorted(r.isa)))
    for a in schema.attributes.values():
        quals = (" functional" if a.functional else "") + (" mandatory" if a.mandatory else "")
        lines.append(f"attribute {a.name} of {a.owner}{quals}")
    return "\n".join(lines) + ("\n" if lines else "")
