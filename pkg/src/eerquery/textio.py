"""Readers and writers for the plain-text formats.

Formats handled here:

* fact files: ``pred(c1,...,cn).`` per fact, ``#`` comments;
* query files: one rule ``q(X,Y) :- p(X,Z), r(Z,Y,'c').``;
* constraint files (``.cds``): ``pred name/arity`` declarations,
  ``[label:] id: r[1,2] <= s[2,1]`` and ``[label:] kd: key(r) = {1}``,
  optionally followed by a ``# by rule N`` comment;
* Datalog programs: ``head :- b1, ..., bn.`` clauses whose predicates may be
  annotated as ``pred@[*,f(*)]`` and whose terms may be function applications.

In queries and programs, identifiers starting with an upper-case letter or an
underscore are variables; other identifiers, numbers and single-quoted strings
are constants.  In fact files every bare identifier is a constant.  The fresh
marker ``φ`` is rejected everywhere so that fresh values cannot be forged.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

from .errors import ParseError
from .relational import Constant, Constraints, Database, Fact, InclusionDependency, KeyDependency, const
from .terms import STAR, AnnotatedPred, Apply, Atom, Skolem, Variable

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<str>'(?:[^'\\\n]|\\.)*')
  | (?P<ident>[A-Za-z0-9_]+)
  | (?P<op>:-|<=|<-|[()\[\],.:{}=@*/])
""", re.VERBOSE)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str, source: str | None = None) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            ch = text[pos]
            if ch == "φ":
                raise ParseError("fresh constants (φ) cannot appear in input", line, col, source)
            if ch == "'":
                raise ParseError("unterminated quoted constant", line, col, source)
            raise ParseError(f"unexpected character {ch!r}", line, col, source)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind != "ws":
            tokens.append(Token(kind, m.group(), line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


def _unquote(s: str) -> str:
    return re.sub(r"\\(.)", r"\1", s[1:-1])


class _Parser:
    def __init__(self, text: str, source: str | None = None, keep_comments: bool = False):
        toks = tokenize(text, source)
        self.comments = [t for t in toks if t.kind == "comment"]
        self.toks = toks if keep_comments else [t for t in toks if t.kind != "comment"]
        self.i = 0
        self.source = source

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        t = tok or self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        return ParseError(f"{msg} (found {found})", t.line, t.col, self.source)

    def at(self, text: str) -> bool:
        return self.tok.kind == "op" and self.tok.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(f"expected {text!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != "ident":
            raise self.error(f"expected {what}")
        t = self.tok
        self.i += 1
        return t

    def integer(self) -> int:
        t = self.ident("integer")
        if not t.text.isdigit():
            raise self.error("expected integer", t)
        return int(t.text)

    def int_list(self, open_: str, close: str) -> tuple[int, ...]:
        self.expect(open_)
        out = [self.integer()]
        while self.at(","):
            self.i += 1
            out.append(self.integer())
        self.expect(close)
        return tuple(out)

    # terms -------------------------------------------------------------
    def constant_token(self, t: Token) -> Constant:
        if t.kind == "str":
            return const(_unquote(t.text))
        return const(t.text)

    def term(self, allow_apply: bool):
        t = self.tok
        if t.kind == "str":
            self.i += 1
            return const(_unquote(t.text))
        if t.kind != "ident":
            raise self.error("expected a term")
        self.i += 1
        if self.at("("):
            if not allow_apply:
                raise self.error("function terms are not allowed here", t)
            self.i += 1
            args = [self.term(True)]
            while self.at(","):
                self.i += 1
                args.append(self.term(True))
            self.expect(")")
            return Apply(t.text, tuple(args))
        if t.text[0].isupper() or t.text[0] == "_":
            return Variable(t.text)
        return const(t.text)

    def annotation_element(self):
        if self.at("*"):
            self.i += 1
            return STAR
        fn = self.ident("function symbol or '*'").text
        self.expect("(")
        inner = [self.annotation_element()]
        while self.at(","):
            self.i += 1
            inner.append(self.annotation_element())
        self.expect(")")
        return Skolem(fn, tuple(inner))

    def predicate(self):
        name = self.ident("predicate name").text
        if self.at("@"):
            self.i += 1
            self.expect("[")
            elems = []
            if not self.at("]"):
                elems.append(self.annotation_element())
                while self.at(","):
                    self.i += 1
                    elems.append(self.annotation_element())
            self.expect("]")
            return AnnotatedPred(name, tuple(elems))
        return name

    def atom(self, allow_apply: bool, allow_empty: bool = False) -> Atom:
        pred = self.predicate()
        self.expect("(")
        args = []
        if not self.at(")"):
            args.append(self.term(allow_apply))
            while self.at(","):
                self.i += 1
                args.append(self.term(allow_apply))
        elif not allow_empty:
            raise self.error("atoms need at least one argument")
        self.expect(")")
        return Atom(pred, tuple(args))

    def rule_arrow(self) -> bool:
        if self.at(":-") or self.at("<-"):
            self.i += 1
            return True
        return False


# facts -----------------------------------------------------------------

def parse_facts(text: str, source: str | None = None) -> list[Fact]:
    p = _Parser(text, source)
    out = []
    while p.tok.kind != "eof":
        pred = p.ident("predicate name").text
        p.expect("(")
        args = []
        while True:
            t = p.tok
            if t.kind not in ("ident", "str"):
                raise p.error("expected a constant")
            p.i += 1
            args.append(p.constant_token(t))
            if p.at(","):
                p.i += 1
                continue
            break
        p.expect(")")
        p.expect(".")
        out.append(Fact(pred, tuple(args)))
    return out


def parse_database(text: str, schema=None, source: str | None = None) -> Database:
    return Database(parse_facts(text, source), schema)


def render_facts(facts: Iterable[Fact], with_levels: bool = False) -> str:
    lines = []
    for f in sorted(facts, key=Fact.sort_key):
        lines.append(f"{f}.  # level {f.level}" if with_levels else f"{f}.")
    return "\n".join(lines) + ("\n" if lines else "")


# queries ---------------------------------------------------------------

def parse_query(text: str, source: str | None = None):
    from .cq import ConjunctiveQuery

    p = _Parser(text, source)
    start = p.tok
    head = p.atom(allow_apply=False, allow_empty=True)
    if isinstance(head.pred, AnnotatedPred):
        raise p.error("query heads cannot be annotated", start)
    for t in head.args:
        if not isinstance(t, Variable):
            raise p.error("query head arguments must be variables", start)
    if not p.rule_arrow():
        raise p.error("expected ':-'")
    body = [p.atom(allow_apply=False)]
    while p.at(","):
        p.i += 1
        body.append(p.atom(allow_apply=False))
    p.expect(".")
    if p.tok.kind != "eof":
        raise p.error("a query file holds exactly one rule")
    for a in body:
        if isinstance(a.pred, AnnotatedPred):
            raise ParseError("query atoms cannot be annotated", start.line, start.col, source)
    try:
        return ConjunctiveQuery(head.pred, tuple(head.args), tuple(body))
    except Exception as exc:
        raise ParseError(str(exc), start.line, start.col, source) from exc


# constraint files ------------------------------------------------------

_RULE_COMMENT = re.compile(r"#\s*by rule\s+(\d+)")


def parse_constraints(text: str, source: str | None = None) -> Constraints:
    p = _Parser(text, source)
    rule_at_line = {}
    for c in p.comments:
        m = _RULE_COMMENT.match(c.text)
        if m:
            rule_at_line[c.line] = int(m.group(1))
    schema: dict[str, int] = {}
    ids, kds = [], []
    while p.tok.kind != "eof":
        first = p.tok
        if first.kind == "ident" and first.text in ("pred", "relation") and p.peek().kind == "ident":
            p.i += 1
            name = p.ident("predicate name")
            p.expect("/")
            arity = p.integer()
            if name.text in schema:
                raise p.error(f"predicate {name.text} declared twice", name)
            schema[name.text] = arity
            continue
        label = ""
        if first.kind == "ident" and p.peek().text == ":" and p.peek(2).kind == "ident" and p.peek(3).text == ":":
            label = first.text
            p.i += 2
        kind = p.ident("'id', 'kd' or 'pred'")
        p.expect(":")
        rule = rule_at_line.get(kind.line)
        if kind.text == "id":
            lhs = p.ident("predicate name").text
            lc = p.int_list("[", "]")
            p.expect("<=")
            rhs = p.ident("predicate name").text
            rc = p.int_list("[", "]")
            ids.append((InclusionDependency, (lhs, lc, rhs, rc, label, rule), kind))
        elif kind.text == "kd":
            kw = p.ident("'key'")
            if kw.text != "key":
                raise p.error("expected 'key'", kw)
            p.expect("(")
            pred = p.ident("predicate name").text
            p.expect(")")
            p.expect("=")
            cols = p.int_list("{", "}")
            kds.append((KeyDependency, (pred, cols, label, rule), kind))
        else:
            raise p.error("expected 'id', 'kd' or 'pred'", kind)
    built_ids, built_kds = [], []
    for bucket, out in ((ids, built_ids), (kds, built_kds)):
        for cls, args, tok in bucket:
            try:
                out.append(cls(*args))
            except Exception as exc:
                raise ParseError(str(exc), tok.line, tok.col, source) from exc
    try:
        return Constraints(schema, tuple(built_ids), tuple(built_kds))
    except Exception as exc:
        raise ParseError(str(exc), None, None, source) from exc


def render_constraints(cons: Constraints, with_labels: bool = True) -> str:
    lines = [f"pred {p}/{a}" for p, a in cons.schema.items()]
    deps = sorted(cons.dependencies, key=lambda d: (d.rule if d.rule is not None else 99, _label_num(d.label), d.sort_key()))
    for d in deps:
        text = f"{d.label}: {d.render()}" if with_labels and d.label else d.render()
        if d.rule is not None:
            text += f"  # by rule {d.rule}"
        lines.append(text)
    return "\n".join(lines) + "\n"


def _label_num(label: str) -> tuple:
    m = re.fullmatch(r"([A-Za-z_]*)(\d+)", label)
    return (m.group(1), int(m.group(2))) if m else (label, 0)


# programs --------------------------------------------------------------

def parse_program_rules(text: str, source: str | None = None) -> list[tuple[Atom, tuple[Atom, ...]]]:
    """Parse clauses into (head, body) pairs; facts have an empty body."""
    p = _Parser(text, source)
    out = []
    while p.tok.kind != "eof":
        head = p.atom(allow_apply=True, allow_empty=True)
        body: list[Atom] = []
        if p.rule_arrow():
            body.append(p.atom(allow_apply=True, allow_empty=True))
            while p.at(","):
                p.i += 1
                body.append(p.atom(allow_apply=True, allow_empty=True))
        p.expect(".")
        out.append((head, tuple(body)))
    return out


def parse_predicate(text: str):
    """A plain predicate name, or an :class:`AnnotatedPred` for ``p@[...]``."""
    p = _Parser(text)
    pred = p.predicate()
    if p.tok.kind != "eof":
        raise p.error("unexpected text after predicate")
    return pred
