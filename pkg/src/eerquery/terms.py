"""Terms and atoms shared by conjunctive queries and Datalog programs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .relational import Constant


@dataclass(frozen=True, slots=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Apply:
    """A function symbol applied to terms inside a rule (not ground)."""

    fn: str
    args: tuple["Term", ...]

    def __str__(self) -> str:
        return f"{self.fn}({','.join(str(a) for a in self.args)})"

    def variables(self) -> set[Variable]:
        out: set[Variable] = set()
        for a in self.args:
            if isinstance(a, Variable):
                out.add(a)
            elif isinstance(a, Apply):
                out |= a.variables()
        return out


class Skolem:
    """A ground function term with a cached hash and nesting depth.

    Equality is structural, but callers normally intern terms through a
    :class:`SkolemInterner` so that equal terms are identical objects and
    comparisons stop at the identity check.
    """

    __slots__ = ("fn", "args", "depth", "_hash")

    def __init__(self, fn: str, args: tuple):
        self.fn = fn
        self.args = args
        self.depth = 1 + max((a.depth if isinstance(a, Skolem) else 0 for a in args), default=0)
        self._hash = hash((fn, args))

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, Skolem):
            return NotImplemented
        # iterative, so that very deep terms do not hit the recursion limit
        stack = [(self, other)]
        while stack:
            a, b = stack.pop()
            if a is b:
                continue
            if not (isinstance(a, Skolem) and isinstance(b, Skolem)):
                if isinstance(a, Skolem) or isinstance(b, Skolem) or a != b:
                    return False
                continue
            if a._hash != b._hash or a.fn != b.fn or len(a.args) != len(b.args):
                return False
            stack.extend(zip(a.args, b.args))
        return True

    def __str__(self) -> str:
        return render_value(self)

    __repr__ = __str__


def render_value(v, memo: dict | None = None) -> str:
    """Text of a ground value; Skolem terms are rendered without recursion."""
    if not isinstance(v, Skolem):
        return str(v)
    memo = {} if memo is None else memo
    stack = [v]
    while stack:
        t = stack[-1]
        if t in memo:
            stack.pop()
            continue
        pending = [a for a in t.args if isinstance(a, Skolem) and a not in memo]
        if pending:
            stack.extend(pending)
            continue
        stack.pop()
        memo[t] = f"{t.fn}({','.join(memo[a] if isinstance(a, Skolem) else str(a) for a in t.args)})"
    return memo[v]


class SkolemInterner:
    """Canonicalises ground Skolem terms for one evaluation."""

    def __init__(self):
        self._table: dict[tuple, Skolem] = {}

    def make(self, fn: str, args: tuple) -> Skolem:
        key = (fn, args)
        t = self._table.get(key)
        if t is None:
            t = Skolem(fn, args)
            self._table[key] = t
        return t


Value = Union[Constant, Skolem]
Term = Union[Variable, Constant, Apply]


def term_depth(v: object) -> int:
    return v.depth if isinstance(v, Skolem) else 0


STAR = "*"


class AnnotatedPred:
    """A predicate name paired with one Skolem-shape template per argument.

    Templates are ``"*"`` (a plain constant) or ground :class:`Skolem` terms
    whose leaves are ``"*"``.  The annotated atom has one argument per ``*``
    leaf.  Rendered as ``pred@[t1,...,tk]``.
    """

    __slots__ = ("base", "templates", "_hash", "_text")

    def __init__(self, base: str, templates: tuple):
        self.base = base
        self.templates = tuple(templates)
        self._hash = hash((base, self.templates))
        self._text = None

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, AnnotatedPred):
            return NotImplemented
        return self._hash == other._hash and self.base == other.base and self.templates == other.templates

    def __lt__(self, other: "AnnotatedPred") -> bool:
        return str(self) < str(other)

    def __str__(self) -> str:
        if self._text is None:
            memo: dict = {}
            self._text = f"{self.base}@[{','.join(render_value(t, memo) for t in self.templates)}]"
        return self._text

    __repr__ = __str__


_hole_counts: dict = {}


def holes(template) -> int:
    """Number of ``*`` leaves of a template (iterative, memoised)."""
    if not isinstance(template, Skolem):
        return 1
    n = _hole_counts.get(template)
    if n is not None:
        return n
    stack = [template]
    while stack:
        t = stack[-1]
        pending = [a for a in t.args if isinstance(a, Skolem) and a not in _hole_counts]
        if pending:
            stack.extend(pending)
            continue
        stack.pop()
        _hole_counts[t] = sum(_hole_counts[a] if isinstance(a, Skolem) else 1 for a in t.args)
    return _hole_counts[template]


@dataclass(frozen=True, slots=True)
class Atom:
    pred: str
    args: tuple

    def __str__(self) -> str:
        return f"{self.pred}({','.join(str(a) for a in self.args)})"

    def variables(self) -> set[Variable]:
        out: set[Variable] = set()
        for a in self.args:
            if isinstance(a, Variable):
                out.add(a)
            elif isinstance(a, Apply):
                out |= a.variables()
        return out
