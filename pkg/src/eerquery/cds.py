"""Recognition of conceptual dependencies.

A constraint set is a set of conceptual dependencies (CDs) when its
predicates can be split into entities (E), relationships (R) and attributes
(A) such that every dependency has one of a fixed list of shapes.  The split,
when it exists, is unique: unary predicates are entities, and a wider
predicate is a relationship exactly when its last position is typed by an
inclusion dependency (attributes never have their value position on the left
of an ID).  :func:`recognize_cds` computes that split directly and then checks
the conditions; :func:`brute_force_partition` searches all splits and exists
as a test oracle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .relational import Constraints, InclusionDependency, KeyDependency

ENTITY = "E"
RELATIONSHIP = "R"
ATTRIBUTE = "A"


@dataclass(frozen=True)
class Violation:
    """A failed condition; ``condition`` is one of the letters a to i."""

    condition: str
    detail: str

    def __str__(self) -> str:
        return f"condition ({self.condition}): {self.detail}"


@dataclass(frozen=True)
class CDSet(Constraints):
    """Constraints known to be CDs, together with their E/R/A partition."""

    partition: Mapping[str, str] = field(default_factory=dict)

    def preds_of(self, kind: str) -> list[str]:
        return [p for p, k in self.partition.items() if k == kind]

    @classmethod
    def from_constraints(cls, cons: Constraints, partition: Mapping[str, str]) -> "CDSet":
        return cls(cons.schema, cons.ids, cons.kds, dict(sorted(partition.items())))


def forced_partition(cons: Constraints) -> dict[str, str]:
    typed_last: set[str] = set()
    for d in cons.ids:
        if cons.schema[d.lhs] in d.lhs_cols:
            typed_last.add(d.lhs)
    part = {}
    for p, arity in cons.schema.items():
        if arity == 1:
            part[p] = ENTITY
        elif p in typed_last:
            part[p] = RELATIONSHIP
        else:
            part[p] = ATTRIBUTE
    return part


def check_partition(cons: Constraints, part: Mapping[str, str]) -> list[Violation]:
    """Every violated condition for a given partition (empty when valid)."""
    schema = cons.schema
    out: list[Violation] = []
    E = {p for p, k in part.items() if k == ENTITY}
    R = {p for p, k in part.items() if k == RELATIONSHIP}
    A = {p for p, k in part.items() if k == ATTRIBUTE}

    for p in sorted(E):
        if schema[p] != 1:
            out.append(Violation("a", f"entity predicate {p} has arity {schema[p]}"))
    for p in sorted(R | A):
        if schema[p] < 2:
            out.append(Violation("b", f"predicate {p} has arity {schema[p]} but is not an entity"))

    for k in cons.kds:
        n = schema[k.pred]
        if k.pred in R and len(k.cols) == 1:
            continue
        if k.pred in A and k.cols == tuple(range(1, n)):
            continue
        out.append(Violation("c", f"{k.render()} has no admissible key shape"))

    idset = set(cons.ids)
    for d in cons.ids:
        if _id_shape(d, schema, E, R, A) is None:
            out.append(Violation("d", f"{d.render()} has no admissible inclusion shape"))

    for r in sorted(R):
        for i in range(1, schema[r] + 1):
            targets = sorted({d.rhs for d in cons.ids
                              if d.lhs == r and d.lhs_cols == (i,) and d.rhs_cols == (1,) and d.rhs in E})
            if len(targets) != 1:
                what = "no" if not targets else "more than one (" + ", ".join(targets) + ")"
                out.append(Violation("e", f"component {i} of relationship {r} has {what} typing entity"))

    for a in sorted(A):
        n = schema[a] - 1
        ident = tuple(range(1, n + 1))
        targets = sorted({d.rhs for d in cons.ids
                          if d.lhs == a and d.lhs_cols == ident and d.rhs_cols == ident
                          and d.rhs in (R | E) and schema[d.rhs] == n})
        if len(targets) != 1:
            what = "no" if not targets else "more than one (" + ", ".join(targets) + ")"
            out.append(Violation("f", f"attribute {a} has {what} owner"))

    for d in cons.ids:
        if d.lhs in E and d.rhs in R and len(d.lhs_cols) == 1:
            conv = InclusionDependency(d.rhs, d.rhs_cols, d.lhs, d.lhs_cols)
            if conv not in idset:
                out.append(Violation("g", f"{d.render()} lacks its converse {conv.render()}"))
        if d.lhs in R and d.rhs in A:
            conv = InclusionDependency(d.rhs, d.rhs_cols, d.lhs, d.lhs_cols)
            if conv not in idset:
                out.append(Violation("h", f"{d.render()} lacks its converse {conv.render()}"))
        if d.lhs in E and d.rhs in A and schema[d.rhs] == 2:
            conv = InclusionDependency(d.rhs, d.rhs_cols, d.lhs, d.lhs_cols)
            if conv not in idset:
                out.append(Violation("i", f"{d.render()} lacks its converse {conv.render()}"))
    return out


def _id_shape(d: InclusionDependency, schema, E, R, A) -> str | None:
    """Name of the admissible shape of an ID (1..8), or None."""
    l, r = d.lhs, d.rhs
    unary = d.lhs_cols == (1,) and d.rhs_cols == (1,)
    if l in E and r in E and unary:
        return "1"
    if l in E and r in R and d.lhs_cols == (1,):
        return "2"
    if l in R and r in E and d.rhs_cols == (1,) and len(d.lhs_cols) == 1:
        return "3"
    if l in R and r in R and schema[l] == schema[r] == len(d.lhs_cols):
        return "4"
    if l in A and r in E and unary:
        return "5"
    n = len(d.lhs_cols)
    ident = tuple(range(1, n + 1))
    if l in A and r in R and d.lhs_cols == ident and d.rhs_cols == ident and schema[r] == n == schema[l] - 1:
        return "6"
    if l in E and r in A and unary:
        return "7"
    if l in R and r in A and d.lhs_cols == ident and d.rhs_cols == ident and schema[l] == n == schema[r] - 1:
        return "8"
    return None


def recognize_cds(schema: Mapping[str, int] | Constraints,
                  ids: Iterable[InclusionDependency] = (),
                  kds: Iterable[KeyDependency] = ()) -> CDSet | list[Violation]:
    """Return a :class:`CDSet`, or the list of violated conditions.

    Accepts either a ready :class:`Constraints` or its three parts.
    """
    cons = schema if isinstance(schema, Constraints) else Constraints(schema, tuple(ids), tuple(kds))
    part = forced_partition(cons)
    violations = check_partition(cons, part)
    if violations:
        return violations
    return CDSet.from_constraints(cons, part)


def brute_force_partition(cons: Constraints) -> dict[str, str] | None:
    """Try all 3^|R| partitions; return the first valid one.  Test oracle."""
    preds = list(cons.schema)
    for choice in itertools.product((ENTITY, RELATIONSHIP, ATTRIBUTE), repeat=len(preds)):
        part = dict(zip(preds, choice))
        if not check_partition(cons, part):
            return part
    return None


def as_cdset(cons: Constraints) -> CDSet:
    """Like :func:`recognize_cds` but raising :class:`NotCDError`."""
    from .errors import NotCDError

    if isinstance(cons, CDSet):
        return cons
    res = recognize_cds(cons)
    if isinstance(res, CDSet):
        return res
    raise NotCDError([str(v) for v in res])
