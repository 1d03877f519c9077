"""Translation of EER schemas into relational schemas and CDs.

Every emitted dependency is tagged with the number of the translation rule
that produced it:

1. entity attribute ``a[1] <= e[1]``
2. relationship attribute ``a[1..n] <= r[1..n]``
3. component typing ``r[i] <= e_i[1]``
4. mandatory entity attribute ``e[1] <= a[1]``
5. mandatory relationship attribute ``r[1..n] <= a[1..n]``
6. functional entity attribute ``key(a) = {1}``
7. functional relationship attribute ``key(a) = {1..n}``
8. entity is-a ``e1[1] <= e2[1]``
9. relationship is-a ``r1[1..n] <= r2[j1..jn]``
10. mandatory participation ``e[1] <= r[c]``
11. functional participation ``key(r) = {c}``
"""

from __future__ import annotations

from .cds import CDSet, recognize_cds
from .eer import EERSchema, validate_eer
from .errors import EERSemanticError, SchemaError
from .relational import Constraints, InclusionDependency, KeyDependency


def to_relational(schema: EERSchema) -> dict[str, int]:
    """Predicate name (lower-cased EER name) to arity."""
    problems = validate_eer(schema)
    if problems:
        raise EERSemanticError(problems)
    out: dict[str, int] = {}
    origin: dict[str, str] = {}

    def add(name: str, arity: int) -> None:
        pred = name.lower()
        if pred in out:
            raise SchemaError(f"names {origin[pred]} and {name} both map to predicate {pred}")
        out[pred] = arity
        origin[pred] = name

    for e in schema.entities.values():
        add(e.name, 1)
    for r in schema.relationships.values():
        add(r.name, r.arity)
    for a in schema.attributes.values():
        owner = schema.relationships.get(a.owner)
        add(a.name, 2 if owner is None else owner.arity + 1)
    return out


def _id(lhs, lc, rhs, rc, rule) -> InclusionDependency:
    return InclusionDependency(lhs.lower(), tuple(lc), rhs.lower(), tuple(rc), rule=rule)


def to_constraints(schema: EERSchema) -> Constraints:
    rel_schema = to_relational(schema)
    ids: list[InclusionDependency] = []
    kds: list[KeyDependency] = []
    for a in schema.attributes.values():
        r = schema.relationships.get(a.owner)
        if r is None:
            ids.append(_id(a.name, [1], a.owner, [1], 1))
            if a.mandatory:
                ids.append(_id(a.owner, [1], a.name, [1], 4))
            if a.functional:
                kds.append(KeyDependency(a.name.lower(), (1,), rule=6))
        else:
            cols = list(range(1, r.arity + 1))
            ids.append(_id(a.name, cols, r.name, cols, 2))
            if a.mandatory:
                ids.append(_id(r.name, cols, a.name, cols, 5))
            if a.functional:
                kds.append(KeyDependency(a.name.lower(), tuple(cols), rule=7))
    for r in schema.relationships.values():
        for i, e in enumerate(r.among, start=1):
            ids.append(_id(r.name, [i], e, [1], 3))
    for e in schema.entities.values():
        for sup in e.isa:
            ids.append(_id(e.name, [1], sup, [1], 8))
    for r in schema.relationships.values():
        for target, perm in r.isa:
            ids.append(_id(r.name, range(1, r.arity + 1), target, perm, 9))
    for e in schema.entities.values():
        for rel, c in e.participates_at_least_once:
            ids.append(_id(e.name, [1], rel, [c], 10))
        for rel, c in e.participates_at_most_once:
            kds.append(KeyDependency(rel.lower(), (c,), rule=11))
    return Constraints(rel_schema, tuple(ids), tuple(kds))


def to_cds(schema: EERSchema) -> CDSet:
    """Translate and recognise; the result is always a CD set."""
    res = recognize_cds(to_constraints(schema))
    if not isinstance(res, CDSet):
        raise SchemaError("translation produced a non-CD set: " + "; ".join(map(str, res)))
    return res
