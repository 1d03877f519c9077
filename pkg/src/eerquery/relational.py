"""Relational building blocks: constants, facts, databases and dependencies.

Constants come in two flavours.  Non-fresh constants are the values a user
writes down; fresh constants are placeholders invented by the chase.  Every
non-fresh constant sorts before every fresh one, non-fresh constants sort by
name and fresh ones by ordinal, so the order is total and cheap to compute.
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, NamedTuple, Union

from .errors import SchemaError

NON_FRESH = 0
FRESH = 1

_BARE_CONSTANT = re.compile(r"[a-z0-9][A-Za-z0-9_]*\Z")


class Constant(NamedTuple):
    """A database value.

    ``tag`` is 0 for non-fresh constants (``value`` is the name) and 1 for
    fresh constants (``value`` is the ordinal).  Tuple comparison gives the
    required total order for free.
    """

    tag: int
    value: Union[str, int]

    @property
    def is_fresh(self) -> bool:
        return self.tag == FRESH

    def __str__(self) -> str:
        if self.tag == FRESH:
            return f"φ{self.value}"
        name = self.value
        if _BARE_CONSTANT.match(name):
            return name
        return "'" + name.replace("\\", "\\\\").replace("'", "\\'") + "'"


def const(name: str) -> Constant:
    """Build a non-fresh constant."""
    return Constant(NON_FRESH, name)


def fresh(ordinal: int) -> Constant:
    """Build a fresh constant; ordinals start at 1."""
    return Constant(FRESH, ordinal)


class FreshGenerator:
    """Hands out fresh constants with strictly increasing ordinals."""

    def __init__(self, start: int = 1):
        self._next = start

    def __call__(self) -> Constant:
        c = Constant(FRESH, self._next)
        self._next += 1
        return c

    @property
    def next_ordinal(self) -> int:
        return self._next


@dataclass(frozen=True)
class Fact:
    """A ground atom; the level is bookkeeping and ignored by equality."""

    pred: str
    args: tuple[Constant, ...]
    level: int = field(default=0, compare=False)

    def sort_key(self) -> tuple:
        return (self.pred, self.args)

    def __str__(self) -> str:
        return f"{self.pred}({','.join(str(a) for a in self.args)})"

    def __lt__(self, other: "Fact") -> bool:
        return self.sort_key() < other.sort_key()


def fact(pred: str, *names: Union[str, Constant], level: int = 0) -> Fact:
    """Convenience constructor: plain strings become non-fresh constants."""
    args = tuple(a if isinstance(a, Constant) else const(a) for a in names)
    return Fact(pred, args, level)


class Database:
    """A finite, duplicate-free set of facts over an optional schema.

    When the same atom is supplied twice with different levels the lower level
    wins.  If no schema is given it is inferred from the facts.
    """

    def __init__(self, facts: Iterable[Fact] = (), schema: Mapping[str, int] | None = None):
        best: dict[tuple, Fact] = {}
        for f in facts:
            key = (f.pred, f.args)
            old = best.get(key)
            if old is None or f.level < old.level:
                best[key] = f
        inferred: dict[str, int] = {}
        for f in best.values():
            arity = inferred.setdefault(f.pred, len(f.args))
            if arity != len(f.args):
                raise SchemaError(f"predicate {f.pred} used with arities {arity} and {len(f.args)}")
        if schema is not None:
            schema = dict(schema)
            for pred, arity in inferred.items():
                if pred not in schema:
                    raise SchemaError(f"fact over unknown predicate {pred}")
                if schema[pred] != arity:
                    raise SchemaError(f"predicate {pred} has arity {schema[pred]}, fact has {arity}")
        self.schema: dict[str, int] = schema if schema is not None else inferred
        self.explicit_schema = schema is not None
        self._facts = frozenset(best.values())
        self._by_pred: dict[str, list[tuple[Constant, ...]]] | None = None

    @property
    def facts(self) -> frozenset[Fact]:
        return self._facts

    def __iter__(self) -> Iterator[Fact]:
        return iter(self._facts)

    def __len__(self) -> int:
        return len(self._facts)

    def __contains__(self, item: object) -> bool:
        return item in self._facts

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Database):
            return NotImplemented
        return self._facts == other._facts

    def __hash__(self) -> int:
        return hash(self._facts)

    def __repr__(self) -> str:
        return f"Database({sorted(self._facts)!r})"

    def sorted_facts(self) -> list[Fact]:
        return sorted(self._facts, key=Fact.sort_key)

    def relation(self, pred: str) -> list[tuple[Constant, ...]]:
        if self._by_pred is None:
            by_pred: dict[str, list[tuple[Constant, ...]]] = defaultdict(list)
            for f in self._facts:
                by_pred[f.pred].append(f.args)
            self._by_pred = dict(by_pred)
        return self._by_pred.get(pred, [])

    def constants(self) -> set[Constant]:
        return {c for f in self._facts for c in f.args}

    def has_fresh(self) -> bool:
        return any(c.tag == FRESH for f in self._facts for c in f.args)

    def max_fresh_ordinal(self) -> int:
        return max((c.value for f in self._facts for c in f.args if c.tag == FRESH), default=0)

    def with_schema(self, schema: Mapping[str, int]) -> "Database":
        return Database(self._facts, schema)


def _check_positions(pred: str, cols: tuple[int, ...], schema: Mapping[str, int], what: str) -> None:
    if pred not in schema:
        raise SchemaError(f"{what} mentions unknown predicate {pred}")
    arity = schema[pred]
    if len(set(cols)) != len(cols):
        raise SchemaError(f"{what}: repeated position in {pred}{list(cols)}")
    for c in cols:
        if not 1 <= c <= arity:
            raise SchemaError(f"{what}: position {c} outside 1..{arity} of {pred}")


@dataclass(frozen=True)
class InclusionDependency:
    """``lhs[lhs_cols] <= rhs[rhs_cols]`` with 1-based positions.

    The column pairs are normalised so that ``lhs_cols`` is increasing; the
    two spellings of the same dependency therefore compare equal.  ``label``
    and ``rule`` are provenance only.
    """

    lhs: str
    lhs_cols: tuple[int, ...]
    rhs: str
    rhs_cols: tuple[int, ...]
    label: str = field(default="", compare=False)
    rule: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.lhs_cols) != len(self.rhs_cols):
            raise SchemaError(f"inclusion dependency with column lists of different length: {self.lhs}, {self.rhs}")
        if not self.lhs_cols:
            raise SchemaError("inclusion dependency with no columns")
        pairs = sorted(zip(self.lhs_cols, self.rhs_cols))
        object.__setattr__(self, "lhs_cols", tuple(p[0] for p in pairs))
        object.__setattr__(self, "rhs_cols", tuple(p[1] for p in pairs))

    def sort_key(self) -> tuple:
        return ("id", self.lhs, self.lhs_cols, self.rhs, self.rhs_cols)

    def render(self) -> str:
        lc = ",".join(map(str, self.lhs_cols))
        rc = ",".join(map(str, self.rhs_cols))
        return f"id: {self.lhs}[{lc}] <= {self.rhs}[{rc}]"

    def __str__(self) -> str:
        return self.render()

    def is_full_width(self, schema: Mapping[str, int]) -> bool:
        return (len(self.lhs_cols) == schema[self.lhs] == schema[self.rhs])

    def validate(self, schema: Mapping[str, int]) -> None:
        _check_positions(self.lhs, self.lhs_cols, schema, self.render())
        _check_positions(self.rhs, self.rhs_cols, schema, self.render())


@dataclass(frozen=True)
class KeyDependency:
    """``key(pred) = cols`` with 1-based positions, stored sorted."""

    pred: str
    cols: tuple[int, ...]
    label: str = field(default="", compare=False)
    rule: int | None = field(default=None, compare=False)

    def __post_init__(self):
        cols = tuple(sorted(set(self.cols)))
        if not cols:
            raise SchemaError(f"key of {self.pred} must not be empty")
        object.__setattr__(self, "cols", cols)

    def sort_key(self) -> tuple:
        return ("kd", self.pred, self.cols)

    def render(self) -> str:
        return f"kd: key({self.pred}) = {{{','.join(map(str, self.cols))}}}"

    def __str__(self) -> str:
        return self.render()

    def validate(self, schema: Mapping[str, int]) -> None:
        _check_positions(self.pred, self.cols, schema, self.render())
        if schema[self.pred] < 2:
            raise SchemaError(f"{self.render()}: keys need a predicate of arity at least 2")


Dependency = Union[InclusionDependency, KeyDependency]


def dependency_sort_key(dep: Dependency) -> tuple:
    return dep.sort_key()


@dataclass(frozen=True)
class Constraints:
    """A relational schema with its inclusion and key dependencies.

    Dependencies are kept sorted by their canonical key and every dependency
    carries a unique label.  Missing labels are ``sigma1``, ``sigma2``, ...
    numbered by translation rule and then by input order.
    """

    schema: Mapping[str, int]
    ids: tuple[InclusionDependency, ...] = ()
    kds: tuple[KeyDependency, ...] = ()

    def __post_init__(self):
        schema = dict(sorted(self.schema.items()))
        for pred, arity in schema.items():
            if arity < 1:
                raise SchemaError(f"predicate {pred} must have arity at least 1")
        object.__setattr__(self, "schema", schema)
        ids = _dedupe(self.ids)
        kds = _dedupe(self.kds)
        for d in (*ids, *kds):
            d.validate(schema)
        ids, kds = _assign_labels(ids, kds)
        object.__setattr__(self, "ids", tuple(sorted(ids, key=dependency_sort_key)))
        object.__setattr__(self, "kds", tuple(sorted(kds, key=dependency_sort_key)))

    @property
    def dependencies(self) -> tuple[Dependency, ...]:
        return (*self.ids, *self.kds)

    @property
    def max_arity(self) -> int:
        return max(self.schema.values(), default=0)

    def by_label(self, label: str) -> Dependency:
        for d in self.dependencies:
            if d.label == label:
                return d
        raise KeyError(label)

    def restrict(self, ids: Iterable[InclusionDependency] | None = None,
                 kds: Iterable[KeyDependency] | None = None) -> "Constraints":
        """Same schema, a chosen subset of the dependencies (labels kept)."""
        return Constraints(self.schema,
                           tuple(self.ids if ids is None else ids),
                           tuple(self.kds if kds is None else kds))


def _dedupe(deps: Iterable[Dependency]) -> list:
    seen: dict[Dependency, Dependency] = {}
    for d in deps:
        old = seen.get(d)
        if old is None:
            seen[d] = d
        elif (d.rule or 99) < (old.rule or 99):
            seen[d] = d
    return list(seen.values())


def _assign_labels(ids: list, kds: list) -> tuple[list, list]:
    deps = ids + kds
    given = [d.label for d in deps if d.label]
    if len(given) != len(set(given)):
        dup = sorted({x for x in given if given.count(x) > 1})
        raise SchemaError(f"duplicate dependency label(s): {', '.join(dup)}")
    for lab in given:
        if not re.fullmatch(r"[A-Za-z][A-Za-z0-9_]*", lab):
            raise SchemaError(f"dependency label {lab!r} must be an identifier")
    if all(d.label for d in deps):
        return ids, kds
    used = set(given)
    counter = 0
    relabelled: dict[int, Dependency] = {}
    order = {id(d): i for i, d in enumerate(deps)}
    for d in sorted(deps, key=lambda d: (d.rule if d.rule is not None else 99, order[id(d)])):
        if d.label:
            continue
        counter += 1
        while f"sigma{counter}" in used:
            counter += 1
        used.add(f"sigma{counter}")
        relabelled[id(d)] = _with_label(d, f"sigma{counter}")
    return ([relabelled.get(id(d), d) for d in ids], [relabelled.get(id(d), d) for d in kds])


def _with_label(d: Dependency, label: str) -> Dependency:
    if isinstance(d, InclusionDependency):
        return InclusionDependency(d.lhs, d.lhs_cols, d.rhs, d.rhs_cols, label, d.rule)
    return KeyDependency(d.pred, d.cols, label, d.rule)


def satisfies(db: Database, dep: Dependency) -> bool:
    """Check one dependency, treating each fresh constant as a distinct unknown.

    Since fresh constants are only ever equal to themselves, plain syntactic
    equality already implements the fresh-renaming semantics.
    """
    preds = (dep.lhs, dep.rhs) if isinstance(dep, InclusionDependency) else (dep.pred,)
    if db.explicit_schema:
        for p in preds:
            if p not in db.schema:
                raise SchemaError(f"{dep.render()} mentions predicate {p} which is not in the database schema")
    if isinstance(dep, InclusionDependency):
        lx = [c - 1 for c in dep.lhs_cols]
        ry = [c - 1 for c in dep.rhs_cols]
        targets = {tuple(t[i] for i in ry) for t in db.relation(dep.rhs)}
        return all(tuple(t[i] for i in lx) in targets for t in db.relation(dep.lhs))
    kx = [c - 1 for c in dep.cols]
    seen: dict[tuple, tuple] = {}
    for t in db.relation(dep.pred):
        k = tuple(t[i] for i in kx)
        other = seen.setdefault(k, t)
        if other != t:
            return False
    return True


def join_graph_components(db: Database | Iterable[Fact]) -> tuple[list[list[Fact]], int]:
    """Connected components of the join graph and the largest component size.

    Two facts are adjacent when they share a constant.  Components are returned
    sorted internally and among themselves for reproducible output.
    """
    facts = sorted(db, key=Fact.sort_key)
    parent = list(range(len(facts)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict[Constant, int] = {}
    for i, f in enumerate(facts):
        for c in f.args:
            j = owner.setdefault(c, i)
            if j != i:
                a, b = find(i), find(j)
                if a != b:
                    parent[max(a, b)] = min(a, b)
    groups: dict[int, list[Fact]] = defaultdict(list)
    for i, f in enumerate(facts):
        groups[find(i)].append(f)
    comps = sorted(groups.values(), key=lambda g: g[0].sort_key())
    return comps, max((len(g) for g in comps), default=0)
