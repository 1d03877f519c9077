"""Conjunctive queries and their evaluation by homomorphism search."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import SchemaError
from .relational import FRESH, Constant, Database, Fact
from .terms import Atom, Variable


@dataclass(frozen=True)
class ConjunctiveQuery:
    """``name(head) :- body`` where body terms are variables or constants."""

    name: str
    head: tuple[Variable, ...]
    body: tuple[Atom, ...]

    def __post_init__(self):
        if not self.body:
            raise SchemaError("a conjunctive query needs at least one body atom")
        if len(set(self.head)) != len(self.head):
            raise SchemaError("head variables of a query must be distinct")
        body_vars = set()
        for a in self.body:
            for t in a.args:
                if isinstance(t, Variable):
                    body_vars.add(t)
                elif not isinstance(t, Constant):
                    raise SchemaError(f"query term {t} is neither a variable nor a constant")
                elif t.is_fresh:
                    raise SchemaError("fresh constants cannot appear in queries")
        for v in self.head:
            if v not in body_vars:
                raise SchemaError(f"head variable {v} does not occur in the body")

    @property
    def arity(self) -> int:
        return len(self.head)

    def check_schema(self, schema: Mapping[str, int]) -> None:
        for a in self.body:
            if a.pred not in schema:
                raise SchemaError(f"query uses unknown predicate {a.pred}")
            if schema[a.pred] != len(a.args):
                raise SchemaError(f"query atom {a} has arity {len(a.args)}, predicate {a.pred} has {schema[a.pred]}")
        if self.name in schema:
            raise SchemaError(f"query name {self.name} clashes with a schema predicate")

    def variables(self) -> list[Variable]:
        seen: dict[Variable, None] = {}
        for a in self.body:
            for t in a.args:
                if isinstance(t, Variable):
                    seen.setdefault(t)
        return list(seen)

    def __str__(self) -> str:
        head = f"{self.name}({','.join(str(v) for v in self.head)})"
        return f"{head} :- {', '.join(str(a) for a in self.body)}."


class _Index:
    """Lazily built hash indexes on (predicate, bound positions)."""

    def __init__(self, relations: Mapping[str, list[tuple]]):
        self.relations = relations
        self._cache: dict[tuple, dict] = {}

    def lookup(self, pred: str, positions: tuple[int, ...], key: tuple) -> list[tuple]:
        if not positions:
            return self.relations.get(pred, [])
        idx = self._cache.get((pred, positions))
        if idx is None:
            idx = defaultdict(list)
            for t in self.relations.get(pred, []):
                idx[tuple(t[i] for i in positions)].append(t)
            self._cache[(pred, positions)] = idx
        return idx.get(key, [])


def homomorphisms(body: Iterable[Atom], relations: Mapping[str, list[tuple]]):
    """Yield every variable assignment mapping the body into the relations."""
    atoms = list(body)
    index = _Index(relations)
    order = _plan(atoms, relations)
    binding: dict[Variable, object] = {}

    def step(k: int):
        if k == len(order):
            yield dict(binding)
            return
        a = atoms[order[k]]
        pos, key = [], []
        for i, t in enumerate(a.args):
            if isinstance(t, Variable):
                if t in binding:
                    pos.append(i)
                    key.append(binding[t])
            else:
                pos.append(i)
                key.append(t)
        for tup in index.lookup(a.pred, tuple(pos), tuple(key)):
            added = []
            ok = True
            for i, t in enumerate(a.args):
                if isinstance(t, Variable):
                    v = binding.get(t)
                    if v is None:
                        binding[t] = tup[i]
                        added.append(t)
                    elif v != tup[i]:
                        ok = False
                        break
            if ok:
                yield from step(k + 1)
            for t in added:
                del binding[t]

    yield from step(0)


def _plan(atoms: list[Atom], relations: Mapping[str, list[tuple]]) -> list[int]:
    """Greedy join order: most bound terms first, then smallest relation."""
    remaining = set(range(len(atoms)))
    bound: set[Variable] = set()
    order = []
    while remaining:
        def score(i: int):
            a = atoms[i]
            nb = sum(1 for t in a.args if not isinstance(t, Variable) or t in bound)
            return (-nb, len(relations.get(a.pred, ())), i)
        best = min(remaining, key=score)
        order.append(best)
        remaining.discard(best)
        bound |= {t for t in atoms[best].args if isinstance(t, Variable)}
    return order


def evaluate_cq(q: ConjunctiveQuery, db: Database | Iterable[Fact], drop_fresh: bool = True) -> set[tuple[Constant, ...]]:
    """Answers of ``q`` over ``db``; with ``drop_fresh`` tuples with fresh values are removed."""
    if not isinstance(db, Database):
        db = Database(db)
    relations = {p: db.relation(p) for p in {a.pred for a in q.body}}
    out = set()
    for h in homomorphisms(q.body, relations):
        tup = tuple(h[v] for v in q.head)
        if drop_fresh and any(c.tag == FRESH for c in tup):
            continue
        out.add(tup)
    return out
