"""Seeded generators of small random EER schemas, databases and queries.

Schemas are produced at the EER level and translated, so every generated
constraint set is a CD set by construction.  Used by the property tests and
the acceptance sweep; nothing in the library itself is randomised.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

from .cds import CDSet
from .cq import ConjunctiveQuery
from .eer import AttributeDef, EERSchema, EntityDef, RelationshipDef
from .relational import Database, Fact, const
from .terms import Atom, Variable
from .translation import to_cds


@dataclass(frozen=True)
class Instance:
    seed: int
    eer: EERSchema
    cds: CDSet
    db: Database
    query: ConjunctiveQuery


def random_eer(rng: random.Random, max_predicates: int = 6, max_arity: int = 3) -> EERSchema:
    n_ent = rng.randint(1, min(3, max_predicates))
    n_rel = rng.randint(0, min(2, max_predicates - n_ent))
    n_att = rng.randint(0, min(2, max_predicates - n_ent - n_rel))
    ents = [f"E{i}" for i in range(1, n_ent + 1)]

    among = {f"R{i}": tuple(rng.choice(ents) for _ in range(rng.randint(2, max(2, max_arity))))
             for i in range(1, n_rel + 1)}
    rel_isa: dict[str, set] = {r: set() for r in among}
    rels = list(among)
    for r in rels:
        for s in rels:
            if r != s and len(among[r]) == len(among[s]) and rng.random() < 0.3:
                perm = list(range(1, len(among[r]) + 1))
                if rng.random() < 0.4:
                    rng.shuffle(perm)
                rel_isa[r].add((s, tuple(perm)))

    entities = {}
    for e in ents:
        isa = {s for s in ents if s != e and rng.random() < 0.25}
        slots = [(r, c) for r in rels for c, x in enumerate(among[r], start=1) if x == e]
        least = {s for s in slots if rng.random() < 0.4}
        most = {s for s in slots if rng.random() < 0.4}
        entities[e] = EntityDef(e, frozenset(isa), frozenset(least), frozenset(most))
    relationships = {r: RelationshipDef(r, among[r], frozenset(rel_isa[r])) for r in rels}
    # an attribute adds one column to its owner, so keep the result within max_arity
    owners = ents + [r for r in rels if len(among[r]) < max_arity]
    attributes = {}
    for i in range(1, n_att + 1):
        owner = rng.choice(owners)
        attributes[f"A{i}"] = AttributeDef(f"A{i}", owner, rng.random() < 0.5, rng.random() < 0.4)
    return EERSchema(entities, relationships, attributes)


def random_database(rng: random.Random, schema: dict[str, int], max_facts: int = 12,
                    n_constants: int = 4) -> Database:
    pool = [const(f"c{i}") for i in range(1, n_constants + 1)]
    preds = sorted(schema)
    facts = set()
    for _ in range(rng.randint(0, max_facts)):
        p = rng.choice(preds)
        facts.add(Fact(p, tuple(rng.choice(pool) for _ in range(schema[p]))))
    return Database(facts, schema)


def random_query(rng: random.Random, schema: dict[str, int], max_atoms: int = 4, n_vars: int = 4,
                 constants: tuple = ("c1", "c2")) -> ConjunctiveQuery:
    preds = sorted(schema)
    vs = [Variable(f"X{i}") for i in range(1, n_vars + 1)]
    body = []
    for _ in range(rng.randint(1, max_atoms)):
        p = rng.choice(preds)
        args = tuple(const(rng.choice(constants)) if rng.random() < 0.1 else rng.choice(vs)
                     for _ in range(schema[p]))
        body.append(Atom(p, args))
    used = sorted({t for a in body for t in a.args if isinstance(t, Variable)}, key=lambda v: v.name)
    head = tuple(v for v in used if rng.random() < 0.6)
    return ConjunctiveQuery("q", head, tuple(body))


def random_instance(seed: int, max_predicates: int = 6, max_arity: int = 3, max_facts: int = 12,
                    max_atoms: int = 4) -> Instance:
    rng = random.Random(seed)
    eer = random_eer(rng, max_predicates, max_arity)
    cds = to_cds(eer)
    db = random_database(rng, dict(cds.schema), max_facts)
    q = random_query(rng, dict(cds.schema), max_atoms)
    return Instance(seed, eer, cds, db, q)


def instances(start_seed: int = 0, **kwargs):
    for seed in itertools.count(start_seed):
        yield random_instance(seed, **kwargs)
