import random

import pytest
from hypothesis import given, strategies as st

from eerquery import Database, const, evaluate_cq, fact, parse_query, recognize_cds, to_cds
from eerquery.cds import CDSet, brute_force_partition
from eerquery.randomgen import random_eer
from eerquery.relational import (Constant, Constraints, FreshGenerator, InclusionDependency as ID,
                                 KeyDependency as KD, fresh, join_graph_components, satisfies)
from eerquery.errors import SchemaError

FOOTBALL = [fact("player", "pirlo", "acMilan"), fact("player", "totti", "roma"), fact("team", "acMilan", "milan")]
PLAYS_FOR = ID("player", (2,), "team", (1,))


def test_satisfies_missing_team():
    assert not satisfies(Database(FOOTBALL), PLAYS_FOR)


def test_satisfies_after_chase_adds_team():
    db = Database(FOOTBALL + [fact("team", "roma", fresh(1))])
    assert satisfies(db, PLAYS_FOR)


def test_satisfies_empty_db():
    assert satisfies(Database(), PLAYS_FOR)
    assert satisfies(Database(), KD("team", (1,)))


def test_key_satisfaction():
    db = Database([fact("s", "a", "b"), fact("s", "a", "c")])
    assert not satisfies(db, KD("s", (1,)))
    assert satisfies(db, KD("s", (1, 2)))


def test_fresh_values_are_distinct_unknowns():
    db = Database([fact("r", "a", fresh(1)), fact("s", fresh(2))])
    assert not satisfies(db, ID("r", (2,), "s", (1,)))
    db = Database([fact("r", "a", fresh(1)), fact("s", fresh(1))])
    assert satisfies(db, ID("r", (2,), "s", (1,)))


def test_satisfies_unknown_predicate():
    db = Database([fact("team", "x", "y")], schema={"team": 2})
    with pytest.raises(SchemaError):
        satisfies(db, PLAYS_FOR)


def test_cq_over_football_chase():
    db = Database(FOOTBALL + [fact("team", "roma", fresh(1))])
    q = parse_query("q(X) :- team(X,Y).")
    expected = {(const("acMilan"),), (const("roma"),)}
    assert evaluate_cq(q, db, drop_fresh=True) == expected
    assert evaluate_cq(q, db, drop_fresh=False) == expected


def test_cq_drop_fresh():
    db = Database([fact("team", "roma", fresh(1))])
    q = parse_query("q(Y) :- team(X,Y).")
    assert evaluate_cq(q, db, drop_fresh=True) == set()
    assert evaluate_cq(q, db, drop_fresh=False) == {(fresh(1),)}


def test_cq_empty_db():
    assert evaluate_cq(parse_query("q(X) :- team(X,Y)."), Database()) == set()


def test_cq_constants_and_joins():
    db = Database([fact("r", "a", "b"), fact("r", "b", "c"), fact("s", "c")])
    assert evaluate_cq(parse_query("q(X) :- r(X,Y), r(Y,Z), s(Z)."), db) == {(const("a"),)}
    assert evaluate_cq(parse_query("q(Y) :- r(a,Y)."), db) == {(const("b"),)}
    assert evaluate_cq(parse_query("q() :- r(X,X)."), db) == set()
    assert evaluate_cq(parse_query("q() :- s(c)."), db) == {()}


def test_join_graph_examples():
    comps, cd = join_graph_components([fact("manager", "m"), fact("works_in", "m", "d")])
    assert len(comps) == 1 and cd == 2
    comps, cd = join_graph_components([fact("e1", "a"), fact("e2", "b")])
    assert len(comps) == 2 and cd == 1
    assert join_graph_components([]) == ([], 0)


def test_recognize_example(employee_cds):
    res = recognize_cds(employee_cds.schema, employee_cds.ids, employee_cds.kds)
    assert isinstance(res, CDSet)
    assert res.partition == employee_cds.partition


def test_recognize_missing_typing():
    res = recognize_cds({"r": 2, "s": 2}, [ID("r", (1, 2), "s", (1, 2))], [KD("s", (1,))])
    assert not isinstance(res, CDSet)
    assert "e" in {v.condition for v in res}


def test_recognize_empty():
    assert isinstance(recognize_cds({}), CDSet)


def _perturb(cons: Constraints, rng: random.Random) -> Constraints:
    ids, kds = list(cons.ids), list(cons.kds)
    preds = sorted(cons.schema)
    for _ in range(rng.randint(0, 2)):
        choice = rng.random()
        if choice < 0.3 and ids:
            ids.pop(rng.randrange(len(ids)))
        elif choice < 0.45 and kds:
            kds.pop(rng.randrange(len(kds)))
        elif choice < 0.8:
            l, r = rng.choice(preds), rng.choice(preds)
            w = rng.randint(1, min(cons.schema[l], cons.schema[r]))
            ids.append(ID(l, tuple(rng.sample(range(1, cons.schema[l] + 1), w)),
                          r, tuple(rng.sample(range(1, cons.schema[r] + 1), w))))
        else:
            wide = [p for p in preds if cons.schema[p] >= 2]
            if wide:
                p = rng.choice(wide)
                k = rng.randint(1, cons.schema[p] - 1)
                kds.append(KD(p, tuple(rng.sample(range(1, cons.schema[p] + 1), k))))
    return Constraints(cons.schema, tuple(ids), tuple(kds))


@pytest.mark.parametrize("seed", range(150))
def test_recognize_matches_brute_force(seed):
    rng = random.Random(seed)
    cons = _perturb(to_cds(random_eer(rng, max_predicates=5)), rng)
    fast = isinstance(recognize_cds(cons), CDSet)
    slow = brute_force_partition(cons) is not None
    assert fast == slow


constants = st.one_of(st.builds(const, st.text("abcxyz019_", min_size=1, max_size=4)),
                      st.builds(fresh, st.integers(min_value=1, max_value=50)))


@given(constants, constants, constants)
def test_constant_order_is_strict_total(a, b, c):
    assert not a < a
    assert (a < b) + (b < a) + (a == b) == 1
    if a < b and b < c:
        assert a < c
    if not a.is_fresh and b.is_fresh:
        assert a < b


def test_fresh_generator_is_monotone():
    gen = FreshGenerator()
    out = [gen() for _ in range(5)]
    assert [c.value for c in out] == [1, 2, 3, 4, 5]
    assert all(isinstance(c, Constant) and c.is_fresh for c in out)


@given(st.lists(st.tuples(st.sampled_from("ps"), st.sampled_from("abc"), st.sampled_from("abc")), max_size=8),
       st.lists(st.tuples(st.sampled_from("ps"), st.sampled_from("abc"), st.sampled_from("abc")), max_size=4))
def test_cq_is_monotone(base, extra):
    q = parse_query("q(X) :- p(X,Y), s(Y,Z).")
    small = Database([fact(*t) for t in base], schema={"p": 2, "s": 2})
    big = Database([fact(*t) for t in base + extra], schema={"p": 2, "s": 2})
    assert evaluate_cq(q, small) <= evaluate_cq(q, big)


def test_id_monotone_under_rhs_additions():
    db = Database([fact("r", "a", "b"), fact("s", "b")])
    dep = ID("r", (2,), "s", (1,))
    assert satisfies(db, dep)
    bigger = Database(list(db) + [fact("s", x) for x in "xyz"])
    assert satisfies(bigger, dep)
