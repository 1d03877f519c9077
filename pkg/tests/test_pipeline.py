from concurrent.futures import ThreadPoolExecutor

import pytest

from eerquery import (Database, LevelBoundError, NotCDError, certain_answers, cross_validate, fact,
                      parse_constraints, parse_database, parse_eer, parse_query, to_cds)
from eerquery.pipeline import (BOTH, CHASE, CHASE_PATH_MAX_FACTS, CONSISTENT, INCONSISTENT, REWRITE,
                               ProgramCache, truncation_check)
from eerquery.randomgen import random_instance
from eerquery.errors import ResourceLimitError
from eerquery.terms import Skolem
from conftest import read


def names(result):
    return {tuple(str(c) for c in t) for t in result.answers}


def test_football_by_chase():
    cons = parse_constraints(read("football.cds"))
    res = certain_answers(cons, parse_database(read("football.facts")), parse_query(read("team.cq")), path=CHASE)
    assert res.status == CONSISTENT
    assert names(res) == {("acMilan",), ("roma",)}
    # the chase terminates on this instance, so the best-effort answers are exact
    assert res.exact
    assert res.diagnostics["not_cd"]


def test_football_refuses_rewriting():
    cons = parse_constraints(read("football.cds"))
    with pytest.raises(NotCDError):
        certain_answers(cons, parse_database(read("football.facts")), parse_query(read("team.cq")), path=REWRITE)
    with pytest.raises(NotCDError):
        certain_answers(cons, parse_database(read("football.facts")), parse_query(read("team.cq")),
                        strict_cds=True)


@pytest.mark.parametrize("path", [REWRITE, CHASE, BOTH])
def test_employee_manages_dept(employee_eer, employee_db, manages_dept_query, path):
    res = certain_answers(employee_eer, employee_db, manages_dept_query, path=path)
    assert res.status == CONSISTENT and res.exact
    assert names(res) == {("m",)}
    if path == BOTH:
        assert res.diagnostics["paths_agree"]


@pytest.mark.parametrize("path", [REWRITE, CHASE])
def test_infinite_model_instance(infinite, path):
    cons, db, q = infinite
    res = certain_answers(cons, db, q, path=path)
    assert res.status == CONSISTENT
    assert res.answers == ()


def test_failing_instance(failing):
    cons, db = failing
    res = certain_answers(cons, db, parse_query("q(X) :- r(X,Y)."), path=CHASE)
    assert res.status == INCONSISTENT
    assert {str(f) for f in res.witness.witness} == {"s(a,b)", "s(a,c)"}


def test_cross_validate_example(employee_cds, employee_db, manages_dept_query):
    rep = cross_validate(employee_cds, employee_db, manages_dept_query)
    assert rep.agree and not rep.disagreements()
    for outcome in (rep.rewriting, rep.chase, rep.oracle):
        assert outcome.status == CONSISTENT
        assert {tuple(map(str, t)) for t in outcome.answers} == {("m",)}


def test_cross_validate_failing():
    cds = to_cds(parse_eer(read("failing.eer")))
    rep = cross_validate(cds, parse_database(read("failing_eer.facts")), parse_query(read("s.cq")))
    assert not rep.existence.exists
    assert rep.rewriting.status == rep.chase.status == rep.oracle.status == INCONSISTENT
    assert rep.agree


def test_cross_validate_refuses_non_cds(failing):
    cons, db = failing
    with pytest.raises(NotCDError):
        cross_validate(cons, db, parse_query("q(X) :- r(X,Y)."))


def test_attribute_query(employee_eer):
    db = parse_database("manager(m). emp_name(m,ann). works_in(e,d). since(e,d,y2001).")
    q = parse_query("q(N) :- manager(X), emp_name(X,N).")
    for path in (REWRITE, CHASE):
        assert names(certain_answers(employee_eer, db, q, path=path)) == {("ann",)}
    q = parse_query("q(X,Y) :- since(X,Y,Z).")
    assert names(certain_answers(employee_eer, db, q, path=BOTH)) == {("e", "d")}
    res = certain_answers(employee_eer, db, q, path=REWRITE, conservative=True)
    assert res.path == CHASE


def test_auto_path_choice(employee_eer, employee_db, manages_dept_query):
    res = certain_answers(employee_eer, employee_db, manages_dept_query)
    assert res.path == CHASE
    big = [fact("manager", f"m{i}") for i in range(CHASE_PATH_MAX_FACTS)] + [fact("works_in", "m0", "d")]
    res = certain_answers(employee_eer, Database(big), manages_dept_query, cd_bound=2)
    assert res.path == REWRITE


def test_large_bound_needs_confirmation(infinite):
    cons, db, q = infinite
    with pytest.raises(LevelBoundError):
        certain_answers(cons, db, q, path=CHASE, max_level=10 ** 6)


def test_cache_is_shared(employee_eer, employee_db, manages_dept_query):
    cache = ProgramCache()
    cds = to_cds(employee_eer)

    def run(_):
        return cache.get(cds, manages_dept_query, 50, 100_000)

    with ThreadPoolExecutor(4) as pool:
        bundles = list(pool.map(run, range(8)))
    assert len(cache) == 1
    assert all(b is bundles[0] for b in bundles)


def test_answers_are_plain_constants():
    for seed in range(40):
        inst = random_instance(seed)
        try:
            rep = cross_validate(inst.cds, inst.db, inst.query, max_steps=3000, max_facts=50_000, max_rules=3000)
        except ResourceLimitError:
            continue
        for outcome in (rep.rewriting, rep.chase, rep.oracle):
            for t in outcome.answers:
                assert not any(isinstance(v, Skolem) or v.is_fresh for v in t)


def test_monotone_under_consistent_extension(employee_eer, manages_dept_query):
    small = parse_database("manager(m). works_in(m,d).")
    big = parse_database("manager(m). works_in(m,d). manages(k,e). dept(x).")
    a = certain_answers(employee_eer, small, manages_dept_query, path=REWRITE)
    b = certain_answers(employee_eer, big, manages_dept_query, path=REWRITE)
    assert b.consistent and a.answer_set() <= b.answer_set()
    assert names(b) == {("m",), ("k",)}


def test_truncation_check(infinite, employee_eer, employee_db, manages_dept_query):
    cons, db, q = infinite
    at_stop, deeper = truncation_check(cons, db, q)
    assert at_stop == deeper
    at_stop, deeper = truncation_check(to_cds(employee_eer), employee_db, manages_dept_query)
    assert at_stop == deeper and {tuple(map(str, t)) for t in at_stop.answers} == {("m",)}
