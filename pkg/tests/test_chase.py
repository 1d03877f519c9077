import pytest

from eerquery import (Database, ResourceLimitError, build_chase, build_eq_chase, chase_exists, compute_level_bound,
                      equality_eliminate, fact, isomorphic, parse_constraints, parse_database)
from eerquery.chase import COMPLETED, FAILED, TRUNCATED
from eerquery.errors import LevelBoundError, SchemaError
from eerquery.randomgen import random_instance
from eerquery.relational import fresh, satisfies

EXAMPLE_CHASE = {fact("manager", "m"), fact("works_in", "m", "d"), fact("employee", "m"),
                 fact("manages", "m", "d"), fact("dept", "d")}


def test_example_chase(employee_cds, employee_db):
    res = build_chase(employee_db, employee_cds)
    assert res.status == COMPLETED
    assert set(res.facts) == EXAMPLE_CHASE
    assert any(s.endswith(": φ1->d") for s in res.steps)


def test_example_chase_levels(employee_cds, employee_db):
    levels = {str(f): f.level for f in build_chase(employee_db, employee_cds).facts}
    assert levels == {"manager(m)": 0, "works_in(m,d)": 0, "employee(m)": 1, "manages(m,d)": 1, "dept(d)": 1}


def test_completed_chase_satisfies_everything(employee_cds, employee_db):
    res = build_chase(employee_db, employee_cds)
    db = res.database()
    assert all(satisfies(db, d) for d in employee_cds.dependencies)


def test_chase_of_empty_db(employee_cds):
    res = build_chase(Database(), employee_cds)
    assert res.status == COMPLETED and not res.facts


def test_chase_exists_examples(employee_cds, employee_db, failing):
    assert chase_exists(employee_db, employee_cds).exists
    assert chase_exists(Database(), employee_cds).exists
    cons, db = failing
    cert = chase_exists(db, cons)
    assert not cert.exists
    assert {str(f) for f in cert.witness} == {"s(a,b)", "s(a,c)"}
    assert cert.failure.kd.pred == "s"


def test_failing_chase(failing):
    cons, db = failing
    res = build_chase(db, cons)
    assert res.status == FAILED
    assert sorted(str(f) for f in res.failure.witness) == ["s(a,b)", "s(a,c)"]


def test_infinite_model_truncates(infinite):
    cons, db, _ = infinite
    res = build_chase(db, cons, max_level=12)
    assert res.status == TRUNCATED
    got = {str(f) for f in res.facts}
    assert {"r(φ1,c)", "a(φ1)", "b(φ1)", "r(φ2,φ1)"} <= got
    assert "a(c)" not in got
    assert res.max_level() <= 12


def test_unbounded_infinite_chase_hits_step_cap(infinite):
    cons, db, _ = infinite
    with pytest.raises(ResourceLimitError):
        build_chase(db, cons, max_steps=200)


def test_levels_increase_by_one_along_arcs(infinite):
    cons, db, _ = infinite
    res = build_chase(db, cons, max_level=20)
    for parent, child, _ in res.forest:
        assert child.level == parent.level + 1


def test_existence_beyond_isa_ids(data_dir):
    # e2[1] <= r1[2] creates r1(φ,c3); its is-a copy r2(φ,c3) is merged into
    # r2(c2,c3) by key(r2) = {2}, and then r1(c2,c3) clashes with r1(c2,c4)
    cons = parse_constraints((data_dir / "late_failure.cds").read_text())
    db = parse_database((data_dir / "late_failure.facts").read_text())
    assert build_chase(db, cons.restrict(ids=[d for d in cons.ids if d.rule == 9])).status == COMPLETED
    cert = chase_exists(db, cons)
    assert not cert.exists
    assert cert.method == "bounded"
    assert build_chase(db, cons, max_level=cert.level).failed


def test_determinism(employee_cds, employee_db, infinite):
    a = build_chase(employee_db, employee_cds)
    b = build_chase(employee_db, employee_cds)
    assert a.steps == b.steps and a.facts == b.facts
    cons, db, _ = infinite
    a, b = build_chase(db, cons, max_level=30), build_chase(db, cons, max_level=30)
    assert a.steps == b.steps and sorted(map(str, a.facts)) == sorted(map(str, b.facts))


def test_eq_chase_example(employee_cds, employee_db):
    res = build_eq_chase(employee_db, employee_cds)
    assert res.status == COMPLETED
    eqs = {str(f) for f in res.eq_facts}
    assert {"eq(m,m)", "eq(d,d)", "eq(φ1,φ1)", "eq(φ1,d)", "eq(d,φ1)"} <= eqs
    facts = {str(f) for f in res.facts}
    assert {"employee(m)", "manages(m,φ1)", "works_in(m,φ1)"} <= facts


def test_eq_chase_failing(failing):
    cons, db = failing
    res = build_eq_chase(db, cons)
    assert res.status == FAILED
    assert any("eq(b,c)" in s for s in res.steps)


def test_eq_chase_without_applicable_rules():
    cons = parse_constraints("pred e/1\npred f/1\nid: e[1] <= f[1]\n")
    db = parse_database("f(a). f(b).")
    res = build_eq_chase(db, cons)
    assert res.status == COMPLETED
    assert {str(f) for f in res.eq_facts} == {"eq(a,a)", "eq(b,b)"}
    assert set(res.facts) == set(db)


def test_equality_elimination_example(employee_cds, employee_db):
    res = equality_eliminate(build_eq_chase(employee_db, employee_cds))
    assert set(res.facts) == EXAMPLE_CHASE


def test_equality_elimination_reflexive_only():
    cons = parse_constraints("pred e/1\npred f/1\nid: e[1] <= f[1]\n")
    db = parse_database("e(a). f(a).")
    assert set(equality_eliminate(build_eq_chase(db, cons)).facts) == set(db)


def test_equality_elimination_refuses_failed(failing):
    cons, db = failing
    with pytest.raises(SchemaError):
        equality_eliminate(build_eq_chase(db, cons))


@pytest.mark.parametrize("seed", range(80))
def test_eq_chase_matches_chase(seed):
    inst = random_instance(seed)
    try:
        plain = build_chase(inst.db, inst.cds, max_level=6, max_steps=5000)
        eq = build_eq_chase(inst.db, inst.cds, max_level=6, max_steps=5000)
    except ResourceLimitError:
        pytest.skip("instance too large for the step cap")
    assert plain.failed == eq.failed
    if not plain.failed:
        assert isomorphic(equality_eliminate(eq).facts, plain.facts)


@pytest.mark.parametrize("seed", range(80))
def test_existence_agrees_with_chase(seed):
    inst = random_instance(seed)
    try:
        cert = chase_exists(inst.db, inst.cds, max_steps=5000)
        res = build_chase(inst.db, inst.cds, max_steps=5000)
    except ResourceLimitError:
        pytest.skip("chase does not terminate within the step cap")
    assert cert.exists == (not res.failed)


def test_isomorphic():
    a = [fact("r", "a", fresh(1)), fact("s", fresh(1), fresh(2))]
    b = [fact("r", "a", fresh(7)), fact("s", fresh(7), fresh(3))]
    c = [fact("r", "a", fresh(7)), fact("s", fresh(8), fresh(3))]
    assert isomorphic(a, b)
    assert not isomorphic(a, c)


def test_level_bound_arithmetic():
    b = compute_level_bound({f"p{i}": 2 for i in range(8)}, 5, 2)
    assert (b.delta_c, b.delta_d, b.delta_m, b.stop_level) == (136, 272, 816, 952)


def test_level_bound_single_atom():
    b = compute_level_bound({"p": 2, "e": 1}, 1, 1)
    assert b.delta_m == b.delta_c


def test_level_bound_empty_db():
    b = compute_level_bound({"p": 2}, 3, 0)
    assert b.delta_m == b.delta_c * 2
    assert b.stop_level == b.delta_m + b.delta_c


def test_level_bound_overflow():
    with pytest.raises(LevelBoundError):
        compute_level_bound({"p": 13}, 1, 1)


def test_fresh_input_warns():
    cons = parse_constraints("pred e/1\n")
    res = build_chase([fact("e", fresh(3))], cons)
    assert res.warnings
