import pytest

from eerquery import Database, ResourceLimitError, parse_constraints, parse_eer, parse_query, to_cds
from eerquery.datalog import parse_program, seminaive_fixpoint
from eerquery.errors import SchemaError
from eerquery.pipeline import answer_by_rewriting
from eerquery.randomgen import random_instance
from eerquery.rewriter import (LITERAL, build_dummy_chase, build_pi_dc, build_pi_eq, build_pi_id,
                               build_pi_kd, maquillage, rewrite)
from eerquery.terms import STAR, AnnotatedPred, render_value


def canon(rules):
    return {str(r.canonical()) for r in rules}


def program(text):
    return canon(parse_program(text).rules)


def test_pi_eq_binary():
    assert canon(build_pi_eq({"works_in": 2})) == program("""
        eq(X1,X1) :- works_in(X1,X2).
        eq(X2,X2) :- works_in(X1,X2).
        eq(Y,X) :- eq(X,Y).
        eq(X,Z) :- eq(X,Y), eq(Y,Z).
    """)


def test_pi_eq_empty_and_unary():
    assert len(build_pi_eq({})) == 2
    reflexive = [r for r in build_pi_eq({"e": 1}) if r.body[0].pred == "e"]
    assert [str(r) for r in reflexive] == ["eq(X1,X1) :- e(X1)."]


def test_pi_kd_sigma13(employee_cds):
    rules = build_pi_kd(employee_cds.restrict(kds=[employee_cds.by_label("sigma13")]))
    assert canon(rules) == program("eq(Y1,Y2) :- manages(X1,Y1), manages(X2,Y2), eq(X1,X2).")


def test_pi_kd_ternary_middle_key():
    cons = parse_constraints("pred r/3\nkd: key(r) = {2}\n")
    assert canon(build_pi_kd(cons)) == program("""
        eq(X1,Y1) :- r(X1,X2,X3), r(Y1,Y2,Y3), eq(X2,Y2).
        eq(X3,Y3) :- r(X1,X2,X3), r(Y1,Y2,Y3), eq(X2,Y2).
    """)


def test_pi_kd_no_keys():
    assert build_pi_kd(parse_constraints("pred e/1\n")) == []


def test_pi_id_examples(employee_cds):
    by_label = {}
    for d, r in zip(employee_cds.ids, build_pi_id(employee_cds)):
        by_label[d.label] = r
    assert str(by_label["sigma10"]) == "works_in(X,f_sigma10_2(X)) :- employee(X)."
    assert canon([by_label["sigma9"]]) == program("works_in(X,Y) :- manages(X,Y).")
    assert canon([by_label["sigma4"]]) == program("employee(X) :- works_in(X,Y).")


def test_pi_id_permutation():
    cds = to_cds(parse_eer("entity E\nrelationship R1 among E, E\n isa: R2[2,1]\nrelationship R2 among E, E\n"))
    rule = [r for r in build_pi_id(cds) if r.head.pred == "r2"]
    assert canon(rule) == program("r2(Y,X) :- r1(X,Y).")


def test_maquillage_example():
    q = parse_query("q(X) :- r(X,c,Y), s(Y).")
    assert str(maquillage(q)) == "q(X) :- r(A,B,C), s(D), eq(A,X), eq(B,c), eq(C,Y), eq(D,Y)."


def test_maquillage_small_cases():
    assert str(maquillage(parse_query("q() :- e(X)."))) == "q() :- e(A), eq(A,X)."
    assert str(maquillage(parse_query("q(X) :- e(X)."))) == "q(X) :- e(A), eq(A,X)."


def test_maquillage_avoids_taken_names():
    out = maquillage(parse_query("q(A) :- r(A,B)."))
    assert str(out) == "q(A) :- r(C,D), eq(C,A), eq(D,B)."


def test_reserved_names():
    with pytest.raises(SchemaError):
        maquillage(parse_query("eq(X) :- e(X)."))
    with pytest.raises(SchemaError):
        rewrite(parse_query("q(X) :- eq(X,X)."), parse_constraints("pred eq/2\n"), 3)


def _annotated(dummy):
    return {(str(p[0]), tuple(map(render_value, p[1])), str(c[0]), tuple(map(render_value, c[1])), lab)
            for p, c, lab in dummy.annotated}


def test_dummy_chase_employee(employee_cds):
    dummy = build_dummy_chase(employee_cds, 3)
    (root,) = dummy.database.relation("employee")
    (c,) = root
    kids = [child for parent, child, lab in dummy.relabelled if parent == ("employee", root) and lab == "sigma10"]
    assert len(kids) == 1
    pred, (first, second) = kids[0]
    assert pred == "works_in" and first == c
    assert render_value(second) == f"f_sigma10_2({render_value(c)})"
    ann = [child for parent, child, lab in dummy.annotated if parent[1] == (c,) and lab == "sigma10"]
    assert [(str(p), leaves) for p, leaves in ann] == [("works_in@[*,f_sigma10_2(*)]", (c, c))]


def test_dummy_chase_without_ids():
    cons = parse_constraints("pred e/1\npred r/2\nkd: key(r) = {1}\n")
    dummy = build_dummy_chase(cons, 10)
    assert dummy.annotated == ()
    assert len(dummy.roots) == 2
    assert build_pi_dc(dummy) == []


def test_dummy_chase_cyclic_isa():
    cons = parse_constraints("pred r1/2\npred r2/2\nid: r1[1,2] <= r2[2,1]\nid: r2[1,2] <= r1[1,2]\n")
    dummy = build_dummy_chase(cons, 4)
    assert dummy.annotated
    for p, c, _ in dummy.annotated:
        assert p[0].templates == (STAR, STAR) and c[0].templates == (STAR, STAR)
    assert dummy.chase.max_level() <= 4
    preds = [c[0].base for _, c, _ in dummy.annotated]
    assert set(preds) == {"r1", "r2"}


def test_pi_dc_example_rule(employee_cds):
    pi_dc = build_pi_dc(build_dummy_chase(employee_cds, 5))
    assert "works_in@[*,f_sigma10_2(*)](X1,X1) :- employee@[*](X1)." in {str(r) for r in pi_dc}
    assert len(pi_dc) == len(set(pi_dc))


def test_pi_dc_permutation_arc():
    cds = to_cds(parse_eer("entity E\nrelationship R1 among E, E\n isa: R2[2,1]\nrelationship R2 among E, E\n"))
    pi_dc = {str(r) for r in build_pi_dc(build_dummy_chase(cds, 3))}
    assert "r2@[*,*](X2,X1) :- r1@[*,*](X1,X2)." in pi_dc


@pytest.fixture
def employee_bundle(employee_cds, manages_dept_query):
    return rewrite(manages_dept_query, employee_cds, 1176)


def test_pi_fin_function_free(employee_bundle):
    fin = employee_bundle.pi_fin
    assert fin.is_function_free()
    assert str(fin.query_pred) == "q@[*]"
    assert "#" not in fin.text()
    seminaive_fixpoint(fin, Database())


def test_pi_fin_annotations_come_from_pi_dc(employee_bundle, employee_cds):
    seen = {}
    for r in employee_bundle.pi_dc:
        for a in (r.head, *r.body):
            seen.setdefault(a.pred.base, set()).add(a.pred.templates)
    for r in employee_bundle.pi_fin.rules:
        for a in (r.head, *r.body):
            if isinstance(a.pred, AnnotatedPred) and a.pred.base in employee_cds.schema:
                n = employee_cds.schema[a.pred.base]
                assert a.pred.templates in seen.get(a.pred.base, set()) | {(STAR,) * n}


def test_sigma13_variants(employee_cds, manages_dept_query):
    lit = rewrite(manages_dept_query, employee_cds, 1176, variants=LITERAL)
    want = program("eq@[*,*](Y1,Y2) :- manages@[f_sigma10_2(*),*](X1,Y1), manages@[*,*](X2,Y2), "
                   "eq@[f_sigma10_2(*),*](X1,X2).")
    assert want <= canon(lit.pi_fin.rules)
    first = program("eq@[*,*](Y1,Y2) :- manages@[*,*](X1,Y1), manages@[*,*](X2,Y2), eq@[*,*](X1,X2).")
    assert first <= canon(lit.pi_fin.rules)


def _sigma13_rules(rules):
    out = []
    for r in rules:
        preds = [a.pred for a in r.body]
        if len(preds) == 3 and all(isinstance(p, AnnotatedPred) for p in preds) and \
                [p.base for p in preds] == ["manages", "manages", "eq"]:
            out.append(r)
    return out


def test_condition_three(employee_cds, manages_dept_query):
    for mode in ("derivable", LITERAL):
        rules = _sigma13_rules(rewrite(manages_dept_query, employee_cds, 1176, variants=mode).pi_fin.rules)
        assert rules
        for r in rules:
            m1, m2, eq = (a.pred.templates for a in r.body)
            assert eq == (m1[0], m2[0])
            assert r.head.pred.templates == (m1[1], m2[1])


def test_pi_fin_without_skolems():
    cons = parse_constraints("pred e/1\npred f/1\nid: e[1] <= f[1]\n")
    bundle = rewrite(parse_query("q(X) :- f(X)."), cons, 4)
    for r in bundle.pi_fin.rules:
        for a in (r.head, *r.body):
            if isinstance(a.pred, AnnotatedPred):
                assert set(a.pred.templates) <= {STAR}


def test_rule_cap(employee_cds, manages_dept_query):
    with pytest.raises(ResourceLimitError):
        rewrite(manages_dept_query, employee_cds, 1176, max_rules=10)


def test_stages_are_text(employee_bundle):
    stages = employee_bundle.stages()
    assert set(stages) == {"pi_eq", "pi_kd", "pi_id", "q_eq", "pi_dc", "pi_base", "pi_fin"}
    assert "works_in(X,f_sigma10_2(X)) :- employee(X)." in stages["pi_id"]
    assert stages["q_eq"].startswith("q(X) :- manages(")


def test_example_answers(employee_bundle, employee_db):
    answers, clash = answer_by_rewriting(employee_bundle, employee_db)
    assert clash is None
    assert {tuple(map(str, t)) for t in answers} == {("m",)}


@pytest.mark.parametrize("seed", [2, 7, 12, 15, 17, 19, 22])
def test_literal_and_derivable_agree(seed):
    inst = random_instance(seed)
    try:
        a = rewrite(inst.query, inst.cds, 6, max_rules=20000)
        b = rewrite(inst.query, inst.cds, 6, max_rules=20000, variants=LITERAL)
    except ResourceLimitError:
        pytest.skip("literal variants too many for this instance")
    assert answer_by_rewriting(a, inst.db) == answer_by_rewriting(b, inst.db)
