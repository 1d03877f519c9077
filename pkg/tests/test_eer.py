import random

import pytest

from eerquery import EERSemanticError, ParseError, format_eer, parse_eer, validate_eer
from eerquery.eer import EERSchema, EntityDef
from eerquery.randomgen import random_eer


def test_example_schema_shape(employee_eer):
    assert sorted(employee_eer.entities) == ["Dept", "Employee", "Manager"]
    assert sorted(employee_eer.relationships) == ["Manages", "Works_in"]
    assert all(r.arity == 2 for r in employee_eer.relationships.values())
    assert sorted(employee_eer.attributes) == ["dept_name", "emp_name", "since"]
    assert employee_eer.relationships["Manages"].isa == frozenset({("Works_in", (1, 2))})


def test_empty_input_is_empty_schema():
    s = parse_eer("")
    assert s.names() == []
    assert validate_eer(s) == []


def test_non_permutation_is_rejected():
    text = """
    entity A
    relationship R among A, A
    relationship S among A, A
      isa: R[1,1]
    """
    with pytest.raises(EERSemanticError) as exc:
        parse_eer(text)
    assert any("not a permutation" in v for v in exc.value.violations)


def test_example_validates_clean(employee_eer):
    assert validate_eer(employee_eer) == []


def test_undefined_relationship_is_one_violation():
    s = EERSchema(entities={"A": EntityDef("A", participates_at_least_once=frozenset({("R", 1)}))})
    report = validate_eer(s)
    assert len(report) == 1
    assert "undefined relationship R" in report[0]


def test_isa_cycle_is_legal():
    s = parse_eer("entity A isa: B\nentity B isa: A\n")
    assert validate_eer(s) == []


def test_syntax_error_has_position():
    with pytest.raises(ParseError) as exc:
        parse_eer("entity A\nrelationship R among A\n  isa R[1]\n")
    assert exc.value.line is not None and exc.value.col is not None


def test_unknown_qualifier_is_an_error():
    with pytest.raises(ParseError):
        parse_eer("entity A\nattribute x of A functional optional\n")


def test_duplicate_clauses_merge():
    s = parse_eer("entity A isa: B\n isa: C\nentity B\nentity C\n")
    assert s.entities["A"].isa == frozenset({"B", "C"})


def test_unicode_cardinality_symbols():
    s = parse_eer("entity E participates(≥1): R:1\nentity F\nrelationship R among E, F\n")
    assert s.entities["E"].participates_at_least_once == frozenset({("R", 1)})


def test_arity_mismatch_in_relationship_isa():
    text = "entity A\nrelationship R among A, A\nrelationship S among A, A, A\n  isa: R[1,2,3]\n"
    with pytest.raises(EERSemanticError) as exc:
        parse_eer(text)
    assert any("arity mismatch" in v for v in exc.value.violations)


def test_example_roundtrip(employee_eer):
    again = parse_eer(format_eer(employee_eer))
    assert again == employee_eer
    assert parse_eer(format_eer(again)) == again


@pytest.mark.parametrize("seed", range(50))
def test_random_schema_roundtrip(seed):
    s = random_eer(random.Random(seed))
    once = parse_eer(format_eer(s))
    assert once == s
    assert parse_eer(format_eer(once)) == once
