import random

import pytest

from eerquery import parse_eer, recognize_cds, to_cds, to_relational
from eerquery.cds import CDSet
from eerquery.eer import EERSchema
from eerquery.randomgen import random_eer
from eerquery.relational import InclusionDependency as ID, KeyDependency as KD

# sigma1..sigma13 of the running example, with the rule that produces each
EXAMPLE_DEPENDENCIES = {
    ("sigma1", ID("dept_name", (1,), "dept", (1,)), 1),
    ("sigma2", ID("emp_name", (1,), "employee", (1,)), 1),
    ("sigma3", ID("since", (1, 2), "works_in", (1, 2)), 2),
    ("sigma4", ID("works_in", (1,), "employee", (1,)), 3),
    ("sigma5", ID("works_in", (2,), "dept", (1,)), 3),
    ("sigma6", ID("manages", (1,), "manager", (1,)), 3),
    ("sigma7", ID("manages", (2,), "dept", (1,)), 3),
    ("sigma8", ID("manager", (1,), "employee", (1,)), 8),
    ("sigma9", ID("manages", (1, 2), "works_in", (1, 2)), 9),
    ("sigma10", ID("employee", (1,), "works_in", (1,)), 10),
    ("sigma11", ID("manager", (1,), "manages", (1,)), 10),
    ("sigma12", KD("works_in", (1,)), 11),
    ("sigma13", KD("manages", (1,)), 11),
}


def test_example_relational_schema(employee_eer):
    assert to_relational(employee_eer) == {
        "manager": 1, "employee": 1, "dept": 1, "works_in": 2, "manages": 2,
        "emp_name": 2, "dept_name": 2, "since": 3,
    }


def test_example_dependencies_with_rules(employee_cds):
    got = {(d.label, d, d.rule) for d in employee_cds.dependencies}
    assert got == EXAMPLE_DEPENDENCIES


def test_example_partition(employee_cds):
    assert sorted(employee_cds.preds_of("E")) == ["dept", "employee", "manager"]
    assert sorted(employee_cds.preds_of("R")) == ["manages", "works_in"]
    assert sorted(employee_cds.preds_of("A")) == ["dept_name", "emp_name", "since"]


def test_single_entity():
    assert to_relational(parse_eer("entity E")) == {"e": 1}


def test_ternary_relationship_with_attribute():
    s = parse_eer("entity A\nentity B\nentity C\nrelationship R among A, B, C\nattribute W of R\n")
    assert to_relational(s) == {"a": 1, "b": 1, "c": 1, "r": 3, "w": 4}


def test_mandatory_functional_entity_attribute():
    cds = to_cds(parse_eer("entity E\nattribute A of E functional mandatory\n"))
    assert set(cds.ids) == {ID("a", (1,), "e", (1,)), ID("e", (1,), "a", (1,))}
    assert set(cds.kds) == {KD("a", (1,))}
    rules = {d: d.rule for d in cds.dependencies}
    assert rules[ID("a", (1,), "e", (1,))] == 1
    assert rules[ID("e", (1,), "a", (1,))] == 4
    assert rules[KD("a", (1,))] == 6


def test_relationship_isa_with_swap():
    cds = to_cds(parse_eer("entity E\nrelationship R1 among E, E\n isa: R2[2,1]\nrelationship R2 among E, E\n"))
    assert ID("r1", (1, 2), "r2", (2, 1)) in set(cds.ids)


def test_relationship_attribute_rules():
    cds = to_cds(parse_eer("entity E\nrelationship R among E, E\nattribute W of R functional mandatory\n"))
    assert ID("w", (1, 2), "r", (1, 2)) in set(cds.ids)
    assert ID("r", (1, 2), "w", (1, 2)) in set(cds.ids)
    assert KD("w", (1, 2)) in set(cds.kds)


def test_lowercase_collision():
    from eerquery import SchemaError
    with pytest.raises(SchemaError):
        to_relational(parse_eer("entity A\nentity B\nrelationship Ab among A, B\nattribute ab of A\n"))


def test_empty_schema_is_empty_cdset():
    cds = to_cds(EERSchema())
    assert isinstance(cds, CDSet) and not cds.dependencies and not cds.schema


def _reordered(s: EERSchema, rng: random.Random) -> EERSchema:
    def shuffle(d):
        items = list(d.items())
        rng.shuffle(items)
        return dict(items)
    return EERSchema(shuffle(s.entities), shuffle(s.relationships), shuffle(s.attributes))


@pytest.mark.parametrize("seed", range(60))
def test_random_schema_translates_to_cds(seed):
    rng = random.Random(seed)
    s = random_eer(rng)
    cds = to_cds(s)
    assert isinstance(recognize_cds(cds.schema, cds.ids, cds.kds), CDSet)
    again = to_cds(_reordered(s, rng))
    assert set(again.dependencies) == set(cds.dependencies)
