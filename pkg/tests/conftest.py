from pathlib import Path

import pytest

from eerquery import parse_constraints, parse_database, parse_eer, parse_query, to_cds

DATA = Path(__file__).parent / "data"


def read(name: str) -> str:
    return (DATA / name).read_text(encoding="utf-8")


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def employee_eer():
    return parse_eer(read("employee.eer"))


@pytest.fixture
def employee_cds(employee_eer):
    return to_cds(employee_eer)


@pytest.fixture
def employee_db():
    return parse_database(read("employee.facts"))


@pytest.fixture
def manages_dept_query():
    return parse_query(read("manages_dept.cq"))


@pytest.fixture
def failing():
    return parse_constraints(read("failing.cds")), parse_database(read("failing.facts"))


@pytest.fixture
def infinite():
    return parse_constraints(read("infinite.cds")), parse_database(read("infinite.facts")), parse_query(read("a.cq"))


# PASS/FAIL lines recorded by the acceptance suite, repeated at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
