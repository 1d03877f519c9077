"""Exception hierarchy shared by every module.

Each exception carries a short machine-readable ``code`` that the command
line maps to its ``ERROR <code>: ...`` prefix.
"""

from __future__ import annotations


class EERQueryError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"


class ParseError(EERQueryError):
    """Malformed textual input, with a 1-based position when known."""

    code = "parse"

    def __init__(self, message: str, line: int | None = None, col: int | None = None, source: str | None = None):
        self.message = message
        self.line = line
        self.col = col
        self.source = source
        where = ""
        if source:
            where = source
        if line is not None:
            where += f"{':' if where else ''}{line}:{col}" if col is not None else f"{':' if where else ''}{line}"
        super().__init__(f"{where}: {message}" if where else message)


class EERSemanticError(EERQueryError):
    """An EER schema parsed but violates one or more invariants."""

    code = "eer-semantic"

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class SchemaError(EERQueryError):
    """A fact, query or dependency does not fit the relational schema."""

    code = "schema"


class NotCDError(EERQueryError):
    """A constraint set is not a set of conceptual dependencies."""

    code = "not-cd"

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("not a set of conceptual dependencies: " + "; ".join(self.violations))


class LevelBoundError(EERQueryError):
    """The level bound is too large to be used without confirmation."""

    code = "level-bound"


class ResourceLimitError(EERQueryError):
    """A configured resource cap (facts, rules, steps) was exceeded."""

    code = "resource"


class ProgramError(EERQueryError):
    """A Datalog program is malformed (e.g. not range-restricted)."""

    code = "program"
