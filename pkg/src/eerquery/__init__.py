"""Certain answers to conjunctive queries over EER schemas.

The package translates an EER schema into conceptual dependencies (key and
inclusion dependencies of a restricted shape), decides whether the chase of a
database exists, and computes certain answers either by a level-bounded chase
or by compiling the query into function-free Datalog.
"""

__version__ = "0.1.0"

from .cds import CDSet, as_cdset, recognize_cds
from .chase import (ChaseResult, build_chase, build_eq_chase, chase_exists, compute_level_bound,
                    equality_eliminate, isomorphic)
from .cq import ConjunctiveQuery, evaluate_cq
from .datalog import Program, Rule, bounded_herbrand_fixpoint, evaluate, naive_fixpoint, seminaive_fixpoint
from .eer import EERSchema, format_eer, parse_eer, validate_eer
from .errors import (EERQueryError, EERSemanticError, LevelBoundError, NotCDError, ParseError, ProgramError,
                     ResourceLimitError, SchemaError)
from .pipeline import AnswerResult, certain_answers, cross_validate
from .relational import Constant, Constraints, Database, Fact, InclusionDependency, KeyDependency, const, fact
from .rewriter import RewriteBundle, maquillage, rewrite
from .textio import parse_constraints, parse_database, parse_query
from .translation import to_cds, to_constraints, to_relational

__all__ = [
    "AnswerResult", "CDSet", "ChaseResult", "ConjunctiveQuery", "Constant", "Constraints", "Database",
    "EERQueryError", "EERSchema", "EERSemanticError", "Fact", "InclusionDependency", "KeyDependency",
    "LevelBoundError", "NotCDError", "ParseError", "Program", "ProgramError", "ResourceLimitError",
    "RewriteBundle", "Rule", "SchemaError", "as_cdset", "bounded_herbrand_fixpoint", "build_chase",
    "build_eq_chase", "certain_answers", "chase_exists", "compute_level_bound", "const", "cross_validate",
    "equality_eliminate", "evaluate", "evaluate_cq", "fact", "format_eer", "isomorphic", "maquillage",
    "naive_fixpoint", "parse_constraints", "parse_database", "parse_eer", "parse_query", "recognize_cds",
    "rewrite", "seminaive_fixpoint", "to_cds", "to_constraints", "to_relational", "validate_eer",
]
