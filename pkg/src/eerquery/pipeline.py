"""End-to-end certain answers.

:func:`certain_answers` runs the four steps: translate an EER schema (if
given), decide whether the chase exists, compute the level bound, then answer
either by the compiled Datalog program or by a bounded chase.
:func:`cross_validate` runs both paths plus a third, independent one (the
Skolemised program evaluated with a term-depth cap) and reports any
disagreement.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Iterable

from .cds import CDSet, recognize_cds
from .chase import (COMPLETED, ExistenceCertificate, Failure, LevelBound, build_chase,
                    chase_exists, compute_level_bound)
from .cq import ConjunctiveQuery, evaluate_cq
from .datalog import Rule, evaluate, has_skolem
from .eer import EERSchema
from .errors import LevelBoundError, NotCDError
from .relational import Constant, Constraints, Database, Fact, join_graph_components
from .rewriter import (DEFAULT_MAX_RULES, EQ, RewriteBundle, all_star, build_pi_eq, build_pi_id, build_pi_kd,
                       inconsistency_witness, maquillage, rewrite)
from .terms import Atom
from .textio import render_constraints
from .translation import to_cds

CONSISTENT = "consistent"
INCONSISTENT = "inconsistent"

REWRITE = "rewrite"
CHASE = "chase"
BOTH = "both"
AUTO = "auto"

# Default path choice: data sets up to this many facts are answered by the
# bounded chase (no compilation), larger ones by the compiled program.
CHASE_PATH_MAX_FACTS = 1000

# Above this stop level, a schema with cyclic IDs needs explicit confirmation,
# because the chase (and the dummy chase) may really run that deep.
LARGE_BOUND = 100_000


@dataclass(frozen=True)
class AnswerResult:
    """Certain answers, or the verdict that the data is inconsistent.

    ``exact`` is False only for best-effort runs on non-CD inputs whose
    chase was cut off: the answers are then sound but possibly incomplete.
    """

    status: str
    answers: tuple[tuple[Constant, ...], ...]
    path: str
    witness: Failure | None = None
    exact: bool = True
    diagnostics: dict = field(default_factory=dict)

    @property
    def consistent(self) -> bool:
        return self.status == CONSISTENT

    def answer_set(self) -> set[tuple[Constant, ...]]:
        return set(self.answers)


def _sorted_answers(tuples: Iterable[tuple]) -> tuple[tuple, ...]:
    return tuple(sorted(tuples))


def resolve_constraints(source) -> Constraints:
    """An EER schema is translated; constraints are recognised as CDs when possible."""
    if isinstance(source, EERSchema):
        return to_cds(source)
    if isinstance(source, CDSet):
        return source
    if isinstance(source, Constraints):
        res = recognize_cds(source)
        return res if isinstance(res, CDSet) else source
    raise TypeError(f"expected an EER schema or constraints, got {type(source).__name__}")


def not_cd_reasons(cons: Constraints) -> list[str]:
    res = recognize_cds(cons)
    return [] if isinstance(res, CDSet) else [str(v) for v in res]


def ids_cyclic(cons: Constraints) -> bool:
    """Whether the predicate graph of the IDs (lhs -> rhs) has a cycle."""
    succ: dict[str, set[str]] = {p: set() for p in cons.schema}
    for d in cons.ids:
        succ[d.lhs].add(d.rhs)
    state: dict[str, int] = {}
    for start in succ:
        if start in state:
            continue
        stack = [(start, iter(succ[start]))]
        state[start] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                state[node] = 2
                stack.pop()
            elif state.get(nxt) == 1:
                return True
            elif nxt not in state:
                state[nxt] = 1
                stack.append((nxt, iter(succ[nxt])))
    return False


# compiled-program cache ---------------------------------------------------

class ProgramCache:
    """Get-or-compute map from (constraints, query, depth) to a rewrite bundle."""

    def __init__(self):
        self._lock = threading.Lock()
        self._items: dict[tuple, RewriteBundle] = {}
        self._pending: dict[tuple, threading.Event] = {}

    def get(self, cons: Constraints, q: ConjunctiveQuery, depth: int, max_rules: int) -> RewriteBundle:
        key = (render_constraints(cons), str(q), depth)
        while True:
            with self._lock:
                if key in self._items:
                    return self._items[key]
                waiter = self._pending.get(key)
                if waiter is None:
                    waiter = self._pending[key] = threading.Event()
                    owner = True
                else:
                    owner = False
            if not owner:
                waiter.wait()
                continue
            try:
                bundle = rewrite(q, cons, depth, max_rules=max_rules)
                with self._lock:
                    self._items[key] = bundle
                return bundle
            finally:
                with self._lock:
                    del self._pending[key]
                waiter.set()

    def clear(self) -> None:
        with self._lock:
            self._items.clear()

    def __len__(self) -> int:
        return len(self._items)


DEFAULT_CACHE = ProgramCache()


# the pipeline ----------------------------------------------------------------

def level_bound_for(cons: Constraints, db: Database, q: ConjunctiveQuery, cd_bound: int | None = None) -> LevelBound:
    c_d = cd_bound if cd_bound is not None else join_graph_components(db)[1]
    return compute_level_bound(cons, q, max(c_d, 1))


def _check_bound(cons: Constraints, bound: LevelBound, depth: int, allow_large_bound: bool) -> None:
    if depth > LARGE_BOUND and not allow_large_bound and ids_cyclic(cons):
        raise LevelBoundError(f"level bound {depth} exceeds {LARGE_BOUND} on a schema with cyclic IDs; "
                              "confirm with allow_large_bound (--allow-large-bound) to proceed")


def _clash_in(pred) -> callable:
    """Stop condition: an ``eq`` fact between two distinct database constants."""
    def stop(delta) -> bool:
        return any(a != b and isinstance(a, Constant) and isinstance(b, Constant)
                   for a, b in delta.get(pred, ()))
    return stop


def answer_by_rewriting(bundle: RewriteBundle, db: Database, max_facts: int | None = None):
    """Evaluate a compiled program; return (answers, inconsistency pair or None).

    Evaluation stops as soon as two distinct constants are equated at the
    top level, since the data is then inconsistent whatever else follows.
    """
    model = evaluate(bundle.pi_fin.rules, db, max_facts=max_facts, stop=_clash_in(all_star(EQ, 2)))
    return set(model.get(bundle.pi_fin.query_pred, ())), inconsistency_witness(model)


def answer_by_chase(cons: Constraints, db: Database, q: ConjunctiveQuery, max_level: int,
                    max_steps: int | None = None):
    """Bounded chase then query evaluation; return (answers, chase result)."""
    res = build_chase(db, cons, max_level=max_level, max_steps=max_steps)
    if res.failed:
        return set(), res
    return evaluate_cq(q, res.facts, drop_fresh=True), res


def certain_answers(source, db: Database | Iterable[Fact], q: ConjunctiveQuery, *, path: str = AUTO,
                    max_level: int | None = None, cd_bound: int | None = None, strict_cds: bool = False,
                    allow_large_bound: bool = False, conservative: bool = False,
                    max_rules: int = DEFAULT_MAX_RULES, cache: ProgramCache | None = DEFAULT_CACHE) -> AnswerResult:
    """Certain answers of ``q`` over ``db`` under an EER schema or a constraint set.

    ``path`` is ``"auto"``, ``"rewrite"``, ``"chase"`` or ``"both"``.  With
    ``"both"`` the compiled program's answers are returned and
    ``diagnostics["paths_agree"]`` records whether the chase agreed.
    ``max_level`` overrides the computed depth (dummy-chase depth for the
    compiled program, chase depth otherwise); ``cd_bound`` overrides the size
    of the largest join-graph component.
    """
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    cons = resolve_constraints(source)
    if not isinstance(db, Database):
        db = Database(db)
    db = db.with_schema(cons.schema)
    q.check_schema(cons.schema)
    timings["translate"] = time.perf_counter() - t0

    if path not in (AUTO, REWRITE, CHASE, BOTH):
        raise ValueError(f"unknown path {path!r}")
    reasons = not_cd_reasons(cons)
    if reasons:
        if strict_cds or path in (REWRITE, BOTH):
            raise NotCDError(reasons)
        return _best_effort(cons, db, q, max_level, cd_bound, reasons, timings)

    t = time.perf_counter()
    cert = chase_exists(db, cons)
    timings["chase_exists"] = time.perf_counter() - t
    bound = level_bound_for(cons, db, q, cd_bound)
    diagnostics = {"level_bound": bound.as_dict(), "c_D": bound.c_d, "timings": timings}
    if not cert.exists:
        diagnostics["chase_exists"] = False
        return AnswerResult(INCONSISTENT, (), path if path != AUTO else CHASE, cert.failure, True, diagnostics)

    if path == AUTO:
        path = CHASE if len(db) <= CHASE_PATH_MAX_FACTS else REWRITE
        diagnostics["path_choice"] = f"auto: {len(db)} facts, threshold {CHASE_PATH_MAX_FACTS}"
    if conservative and path in (REWRITE, BOTH) and _mentions_attributes(cons, q):
        diagnostics["path_choice"] = "conservative: attribute query routed to the chase"
        path = CHASE

    answers: set | None = None
    if path in (REWRITE, BOTH):
        depth = max_level if max_level is not None else bound.delta_m
        _check_bound(cons, bound, depth, allow_large_bound)
        t = time.perf_counter()
        bundle = (cache.get(cons, q, depth, max_rules) if cache is not None
                  else rewrite(q, cons, depth, max_rules=max_rules))
        timings["compile"] = time.perf_counter() - t
        t = time.perf_counter()
        answers, clash = answer_by_rewriting(bundle, db)
        timings["evaluate"] = time.perf_counter() - t
        diagnostics["program_rules"] = len(bundle.pi_fin.rules)
        diagnostics["dummy_chase_depth"] = depth
        if clash is not None:
            diagnostics["program_inconsistency"] = [str(c) for c in clash]
    if path in (CHASE, BOTH):
        depth = max_level if max_level is not None else bound.stop_level
        _check_bound(cons, bound, depth, allow_large_bound)
        t = time.perf_counter()
        chase_answers, res = answer_by_chase(cons, db, q, depth)
        timings["chase"] = time.perf_counter() - t
        diagnostics["chase_status"] = res.status
        diagnostics["chase_facts"] = len(res.facts)
        diagnostics["chase_depth"] = depth
        if path == BOTH:
            diagnostics["paths_agree"] = chase_answers == answers
        else:
            answers = chase_answers
    timings["total"] = time.perf_counter() - t0
    return AnswerResult(CONSISTENT, _sorted_answers(answers), REWRITE if path == BOTH else path, None, True,
                        diagnostics)


def _mentions_attributes(cons: Constraints, q: ConjunctiveQuery) -> bool:
    from .cds import ATTRIBUTE

    kinds = cons.partition if isinstance(cons, CDSet) else {}
    return any(kinds.get(a.pred) == ATTRIBUTE for a in q.body)


DEFAULT_NON_CD_LEVEL = 100


def _best_effort(cons, db, q, max_level, cd_bound, reasons, timings) -> AnswerResult:
    """Bounded chase for constraint sets outside the CD class."""
    depth = max_level if max_level is not None else DEFAULT_NON_CD_LEVEL
    t = time.perf_counter()
    answers, res = answer_by_chase(cons, db, q, depth)
    timings["chase"] = time.perf_counter() - t
    diagnostics = {"not_cd": reasons, "chase_status": res.status, "chase_depth": depth,
                   "chase_facts": len(res.facts), "timings": timings}
    if res.failed:
        return AnswerResult(INCONSISTENT, (), CHASE, res.failure, True, diagnostics)
    exact = res.status == COMPLETED
    if not exact:
        diagnostics["note"] = "answers sound but possibly incomplete"
    return AnswerResult(CONSISTENT, _sorted_answers(answers), CHASE, None, exact, diagnostics)


# cross-validation ----------------------------------------------------------

@dataclass(frozen=True)
class PathOutcome:
    status: str
    answers: frozenset

    def __str__(self) -> str:
        if self.status == INCONSISTENT:
            return "inconsistent"
        return "{" + ", ".join("(" + ",".join(map(str, t)) + ")" for t in sorted(self.answers)) + "}"


@dataclass(frozen=True)
class ValidationReport:
    existence: ExistenceCertificate
    bound: LevelBound
    rewriting: PathOutcome
    chase: PathOutcome
    oracle: PathOutcome
    chase_status: str

    @property
    def agree(self) -> bool:
        verdict = INCONSISTENT if not self.existence.exists else CONSISTENT
        outs = (self.rewriting, self.chase, self.oracle)
        return all(o == self.rewriting for o in outs) and self.rewriting.status == verdict

    def disagreements(self) -> list[tuple[str, str, str]]:
        """Bug triples (rewriting, chase, oracle) when the paths differ."""
        return [] if self.agree else [(str(self.rewriting), str(self.chase), str(self.oracle))]


def skolem_oracle_rules(cons: Constraints, q: ConjunctiveQuery) -> list[Rule]:
    q_eq = maquillage(q)
    return (build_pi_id(cons) + build_pi_kd(cons) + build_pi_eq(cons.schema)
            + [Rule(Atom(q.name, q_eq.head), q_eq.body)])


def answer_by_oracle(cons: Constraints, db: Database, q: ConjunctiveQuery, depth_cap: int,
                     max_facts: int | None = None) -> PathOutcome:
    """Skolemised program with a term-depth cap; Skolem-bearing answers dropped."""
    model = evaluate(skolem_oracle_rules(cons, q), db, depth_cap=depth_cap, max_facts=max_facts,
                     stop=_clash_in(EQ))
    for a, b in model.get(EQ, ()):
        if a != b and isinstance(a, Constant) and isinstance(b, Constant):
            return PathOutcome(INCONSISTENT, frozenset())
    return PathOutcome(CONSISTENT, frozenset(t for t in model.get(q.name, ()) if not has_skolem(t)))


def cross_validate(source, db: Database | Iterable[Fact], q: ConjunctiveQuery, *, cd_bound: int | None = None,
                   max_rules: int = DEFAULT_MAX_RULES, max_facts: int | None = 2_000_000,
                   max_steps: int | None = None) -> ValidationReport:
    """Answer by all three paths, each with its own inconsistency test.

    ``max_steps`` caps both chase runs (the real one and the dummy one) and
    ``max_facts`` both fixpoints; exceeding a cap raises
    :class:`ResourceLimitError`.
    """
    cons = resolve_constraints(source)
    if not isinstance(cons, CDSet):
        raise NotCDError(not_cd_reasons(cons))
    if not isinstance(db, Database):
        db = Database(db)
    db = db.with_schema(cons.schema)
    q.check_schema(cons.schema)
    cert = chase_exists(db, cons, max_steps=max_steps)
    bound = level_bound_for(cons, db, q, cd_bound)

    bundle = rewrite(q, cons, bound.delta_m, max_rules=max_rules, max_steps=max_steps)
    answers, clash = answer_by_rewriting(bundle, db, max_facts=max_facts)
    rewriting = (PathOutcome(INCONSISTENT, frozenset()) if clash is not None
                 else PathOutcome(CONSISTENT, frozenset(answers)))

    chase_answers, res = answer_by_chase(cons, db, q, bound.stop_level, max_steps)
    chase = (PathOutcome(INCONSISTENT, frozenset()) if res.failed
             else PathOutcome(CONSISTENT, frozenset(chase_answers)))

    oracle = answer_by_oracle(cons, db, q, bound.delta_m, max_facts=max_facts)
    return ValidationReport(cert, bound, rewriting, chase, oracle, res.status)


def truncation_check(source, db: Database | Iterable[Fact], q: ConjunctiveQuery, *, factor: int = 3,
                     cd_bound: int | None = None, max_steps: int | None = None):
    """Chase-path answers at the stop level and at ``factor`` times it.

    Returns ``(at_stop, at_multiple)`` as :class:`PathOutcome` values.  Deeper
    chases grow quickly on cyclic schemas, so ``max_steps`` matters here.
    """
    cons = resolve_constraints(source)
    if not isinstance(db, Database):
        db = Database(db)
    db = db.with_schema(cons.schema)
    bound = level_bound_for(cons, db, q, cd_bound)
    out = []
    for level in (bound.stop_level, factor * bound.stop_level):
        answers, res = answer_by_chase(cons, db, q, level, max_steps)
        out.append(PathOutcome(INCONSISTENT, frozenset()) if res.failed
                   else PathOutcome(CONSISTENT, frozenset(answers)))
    return tuple(out)
