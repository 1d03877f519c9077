"""The chase under key and inclusion dependencies.

The scheduler is deterministic:

1. while some key dependency (KD) can be applied, pick the pair of facts whose
   lower level is smallest, ties broken by the lexicographic order of the pair
   (the pair itself ordered lexicographically), and the KD first in canonical
   order; merge the pair or fail;
2. apply one inclusion dependency (ID): if some full-width ID is applicable,
   take the lowest-level, lexicographically first fact with an applicable
   full-width ID, otherwise the same among all IDs; the ID is the first
   applicable one in canonical order.

A KD merge replaces constants everywhere in the facts built so far.  When a
``max_level`` is given, IDs are only applied to facts below that level and the
result is *truncated* if some ID was still applicable above the cut.

Besides :func:`build_chase` this module provides the chase with explicit
equality atoms (:func:`build_eq_chase`), equality elimination, the
existence test :func:`chase_exists` and :func:`compute_level_bound`.
"""

from __future__ import annotations

import heapq
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import networkx as nx
from networkx.algorithms.isomorphism import DiGraphMatcher

from .errors import LevelBoundError, ResourceLimitError
from .relational import (FRESH, NON_FRESH, Constant, Constraints, Database, Fact, InclusionDependency,
                         KeyDependency)
from .util import paused_gc

COMPLETED = "completed"
TRUNCATED = "truncated"
FAILED = "failed"

DEFAULT_MAX_STEPS = 5_000_000


@dataclass(frozen=True)
class Failure:
    step: int
    kd: KeyDependency
    witness: tuple[Fact, Fact]

    def __str__(self) -> str:
        a, b = self.witness
        return f"{self.kd.label} ({self.kd.render()}) cannot merge {a} and {b}"


@dataclass(frozen=True)
class ChaseResult:
    """Outcome of a chase run.

    ``forest`` lists ``(parent, child, label)`` triples for ID applications,
    with both ends expressed as facts of the final result.  ``steps`` is the
    human-readable log of every rule application in order.
    """

    status: str
    facts: frozenset[Fact]
    forest: tuple[tuple[Fact, Fact, str], ...] = ()
    steps: tuple[str, ...] = ()
    truncated_at: int | None = None
    failure: Failure | None = None
    warnings: tuple[str, ...] = ()

    @property
    def failed(self) -> bool:
        return self.status == FAILED

    def sorted_facts(self) -> list[Fact]:
        return sorted(self.facts, key=Fact.sort_key)

    def database(self) -> Database:
        return Database(self.facts)

    def max_level(self) -> int:
        return max((f.level for f in self.facts), default=0)


@dataclass(frozen=True)
class EqChaseResult(ChaseResult):
    eq_facts: frozenset[Fact] = field(default_factory=frozenset)


@dataclass(frozen=True)
class _CompiledID:
    order: int
    dep: InclusionDependency
    lhs_idx: tuple[int, ...]
    rhs: str
    rhs_idx: tuple[int, ...]
    rhs_arity: int
    full_width: bool


def _compile(cons: Constraints):
    schema = cons.schema
    ids_by_pred: dict[str, list[_CompiledID]] = defaultdict(list)
    rhs_keys: dict[str, list[tuple[int, ...]]] = defaultdict(list)
    for n, d in enumerate(cons.ids):
        cid = _CompiledID(n, d, tuple(c - 1 for c in d.lhs_cols), d.rhs,
                          tuple(c - 1 for c in d.rhs_cols), schema[d.rhs], d.is_full_width(schema))
        ids_by_pred[d.lhs].append(cid)
        if cid.rhs_idx not in rhs_keys[d.rhs]:
            rhs_keys[d.rhs].append(cid.rhs_idx)
    kds_by_pred: dict[str, list[tuple[int, tuple[int, ...]]]] = defaultdict(list)
    for n, k in enumerate(cons.kds):
        kds_by_pred[k.pred].append((n, tuple(c - 1 for c in k.cols)))
    return ids_by_pred, rhs_keys, kds_by_pred


def _fmt(pred: str, args: tuple) -> str:
    return f"{pred}({','.join(str(a) for a in args)})"


class _Chase:
    """Mutable state of one chase run (merging variant)."""

    def __init__(self, cons: Constraints, max_level: int | None, max_steps: int | None, fresh_start: int):
        self.cons = cons
        self.ids_by_pred, self.rhs_keys, self.kds_by_pred = _compile(cons)
        self.max_level = max_level
        self.max_steps = max_steps if max_steps is not None else DEFAULT_MAX_STEPS
        self.next_fresh = fresh_start
        self.preds: list[str] = []
        self.args: list[tuple] = []
        self.level: list[int] = []
        self.alive: list[bool] = []
        self.atom: dict[tuple, int] = {}
        self.by_const: dict[Constant, set[int]] = defaultdict(set)
        self.proj: dict[tuple, dict[tuple, int]] = defaultdict(lambda: defaultdict(int))
        self.groups: dict[tuple, set[int]] = {}
        self.violating: set[tuple] = set()
        self.fw_heap: list = []
        self.gen_heap: list = []
        self.has_fw = {p: any(c.full_width for c in cs) for p, cs in self.ids_by_pred.items()}
        self.has_gen = {p: any(not c.full_width for c in cs) for p, cs in self.ids_by_pred.items()}
        self.redirect: dict[int, int] = {}
        self.arcs: list[tuple[int, int, str]] = []
        self.steps: list[str] = []
        self.n_steps = 0
        self.hit_cut = False

    # bookkeeping ----------------------------------------------------------
    def _push(self, fid: int) -> None:
        pred = self.preds[fid]
        entry = (self.level[fid], pred, self.args[fid], fid)
        if self.has_fw.get(pred):
            heapq.heappush(self.fw_heap, entry)
        if self.has_gen.get(pred):
            heapq.heappush(self.gen_heap, entry)

    def insert(self, pred: str, args: tuple, level: int) -> int:
        key = (pred, args)
        fid = self.atom.get(key)
        if fid is not None:
            if level < self.level[fid]:
                self.level[fid] = level
                self._push(fid)
            return fid
        fid = len(self.preds)
        self.preds.append(pred)
        self.args.append(args)
        self.level.append(level)
        self.alive.append(True)
        self.atom[key] = fid
        for c in set(args):
            self.by_const[c].add(fid)
        for idx in self.rhs_keys.get(pred, ()):
            self.proj[(pred, idx)][tuple(args[i] for i in idx)] += 1
        for kdi, kidx in self.kds_by_pred.get(pred, ()):
            gk = (kdi, tuple(args[i] for i in kidx))
            g = self.groups.setdefault(gk, set())
            g.add(fid)
            if len(g) >= 2:
                self.violating.add(gk)
        self._push(fid)
        return fid

    def remove(self, fid: int) -> None:
        pred, args = self.preds[fid], self.args[fid]
        self.alive[fid] = False
        del self.atom[(pred, args)]
        for c in set(args):
            s = self.by_const[c]
            s.discard(fid)
            if not s:
                del self.by_const[c]
        for idx in self.rhs_keys.get(pred, ()):
            d = self.proj[(pred, idx)]
            k = tuple(args[i] for i in idx)
            d[k] -= 1
            if not d[k]:
                del d[k]
        for kdi, kidx in self.kds_by_pred.get(pred, ()):
            gk = (kdi, tuple(args[i] for i in kidx))
            g = self.groups[gk]
            g.discard(fid)
            if len(g) < 2:
                self.violating.discard(gk)
            if not g:
                del self.groups[gk]

    def fact_of(self, fid: int) -> Fact:
        return Fact(self.preds[fid], self.args[fid], self.level[fid])

    def _tick(self) -> None:
        self.n_steps += 1
        if self.n_steps > self.max_steps:
            raise ResourceLimitError(f"chase exceeded {self.max_steps} rule applications")

    # KD step --------------------------------------------------------------
    def pick_kd_pair(self):
        best = None
        for gk in self.violating:
            kdi = gk[0]
            members = sorted(self.groups[gk], key=lambda f: (self.preds[f], self.args[f]))
            for i, a in enumerate(members):
                ka = (self.preds[a], self.args[a])
                for b in members[i + 1:]:
                    score = (min(self.level[a], self.level[b]), ka, (self.preds[b], self.args[b]), kdi)
                    if best is None or score < best[0]:
                        best = (score, a, b, kdi)
        return best

    def apply_kd(self, a: int, b: int, kdi: int) -> Failure | None:
        self._tick()
        kd = self.cons.kds[kdi]
        key = set(c - 1 for c in kd.cols)
        parent: dict[Constant, Constant] = {}

        def find(c: Constant) -> Constant:
            while c in parent:
                c = parent[c]
            return c

        args_a, args_b = self.args[a], self.args[b]
        for i in range(len(args_a)):
            if i in key:
                continue
            x, y = find(args_a[i]), find(args_b[i])
            if x == y:
                continue
            if x.tag == NON_FRESH and y.tag == NON_FRESH:
                w = (self.fact_of(a), self.fact_of(b))
                self.steps.append(f"KD {kd.label} on {w[0]} and {w[1]}: fails, {x} and {y} are distinct constants")
                return Failure(self.n_steps, kd, w)
            lo, hi = (x, y) if x < y else (y, x)
            parent[hi] = lo
        subst = {c: find(c) for c in parent}
        self.steps.append(f"KD {kd.label} on {_fmt(self.preds[a], args_a)} and {_fmt(self.preds[b], args_b)}: "
                          + ", ".join(f"{o}->{n}" for o, n in sorted(subst.items())))
        affected: set[int] = set()
        for c in subst:
            affected |= self.by_const.get(c, set())
        pending = []
        for fid in sorted(affected):
            new_args = tuple(subst.get(c, c) for c in self.args[fid])
            pending.append((fid, self.preds[fid], new_args, self.level[fid]))
            self.remove(fid)
        for fid, pred, new_args, lvl in pending:
            self.redirect[fid] = self.insert(pred, new_args, lvl)
        return None

    # ID step --------------------------------------------------------------
    def applicable_id(self, fid: int, full_width_only: bool) -> _CompiledID | None:
        args = self.args[fid]
        for cid in self.ids_by_pred.get(self.preds[fid], ()):
            if full_width_only and not cid.full_width:
                continue
            d = self.proj.get((cid.rhs, cid.rhs_idx))
            if not d or tuple(args[i] for i in cid.lhs_idx) not in d:
                return cid
        return None

    def pick_id(self, full_width: bool):
        heap = self.fw_heap if full_width else self.gen_heap
        while heap:
            lvl, _, _, fid = heap[0]
            if not self.alive[fid] or self.level[fid] != lvl:
                heapq.heappop(heap)
                continue
            cid = self.applicable_id(fid, full_width)
            if cid is None:
                heapq.heappop(heap)
                continue
            if self.max_level is not None and lvl >= self.max_level:
                self.hit_cut = True
                return None
            return fid, cid
        return None

    def apply_id(self, fid: int, cid: _CompiledID) -> None:
        self._tick()
        args = self.args[fid]
        new = [None] * cid.rhs_arity
        for i, j in zip(cid.lhs_idx, cid.rhs_idx):
            new[j] = args[i]
        for j in range(cid.rhs_arity):
            if new[j] is None:
                new[j] = Constant(FRESH, self.next_fresh)
                self.next_fresh += 1
        new_args = tuple(new)
        child = self.insert(cid.rhs, new_args, self.level[fid] + 1)
        self.arcs.append((fid, child, cid.dep.label))
        self.steps.append(f"ID {cid.dep.label} on {_fmt(self.preds[fid], args)} adds "
                          f"{_fmt(cid.rhs, new_args)} at level {self.level[fid] + 1}")

    # driver ---------------------------------------------------------------
    def run(self) -> Failure | None:
        while True:
            while self.violating:
                _, a, b, kdi = self.pick_kd_pair()
                fail = self.apply_kd(a, b, kdi)
                if fail is not None:
                    return fail
            self.hit_cut = False
            choice = self.pick_id(True) or self.pick_id(False)
            if choice is None:
                return None
            self.apply_id(*choice)

    def resolve(self, fid: int) -> int:
        path = []
        while fid in self.redirect:
            path.append(fid)
            fid = self.redirect[fid]
        for p in path:
            self.redirect[p] = fid
        return fid

    def result(self, failure: Failure | None, warnings: tuple[str, ...] = ()) -> ChaseResult:
        facts = frozenset(self.fact_of(f) for f in range(len(self.preds)) if self.alive[f])
        arcs = []
        seen = set()
        for p, c, lab in self.arcs:
            p, c = self.resolve(p), self.resolve(c)
            if p == c or (p, c, lab) in seen:
                continue
            seen.add((p, c, lab))
            arcs.append((self.fact_of(p), self.fact_of(c), lab))
        if failure is not None:
            status, cut = FAILED, None
        elif self.hit_cut:
            status, cut = TRUNCATED, self.max_level
        else:
            status, cut = COMPLETED, None
        return ChaseResult(status, facts, tuple(arcs), tuple(self.steps), cut, failure, warnings)


def _fresh_warning(db: Database) -> tuple[str, ...]:
    if db.has_fresh():
        return ("the input database contains fresh constants",)
    return ()


def build_chase(db: Database | Iterable[Fact], cons: Constraints, max_level: int | None = None,
                max_steps: int | None = None) -> ChaseResult:
    """Run the chase of ``db`` under ``cons``.

    ``max_level=None`` means unbounded, in which case ``max_steps`` guards
    against non-terminating runs with :class:`ResourceLimitError`.
    """
    if not isinstance(db, Database):
        db = Database(db)
    ch = _Chase(cons, max_level, max_steps, db.max_fresh_ordinal() + 1)
    for f in sorted(db, key=Fact.sort_key):
        ch.insert(f.pred, f.args, 0)
    with paused_gc():
        failure = ch.run()
    return ch.result(failure, _fresh_warning(db))


# chase existence --------------------------------------------------------

@dataclass(frozen=True)
class ExistenceCertificate:
    """Verdict of :func:`chase_exists`.

    ``exact`` is True when the input is a CD set, where both verdicts are
    definitive; otherwise only a negative verdict is.  ``method`` names the
    run that settled the question: ``"is-a"`` for the quick run under the
    non-inventing IDs, ``"bounded"`` for the full chase up to ``level``.
    """

    exists: bool
    failure: Failure | None
    exact: bool
    steps: tuple[str, ...] = ()
    method: str = "is-a"
    level: int | None = None

    def __bool__(self) -> bool:
        return self.exists

    @property
    def witness(self) -> tuple[Fact, Fact] | None:
        return None if self.failure is None else self.failure.witness


def non_inventing_ids(cons: Constraints) -> list[InclusionDependency]:
    """IDs of width at least 2 whose right-hand side covers every position.

    Applying them never creates fresh constants, so their chase terminates.
    Under CDs these are the relationship is-a IDs and the projections of
    relationship attributes onto their relationship.
    """
    return [d for d in cons.ids if len(d.rhs_cols) >= 2 and len(d.rhs_cols) == cons.schema[d.rhs]]


def existence_level(cons: Constraints, db: Database) -> int:
    """Chase depth that exposes every failure of a CD chase.

    A failing merge equates two database constants, and database constants
    never occur above level delta_D; merges reach at most delta_C levels
    back, so the chase up to delta_D + delta_C contains every failure.
    """
    from .relational import join_graph_components

    return compute_level_bound(cons, 1, max(join_graph_components(db)[1], 1)).stop_level


def chase_exists(db: Database | Iterable[Fact], cons: Constraints, max_steps: int | None = None) -> ExistenceCertificate:
    """Decide whether the chase of ``db`` exists (does not fail).

    A quick run under the non-inventing IDs and all KDs catches the common
    failures (is-a copies clashing on a key) with a short witness.  For CD
    sets a full chase bounded by :func:`existence_level` then settles the
    question; a failure there needs inventing IDs, for instance a mandatory
    participation whose new fact is merged into a database fact by a key on
    a super-relationship.
    """
    from .cds import CDSet, recognize_cds

    if not isinstance(db, Database):
        db = Database(db)
    exact = isinstance(cons, CDSet) or isinstance(recognize_cds(cons), CDSet)
    quick = build_chase(db, cons.restrict(ids=non_inventing_ids(cons)))
    if quick.failed or not exact:
        return ExistenceCertificate(not quick.failed, quick.failure, exact, quick.steps, "is-a")
    level = existence_level(cons, db)
    full = build_chase(db, cons, max_level=level, max_steps=max_steps)
    return ExistenceCertificate(not full.failed, full.failure, True, full.steps, "bounded", level)


# chase with equalities --------------------------------------------------

class _EqChase:
    """The chase variant that records equalities instead of merging.

    Indexes are keyed by class representatives (the least member of each
    equality class) and rebuilt whenever two classes merge.
    """

    def __init__(self, cons: Constraints, max_level: int | None, max_steps: int | None, fresh_start: int):
        self.cons = cons
        self.ids_by_pred, self.rhs_keys, self.kds_by_pred = _compile(cons)
        self.max_level = max_level
        self.max_steps = max_steps if max_steps is not None else DEFAULT_MAX_STEPS
        self.next_fresh = fresh_start
        self.preds: list[str] = []
        self.args: list[tuple] = []
        self.level: list[int] = []
        self.atom: dict[tuple, int] = {}
        self.parent: dict[Constant, Constant] = {}
        self.members: dict[Constant, list[Constant]] = {}
        self.eq: dict[tuple[Constant, Constant], int] = {}
        self.arcs: list[tuple[int, int, str]] = []
        self.steps: list[str] = []
        self.n_steps = 0
        self.hit_cut = False
        self.fw_heap: list = []
        self.gen_heap: list = []
        self.has_fw = {p: any(c.full_width for c in cs) for p, cs in self.ids_by_pred.items()}
        self.has_gen = {p: any(not c.full_width for c in cs) for p, cs in self.ids_by_pred.items()}
        self.proj: dict[tuple, set] = defaultdict(set)
        self.groups: dict[tuple, dict[tuple, list[int]]] = {}

    def find(self, c: Constant) -> Constant:
        root = c
        while root in self.parent:
            root = self.parent[root]
        while c != root:
            nxt = self.parent[c]
            self.parent[c] = root
            c = nxt
        return root

    def image(self, args: tuple) -> tuple:
        return tuple(self.find(c) for c in args)

    def add_constant(self, c: Constant, level: int) -> None:
        if c not in self.members and c not in self.parent:
            self.members[c] = [c]
            self.eq[(c, c)] = level

    def index_fact(self, fid: int) -> None:
        pred, img = self.preds[fid], self.image(self.args[fid])
        for idx in self.rhs_keys.get(pred, ()):
            self.proj[(pred, idx)].add(tuple(img[i] for i in idx))
        for kdi, kidx in self.kds_by_pred.get(pred, ()):
            g = self.groups.setdefault((kdi, tuple(img[i] for i in kidx)), {})
            g.setdefault(img, []).append(fid)
        entry = (self.level[fid], pred, img, self.args[fid], fid)
        if self.has_fw.get(pred):
            heapq.heappush(self.fw_heap, entry)
        if self.has_gen.get(pred):
            heapq.heappush(self.gen_heap, entry)

    def rebuild(self) -> None:
        self.proj = defaultdict(set)
        self.groups = {}
        self.fw_heap, self.gen_heap = [], []
        for fid in range(len(self.preds)):
            self.index_fact(fid)

    def insert(self, pred: str, args: tuple, level: int) -> int:
        fid = self.atom.get((pred, args))
        if fid is not None:
            return fid
        fid = len(self.preds)
        self.preds.append(pred)
        self.args.append(args)
        self.level.append(level)
        self.atom[(pred, args)] = fid
        for c in args:
            self.add_constant(c, level)
        self.index_fact(fid)
        return fid

    def fact_of(self, fid: int) -> Fact:
        return Fact(self.preds[fid], self.args[fid], self.level[fid])

    def _tick(self) -> None:
        self.n_steps += 1
        if self.n_steps > self.max_steps:
            raise ResourceLimitError(f"chase exceeded {self.max_steps} rule applications")

    def pick_kd_pair(self):
        best = None
        for (kdi, _), by_img in self.groups.items():
            if len(by_img) < 2:
                continue
            fids = sorted((f for fs in by_img.values() for f in fs), key=lambda f: (self.preds[f], self.args[f]))
            for i, a in enumerate(fids):
                ia = self.image(self.args[a])
                for b in fids[i + 1:]:
                    if self.image(self.args[b]) == ia:
                        continue
                    score = (min(self.level[a], self.level[b]), (self.preds[a], self.args[a]),
                             (self.preds[b], self.args[b]), kdi)
                    if best is None or score < best[0]:
                        best = (score, a, b, kdi)
        return best

    def apply_kd(self, a: int, b: int, kdi: int) -> Failure | None:
        self._tick()
        kd = self.cons.kds[kdi]
        key = set(c - 1 for c in kd.cols)
        lvl = min(self.level[a], self.level[b])
        added = []
        failure = None
        for i in range(len(self.args[a])):
            if i in key:
                continue
            x, y = self.find(self.args[a][i]), self.find(self.args[b][i])
            if x == y:
                continue
            mx, my = self.members.pop(x), self.members.pop(y)
            for u in mx:
                for v in my:
                    for pair in ((u, v), (v, u)):
                        if pair not in self.eq:
                            self.eq[pair] = lvl
                            added.append(pair)
            lo, hi = (x, y) if x < y else (y, x)
            self.parent[hi] = lo
            self.members[lo] = mx + my
            bad = [c for c in mx + my if c.tag == NON_FRESH]
            if len(bad) > 1 and failure is None:
                failure = Failure(self.n_steps, kd, (self.fact_of(a), self.fact_of(b)))
        self.steps.append(f"KD {kd.label} on {self.fact_of(a)} and {self.fact_of(b)}: adds "
                          + ", ".join(f"eq({u},{v})" for u, v in sorted(added)))
        if failure is not None:
            return failure
        self.rebuild()
        return None

    def applicable_id(self, fid: int, full_width_only: bool) -> _CompiledID | None:
        img = self.image(self.args[fid])
        for cid in self.ids_by_pred.get(self.preds[fid], ()):
            if full_width_only and not cid.full_width:
                continue
            if tuple(img[i] for i in cid.lhs_idx) not in self.proj.get((cid.rhs, cid.rhs_idx), ()):
                return cid
        return None

    def pick_id(self, full_width: bool):
        heap = self.fw_heap if full_width else self.gen_heap
        while heap:
            lvl, _, _, _, fid = heap[0]
            cid = self.applicable_id(fid, full_width)
            if cid is None:
                heapq.heappop(heap)
                continue
            if self.max_level is not None and lvl >= self.max_level:
                self.hit_cut = True
                return None
            return fid, cid
        return None

    def apply_id(self, fid: int, cid: _CompiledID) -> None:
        self._tick()
        args = self.args[fid]
        new = [None] * cid.rhs_arity
        for i, j in zip(cid.lhs_idx, cid.rhs_idx):
            new[j] = args[i]
        for j in range(cid.rhs_arity):
            if new[j] is None:
                new[j] = Constant(FRESH, self.next_fresh)
                self.next_fresh += 1
        child = self.insert(cid.rhs, tuple(new), self.level[fid] + 1)
        self.arcs.append((fid, child, cid.dep.label))
        self.steps.append(f"ID {cid.dep.label} on {self.fact_of(fid)} adds {self.fact_of(child)} "
                          f"at level {self.level[child]}")

    def run(self) -> Failure | None:
        while True:
            while True:
                pick = self.pick_kd_pair()
                if pick is None:
                    break
                fail = self.apply_kd(pick[1], pick[2], pick[3])
                if fail is not None:
                    return fail
            self.hit_cut = False
            choice = self.pick_id(True) or self.pick_id(False)
            if choice is None:
                return None
            self.apply_id(*choice)

    def result(self, failure: Failure | None, warnings=()) -> EqChaseResult:
        facts = frozenset(self.fact_of(f) for f in range(len(self.preds)))
        eqs = frozenset(Fact("eq", pair, lvl) for pair, lvl in self.eq.items())
        arcs = tuple((self.fact_of(p), self.fact_of(c), lab) for p, c, lab in self.arcs)
        if failure is not None:
            status, cut = FAILED, None
        elif self.hit_cut:
            status, cut = TRUNCATED, self.max_level
        else:
            status, cut = COMPLETED, None
        return EqChaseResult(status, facts, arcs, tuple(self.steps), cut, failure, warnings, eqs)


def build_eq_chase(db: Database | Iterable[Fact], cons: Constraints, max_level: int | None = None,
                   max_steps: int | None = None) -> EqChaseResult:
    """Chase with explicit ``eq`` atoms instead of merging.

    Facts are scheduled by level and then by the lexicographic order of their
    image under the current equality classes, so the run mirrors
    :func:`build_chase` step for step.
    """
    if not isinstance(db, Database):
        db = Database(db)
    ch = _EqChase(cons, max_level, max_steps, db.max_fresh_ordinal() + 1)
    for f in sorted(db, key=Fact.sort_key):
        ch.insert(f.pred, f.args, 0)
    with paused_gc():
        failure = ch.run()
    return ch.result(failure, _fresh_warning(db))


def equality_eliminate(res: EqChaseResult) -> ChaseResult:
    """Collapse every equality class onto its least member and drop ``eq`` atoms."""
    from .errors import SchemaError

    if res.failed:
        raise SchemaError("cannot eliminate equalities of a failed chase")
    parent: dict[Constant, Constant] = {}

    def find(c: Constant) -> Constant:
        while c in parent:
            c = parent[c]
        return c

    for f in sorted(res.eq_facts, key=Fact.sort_key):
        a, b = find(f.args[0]), find(f.args[1])
        if a == b:
            continue
        if a.tag == NON_FRESH and b.tag == NON_FRESH:
            raise SchemaError(f"equality class contains distinct constants {a} and {b}")
        lo, hi = (a, b) if a < b else (b, a)
        parent[hi] = lo

    def rewrite(f: Fact) -> Fact:
        return Fact(f.pred, tuple(find(c) for c in f.args), f.level)

    best: dict[tuple, Fact] = {}
    for f in res.facts:
        g = rewrite(f)
        old = best.get((g.pred, g.args))
        if old is None or g.level < old.level:
            best[(g.pred, g.args)] = g
    facts = frozenset(best.values())
    arcs = []
    seen = set()
    for p, c, lab in res.forest:
        p2, c2 = best[(p.pred, tuple(find(x) for x in p.args))], best[(c.pred, tuple(find(x) for x in c.args))]
        if p2 == c2 or (p2, c2, lab) in seen:
            continue
        seen.add((p2, c2, lab))
        arcs.append((p2, c2, lab))
    return ChaseResult(res.status, facts, tuple(arcs), res.steps, res.truncated_at, None, res.warnings)


def _fact_graph(facts: Iterable[Fact]) -> nx.DiGraph:
    g = nx.DiGraph()
    for f in set(facts):
        shape = tuple(None if c.tag == FRESH else c for c in f.args)
        node = ("fact", f.pred, f.args)
        g.add_node(node, label=(f.pred, shape))
        for pos, c in enumerate(f.args):
            if c.tag != FRESH:
                continue
            g.add_node(("fresh", c), label=None)
            if g.has_edge(node, ("fresh", c)):
                g.edges[node, ("fresh", c)]["pos"] += (pos,)
            else:
                g.add_edge(node, ("fresh", c), pos=(pos,))
    return g


def isomorphic(a: Iterable[Fact], b: Iterable[Fact]) -> bool:
    """True when the fact sets coincide up to a bijective renaming of fresh constants.

    Levels are ignored.  Facts and fresh constants become the nodes of a
    bipartite graph (non-fresh constants are folded into the fact labels)
    and the question is handed to the VF2 matcher of networkx.
    """
    ga, gb = _fact_graph(a), _fact_graph(b)
    if ga.number_of_nodes() != gb.number_of_nodes() or ga.number_of_edges() != gb.number_of_edges():
        return False
    matcher = DiGraphMatcher(ga, gb, node_match=lambda x, y: x["label"] == y["label"],
                             edge_match=lambda x, y: x["pos"] == y["pos"])
    return matcher.is_isomorphic()


# level bound ------------------------------------------------------------

@dataclass(frozen=True)
class LevelBound:
    n_predicates: int
    max_arity: int
    c_d: int
    query_atoms: int
    delta_c: int
    delta_d: int
    delta_m: int
    stop_level: int

    def as_dict(self) -> dict:
        return {"predicates": self.n_predicates, "max_arity": self.max_arity, "c_D": self.c_d,
                "query_atoms": self.query_atoms, "delta_C": self.delta_c, "delta_D": self.delta_d,
                "delta_M": self.delta_m, "stop_level": self.stop_level}


LEVEL_BOUND_LIMIT = 10 ** 9


def compute_level_bound(schema: Mapping[str, int] | Constraints, query_atoms, c_d: int) -> LevelBound:
    """Level cut-off for answering a query with ``query_atoms`` body atoms.

    ``query_atoms`` may also be a query object; its body length is used.
    """
    if isinstance(schema, Constraints):
        schema = schema.schema
    if not isinstance(query_atoms, int):
        query_atoms = len(query_atoms.body)
    if c_d < 0 or query_atoms < 1:
        raise ValueError("c_D must be non-negative and the query must have at least one atom")
    n = len(schema)
    w = max(schema.values(), default=0)
    if w > 12:
        raise LevelBoundError(f"maximum arity {w} makes {w}! unmanageable; cap the arity of the schema")
    dc = n * (1 + n * math.factorial(w))
    dd = dc * c_d
    dm = dd + dc * (query_atoms - 1)
    stop = dm + dc
    if stop > LEVEL_BOUND_LIMIT:
        raise LevelBoundError(f"stop level {stop} exceeds {LEVEL_BOUND_LIMIT}; cap the arity or the data component size")
    return LevelBound(n, w, c_d, query_atoms, dc, dd, dm, stop)
