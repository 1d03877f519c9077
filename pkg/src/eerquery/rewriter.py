"""Compilation of a conjunctive query and a CD set into function-free Datalog.

The pipeline builds, in order:

* ``pi_eq``: reflexivity (per predicate position), symmetry and transitivity
  of the ``eq`` predicate;
* ``pi_kd``: one rule per key dependency and non-key position, deriving
  ``eq`` on that position from ``eq`` on the key;
* ``pi_id``: one rule per inclusion dependency; positions not fed by the
  left-hand side get a Skolem term ``f_<label>_<j>(frontier)``;
* ``q_eq``: the query with every body term routed through an ``eq`` atom;
* the dummy chase: one fact per predicate over distinct synthetic constants,
  chased under the IDs only, with fresh constants relabelled as Skolem terms;
* ``pi_dc``: one rule per arc of the dummy chase, written over *annotated*
  predicates, where the annotation records the shape of each Skolem term
  (``*`` for a plain constant) and the arguments are the constants at its
  leaves;
* ``pi_base``: ``p@[*,...,*](X) :- p(X)`` for every schema predicate;
* ``pi_fin``: the annotated variants of ``pi_kd``, ``pi_eq`` and ``q_eq``.

Variants are generated by running the rules themselves over the domain of
annotation templates: the derivable signatures are exactly the least model of
that abstract program, and every satisfying assignment of a rule body is one
variant.  Each variable gets one template, so terms shared between atoms
automatically share annotations.

Skolem functions whose frontier has several variables (relationship
attributes) produce templates with several holes, e.g. ``f_s_3(*,*)``; the
annotated atom then carries one argument per hole.
"""

from __future__ import annotations

import itertools
import string
from dataclasses import dataclass, field
from typing import Iterable

from .chase import ChaseResult, build_chase
from .cq import ConjunctiveQuery
from .datalog import Program, Rule, evaluate
from .errors import ResourceLimitError, SchemaError
from .relational import NON_FRESH, Constant, Constraints, Database, Fact, InclusionDependency
from .terms import STAR, AnnotatedPred, Apply, Atom, Skolem, SkolemInterner, Variable, holes

EQ = "eq"
DEFAULT_MAX_RULES = 500_000


def skolem_name(dep: InclusionDependency, position: int) -> str:
    return f"f_{dep.label}_{position}"


def _vars(prefix: str, n: int) -> list[Variable]:
    return [Variable(f"{prefix}{i}") for i in range(1, n + 1)]


def _check_reserved(cons: Constraints) -> None:
    if EQ in cons.schema:
        raise SchemaError(f"predicate name '{EQ}' is reserved for equality")
    for p in cons.schema:
        if "@" in p:
            raise SchemaError(f"predicate name {p} may not contain '@'")


def build_pi_eq(schema) -> list[Rule]:
    """Reflexivity for every predicate position, then symmetry and transitivity."""
    if isinstance(schema, Constraints):
        schema = schema.schema
    rules = []
    for pred, arity in schema.items():
        xs = _vars("X", arity)
        for x in xs:
            rules.append(Rule(Atom(EQ, (x, x)), (Atom(pred, tuple(xs)),)))
    x, y, z = Variable("X"), Variable("Y"), Variable("Z")
    rules.append(Rule(Atom(EQ, (y, x)), (Atom(EQ, (x, y)),)))
    rules.append(Rule(Atom(EQ, (x, z)), (Atom(EQ, (x, y)), Atom(EQ, (y, z)))))
    return rules


def build_pi_kd(cons: Constraints) -> list[Rule]:
    rules = []
    for kd in cons.kds:
        n = cons.schema[kd.pred]
        xs, ys = _vars("X", n), _vars("Y", n)
        key_eqs = tuple(Atom(EQ, (xs[k - 1], ys[k - 1])) for k in kd.cols)
        for i in range(1, n + 1):
            if i in kd.cols:
                continue
            rules.append(Rule(Atom(EQ, (xs[i - 1], ys[i - 1])),
                              (Atom(kd.pred, tuple(xs)), Atom(kd.pred, tuple(ys))) + key_eqs))
    return rules


def build_pi_id(cons: Constraints) -> list[Rule]:
    rules = []
    for d in cons.ids:
        m = cons.schema[d.lhs]
        xs = _vars("X", m) if m > 1 else [Variable("X")]
        frontier = tuple(xs[i - 1] for i in d.lhs_cols)
        head: list = []
        where = dict(zip(d.rhs_cols, frontier))
        for j in range(1, cons.schema[d.rhs] + 1):
            head.append(where[j] if j in where else Apply(skolem_name(d, j), frontier))
        rules.append(Rule(Atom(d.rhs, tuple(head)), (Atom(d.lhs, tuple(xs)),)))
    return rules


def _fresh_names(taken: set[str]) -> Iterable[str]:
    for n in itertools.count():
        for letter in string.ascii_uppercase:
            name = letter if n == 0 else f"{letter}{n}"
            if name not in taken:
                yield name


def maquillage(q: ConjunctiveQuery) -> ConjunctiveQuery:
    """Route every body term through an explicit ``eq`` atom."""
    if q.name == EQ:
        raise SchemaError(f"query name '{EQ}' is reserved")
    taken = {v.name for v in q.variables()} | {v.name for v in q.head}
    names = _fresh_names(taken)
    body, eqs = [], []
    for a in q.body:
        args = []
        for t in a.args:
            v = Variable(next(names))
            args.append(v)
            eqs.append(Atom(EQ, (v, t)))
        body.append(Atom(a.pred, tuple(args)))
    return ConjunctiveQuery(q.name, q.head, tuple(body) + tuple(eqs))


# annotations ------------------------------------------------------------

class _Annotator:
    """Templates and leaf constants of relabelled dummy-chase values.

    Both are memoised per Skolem term, so deep chains are handled without
    recursion and shared subterms are processed once.
    """

    def __init__(self):
        self.templates = SkolemInterner()
        self._tmpl: dict = {}
        self._leaves: dict = {}

    def template(self, v):
        if not isinstance(v, Skolem):
            return STAR
        t = self._tmpl.get(v)
        if t is None:
            t = self._tmpl[v] = self.templates.make(v.fn, tuple(self.template(a) for a in v.args))
        return t

    def leaves(self, v) -> tuple:
        if not isinstance(v, Skolem):
            return (v,)
        out = self._leaves.get(v)
        if out is None:
            out = ()
            for a in v.args:
                out += self.leaves(a)
            self._leaves[v] = out
        return out

    def annotate(self, pred: str, args: tuple) -> tuple[AnnotatedPred, tuple]:
        """Annotated predicate and leaf arguments of a relabelled atom."""
        leaves: tuple = ()
        for a in args:
            leaves += self.leaves(a)
        return AnnotatedPred(pred, tuple(self.template(a) for a in args)), leaves


def all_star(pred: str, arity: int) -> AnnotatedPred:
    return AnnotatedPred(pred, (STAR,) * arity)


@dataclass(frozen=True)
class DummyChase:
    database: Database
    chase: ChaseResult
    relabelled: tuple[tuple[tuple[str, tuple], tuple[str, tuple], str], ...]
    annotated: tuple[tuple[tuple[AnnotatedPred, tuple], tuple[AnnotatedPred, tuple], str], ...]
    roots: tuple[tuple[AnnotatedPred, tuple], ...]


def dummy_database(schema) -> Database:
    facts = [Fact(p, tuple(Constant(NON_FRESH, f"#{p}/{i}") for i in range(1, n + 1)))
             for p, n in schema.items()]
    return Database(facts)


def build_dummy_chase(cons: Constraints, max_level: int, max_steps: int | None = None) -> DummyChase:
    """Chase the dummy database under the IDs and relabel fresh values as Skolem terms.

    Every fresh value is created by exactly one ID application, and the
    frontier of that application is already relabelled when the arc is
    reached, so a single pass over the arcs in creation order suffices.
    """
    db = dummy_database(cons.schema)
    ch = build_chase(db, cons.restrict(kds=()), max_level=max_level, max_steps=max_steps)
    term: dict[Constant, object] = {}
    interner = SkolemInterner()

    def t(c):
        return term.get(c, c)

    relabelled = []
    for parent, child, label in ch.forest:
        d = cons.by_label(label)
        frontier = tuple(t(parent.args[i - 1]) for i in d.lhs_cols)
        for j, c in enumerate(child.args, start=1):
            if j not in d.rhs_cols and c.tag != NON_FRESH and c not in term:
                term[c] = interner.make(skolem_name(d, j), frontier)
        relabelled.append(((parent.pred, tuple(t(c) for c in parent.args)),
                           (child.pred, tuple(t(c) for c in child.args)), label))
    ann = _Annotator()
    annotated = tuple((ann.annotate(*p), ann.annotate(*c), lab) for p, c, lab in relabelled)
    roots = tuple(ann.annotate(f.pred, f.args) for f in db.sorted_facts())
    return DummyChase(db, ch, tuple(relabelled), annotated, roots)


def build_pi_dc(dummy: DummyChase) -> list[Rule]:
    """One rule per dummy-chase arc, constants generalised to variables."""
    rules: dict[Rule, None] = {}
    for (bpred, bargs), (hpred, hargs), _ in dummy.annotated:
        names: dict = {}

        def var(c):
            if c not in names:
                names[c] = Variable(f"X{len(names) + 1}")
            return names[c]

        body = Atom(bpred, tuple(var(c) for c in bargs))
        head = Atom(hpred, tuple(var(c) for c in hargs))
        rules.setdefault(Rule(head, (body,)), None)
    return list(rules)


def build_pi_base(schema) -> list[Rule]:
    rules = []
    for p, n in schema.items():
        xs = tuple(_vars("X", n))
        rules.append(Rule(Atom(all_star(p, n), xs), (Atom(p, xs),)))
    return rules


# the final program -------------------------------------------------------

def _abstract_rule(rule: Rule, fixed: dict[Variable, object]) -> Rule:
    """The rule over the annotation domain; constants become ``*``."""
    def conv(t):
        if isinstance(t, Variable):
            return fixed.get(t, t)
        return STAR
    return Rule(Atom(rule.head.pred, tuple(conv(t) for t in rule.head.args)),
                tuple(Atom(a.pred, tuple(conv(t) for t in a.args)) for a in rule.body))


def _expand(rule: Rule, assignment: dict[Variable, object]) -> Rule:
    def leaves(t) -> list:
        if isinstance(t, Variable):
            k = holes(assignment[t])
            return [t] if k == 1 else [Variable(f"{t.name}_{i}") for i in range(1, k + 1)]
        return [t]

    def atom(a: Atom) -> Atom:
        tmpl = tuple(assignment[t] if isinstance(t, Variable) else STAR for t in a.args)
        args: list = []
        for t in a.args:
            args.extend(leaves(t))
        return Atom(AnnotatedPred(a.pred, tmpl), tuple(args))

    return Rule(atom(rule.head), tuple(atom(a) for a in rule.body))


@dataclass(frozen=True)
class RewriteBundle:
    pi_eq: tuple[Rule, ...]
    pi_kd: tuple[Rule, ...]
    pi_id: tuple[Rule, ...]
    q_eq: ConjunctiveQuery
    dummy: DummyChase
    pi_dc: tuple[Rule, ...]
    pi_base: tuple[Rule, ...]
    pi_fin: Program
    max_level: int
    annotations: dict = field(default_factory=dict)

    def stages(self) -> dict[str, str]:
        def txt(rules):
            return "".join(sorted(f"{r}\n" for r in rules))
        return {"pi_eq": txt(self.pi_eq), "pi_kd": txt(self.pi_kd), "pi_id": txt(self.pi_id),
                "q_eq": f"{self.q_eq}\n", "pi_dc": txt(self.pi_dc), "pi_base": txt(self.pi_base),
                "pi_fin": self.pi_fin.text()}


DERIVABLE = "derivable"
LITERAL = "literal"


def _literal_variants(rules: list[Rule], query_rule: Rule, q_eq: ConjunctiveQuery, pi_dc: list[Rule],
                      max_rules: int) -> list[Rule]:
    """Every assignment of templates occurring in ``pi_dc`` to the variables of every rule."""
    elements = {STAR}
    for r in pi_dc:
        for a in (r.head, *r.body):
            elements.update(a.pred.templates)
    elements = sorted(elements, key=str)
    out: list[Rule] = []
    for r in rules + [query_rule]:
        fixed = {v: STAR for v in q_eq.head} if r is query_rule else {}
        free = sorted((v for v in r.variables() if v not in fixed), key=lambda v: v.name)
        if len(out) + len(elements) ** len(free) > max_rules:
            raise ResourceLimitError(f"annotated program exceeds {max_rules} rules (max_rules)")
        for combo in itertools.product(elements, repeat=len(free)):
            assignment = dict(fixed)
            assignment.update(zip(free, combo))
            out.append(_expand(r, assignment))
    return out


def build_pi_fin(q: ConjunctiveQuery, cons: Constraints, pi_dc: list[Rule],
                 max_rules: int = DEFAULT_MAX_RULES, variants: str = DERIVABLE) -> tuple[Program, dict[str, set]]:
    """Annotated variants of the equality, key and query rules.

    Returns the program and, per predicate, the set of derivable annotations.
    With ``variants="literal"`` every variable ranges over all templates
    occurring in ``pi_dc``, whether or not the annotated body atoms can ever
    hold; the extra rules never fire, so answers are unchanged.
    """
    q.check_schema(cons.schema)
    q_eq = maquillage(q)
    templates_rules = build_pi_kd(cons) + build_pi_eq(cons.schema)
    query_rule = Rule(Atom(q_eq.name, q_eq.head), q_eq.body)
    if variants not in (DERIVABLE, LITERAL):
        raise ValueError(f"unknown variant mode {variants!r}")

    abstract: list[Rule] = []
    for r in pi_dc:
        b, h = r.body[0].pred, r.head.pred
        abstract.append(Rule(Atom(h.base, h.templates), (Atom(b.base, b.templates),)))
    witness: list[tuple[str, Rule, list[Variable], dict]] = []
    for n, r in enumerate(templates_rules + [query_rule]):
        fixed = {v: STAR for v in q_eq.head} if r is query_rule else {}
        ar = _abstract_rule(r, fixed)
        abstract.append(ar)
        free = sorted((v for v in r.variables() if v not in fixed), key=lambda v: v.name)
        wpred = f"@variant{n}"
        abstract.append(Rule(Atom(wpred, tuple(free)), ar.body))
        witness.append((wpred, r, free, fixed))

    seed = {p: {tuple([STAR] * n)} for p, n in cons.schema.items()}
    model = evaluate(abstract, seed, max_facts=max_rules * 4)

    rules: list[Rule] = []
    if variants == LITERAL:
        rules = _literal_variants(templates_rules, query_rule, q_eq, pi_dc, max_rules)
        witness = []
    for wpred, r, free, fixed in witness:
        for tup in model.get(wpred, ()):
            assignment = dict(fixed)
            assignment.update(zip(free, tup))
            rules.append(_expand(r, assignment))
            if len(rules) > max_rules:
                raise ResourceLimitError(f"annotated program exceeds {max_rules} rules (max_rules)")
    base = build_pi_base(cons.schema)
    fin = Program(tuple(pi_dc) + tuple(base) + tuple(rules), all_star(q.name, len(q.head)))
    annotations = {p: s for p, s in model.items() if not p.startswith("@")}
    return fin, annotations


def rewrite(q: ConjunctiveQuery, cons: Constraints, max_level: int, max_rules: int = DEFAULT_MAX_RULES,
            max_steps: int | None = None, variants: str = DERIVABLE) -> RewriteBundle:
    """Run every stage and return them all; ``max_level`` is the dummy-chase depth."""
    _check_reserved(cons)
    q.check_schema(cons.schema)
    dummy = build_dummy_chase(cons, max_level, max_steps=max_steps)
    pi_dc = build_pi_dc(dummy)
    fin, annotations = build_pi_fin(q, cons, pi_dc, max_rules, variants)
    return RewriteBundle(tuple(build_pi_eq(cons.schema)), tuple(build_pi_kd(cons)), tuple(build_pi_id(cons)),
                         maquillage(q), dummy, tuple(pi_dc), tuple(build_pi_base(cons.schema)), fin, max_level,
                         annotations)


def inconsistency_witness(model: dict[str, set]) -> tuple | None:
    """A pair of distinct constants equated at the top (all-``*``) level, if any."""
    for a, b in sorted(model.get(all_star(EQ, 2), ())):
        if a != b:
            return (a, b)
    return None
