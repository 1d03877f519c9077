"""Bottom-up evaluation of positive Datalog programs.

Rules are compiled into small Python functions (one per rule and per choice of
the "delta" body atom) that run nested index lookups.  Evaluation is
semi-naive: every round joins the facts that are new in the previous round
against everything known so far.  Rule heads may contain function terms; the
resulting ground Skolem terms are interned, and ``depth_cap`` discards any
fact whose nesting would exceed the cap, which keeps programs with function
symbols finite.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import ProgramError, ResourceLimitError
from .relational import Fact
from .terms import Apply, Atom, Skolem, SkolemInterner, Variable
from .util import paused_gc


@dataclass(frozen=True)
class Rule:
    head: Atom
    body: tuple[Atom, ...] = ()

    def __str__(self) -> str:
        if not self.body:
            return f"{self.head}."
        return f"{self.head} :- {', '.join(str(a) for a in self.body)}."

    def variables(self) -> set[Variable]:
        out = self.head.variables()
        for a in self.body:
            out |= a.variables()
        return out

    def is_function_free(self) -> bool:
        return not any(isinstance(t, Apply) for a in (self.head, *self.body) for t in a.args)

    def canonical(self) -> "Rule":
        """The same rule with variables renamed V0, V1, ... by first occurrence."""
        names: dict[Variable, Variable] = {}

        def ren(t):
            if isinstance(t, Variable):
                if t not in names:
                    names[t] = Variable(f"V{len(names)}")
                return names[t]
            if isinstance(t, Apply):
                return Apply(t.fn, tuple(ren(a) for a in t.args))
            return t

        head = Atom(self.head.pred, tuple(ren(t) for t in self.head.args))
        body = tuple(Atom(a.pred, tuple(ren(t) for t in a.args)) for a in self.body)
        return Rule(head, body)

    def check_range_restricted(self) -> None:
        body_vars: set[Variable] = set()
        for a in self.body:
            for t in a.args:
                if isinstance(t, Apply):
                    raise ProgramError(f"function terms in rule bodies are not supported: {self}")
            body_vars |= a.variables()
        missing = self.head.variables() - body_vars
        if missing:
            names = ", ".join(sorted(v.name for v in missing))
            raise ProgramError(f"rule is not range-restricted (head variables {names} not in body): {self}")


@dataclass(frozen=True)
class Program:
    rules: tuple[Rule, ...]
    query_pred: str | None = None

    def __post_init__(self):
        for r in self.rules:
            r.check_range_restricted()

    def is_function_free(self) -> bool:
        return all(r.is_function_free() for r in self.rules)

    def head_predicates(self) -> set[str]:
        return {r.head.pred for r in self.rules}

    def text(self) -> str:
        return "".join(sorted(f"{r}\n" for r in self.rules))

    def __len__(self) -> int:
        return len(self.rules)


def parse_program(text: str, query_pred: str | None = None) -> Program:
    from .textio import parse_predicate, parse_program_rules

    if isinstance(query_pred, str):
        query_pred = parse_predicate(query_pred)
    return Program(tuple(Rule(h, b) for h, b in parse_program_rules(text)), query_pred)


# evaluation ------------------------------------------------------------

class _Store:
    """All facts known so far, with incrementally maintained hash indexes."""

    def __init__(self):
        self.sets: dict[str, set] = defaultdict(set)
        self.lists: dict[str, list] = defaultdict(list)
        self.indexes: dict[tuple, dict] = {}
        self.by_pred: dict[str, list[tuple]] = defaultdict(list)
        self.size = 0

    def index(self, pred: str, positions: tuple[int, ...]):
        if not positions:
            return self.lists[pred]
        key = (pred, positions)
        idx = self.indexes.get(key)
        if idx is None:
            idx = defaultdict(list)
            single = positions[0] if len(positions) == 1 else None
            for t in self.lists[pred]:
                idx[t[single] if single is not None else tuple(t[i] for i in positions)].append(t)
            self.indexes[key] = idx
            self.by_pred[pred].append(positions)
        return idx

    def add(self, pred: str, tup: tuple) -> None:
        self.sets[pred].add(tup)
        self.lists[pred].append(tup)
        self.size += 1
        for positions in self.by_pred.get(pred, ()):
            idx = self.indexes[(pred, positions)]
            if len(positions) == 1:
                idx[tup[positions[0]]].append(tup)
            else:
                idx[tuple(tup[i] for i in positions)].append(tup)


def _term_expr(t, var_name: dict, env: dict) -> str:
    if isinstance(t, Variable):
        return var_name[t]
    if isinstance(t, Apply):
        fn_key = f"F{len(env)}"
        env[fn_key] = t.fn
        inner = ", ".join(_term_expr(a, var_name, env) for a in t.args)
        return f"mk({fn_key}, ({inner},))"
    key = f"C{len(env)}"
    env[key] = t
    return key


_code_cache: dict[str, object] = {}


def _overflow(limit: int):
    raise ResourceLimitError(f"fixpoint exceeded {limit} facts")


def _compile(rule: Rule, delta_pos: int | None, store: _Store, new: dict, depth_cap: int | None,
             max_new: int | None = None):
    """Generate ``run(delta)`` for one rule; ``delta`` feeds body atom ``delta_pos``."""
    env: dict[str, object] = {}
    var_name: dict[Variable, str] = {}
    lines = ["def run(delta, mk):"]
    indent = 1
    body = list(rule.body)
    order: list[int] = []
    bound: set[Variable] = set()
    remaining = list(range(len(body)))
    if delta_pos is not None:
        order.append(delta_pos)
        remaining.remove(delta_pos)
        bound |= body[delta_pos].variables()
    while remaining:
        best = max(remaining, key=lambda i: (sum(1 for t in body[i].args if not isinstance(t, Variable) or t in bound), -i))
        order.append(best)
        remaining.remove(best)
        bound |= body[best].variables()

    seen: set[Variable] = set()
    for step, i in enumerate(order):
        a = body[i]
        tv = f"t{step}"
        if step == 0 and delta_pos is not None:
            lines.append("    " * indent + f"for {tv} in delta:")
            key_positions: tuple[int, ...] = ()
        else:
            key_positions = tuple(p for p, t in enumerate(a.args) if not isinstance(t, Variable) or t in seen)
            ix = f"I{len(env)}"
            env[ix] = store.index(a.pred, key_positions)
            if not key_positions:
                lines.append("    " * indent + f"for {tv} in {ix}:")
            else:
                parts = [_term_expr(a.args[p], var_name, env) for p in key_positions]
                key = parts[0] if len(parts) == 1 else "(" + ", ".join(parts) + ",)"
                lines.append("    " * indent + f"for {tv} in {ix}.get({key}, ()):")
        indent += 1
        conds = []
        for p, t in enumerate(a.args):
            if p in key_positions:
                continue
            if isinstance(t, Variable):
                if t in seen:
                    conds.append(f"{tv}[{p}] != {var_name[t]}")
                else:
                    var_name[t] = f"v{len(var_name)}"
                    seen.add(t)
                    lines.append("    " * indent + f"{var_name[t]} = {tv}[{p}]")
            else:
                conds.append(f"{tv}[{p}] != {_term_expr(t, var_name, env)}")
        if conds:
            lines.append("    " * indent + f"if {' or '.join(conds)}: continue")

    head = rule.head
    args = []
    for p, t in enumerate(head.args):
        expr = _term_expr(t, var_name, env)
        if isinstance(t, Apply):
            lines.append("    " * indent + f"h{p} = {expr}")
            if depth_cap is not None:
                lines.append("    " * indent + f"if h{p}.depth > {depth_cap}: continue")
            expr = f"h{p}"
        args.append(expr)
    tup = "(" + ", ".join(args) + ("," if len(args) == 1 else "") + ")"
    env["R"] = store.sets[head.pred]
    env["N"] = new.setdefault(head.pred, set())
    lines.append("    " * indent + f"h = {tup}")
    if max_new is None:
        lines.append("    " * indent + "if h not in R: N.add(h)")
    else:
        env["LIMIT"] = max_new
        env["overflow"] = _overflow
        lines.append("    " * indent + "if h not in R:")
        lines.append("    " * indent + "    N.add(h)")
        lines.append("    " * indent + "    if len(N) > LIMIT: overflow(LIMIT)")
    src = "\n".join(lines)
    code = _code_cache.get(src)
    if code is None:
        code = _code_cache[src] = compile(src, "<rule>", "exec")
    exec(code, env)
    return env["run"]


def _normalise_input(db) -> dict[str, set]:
    if db is None:
        return {}
    if isinstance(db, Mapping):
        return {p: set(ts) for p, ts in db.items()}
    out: dict[str, set] = defaultdict(set)
    for f in db:
        out[f.pred].add(f.args)
    return out


def _check_arities(rules: list[Rule], inputs: Mapping[str, set]) -> None:
    seen: dict = {}
    for r in rules:
        for a in (r.head, *r.body):
            if seen.setdefault(a.pred, len(a.args)) != len(a.args):
                raise ProgramError(f"predicate {a.pred} is used with arities {seen[a.pred]} and {len(a.args)}")
    for pred, tuples in inputs.items():
        for t in tuples:
            if seen.setdefault(pred, len(t)) != len(t):
                raise ProgramError(f"predicate {pred} is used with arities {seen[pred]} and {len(t)}")
            break


_AUX = "%part"


def _split_components(rules: list[Rule]) -> list[Rule]:
    """Rewrite rules whose bodies fall apart into variable-disjoint pieces.

    Each piece becomes an auxiliary rule that projects onto the head
    variables it binds, and the original head joins the projections.  A
    body like ``e(A), eq(A,X), r(B,C), eq(B,Y)`` otherwise makes every new
    ``eq`` fact rescan all of ``r``; after the split each piece is evaluated
    once per round and an empty piece costs nothing.
    """
    out = []
    for n, r in enumerate(rules):
        if len(r.body) < 2:
            out.append(r)
            continue
        parent = list(range(len(r.body)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        owner: dict[Variable, int] = {}
        for i, a in enumerate(r.body):
            for v in a.variables():
                j = owner.setdefault(v, i)
                parent[find(i)] = find(j)
        groups: dict[int, list[Atom]] = {}
        for i, a in enumerate(r.body):
            groups.setdefault(find(i), []).append(a)
        if len(groups) == 1:
            out.append(r)
            continue
        head_vars = r.head.variables()
        joined = []
        for k, atoms in enumerate(groups.values()):
            bound = set().union(*(a.variables() for a in atoms))
            args = tuple(sorted(bound & head_vars, key=lambda v: v.name))
            aux = Atom(f"{_AUX}{n}_{k}", args)
            out.append(Rule(aux, tuple(atoms)))
            joined.append(aux)
        out.append(Rule(r.head, tuple(joined)))
    return out


def evaluate(rules: Iterable[Rule], db=None, depth_cap: int | None = None,
             max_facts: int | None = None, naive: bool = False, stop=None) -> dict[str, set]:
    """Least model of ``rules`` over ``db``, as predicate -> set of tuples.

    ``db`` may be a :class:`Database`, an iterable of facts or a mapping from
    predicate names to tuples.  Programs with function symbols need a
    ``depth_cap`` to guarantee termination.  ``max_facts`` bounds the model
    size (checked while rules fire, not only between rounds).

    ``stop``, if given, is called with the facts that are new in each round
    (a mapping predicate -> list of tuples); when it returns True evaluation
    ends early and the partial model is returned.  Only use it for
    properties that, once seen, stay true in the full model.
    """
    rules = list(rules)
    for r in rules:
        r.check_range_restricted()
    inputs = _normalise_input(db)
    _check_arities(rules, inputs)
    if depth_cap is None and not all(r.is_function_free() for r in rules):
        raise ProgramError("programs with function symbols need a depth cap")
    rules = _split_components(rules)
    with paused_gc():
        return _run(rules, inputs, depth_cap, max_facts, naive, stop)


def _run(rules: list[Rule], inputs: dict[str, set], depth_cap: int | None, max_facts: int | None,
         naive: bool, stop) -> dict[str, set]:
    store = _Store()
    interner = SkolemInterner()
    mk = interner.make
    new: dict[str, set] = {}
    facts = [r for r in rules if not r.body]
    proper = [r for r in rules if r.body]

    delta: dict[str, list] = defaultdict(list)
    for pred, tuples in inputs.items():
        for t in tuples:
            if t not in store.sets[pred]:
                store.add(pred, t)
                delta[pred].append(t)
    for r in facts:
        tup = tuple(r.head.args)
        if any(isinstance(t, (Variable, Apply)) for t in tup):
            raise ProgramError(f"facts must be ground: {r}")
        if tup not in store.sets[r.head.pred]:
            store.add(r.head.pred, tup)
            delta[r.head.pred].append(tup)

    max_new = None if max_facts is None else max_facts
    if naive:
        compiled = [(None, _compile(r, None, store, new, depth_cap, max_new)) for r in proper]
    else:
        compiled = [(r.body[i].pred, _compile(r, i, store, new, depth_cap, max_new))
                    for r in proper for i in range(len(r.body))]

    if stop is not None and stop(delta):
        return _visible(store)
    while True:
        for s in new.values():
            s.clear()
        for pred, fn in compiled:
            if pred is None:
                fn(None, mk)
            elif delta.get(pred):
                fn(delta[pred], mk)
        delta = defaultdict(list)
        added = 0
        for pred, s in new.items():
            for t in s:
                store.add(pred, t)
                delta[pred].append(t)
            added += len(s)
        if max_facts is not None and store.size > max_facts:
            raise ResourceLimitError(f"fixpoint exceeded {max_facts} facts")
        if not added or (stop is not None and stop(delta)):
            break
    return _visible(store)


def _visible(store: _Store) -> dict[str, set]:
    return {p: set(s) for p, s in store.sets.items() if s and not (isinstance(p, str) and p.startswith(_AUX))}


def model_facts(model: Mapping[str, set]) -> set[Fact]:
    return {Fact(p, t) for p, ts in model.items() for t in ts}


def seminaive_fixpoint(program: Program | Iterable[Rule], db=None, max_facts: int | None = None) -> dict[str, set]:
    rules = program.rules if isinstance(program, Program) else tuple(program)
    if not all(r.is_function_free() for r in rules):
        raise ProgramError("seminaive_fixpoint expects a function-free program")
    return evaluate(rules, db, max_facts=max_facts)


def naive_fixpoint(program: Program | Iterable[Rule], db=None) -> dict[str, set]:
    """Plain iteration of the immediate consequence operator (test oracle)."""
    rules = program.rules if isinstance(program, Program) else tuple(program)
    return evaluate(rules, db, naive=True)


def bounded_herbrand_fixpoint(program: Program | Iterable[Rule], db, depth_cap: int,
                              max_facts: int | None = None) -> dict[str, set]:
    """Least model restricted to atoms whose Skolem nesting is at most ``depth_cap``."""
    if depth_cap < 0:
        raise ValueError("depth_cap must be non-negative")
    rules = program.rules if isinstance(program, Program) else tuple(program)
    return evaluate(rules, db, depth_cap=depth_cap, max_facts=max_facts)


def has_skolem(tup: tuple) -> bool:
    return any(isinstance(v, Skolem) for v in tup)


def answer(program: Program, db, drop_skolem: bool = True, depth_cap: int | None = None,
           max_facts: int | None = None) -> set[tuple]:
    """Fixpoint, then the tuples of the query predicate."""
    if program.query_pred is None:
        raise ProgramError("program has no query predicate")
    model = evaluate(program.rules, db, depth_cap=depth_cap, max_facts=max_facts)
    out = model.get(program.query_pred, set())
    if drop_skolem:
        out = {t for t in out if not has_skolem(t)}
    return set(out)
