"""Relevant grounding of a program with respect to one query atom.

Goals are solved top-down with a table per call variant; evaluation is
repeated in rounds until no table grows, which makes recursive predicates
terminate on finite data. A ground goal that is re-entered while still on
the call stack answers itself optimistically, so ground cycles end up in
the recorded dependency graph and are rejected afterwards.

Probabilistic facts, annotated disjunctions and probabilistic rules become
categorical *choices*; distributional facts become random *variables*;
comparisons that mention a random variable become comparison literals.
Everything is recorded in discovery order, so two programs that differ only
in numbers ground to identically shaped results.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from promis.errors import CycleError, GroundingError
from promis.hplp.ast import (
    AnnotatedDisjunction,
    Assignment,
    Atom,
    BinOp,
    Body,
    Comparison,
    Const,
    DistributionalFact,
    Fact,
    Neg,
    Num,
    ProbFact,
    Program,
    Query,
    Rule,
    Var,
)
from promis.hplp.printer import format_atom, format_number

NONE_MASS_EPS = 1e-12
AUX_PREFIX = "__aux"


@dataclass(frozen=True)
class Choice:
    """One independent categorical draw.

    Category ``k < len(atoms)`` makes ``atoms[k]`` true; the optional last
    category selects nothing.
    """

    atoms: tuple[int, ...]
    probs: tuple[float, ...]
    has_none: bool
    origin: int

    @property
    def categories(self) -> int:
        return len(self.atoms) + self.has_none

    def category_probs(self) -> tuple[float, ...]:
        if not self.has_none:
            return self.probs
        return self.probs + (max(0.0, 1.0 - sum(self.probs)),)


@dataclass(frozen=True)
class RandomVariable:
    atom: Atom
    mean: float
    std: float
    origin: int

    @property
    def name(self) -> str:
        return format_atom(self.atom)


@dataclass(frozen=True)
class GroundComparison:
    """``left op right`` over ground expressions.

    Expressions are nested tuples: ``("num", v)``, ``("rv", i)``,
    ``("neg", e)`` and ``(op, a, b)`` for ``op`` in ``+ - *``.
    """

    left: tuple
    op: str
    right: tuple

    def variables(self) -> set[int]:
        return expr_variables(self.left) | expr_variables(self.right)


@dataclass(frozen=True)
class GroundRule:
    """``head`` holds if every body literal holds.

    Literals are ``("atom", i)``, ``("choice", c, k)`` and ``("cmp", j)``.
    """

    head: int
    body: tuple


@dataclass
class GroundProgram:
    query: Atom
    query_index: int | None
    atoms: tuple[Atom, ...]
    rules: tuple[GroundRule, ...]
    choices: tuple[Choice, ...]
    variables: tuple[RandomVariable, ...]
    comparisons: tuple[GroundComparison, ...]
    order: tuple[int, ...] = ()  # atoms, dependencies first
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def describe(self) -> str:
        lines = [f"query: {format_atom(self.query)}"]
        for c, choice in enumerate(self.choices):
            alts = "; ".join(f"{p:g}::{format_atom(self.atoms[a])}" for p, a in zip(choice.probs, choice.atoms))
            lines.append(f"choice {c}: {alts}")
        for v in self.variables:
            lines.append(f"variable: {v.name} ~ normal({format_number(v.mean)}, {format_number(v.std)})")
        for rule in self.rules:
            body = ", ".join(self.format_literal(l) for l in rule.body) or "true"
            lines.append(f"{format_atom(self.atoms[rule.head])} :- {body}.")
        return "\n".join(lines)

    def format_literal(self, lit) -> str:
        if lit[0] == "atom":
            return format_atom(self.atoms[lit[1]])
        if lit[0] == "choice":
            return f"choice{lit[1]}={lit[2]}"
        cmp = self.comparisons[lit[1]]
        return f"{format_expr(cmp.left, self)} {cmp.op} {format_expr(cmp.right, self)}"


def expr_variables(expr) -> set[int]:
    tag = expr[0]
    if tag == "rv":
        return {expr[1]}
    if tag == "num":
        return set()
    if tag == "neg":
        return expr_variables(expr[1])
    return expr_variables(expr[1]) | expr_variables(expr[2])


def format_expr(expr, g: GroundProgram | None = None) -> str:
    tag = expr[0]
    if tag == "num":
        return format_number(expr[1])
    if tag == "rv":
        return g.variables[expr[1]].name if g else f"v{expr[1]}"
    if tag == "neg":
        return f"-({format_expr(expr[1], g)})"
    return f"({format_expr(expr[1], g)} {tag} {format_expr(expr[2], g)})"


def _remap_expr(expr, mapping):
    tag = expr[0]
    if tag == "rv":
        return ("rv", mapping[expr[1]])
    if tag == "num":
        return expr
    if tag == "neg":
        return ("neg", _remap_expr(expr[1], mapping))
    return (tag, _remap_expr(expr[1], mapping), _remap_expr(expr[2], mapping))


def _fold(op, a, b):
    if a[0] == "num" and b[0] == "num":
        x, y = a[1], b[1]
        return ("num", x + y if op == "+" else x - y if op == "-" else x * y)
    return (op, a, b)


def _compare(x: float, op: str, y: float) -> bool:
    return {"<": x < y, ">": x > y, "=<": x <= y, ">=": x >= y}[op]


# -- clause preprocessing


def _rename_anonymous(node, counter):
    if isinstance(node, Var):
        return Var(f"_#{next(counter)}") if node.anonymous else node
    if isinstance(node, Atom):
        return Atom(node.predicate, tuple(_rename_anonymous(a, counter) for a in node.args))
    if isinstance(node, BinOp):
        return BinOp(node.op, _rename_anonymous(node.left, counter), _rename_anonymous(node.right, counter))
    if isinstance(node, Neg):
        return Neg(_rename_anonymous(node.operand, counter))
    if isinstance(node, Comparison):
        return Comparison(_rename_anonymous(node.left, counter), node.op, _rename_anonymous(node.right, counter))
    if isinstance(node, Assignment):
        return Assignment(node.var, _rename_anonymous(node.expr, counter))
    return node


def _atom_vars(atom: Atom, out: dict):
    for a in atom.args:
        if isinstance(a, Var) and not a.name.startswith("_"):
            out.setdefault(a.name, None)


def aux_atom(index: int, rule: Rule) -> Atom:
    """Choice atom that carries the probability of a probabilistic rule.

    Its arguments are the variables that pick out one rule instance: those of
    the head and of body atoms (head only for a disjunctive body). Variables
    that only occur in ``is`` or comparisons may hold random expressions and
    are left out.
    """
    names: dict[str, None] = {}
    _atom_vars(rule.head, names)
    if not rule.body.is_disjunctive:
        for lit in rule.body.disjuncts[0]:
            if isinstance(lit, Atom):
                _atom_vars(lit, names)
    return Atom(f"{AUX_PREFIX}{index}", tuple(Var(n) for n in names))


@dataclass
class _Definition:
    kind: str  # fact, prob, ad, rule
    index: int
    head: Atom | None = None
    body: Body | None = None
    p: float = 0.0
    alternatives: tuple = ()


class _Grounder:
    def __init__(self, program: Program):
        self.program = program
        self.defs: dict[tuple[str, int], list[_Definition]] = {}
        self.dists: dict[Atom, tuple[int, float, float]] = {}
        self.dist_sigs: set[tuple[str, int]] = set()
        counter = itertools.count()
        for idx, clause in enumerate(program.clauses):
            if isinstance(clause, Fact):
                self._add(_Definition("fact", idx, head=clause.atom))
            elif isinstance(clause, ProbFact):
                self._add(_Definition("prob", idx, head=clause.atom, p=clause.p))
            elif isinstance(clause, AnnotatedDisjunction):
                for _, atom in clause.choices:
                    if not atom.is_ground():
                        raise GroundingError(f"annotated disjunction must be ground: {format_atom(atom)}")
                d = _Definition("ad", idx, alternatives=clause.choices)
                for sig in dict.fromkeys(a.signature for _, a in clause.choices):
                    self.defs.setdefault(sig, []).append(d)
            elif isinstance(clause, DistributionalFact):
                if clause.head in self.dists:
                    raise GroundingError(f"random variable {format_atom(clause.head)} defined twice")
                self.dists[clause.head] = (idx, clause.dist.mean, clause.dist.std)
                self.dist_sigs.add(clause.head.signature)
            elif isinstance(clause, Rule):
                head = _rename_anonymous(clause.head, counter)
                body = Body(tuple(tuple(_rename_anonymous(l, counter) for l in conj) for conj in clause.body.disjuncts))
                if clause.p is None:
                    self._add(_Definition("rule", idx, head=head, body=body))
                else:
                    aux = aux_atom(idx, Rule(head, body, clause.p))
                    body = Body(tuple(conj + (aux,) for conj in body.disjuncts))
                    self._add(_Definition("rule", idx, head=head, body=body))
                    self._add(_Definition("prob", idx, head=aux, p=clause.p))
            elif not isinstance(clause, Query):
                raise TypeError(f"unknown clause {clause!r}")
        for sig in self.dist_sigs:
            if sig in self.defs:
                raise GroundingError(f"{sig[0]}/{sig[1]} is both a random variable and a predicate")

        self.tables: dict[tuple, dict[Atom, None]] = {}
        self.active: set[tuple] = set()
        self.done: set[tuple] = set()
        self.changed = False
        self.atom_defs: dict[Atom, dict[tuple, None]] = {}
        self.choices: dict[tuple, int] = {}
        self.choice_list: list[tuple] = []  # (atoms, probs, has_none, origin)
        self.variables: dict[Atom, int] = {}
        self.comparisons: dict[GroundComparison, int] = {}

    def _add(self, d: _Definition):
        self.defs.setdefault(d.head.signature, []).append(d)

    # -- unification helpers
    @staticmethod
    def variant(goal: Atom) -> tuple:
        names: dict[str, int] = {}
        key = []
        for a in goal.args:
            if isinstance(a, Var):
                key.append(("$", names.setdefault(a.name, len(names))))
            else:
                key.append(a)
        return goal.predicate, tuple(key)

    @staticmethod
    def match(pattern: Atom, ground: Atom, sub: dict) -> dict | None:
        """Extend ``sub`` so that ``pattern`` equals the ground atom."""
        out = sub
        for p, g in zip(pattern.args, ground.args):
            if isinstance(p, Var):
                bound = out.get(p.name)
                if bound is None:
                    if out is sub:
                        out = dict(sub)
                    out[p.name] = g
                elif bound != g:
                    return None
            elif p != g:
                return None
        return out

    @staticmethod
    def head_bindings(head: Atom, goal: Atom) -> dict | None:
        sub: dict = {}
        for h, g in zip(head.args, goal.args):
            if isinstance(h, Var):
                if isinstance(g, Var):
                    continue
                if h.name in sub and sub[h.name] != g:
                    return None
                sub[h.name] = g
            elif not isinstance(g, Var) and h != g:
                return None
        return sub

    @staticmethod
    def substitute(atom: Atom, sub: dict) -> Atom:
        args = []
        for a in atom.args:
            if isinstance(a, Var) and a.name in sub:
                value = sub[a.name]
                if isinstance(value, tuple):
                    raise GroundingError(
                        f"variable {a.name} holds a random quantity and cannot be an argument of {atom.predicate}"
                    )
                args.append(value)
            else:
                args.append(a)
        return Atom(atom.predicate, tuple(args))

    # -- solving
    def call(self, goal: Atom) -> list[Atom]:
        if goal.signature in self.dist_sigs:
            raise GroundingError(f"{format_atom(goal)} names a random variable and cannot be used as a goal")
        key = self.variant(goal)
        if key in self.active:
            if goal.is_ground():
                return [goal]
            return list(self.tables.get(key, ()))
        if key in self.done:
            return list(self.tables[key])
        self.active.add(key)
        answers = self.tables.setdefault(key, {})
        for d in self.defs.get(goal.signature, ()):
            for atom, body in self.expand(d, goal):
                if self.match(goal, atom, {}) is None:
                    continue
                self.atom_defs.setdefault(atom, {}).setdefault(body, None)
                if atom not in answers:
                    answers[atom] = None
                    self.changed = True
        self.active.discard(key)
        self.done.add(key)
        return list(answers)

    def _ground_head(self, head: Atom, sub: dict) -> Atom:
        atom = self.substitute(head, sub)
        if not atom.is_ground():
            raise GroundingError(f"non-ground instance {format_atom(atom)}: variables must be bound by the goal or body")
        return atom

    def expand(self, d: _Definition, goal: Atom):
        if d.kind == "ad":
            for k, (_, atom) in enumerate(d.alternatives):
                if atom.signature == goal.signature and self.match(goal, atom, {}) is not None:
                    c = self.register_choice(("ad", d.index), d)
                    yield atom, (("choice", c, k),)
            return
        sub = self.head_bindings(d.head, goal)
        if sub is None:
            return
        if d.kind == "fact":
            yield self._ground_head(d.head, sub), ()
        elif d.kind == "prob":
            atom = self._ground_head(d.head, sub)
            c = self.register_choice(("prob", d.index, atom), d, atom)
            yield atom, (("choice", c, 0),)
        else:
            for conj in d.body.disjuncts:
                for final, lits in self.solve(conj, 0, sub, ()):
                    yield self._ground_head(d.head, final), lits

    def register_choice(self, key, d: _Definition, atom: Atom | None = None) -> int:
        c = self.choices.get(key)
        if c is None:
            if d.kind == "ad":
                atoms = tuple(a for _, a in d.alternatives)
                probs = tuple(p for p, _ in d.alternatives)
                has_none = 1.0 - sum(probs) > NONE_MASS_EPS
            else:
                atoms, probs, has_none = (atom,), (d.p,), True
            c = self.choices[key] = len(self.choice_list)
            self.choice_list.append((atoms, probs, has_none, d.index))
        return c

    def solve(self, lits: tuple, k: int, sub: dict, acc: tuple):
        if k == len(lits):
            yield sub, acc
            return
        lit = lits[k]
        if isinstance(lit, Atom):
            if lit.predicate == "true" and not lit.args:
                yield from self.solve(lits, k + 1, sub, acc)
                return
            goal = self.substitute(lit, sub)
            for answer in self.call(goal):
                extended = self.match(goal, answer, sub)
                if extended is not None:
                    yield from self.solve(lits, k + 1, extended, acc + (("atom", answer),))
        elif isinstance(lit, Comparison):
            left = self.expr(lit.left, sub)
            right = self.expr(lit.right, sub)
            if left is None or right is None:
                return
            if left[0] == "num" and right[0] == "num":
                if _compare(left[1], lit.op, right[1]):
                    yield from self.solve(lits, k + 1, sub, acc)
                return
            cmp = GroundComparison(left, lit.op, right)
            j = self.comparisons.setdefault(cmp, len(self.comparisons))
            yield from self.solve(lits, k + 1, sub, acc + (("cmp", j),))
        else:
            value = self.expr(lit.expr, sub)
            if value is None:
                return
            name = lit.var.name
            if name in sub:
                bound = sub[name]
                bound = ("num", bound.value) if isinstance(bound, Num) else bound
                if not (isinstance(bound, tuple) and bound[0] == "num" and value[0] == "num"):
                    raise GroundingError(f"variable {name} is already bound in 'is'")
                if bound[1] == value[1]:
                    yield from self.solve(lits, k + 1, sub, acc)
                return
            extended = dict(sub)
            extended[name] = Num(value[1]) if value[0] == "num" else value
            yield from self.solve(lits, k + 1, extended, acc)

    def expr(self, node, sub: dict):
        """Ground an arithmetic expression; ``None`` when a random variable instance is missing."""
        if isinstance(node, Num):
            return ("num", node.value)
        if isinstance(node, Var):
            if node.name not in sub:
                raise GroundingError(f"unbound variable {node.name} in arithmetic")
            value = sub[node.name]
            if isinstance(value, Num):
                return ("num", value.value)
            if isinstance(value, tuple):
                return value
            raise GroundingError(f"variable {node.name} is bound to non-numeric {value.name!r}")
        if isinstance(node, Const):
            raise GroundingError(f"non-numeric constant {node.name!r} in arithmetic")
        if isinstance(node, Atom):
            atom = self.substitute(node, sub)
            if not atom.is_ground():
                raise GroundingError(f"unbound variable in random variable reference {format_atom(atom)}")
            if atom.signature not in self.dist_sigs:
                raise GroundingError(f"{atom.predicate}/{atom.arity} is not a random variable")
            if atom not in self.dists:
                return None
            v = self.variables.setdefault(atom, len(self.variables))
            return ("rv", v)
        if isinstance(node, Neg):
            inner = self.expr(node.operand, sub)
            if inner is None:
                return None
            return ("num", -inner[1]) if inner[0] == "num" else ("neg", inner)
        left = self.expr(node.left, sub)
        if left is None:
            return None
        right = self.expr(node.right, sub)
        if right is None:
            return None
        return _fold(node.op, left, right)

    def run(self, query: Atom):
        while True:
            self.changed = False
            self.done.clear()
            self.call(query)
            if not self.changed:
                return


def _resolve_query(program: Program, query: Atom | None, location: str | None) -> Atom:
    if query is None:
        queries = program.queries
        if len(queries) > 1:
            raise GroundingError("program has several queries; pass one explicitly")
        if queries:
            query = queries[0]
        elif location is not None:
            query = Atom("landscape", (Var("X"),))
        else:
            raise GroundingError("no query given and the program declares none")
    if location is not None:
        query = Atom(query.predicate, tuple(Const(location) if isinstance(a, Var) else a for a in query.args))
    if not query.is_ground():
        raise GroundingError(f"query {format_atom(query)} is not ground")
    return query


def ground(program: Program, query: Atom | None = None, location: str | None = None) -> GroundProgram:
    """Relevant ground program for ``query``.

    Args:
        program: Parsed program.
        query: Atom to ground for; defaults to the program's ``query/1``
            clause, or ``landscape(X)`` when only ``location`` is given.
        location: Constant substituted for every variable of the query.

    Raises:
        GroundingError: unbound variables, misuse of random variables.
        CycleError: the relevant ground rules are cyclic.
    """
    query = _resolve_query(program, query, location)
    g = _Grounder(program)
    g.run(query)

    # Keep only what the query depends on.
    reached_atoms: dict[Atom, None] = {}
    reached_choices: set[int] = set()
    reached_cmps: set[int] = set()
    stack = [query]
    while stack:
        atom = stack.pop()
        if atom in reached_atoms:
            continue
        reached_atoms[atom] = None
        for body in g.atom_defs.get(atom, ()):
            for lit in body:
                if lit[0] == "atom":
                    stack.append(lit[1])
                elif lit[0] == "choice":
                    reached_choices.add(lit[1])
                else:
                    reached_cmps.add(lit[1])

    # Indices follow discovery order, not reachability order.
    choice_ids = [c for c in range(len(g.choice_list)) if c in reached_choices]
    cmp_list = list(g.comparisons)
    cmp_ids = [j for j in range(len(cmp_list)) if j in reached_cmps]
    var_used = set()
    for j in cmp_ids:
        var_used |= cmp_list[j].variables()
    var_atoms = list(g.variables)
    var_ids = [v for v in range(len(var_atoms)) if v in var_used]
    var_map = {v: n for n, v in enumerate(var_ids)}
    choice_map = {c: n for n, c in enumerate(choice_ids)}
    cmp_map = {j: n for n, j in enumerate(cmp_ids)}

    atoms: list[Atom] = [a for a in g.atom_defs if a in reached_atoms]
    for c in choice_ids:
        for a in g.choice_list[c][0]:
            if a not in reached_atoms:
                atoms.append(a)
    atom_index = {a: i for i, a in enumerate(atoms)}
    if query not in atom_index:
        atom_index[query] = len(atoms)
        atoms.append(query)

    rules = []
    for atom in atoms:
        if atom not in reached_atoms:
            continue
        for body in g.atom_defs.get(atom, ()):
            lits = []
            for lit in body:
                if lit[0] == "atom":
                    lits.append(("atom", atom_index[lit[1]]))
                elif lit[0] == "choice":
                    lits.append(("choice", choice_map[lit[1]], lit[2]))
                else:
                    lits.append(("cmp", cmp_map[lit[1]]))
            rules.append(GroundRule(atom_index[atom], tuple(lits)))

    choices = tuple(
        Choice(tuple(atom_index[a] for a in atoms_), probs, has_none, origin)
        for atoms_, probs, has_none, origin in (g.choice_list[c] for c in choice_ids)
    )
    variables = []
    for v in var_ids:
        atom = var_atoms[v]
        origin, mean, std = g.dists[atom]
        variables.append(RandomVariable(atom, mean, std, origin))
    comparisons = tuple(
        GroundComparison(_remap_expr(cmp_list[j].left, var_map), cmp_list[j].op, _remap_expr(cmp_list[j].right, var_map))
        for j in cmp_ids
    )
    order = _topological_order(len(atoms), rules, atoms, atom_index[query])
    return GroundProgram(
        query=query,
        query_index=atom_index[query],
        atoms=tuple(atoms),
        rules=tuple(rules),
        choices=choices,
        variables=tuple(variables),
        comparisons=comparisons,
        order=order,
    )


def _topological_order(n: int, rules, atoms, root: int) -> tuple[int, ...]:
    deps: list[list[int]] = [[] for _ in range(n)]
    for rule in rules:
        for lit in rule.body:
            if lit[0] == "atom":
                deps[rule.head].append(lit[1])
    state = [0] * n  # 0 new, 1 on stack, 2 finished
    order: list[int] = []
    for start in [root] + list(range(n)):
        if state[start]:
            continue
        state[start] = 1
        path = [start]
        iters = [iter(deps[start])]
        while iters:
            nxt = next(iters[-1], None)
            if nxt is None:
                iters.pop()
                node = path.pop()
                state[node] = 2
                order.append(node)
            elif state[nxt] == 1:
                cycle = path[path.index(nxt):] + [nxt]
                raise CycleError([format_atom(atoms[i]) for i in cycle])
            elif state[nxt] == 0:
                state[nxt] = 1
                path.append(nxt)
                iters.append(iter(deps[nxt]))
    return tuple(order)
