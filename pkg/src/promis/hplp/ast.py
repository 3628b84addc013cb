"""Syntax tree of hybrid probabilistic logic programs.

All nodes are frozen dataclasses, so structural equality is plain ``==``
and programs can be shared between threads and processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union


@dataclass(frozen=True)
class Var:
    name: str

    @property
    def anonymous(self) -> bool:
        return self.name == "_"


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Num:
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))


Term = Union[Var, Const, Num]


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple = ()

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def signature(self) -> tuple[str, int]:
        return self.predicate, len(self.args)

    def is_ground(self) -> bool:
        return not any(isinstance(a, Var) for a in self.args)


# Arithmetic expressions. Leaves are numbers, variables and atoms that name
# random variables, e.g. ``distance(X, operator)`` or ``initial_charge``.
@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - *
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


Expr = Union[Num, Var, Atom, BinOp, Neg]


@dataclass(frozen=True)
class Comparison:
    left: Expr
    op: str  # one of < > =< >=
    right: Expr


@dataclass(frozen=True)
class Assignment:
    var: Var
    expr: Expr


Literal = Union[Atom, Comparison, Assignment]


@dataclass(frozen=True)
class Body:
    """Disjunction of conjunctions of literals."""

    disjuncts: tuple[tuple[Literal, ...], ...]

    @property
    def is_disjunctive(self) -> bool:
        return len(self.disjuncts) > 1


@dataclass(frozen=True)
class NormalDist:
    mean: float
    std: float


@dataclass(frozen=True)
class Fact:
    atom: Atom


@dataclass(frozen=True)
class ProbFact:
    p: float
    atom: Atom


@dataclass(frozen=True)
class AnnotatedDisjunction:
    choices: tuple[tuple[float, Atom], ...]

    @property
    def mass(self) -> float:
        return sum(p for p, _ in self.choices)


@dataclass(frozen=True)
class DistributionalFact:
    head: Atom
    dist: NormalDist


@dataclass(frozen=True)
class Rule:
    head: Atom
    body: Body
    p: float | None = None


@dataclass(frozen=True)
class Query:
    atom: Atom


Clause = Union[Fact, ProbFact, AnnotatedDisjunction, DistributionalFact, Rule, Query]


def clause_heads(clause) -> tuple[Atom, ...]:
    if isinstance(clause, AnnotatedDisjunction):
        return tuple(a for _, a in clause.choices)
    if isinstance(clause, DistributionalFact):
        return (clause.head,)
    if isinstance(clause, Query):
        return ()
    return (clause.atom if not isinstance(clause, Rule) else clause.head,)


@dataclass(frozen=True)
class Program:
    clauses: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "clauses", tuple(self.clauses))

    def __add__(self, other: "Program") -> "Program":
        return Program(self.clauses + other.clauses)

    def __len__(self):
        return len(self.clauses)

    @property
    def queries(self) -> list[Atom]:
        return [c.atom for c in self.clauses if isinstance(c, Query)]

    def defines(self, predicate: str, arity: int) -> bool:
        return any(h.signature == (predicate, arity) for c in self.clauses for h in clause_heads(c))

    def constants(self) -> set[str]:
        """Every constant symbol, in clause heads, bodies and expressions."""
        found: set[str] = set()

        def visit(node):
            if isinstance(node, Const):
                found.add(node.name)
            elif isinstance(node, Atom):
                for a in node.args:
                    visit(a)
            elif isinstance(node, BinOp):
                visit(node.left)
                visit(node.right)
            elif isinstance(node, Neg):
                visit(node.operand)
            elif isinstance(node, Comparison):
                visit(node.left)
                visit(node.right)
            elif isinstance(node, Assignment):
                visit(node.expr)

        for c in self.clauses:
            for h in clause_heads(c):
                visit(h)
            if isinstance(c, Query):
                visit(c.atom)
            if isinstance(c, Rule):
                for conj in c.body.disjuncts:
                    for lit in conj:
                        visit(lit)
        return found
