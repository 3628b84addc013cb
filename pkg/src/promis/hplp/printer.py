"""Canonical text form of programs; ``parse(pretty_print(p)) == p``."""

from __future__ import annotations

import re

from promis.hplp.ast import (
    AnnotatedDisjunction,
    Assignment,
    Atom,
    BinOp,
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

_PLAIN_NAME = re.compile(r"[a-z][A-Za-z0-9_]*\Z")
_PRECEDENCE = {"+": 1, "-": 1, "*": 2}


def format_number(value: float) -> str:
    """Shortest round-trip decimal, without a trailing ``.0``."""
    text = repr(float(value))
    if text.endswith(".0"):
        text = text[:-2]
    return text


def format_probability(p: float) -> str:
    return repr(float(p))


def format_name(name: str) -> str:
    if _PLAIN_NAME.match(name):
        return name
    escaped = name.replace("\\", "\\\\").replace("'", "\\'")
    return f"'{escaped}'"


def format_term(term) -> str:
    if isinstance(term, Var):
        return term.name
    if isinstance(term, Const):
        return format_name(term.name)
    if isinstance(term, Num):
        return format_number(term.value)
    raise TypeError(f"not a term: {term!r}")


def format_atom(atom: Atom) -> str:
    name = format_name(atom.predicate)
    if not atom.args:
        return name
    return f"{name}({', '.join(format_term(a) for a in atom.args)})"


def format_expr(node, parent: int = 0, right: bool = False) -> str:
    if isinstance(node, BinOp):
        prec = _PRECEDENCE[node.op]
        text = f"{format_expr(node.left, prec)} {node.op} {format_expr(node.right, prec, True)}"
        if prec < parent or (right and prec == parent):
            text = f"({text})"
        return text
    if isinstance(node, Neg):
        inner = node.operand
        if isinstance(inner, Num) and inner.value >= 0 or isinstance(inner, BinOp):
            return f"-({format_expr(inner)})"
        return f"-{format_expr(inner, 3)}"
    if isinstance(node, Atom):
        return format_atom(node)
    # A negative literal prints bare: the parser folds "-" NUM back into one.
    return format_term(node)


def format_literal(lit) -> str:
    if isinstance(lit, Atom):
        return format_atom(lit)
    if isinstance(lit, Comparison):
        return f"{format_expr(lit.left)} {lit.op} {format_expr(lit.right)}"
    if isinstance(lit, Assignment):
        return f"{lit.var.name} is {format_expr(lit.expr)}"
    raise TypeError(f"not a literal: {lit!r}")


def format_clause(clause) -> str:
    if isinstance(clause, Fact):
        return f"{format_atom(clause.atom)}."
    if isinstance(clause, ProbFact):
        return f"{format_probability(clause.p)}::{format_atom(clause.atom)}."
    if isinstance(clause, AnnotatedDisjunction):
        return "; ".join(f"{format_probability(p)}::{format_atom(a)}" for p, a in clause.choices) + "."
    if isinstance(clause, DistributionalFact):
        d = clause.dist
        return f"{format_atom(clause.head)} ~ normal({format_number(d.mean)}, {format_number(d.std)})."
    if isinstance(clause, Rule):
        head = format_atom(clause.head)
        if clause.p is not None:
            head = f"{format_probability(clause.p)}::{head}"
        body = "; ".join(", ".join(format_literal(l) for l in conj) for conj in clause.body.disjuncts)
        return f"{head} :- {body}."
    if isinstance(clause, Query):
        return f"query({format_atom(clause.atom)})."
    raise TypeError(f"not a clause: {clause!r}")


def pretty_print(program: Program) -> str:
    return "".join(format_clause(c) + "\n" for c in program.clauses)
