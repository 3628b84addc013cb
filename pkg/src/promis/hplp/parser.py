"""Tokenizer and recursive descent parser for the logic DSL.

The normative grammar is ``docs/grammar.ebnf``. Every failure is reported
as a :class:`ProgramSyntaxError` carrying line, column and the set of
tokens that would have been accepted.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from promis.errors import ProgramSyntaxError
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
    NormalDist,
    Num,
    ProbFact,
    Program,
    Query,
    Rule,
    Var,
    clause_heads,
)

MASS_TOLERANCE = 1e-9
COMPARISON_OPS = ("<", ">", "=<", ">=")

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n\f\v]+|%[^\n]*)
  | (?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<name>[a-z][A-Za-z0-9_]*)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<quoted>'(?:[^'\\\n]|\\.)*')
  | (?P<punct>::|:-|=<|>=|[<>~(),;./+*-])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # num, name, var, punct, eof
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        if _elision(text, pos, line_start):
            pos = text.find("\n", pos)
            pos = len(text) if pos < 0 else pos
            continue
        m = _TOKEN.match(text, pos)
        if m is None:
            ch = text[pos]
            hint = "negation is not supported" if text.startswith("\\+", pos) else f"unexpected character {ch!r}"
            raise ProgramSyntaxError(hint, line, pos - line_start + 1)
        kind = m.lastgroup
        value = m.group()
        if kind == "quoted":
            tokens.append(Token("name", _unquote(value), line, pos - line_start + 1))
        elif kind != "ws":
            tokens.append(Token(kind, value, line, pos - line_start + 1))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            line_start = pos + value.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


def _elision(text: str, pos: int, line_start: int) -> bool:
    """A line holding nothing but ``...`` marks elided clauses and is skipped."""
    if not text.startswith("...", pos) or text[line_start:pos].strip():
        return False
    end = text.find("\n", pos)
    return not text[pos + 3 : None if end < 0 else end].strip()


def _unquote(text: str) -> str:
    return re.sub(r"\\(.)", r"\1", text[1:-1])


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0
        self.arity: dict[str, tuple[int, Token]] = {}

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, offset=1) -> Token:
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def at(self, text: str) -> bool:
        return self.tok.kind == "punct" and self.tok.text == text

    def fail(self, message: str, expected=(), tok: Token | None = None):
        tok = tok or self.tok
        raise ProgramSyntaxError(message, tok.line, tok.column, tuple(expected))

    def describe(self, tok: Token) -> str:
        return "end of input" if tok.kind == "eof" else repr(tok.text)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(f"unexpected {self.describe(self.tok)}", (repr(text),))
        tok = self.tok
        self.i += 1
        return tok

    def take(self) -> Token:
        tok = self.tok
        self.i += 1
        return tok

    # -- grammar
    def program(self) -> Program:
        clauses = []
        while self.tok.kind != "eof":
            start = self.tok
            clause = self.clause()
            self.check_arity(clause, start)
            clauses.append(clause)
        return Program(tuple(clauses))

    def check_arity(self, clause, start: Token):
        atoms = list(clause_heads(clause))
        if isinstance(clause, Query):
            atoms.append(clause.atom)
        if isinstance(clause, Rule):
            for conj in clause.body.disjuncts:
                atoms.extend(lit for lit in conj if isinstance(lit, Atom))
        for atom in atoms:
            seen = self.arity.setdefault(atom.predicate, (atom.arity, start))
            if seen[0] != atom.arity:
                self.fail(
                    f"predicate {atom.predicate} used with arity {atom.arity}, earlier with {seen[0]}",
                    tok=start,
                )

    def clause(self):
        tok = self.tok
        if tok.kind == "name" and tok.text == "query" and self.peek().text == "(":
            self.take()
            self.expect("(")
            atom = self.atom()
            self.expect(")")
            self.expect(".")
            return Query(atom)
        if tok.kind == "num":
            return self.probabilistic_clause()
        if tok.kind != "name":
            self.fail(f"unexpected {self.describe(tok)} at start of clause", ("atom", "probability", "query"))
        head = self.atom()
        if self.at("~"):
            return self.distributional(head)
        if self.at(":-"):
            self.take()
            body = self.body()
            self.expect(".")
            return Rule(head, body)
        if self.at("."):
            self.take()
            return Fact(head)
        self.fail(f"unexpected {self.describe(self.tok)}", ("'.'", "':-'", "'~'"))

    def probabilistic_clause(self):
        choices = [(self.probability(), self.after_annotation())]
        while self.at(";"):
            self.take()
            choices.append((self.probability(), self.after_annotation()))
        if len(choices) == 1:
            p, atom = choices[0]
            if self.at(":-"):
                self.take()
                body = self.body()
                self.expect(".")
                return Rule(atom, body, p)
            self.expect_end(("'.'", "':-'", "';'"))
            return ProbFact(p, atom)
        start = self.tok
        self.expect_end(("'.'", "';'"))
        ad = AnnotatedDisjunction(tuple(choices))
        if ad.mass > 1 + MASS_TOLERANCE:
            self.fail(f"annotated disjunction has probability mass {ad.mass:g} > 1", tok=start)
        return ad

    def expect_end(self, expected):
        if not self.at("."):
            self.fail(f"unexpected {self.describe(self.tok)}", expected)
        self.take()

    def after_annotation(self) -> Atom:
        self.expect("::")
        if self.tok.kind != "name":
            self.fail(f"unexpected {self.describe(self.tok)}", ("atom",))
        return self.atom()

    def probability(self) -> float:
        tok = self.tok
        value = self.number()
        if self.at("/"):
            self.take()
            denom = self.number()
            if denom == 0:
                self.fail("division by zero in probability", tok=tok)
            value = value / denom
        if not 0.0 <= value <= 1.0:
            self.fail(f"probability {value:g} outside [0, 1]", tok=tok)
        return value

    def number(self) -> float:
        tok = self.tok
        if tok.kind != "num":
            self.fail(f"unexpected {self.describe(tok)}", ("number",))
        self.take()
        value = float(tok.text)
        if not math.isfinite(value):
            self.fail(f"number {tok.text} out of range", tok=tok)
        return value

    def signed_number(self) -> float:
        if self.at("-"):
            self.take()
            return -self.number()
        return self.number()

    def distributional(self, head: Atom):
        if not head.is_ground():
            self.fail("distribution head must be ground")
        self.expect("~")
        tok = self.tok
        if tok.kind != "name" or tok.text != "normal":
            self.fail(f"unsupported distribution {self.describe(tok)}", ("'normal'",))
        self.take()
        self.expect("(")
        mean = self.signed_number()
        self.expect(",")
        std_tok = self.tok
        std = self.signed_number()
        self.expect(")")
        if std < 0:
            self.fail("standard deviation must be >= 0", tok=std_tok)
        self.expect(".")
        return DistributionalFact(head, NormalDist(mean, std))

    def atom(self) -> Atom:
        tok = self.tok
        if tok.kind != "name":
            self.fail(f"unexpected {self.describe(tok)}", ("atom",))
        if tok.text == "not":
            self.fail("negation is not supported")
        self.take()
        args = []
        if self.at("("):
            self.take()
            args.append(self.term())
            while self.at(","):
                self.take()
                args.append(self.term())
            self.expect(")")
        return Atom(tok.text, tuple(args))

    def term(self):
        tok = self.tok
        if tok.kind == "var":
            self.take()
            return Var(tok.text)
        if tok.kind == "name":
            if self.peek().text == "(":
                self.fail("compound terms are not supported", tok=self.peek())
            self.take()
            return Const(tok.text)
        if tok.kind == "num" or self.at("-"):
            return Num(self.signed_number())
        self.fail(f"unexpected {self.describe(tok)}", ("variable", "constant", "number"))

    def body(self) -> Body:
        disjuncts = [self.conjunction()]
        while self.at(";"):
            self.take()
            disjuncts.append(self.conjunction())
        return Body(tuple(disjuncts))

    def conjunction(self) -> tuple:
        lits = [self.literal()]
        while self.at(","):
            self.take()
            lits.append(self.literal())
        return tuple(lits)

    def literal(self):
        tok = self.tok
        if tok.kind == "var" and self.peek().kind == "name" and self.peek().text == "is":
            self.take()
            self.take()
            return Assignment(Var(tok.text), self.expr())
        if tok.kind == "name" and tok.text == "not":
            self.fail("negation is not supported")
        left = self.expr()
        if self.tok.kind == "punct" and self.tok.text in COMPARISON_OPS:
            op = self.take().text
            return Comparison(left, op, self.expr())
        if isinstance(left, Atom):
            return left
        self.fail(f"unexpected {self.describe(self.tok)}", tuple(repr(o) for o in COMPARISON_OPS))

    def expr(self):
        node = self.product()
        while self.at("+") or self.at("-"):
            op = self.take().text
            node = BinOp(op, node, self.product())
        return node

    def product(self):
        node = self.factor()
        while self.at("*"):
            self.take()
            node = BinOp("*", node, self.factor())
        return node

    def factor(self):
        tok = self.tok
        if self.at("-"):
            self.take()
            if self.tok.kind == "num":
                return Num(-self.number())
            return Neg(self.factor())
        if self.at("("):
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "num":
            return Num(self.number())
        if tok.kind == "var":
            self.take()
            return Var(tok.text)
        if tok.kind == "name":
            return self.atom()
        self.fail(f"unexpected {self.describe(tok)}", ("number", "variable", "atom", "'('", "'-'"))


def parse(text: str | bytes) -> Program:
    """Parse program text (or UTF-8 bytes) into a :class:`Program`."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            head = bytes(text[: exc.start])
            line = head.count(b"\n") + 1
            column = exc.start - (head.rfind(b"\n") + 1) + 1
            raise ProgramSyntaxError("invalid UTF-8", line, column) from None
    return _Parser(text).program()
