"""Hybrid probabilistic logic programs: syntax tree, parser, printer, code generation."""

from promis.hplp.ast import Program
from promis.hplp.codegen import generate_relation_clauses
from promis.hplp.parser import parse
from promis.hplp.printer import pretty_print

__all__ = ["Program", "parse", "pretty_print", "generate_relation_clauses"]
