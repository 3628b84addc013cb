"""Relation tables rendered as program clauses.

Location ``i`` becomes the constant ``x<i>``. Distances turn into
distributional facts, Bernoulli relations into probabilistic facts.
"""

from __future__ import annotations

from typing import Sequence

from promis.hplp.ast import Atom, Const, DistributionalFact, NormalDist, ProbFact, Program
from promis.relations import NORMAL, RelationTable


def location_constant(index: int) -> Const:
    return Const(f"x{index}")


def relation_clauses(table: RelationTable, locations: Sequence[int] | None = None):
    """Yield ``(clause, relation_index, location_index)`` in canonical order.

    Order is by location, then relation name, then feature type.
    """
    order = sorted(range(len(table.relations)), key=lambda r: table.relations[r].key)
    locations = range(len(table)) if locations is None else locations
    for i in locations:
        x = location_constant(i)
        for r in order:
            spec = table.relations[r]
            a, b = table.params[r, i]
            args = (x, Const(spec.type)) if spec.type else (x,)
            atom = Atom(spec.relation, args)
            if spec.kind == NORMAL:
                yield DistributionalFact(atom, NormalDist(float(a), float(b))), r, i
            else:
                yield ProbFact(float(a), atom), r, i


def generate_relation_clauses(table: RelationTable, locations: Sequence[int] | None = None) -> Program:
    return Program(tuple(c for c, _, _ in relation_clauses(table, locations)))
