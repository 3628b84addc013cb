"""Grounding and possible-world inference for hybrid programs."""

from promis.inference.engine import (
    CompiledProgram,
    InferenceMode,
    QueryResult,
    World,
    compile_program,
    continuous_probability,
    enumerate_worlds,
    eval_logic,
    query,
)
from promis.inference.grounding import GroundProgram, ground

__all__ = [
    "CompiledProgram",
    "GroundProgram",
    "InferenceMode",
    "QueryResult",
    "World",
    "compile_program",
    "continuous_probability",
    "enumerate_worlds",
    "eval_logic",
    "ground",
    "query",
]
