"""DQBF solving via clausal abstraction over a dependency lattice."""

from .formula import DqbfFormula, Prefix, FormulaError
from .dqdimacs import parse, serialize, ParseError
from .engine import solve, EngineOptions, Result
from .oracle import oracle_solve

__all__ = [
    "DqbfFormula",
    "Prefix",
    "FormulaError",
    "parse",
    "serialize",
    "ParseError",
    "solve",
    "EngineOptions",
    "Result",
    "oracle_solve",
]
