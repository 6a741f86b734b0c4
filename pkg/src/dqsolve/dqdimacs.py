"""DQDIMACS reader and writer.

The format extends DIMACS CNF with quantifier lines between the header and
the clauses:

    c comment
    p cnf <maxvar> <nclauses>
    a u1 u2 ... 0            universal variables
    e y1 y2 ... 0            existentials depending on all universals so far
    d y u1 u2 ... 0          existential y with explicit dependency set
    <lit> ... 0              clauses

``e`` lines are sugar: they are normalized to explicit dependency sets at
parse time.  The header clause count is advisory (mismatch is a warning).
Tautological clauses are dropped with a warning; duplicate literals are
silently merged (counted).  Free variables are a hard error.
"""

from __future__ import annotations

from dataclasses import dataclass

from .formula import DqbfFormula, FormulaError, make_clause, is_tautology


@dataclass
class ParseDiagnostic:
    line: int
    message: str
    severity: str  # "error" or "warning"

    def __str__(self) -> str:
        return f"line {self.line}: {self.severity}: {self.message}"


class ParseError(Exception):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.diagnostic = ParseDiagnostic(line, message, "error")


def parse(text: str | bytes) -> DqbfFormula:
    """Parse DQDIMACS text into a formula.

    Total on byte streams: every input either returns a formula or raises
    ParseError with a line number.  Warnings are collected on the returned
    formula's ``warnings`` list.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")

    formula = DqbfFormula()
    header = None  # (maxvar, nclauses)
    in_clauses = False
    pending: list[int] = []  # literals of a clause spanning lines
    pending_line = 0
    n_clauses = 0

    def err(lineno: int, message: str):
        raise ParseError(lineno, message)

    def warn(lineno: int, message: str):
        formula.warnings.append(ParseDiagnostic(lineno, message, "warning"))

    def check_var(lineno: int, v: int):
        if v < 1:
            err(lineno, f"expected a positive variable id, got {v}")
        if header and v > header[0]:
            err(lineno, f"variable {v} exceeds header maximum {header[0]}")

    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("c"):
            continue
        tokens = line.split()
        kind = tokens[0]

        if kind == "p":
            if header is not None:
                err(lineno, "duplicate header line")
            if in_clauses or pending:
                err(lineno, "header after clauses")
            if len(tokens) != 4 or tokens[1] != "cnf":
                err(lineno, f"malformed header {line!r}")
            try:
                maxvar, nclauses = int(tokens[2]), int(tokens[3])
            except ValueError:
                err(lineno, f"malformed header {line!r}")
            if maxvar < 0 or nclauses < 0:
                err(lineno, "header counts must be non-negative")
            header = (maxvar, nclauses)
            continue

        if header is None:
            err(lineno, f"expected header before {line!r}")

        if kind in ("a", "e", "d"):
            if in_clauses or pending:
                err(lineno, "quantifier line after clauses")
            try:
                nums = [int(t) for t in tokens[1:]]
            except ValueError:
                err(lineno, f"non-integer token in quantifier line {line!r}")
            if not nums or nums[-1] != 0:
                err(lineno, "quantifier line not terminated by 0")
            nums = nums[:-1]
            if any(n == 0 for n in nums):
                err(lineno, "0 inside quantifier line")
            try:
                if kind == "a":
                    for v in nums:
                        check_var(lineno, v)
                        formula.prefix.add_universal(v)
                elif kind == "e":
                    for v in nums:
                        check_var(lineno, v)
                        formula.prefix.add_existential(
                            v, set(formula.prefix.universals)
                        )
                else:
                    if not nums:
                        err(lineno, "d line without a variable")
                    y, deps = nums[0], nums[1:]
                    check_var(lineno, y)
                    for u in deps:
                        check_var(lineno, u)
                        if not formula.prefix.is_universal(u):
                            err(lineno, f"d line dependency {u} is not a universal")
                    formula.prefix.add_existential(y, deps)
            except FormulaError as e:
                err(lineno, str(e))
            continue

        # Clause tokens, possibly spanning lines, terminated by 0.
        try:
            nums = [int(t) for t in tokens]
        except ValueError:
            err(lineno, f"non-integer token in clause line {line!r}")
        for n in nums:
            if n == 0:
                in_clauses = True
                n_clauses += 1
                _add_parsed_clause(formula, pending, pending_line or lineno, err, warn)
                pending = []
                pending_line = 0
            else:
                check_var(lineno, abs(n))
                if not pending:
                    pending_line = lineno
                pending.append(n)

    if pending:
        err(pending_line, "clause not terminated by 0")
    if header is None:
        err(1, "missing header")
    if n_clauses != header[1]:
        warn(0, f"header declares {header[1]} clauses, found {n_clauses}")
    return formula


def _add_parsed_clause(formula, literals, lineno, err, warn):
    clause = make_clause(literals)
    if len(clause) < len(literals):
        warn(lineno, "duplicate literal in clause")
        formula.deduped_literals += len(literals) - len(clause)
    for l in clause:
        if not formula.prefix.knows(abs(l)):
            err(lineno, f"free variable {abs(l)} in clause")
    if is_tautology(clause):
        warn(lineno, "tautological clause dropped")
        formula.dropped_tautologies += 1
        return
    formula.clauses.append(clause)
    formula.active.append(True)


def serialize(formula: DqbfFormula) -> str:
    """Emit canonical DQDIMACS: one ``a`` line, ``d`` lines sorted by id,
    active clauses in id order.  ``parse(serialize(f))`` is structurally
    equal to ``f`` (deactivated clauses are not emitted)."""
    active = [c for c, keep in zip(formula.clauses, formula.active) if keep]
    lines = [f"p cnf {formula.max_var()} {len(active)}"]
    if formula.prefix.universals:
        lines.append("a " + " ".join(str(u) for u in sorted(formula.prefix.universals)) + " 0")
    for y in sorted(formula.prefix.deps):
        parts = ["d", str(y)] + [str(u) for u in sorted(formula.prefix.deps[y])] + ["0"]
        lines.append(" ".join(parts))
    for clause in active:
        lines.append(" ".join(str(l) for l in clause) + " 0")
    return "\n".join(lines) + "\n"
