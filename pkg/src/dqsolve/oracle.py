"""Brute-force reference decision procedures.

``oracle_solve`` decides a DQBF by full universal expansion: every
existential gets one propositional copy per assignment of its dependency
set, every matrix clause is instantiated under every total universal
assignment, and the result is handed to the SAT backend.  A satisfying
assignment of the copies is literally a Skolem function table, so the
expansion is satisfiable iff the DQBF is true.

``qbf_game_solve`` is an independent second opinion for linear prefixes:
plain recursive game-tree evaluation.  It exists to check the expansion
oracle itself at desk scale.
"""

from __future__ import annotations

from itertools import product

from .formula import DqbfFormula, FormulaError, eval_clause
from .sat import SatSolver

DEFAULT_EXPANSION_BOUND = 6


class ExpansionBoundExceeded(Exception):
    pass


def expand(
    formula: DqbfFormula, bound: int = DEFAULT_EXPANSION_BOUND
) -> tuple[list[tuple[int, ...]], dict]:
    """Expand to propositional CNF.  Returns (clauses, copy map); the copy
    map sends (existential, dependency assignment as sorted item tuple) to
    the propositional variable standing for that Skolem table entry."""
    prefix = formula.prefix
    universals = sorted(prefix.universals)
    if len(universals) > bound:
        raise ExpansionBoundExceeded(
            f"{len(universals)} universals exceed the expansion bound {bound}"
        )
    copies: dict[tuple[int, tuple], int] = {}
    next_var = 0

    def copy_var(y: int, beta: dict[int, bool]) -> int:
        nonlocal next_var
        key = (y, tuple(sorted((u, beta[u]) for u in prefix.deps[y])))
        if key not in copies:
            next_var += 1
            copies[key] = next_var
        return copies[key]

    cnf: list[tuple[int, ...]] = []
    for values in product((False, True), repeat=len(universals)):
        beta = dict(zip(universals, values))
        for _, clause in formula.active_items():
            lits = []
            satisfied = False
            for l in clause:
                v = abs(l)
                if v in prefix.universals:
                    if beta[v] == (l > 0):
                        satisfied = True
                        break
                else:
                    cv = copy_var(v, beta)
                    lits.append(cv if l > 0 else -cv)
            if not satisfied:
                cnf.append(tuple(lits))
    return cnf, copies


def oracle_solve(formula: DqbfFormula, bound: int = DEFAULT_EXPANSION_BOUND) -> bool:
    """True iff the DQBF is true, by expansion."""
    cnf, copies = expand(formula, bound)
    solver = SatSolver()
    for _ in range(len(copies)):
        solver.new_var()
    for clause in cnf:
        if not clause:
            return False
        solver.add_clause(clause)
    return solver.solve()


def linear_order(formula: DqbfFormula) -> list[tuple[int, str]]:
    """A QBF-style variable order for a formula whose dependency sets form a
    chain: each existential sees exactly the universals placed before it.
    Raises FormulaError when the prefix is not linear."""
    prefix = formula.prefix
    deps = list(prefix.deps.values())
    for i, a in enumerate(deps):
        for b in deps[i + 1 :]:
            if not (a <= b or b <= a):
                raise FormulaError("prefix is not linear")
    order: list[tuple[int, str]] = []
    placed: set[int] = set()
    for y in sorted(prefix.deps, key=lambda y: (len(prefix.deps[y]), y)):
        for u in sorted(prefix.deps[y] - placed):
            order.append((u, "a"))
            placed.add(u)
        order.append((y, "e"))
    for u in sorted(prefix.universals - placed):
        order.append((u, "a"))
    return order


def qbf_game_solve(formula: DqbfFormula) -> bool:
    """Recursive game-tree evaluation for linear prefixes."""
    order = linear_order(formula)
    clauses = [clause for _, clause in formula.active_items()]
    alpha: dict[int, bool] = {}

    def rec(i: int) -> bool:
        status = [eval_clause(c, alpha) for c in clauses]
        if any(s is False for s in status):
            return False
        if all(s is True for s in status):
            return True
        if i == len(order):
            return True  # no clause undecided here since all vars assigned
        v, kind = order[i]
        results = []
        for b in (False, True):
            alpha[v] = b
            results.append(rec(i + 1))
            del alpha[v]
            if kind == "e" and results[-1]:
                return True
            if kind == "a" and not results[-1]:
                return False
        return all(results) if kind == "a" else any(results)

    return rec(0)
