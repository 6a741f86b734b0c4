"""Core DQBF data model: variables, literals, clauses, prefixes, assignments.

Literals are signed DIMACS-style integers: ``+v`` is the positive literal of
variable ``v`` (``v >= 1``), ``-v`` its negation.  Clauses are duplicate-free
tuples sorted by variable id (positive polarity first on ties).  Assignments
are partial maps ``{var: bool}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator


class FormulaError(Exception):
    """Structurally invalid formula, or an operation on an unknown variable."""


Clause = tuple[int, ...]
Assignment = dict[int, bool]


def lit_var(lit: int) -> int:
    return abs(lit)


def lit_negated(lit: int) -> bool:
    return lit < 0


def make_clause(literals: Iterable[int]) -> Clause:
    """Normalize literals into a clause: dedupe, sort by (var, polarity)."""
    lits = set(literals)
    if 0 in lits:
        raise FormulaError("0 is not a literal")
    return tuple(sorted(lits, key=lambda l: (abs(l), l < 0)))


def is_tautology(clause: Iterable[int]) -> bool:
    lits = set(clause)
    return any(-l in lits for l in lits)


@dataclass
class Prefix:
    """Quantifier prefix: universal variables plus existentials with Henkin sets."""

    universals: set[int] = field(default_factory=set)
    deps: dict[int, frozenset[int]] = field(default_factory=dict)

    def add_universal(self, v: int) -> None:
        if v < 1:
            raise FormulaError(f"variable ids are positive, got {v}")
        if v in self.universals or v in self.deps:
            raise FormulaError(f"variable {v} quantified twice")
        self.universals.add(v)

    def add_existential(self, v: int, dep: Iterable[int]) -> None:
        if v < 1:
            raise FormulaError(f"variable ids are positive, got {v}")
        if v in self.universals or v in self.deps:
            raise FormulaError(f"variable {v} quantified twice")
        dep = frozenset(dep)
        bad = dep - self.universals
        if bad:
            raise FormulaError(
                f"dependency set of {v} contains non-universals {sorted(bad)}"
            )
        self.deps[v] = dep

    def is_universal(self, v: int) -> bool:
        return v in self.universals

    def is_existential(self, v: int) -> bool:
        return v in self.deps

    def knows(self, v: int) -> bool:
        return v in self.universals or v in self.deps

    def variables(self) -> set[int]:
        return self.universals | set(self.deps)

    def copy(self) -> "Prefix":
        return Prefix(set(self.universals), dict(self.deps))


def dep(lit: int, prefix: Prefix) -> frozenset[int]:
    """Dependency set of a literal: Henkin set for existentials, self for universals."""
    v = lit_var(lit)
    if v in prefix.deps:
        return prefix.deps[v]
    if v in prefix.universals:
        return frozenset((v,))
    raise FormulaError(f"unknown variable {v}")


def dep_clause(clause: Iterable[int], prefix: Prefix) -> frozenset[int]:
    out: set[int] = set()
    for l in clause:
        out |= dep(l, prefix)
    return frozenset(out)


def exdep(ys: Iterable[int], prefix: Prefix) -> frozenset[int]:
    """Extended dependency set: dependencies plus existentials with strictly
    smaller dependency sets, unioned over the given existentials."""
    out: set[int] = set()
    for y in ys:
        if y not in prefix.deps:
            raise FormulaError(f"variable {y} is not existential")
        h = prefix.deps[y]
        out |= h
        out.update(y2 for y2, h2 in prefix.deps.items() if h2 < h)
    return frozenset(out)


def restrict_clause(clause: Clause, vars_: Iterable[int]) -> Clause:
    vs = set(vars_)
    return tuple(l for l in clause if abs(l) in vs)


def universal_reduce(clause: Clause, prefix: Prefix) -> Clause:
    """Drop each universal literal no existential literal in the clause depends on."""
    needed: set[int] = set()
    for l in clause:
        if lit_var(l) in prefix.deps:
            needed |= prefix.deps[lit_var(l)]
    return tuple(
        l for l in clause if lit_var(l) in prefix.deps or lit_var(l) in needed
    )


def eval_clause(clause: Clause, alpha: Assignment) -> bool | None:
    """True if some literal is satisfied, False if all literals are assigned
    and falsified, None otherwise."""
    undef = False
    for l in clause:
        val = alpha.get(abs(l))
        if val is None:
            undef = True
        elif val == (l > 0):
            return True
    return None if undef else False


def update_assignment(alpha: Assignment, alpha2: Assignment) -> Assignment:
    """Update of alpha with alpha2; alpha2 wins on shared keys."""
    out = dict(alpha)
    out.update(alpha2)
    return out


def restrict_assignment(alpha: Assignment, vars_: Iterable[int]) -> Assignment:
    vs = set(vars_)
    return {v: b for v, b in alpha.items() if v in vs}


def assignment_extends(alpha2: Assignment, alpha: Assignment) -> bool:
    """alpha ⊑ alpha2: alpha2 agrees with alpha on dom(alpha)."""
    return all(alpha2.get(v) == b for v, b in alpha.items())


@dataclass
class DqbfFormula:
    """A DQBF: prefix plus CNF matrix with stable, append-only clause ids.

    Clause ids are list indices.  Fork extension appends; replaced clauses are
    deactivated via the per-clause flag, never removed, so that downstream
    incremental SAT encodings keyed by clause id stay valid.
    """

    prefix: Prefix = field(default_factory=Prefix)
    clauses: list[Clause] = field(default_factory=list)
    active: list[bool] = field(default_factory=list)
    dropped_tautologies: int = 0
    deduped_literals: int = 0
    warnings: list = field(default_factory=list)

    def add_clause(self, literals: Iterable[int]) -> int | None:
        """Normalize and add a clause; tautologies are dropped (counted).

        Returns the clause id, or None when the clause was dropped.
        """
        raw = list(literals)
        clause = make_clause(raw)
        if len(clause) < len(raw):
            self.deduped_literals += len(raw) - len(clause)
        for l in clause:
            if not self.prefix.knows(lit_var(l)):
                raise FormulaError(f"free variable {lit_var(l)} in clause")
        if is_tautology(clause):
            self.dropped_tautologies += 1
            return None
        self.clauses.append(clause)
        self.active.append(True)
        return len(self.clauses) - 1

    def append_clause(self, clause: Clause) -> int:
        """Append an already-normalized clause (fork extension path)."""
        for l in clause:
            if not self.prefix.knows(lit_var(l)):
                raise FormulaError(f"free variable {lit_var(l)} in clause")
        self.clauses.append(clause)
        self.active.append(True)
        return len(self.clauses) - 1

    def replace_clause(self, cid: int, clause: Clause) -> None:
        """Rewrite a clause in place (preprocessing only, before solving starts)."""
        self.clauses[cid] = clause

    def deactivate(self, cid: int) -> None:
        self.active[cid] = False

    def active_items(self) -> Iterator[tuple[int, Clause]]:
        for cid, clause in enumerate(self.clauses):
            if self.active[cid]:
                yield cid, clause

    def max_var(self) -> int:
        top = 0
        if self.prefix.universals:
            top = max(top, max(self.prefix.universals))
        if self.prefix.deps:
            top = max(top, max(self.prefix.deps))
        for clause in self.clauses:
            for l in clause:
                top = max(top, abs(l))
        return top

    def fresh_existential(self, dep_set: Iterable[int]) -> int:
        """Mint a new existential above all current ids (fork extension)."""
        v = self.max_var() + 1
        self.prefix.add_existential(v, dep_set)
        return v

    def copy(self) -> "DqbfFormula":
        return DqbfFormula(
            prefix=self.prefix.copy(),
            clauses=list(self.clauses),
            active=list(self.active),
            dropped_tautologies=self.dropped_tautologies,
            deduped_literals=self.deduped_literals,
            warnings=list(self.warnings),
        )
