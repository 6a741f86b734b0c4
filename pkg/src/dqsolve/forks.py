"""Information forks, dependency cycles, and clause splitting.

A clause whose existential literals carry more than one maximal dependency
set (w.r.t. inclusion) holds an information fork.  Fork-free clauses have a
unique node responsible for them; forky clauses are split by introducing a
fresh existential whose dependency set is the intersection of the two
halves' dependencies.  Plain splitting fails exactly on dependency cycles;
those are broken by the strong variant, which adds a universal literal to
both halves and removes its variable from the fresh dependency set.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, permutations

from .formula import (
    Clause,
    DqbfFormula,
    Prefix,
    dep,
    dep_clause,
    is_tautology,
    make_clause,
    universal_reduce,
)

CYCLE_WIDTH_LIMIT = 16  # beyond this many existential literals, skip the search
CYCLE_LENGTH_LIMIT = 8


@dataclass
class ClausePoset:
    elements: set[frozenset[int]]
    maximal: list[frozenset[int]]  # sorted for determinism

    @property
    def has_fork(self) -> bool:
        return len(self.maximal) > 1


@dataclass
class DependencyCycle:
    literals: list[int]
    intersections: list[frozenset[int]]


class CycleError(Exception):
    """A dependency cycle was hit while strong fork extension is disabled."""

    def __init__(self, clause: Clause, cycle: DependencyCycle | None):
        self.clause = clause
        self.cycle = cycle
        if cycle is None:
            detail = "clause too wide for the cycle search"
        else:
            detail = "literals " + " ".join(str(l) for l in cycle.literals)
        super().__init__(f"dependency cycle in clause {clause}: {detail}")


def clause_poset(clause: Clause, prefix: Prefix) -> ClausePoset:
    elements = {dep(l, prefix) for l in clause if prefix.is_existential(abs(l))}
    maximal = sorted(
        (h for h in elements if not any(h < g for g in elements)),
        key=lambda s: tuple(sorted(s)),
    )
    return ClausePoset(elements, maximal)


def is_fork_free(clause: Clause, prefix: Prefix) -> bool:
    return not clause_poset(clause, prefix).has_fork


def find_dependency_cycle(
    clause: Clause, prefix: Prefix
) -> DependencyCycle | None:
    """Search for a dependency cycle among the clause's existential literals.

    Cycles never involve two literals with equal dependency sets (adjacent
    equal sets make comparable intersections), so the search runs over
    distinct dependency sets.  Returns None when no cycle exists within the
    search limits; clauses wider than CYCLE_WIDTH_LIMIT are not searched
    (callers fall back to strong fork extension unconditionally).
    """
    by_dep: dict[frozenset[int], int] = {}
    for l in clause:
        if prefix.is_existential(abs(l)):
            by_dep.setdefault(dep(l, prefix), l)
    if len([l for l in clause if prefix.is_existential(abs(l))]) > CYCLE_WIDTH_LIMIT:
        return None
    deps = sorted(by_dep, key=lambda s: tuple(sorted(s)))
    top = min(len(deps), CYCLE_LENGTH_LIMIT)
    for k in range(3, top + 1):
        for subset in combinations(deps, k):
            first = subset[0]
            for rest in permutations(subset[1:]):
                if tuple(sorted(rest[0])) > tuple(sorted(rest[-1])):
                    continue  # each cyclic order once (direction quotient)
                order = (first,) + rest
                inters = [
                    order[i] & order[(i + 1) % k] for i in range(k)
                ]
                if all(inters) and _pairwise_incomparable(inters):
                    return DependencyCycle(
                        [by_dep[h] for h in order], inters
                    )
    return None


def _pairwise_incomparable(sets) -> bool:
    for a, b in combinations(sets, 2):
        if a <= b or b <= a:
            return False
    return True


def choose_split(clause: Clause, prefix: Prefix) -> tuple[Clause, Clause] | None:
    """Split a forky clause into (C1, C2) so that plain fork extension makes
    progress.  Succeeds iff the clause has no dependency cycle: C1 gathers
    the literals inside a maximal element H but outside the unique maximal
    intersection H* of H with the other maximal elements."""
    poset = clause_poset(clause, prefix)
    if not poset.has_fork:
        raise ValueError("choose_split requires a clause with an information fork")
    for h in poset.maximal:
        inters = {h & g for g in poset.maximal if g != h}
        imax = [s for s in inters if not any(s < t for t in inters)]
        if len(imax) != 1:
            continue
        hstar = imax[0]
        c1 = tuple(l for l in clause if dep(l, prefix) <= h and not dep(l, prefix) <= hstar)
        c2 = tuple(l for l in clause if l not in c1)
        assert c1 and c2, "lemma split produced an empty side"
        return c1, c2
    return None


def fork_extension(
    c1: Clause, c2: Clause, y_fresh: int, prefix: Prefix
) -> tuple[Clause, Clause, frozenset[int]]:
    """Plain fork extension: C1|C2 becomes C1+y and C2+~y with
    dep(y) = dep(C1) & dep(C2)."""
    h = dep_clause(c1, prefix) & dep_clause(c2, prefix)
    return make_clause(c1 + (y_fresh,)), make_clause(c2 + (-y_fresh,)), h


def strong_fork_extension(
    c1: Clause,
    c2: Clause,
    c_x: Clause,
    y_fresh: int,
    prefix: Prefix,
) -> tuple[Clause, Clause, frozenset[int]]:
    """Strong fork extension: both halves gain the universal literals C_X,
    and dep(C_X) is removed from the fresh variable's dependency set."""
    h = (dep_clause(c1, prefix) & dep_clause(c2, prefix)) - dep_clause(c_x, prefix)
    return (
        make_clause(c_x + c1 + (y_fresh,)),
        make_clause(c_x + c2 + (-y_fresh,)),
        h,
    )


def is_multi_linear(prefix: Prefix) -> bool:
    """True iff every pair of existential dependency sets is nested or disjoint."""
    deps = list(prefix.deps.values())
    for a, b in combinations(deps, 2):
        if not (a <= b or b <= a or not (a & b)):
            return False
    return True


def _measure(clause: Clause, prefix: Prefix) -> list[int]:
    return sorted(
        len(dep(l, prefix)) for l in clause if prefix.is_existential(abs(l))
    )


def _multiset_progress(before: list[int], after: list[int]) -> bool:
    """Dershowitz-Manna style check: every added size is below some removed size."""
    removed = list(before)
    added = []
    for x in after:
        if x in removed:
            removed.remove(x)
        else:
            added.append(x)
    if not added:
        return bool(removed)
    return bool(removed) and all(a < max(removed) for a in added)


def eliminate_forks(
    formula: DqbfFormula, clause: Clause, strong: bool = True
) -> tuple[list[Clause], list[tuple[int, frozenset[int]]]]:
    """Rewrite a (universally reduced) clause into fork-free clauses.

    Applies fork extension while a produced clause has a fork; dependency
    cycles are broken with strong fork extension (two splits, on x and on
    ~x) when ``strong`` is enabled, else CycleError is raised.  Fresh
    existentials are registered on the formula's prefix; the produced
    clauses are universally reduced.  Returns (clauses, new (var, dep) pairs).
    """
    prefix = formula.prefix
    out: list[Clause] = []
    new_vars: list[tuple[int, frozenset[int]]] = []
    queue = [universal_reduce(make_clause(clause), prefix)]
    while queue:
        c = queue.pop(0)
        poset = clause_poset(c, prefix)
        if not poset.has_fork:
            out.append(c)
            continue
        split = choose_split(c, prefix)
        if split is not None:
            c1, c2 = split
            y = formula.fresh_existential(
                dep_clause(c1, prefix) & dep_clause(c2, prefix)
            )
            p1, p2, h = fork_extension(c1, c2, y, prefix)
            new_vars.append((y, h))
            _check_progress(c, (p1, p2), prefix)
            queue.append(universal_reduce(p1, prefix))
            queue.append(universal_reduce(p2, prefix))
            continue
        # Dependency cycle: split off the first cycle literal, once per
        # polarity of a breaking universal drawn from the first intersection.
        cycle = find_dependency_cycle(c, prefix)
        if not strong:
            raise CycleError(c, cycle)
        l1, x = _breaking_choice(c, cycle, poset, prefix)
        c1 = (l1,)
        c2 = tuple(l for l in c if l != l1)
        for x_lit in (x, -x):
            y = formula.fresh_existential(
                (dep_clause(c1, prefix) & dep_clause(c2, prefix)) - {x}
            )
            p1, p2, h = strong_fork_extension(c1, c2, (x_lit,), y, prefix)
            new_vars.append((y, h))
            kept = tuple(p for p in (p1, p2) if not is_tautology(p))
            _check_progress(c, kept, prefix)
            for p in kept:
                queue.append(universal_reduce(p, prefix))
    return out, new_vars


def _breaking_choice(clause, cycle, poset, prefix) -> tuple[int, int]:
    """Pick the literal to split off and the breaking universal variable.

    With a cycle witness: the first cycle literal and the smallest universal
    in the first intersection (preferring variables not occurring in the
    clause).  Without a witness (width overflow): the literal of the first
    maximal element and the smallest variable shared with another maximal."""
    occurring = {abs(l) for l in clause}
    if cycle is not None:
        l1 = cycle.literals[0]
        candidates = sorted(cycle.intersections[0])
    else:
        h = poset.maximal[0]
        l1 = next(
            l
            for l in clause
            if prefix.is_existential(abs(l)) and dep(l, prefix) == h
        )
        shared = set()
        for g in poset.maximal[1:]:
            shared |= h & g
        candidates = sorted(shared)
        assert candidates, "maximal elements of a fork must intersect here"
    preferred = [x for x in candidates if x not in occurring]
    x = (preferred or candidates)[0]
    assert x in dep(l1, prefix)
    return l1, x


def _check_progress(before: Clause, products, prefix: Prefix) -> None:
    m0 = _measure(before, prefix)
    for p in products:
        if is_fork_free(p, prefix):
            continue
        assert _multiset_progress(m0, _measure(p, prefix)), (
            f"fork elimination made no progress: {before} -> {p}"
        )
