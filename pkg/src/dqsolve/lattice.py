"""Dependency lattice and quantifier levels.

The existential dependency sets, closed under intersection, form a
meet-semilattice under set inclusion.  The solver decomposes it into numbered
quantifier levels: existential levels are antichains of nodes ordered by
longest-chain depth, and each universal variable is placed in a singleton
universal level immediately before the first existential level using it as a
dependency.  A node with the full universal set as dependency is always
present (added empty if no existential carries it), as is the empty-set root.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .formula import DqbfFormula, FormulaError

UNIVERSAL = "universal"
EXISTENTIAL = "existential"


@dataclass
class Node:
    kind: str
    vars: set[int]
    dep: frozenset[int] | None  # None for universal nodes
    level: int = -1

    def name(self) -> str:
        if self.kind == UNIVERSAL:
            return f"forall({','.join(map(str, sorted(self.vars)))})"
        deps = ",".join(map(str, sorted(self.dep)))
        return f"exists({','.join(map(str, sorted(self.vars)))};{{{deps}}})"


@dataclass
class Level:
    kind: str
    nodes: list[Node]


@dataclass
class SolverStructure:
    levels: list[Level]
    by_dep: dict[frozenset[int], Node] = field(default_factory=dict)
    maximal: Node | None = None
    root: Node | None = None

    def existential_nodes(self):
        for level in self.levels:
            if level.kind == EXISTENTIAL:
                yield from level.nodes

    def universal_nodes(self):
        for level in self.levels:
            if level.kind == UNIVERSAL:
                yield from level.nodes

    def bound_vars(self, node: Node) -> tuple[set[int], set[int]]:
        """Variables bound at strictly smaller levels, split (universal, existential)."""
        bu: set[int] = set()
        be: set[int] = set()
        for level in self.levels[: node.level]:
            for n in level.nodes:
                if n.kind == UNIVERSAL:
                    bu |= n.vars
                else:
                    be |= n.vars
        return bu, be

    def bound_through(self, level_index: int) -> set[int]:
        """All variables bound at levels <= level_index."""
        out: set[int] = set()
        for level in self.levels[: level_index + 1]:
            for n in level.nodes:
                out |= n.vars
        return out


def close_under_intersection(sets) -> set[frozenset[int]]:
    """Smallest superset of the given collection closed under pairwise
    intersection (fixed point)."""
    closed = {frozenset(s) for s in sets}
    frontier = list(closed)
    while frontier:
        nxt = []
        for a in frontier:
            for b in closed:
                c = a & b
                if c not in closed:
                    nxt.append(c)
        for c in nxt:
            closed.add(c)
        frontier = nxt
    return closed


def build_structure(formula: DqbfFormula) -> SolverStructure:
    """Build the quantifier-level structure for a well-formed formula."""
    prefix = formula.prefix
    all_universals = frozenset(prefix.universals)
    elements = close_under_intersection(prefix.deps.values())
    elements.add(frozenset())
    elements.add(all_universals)  # unique maximal node, possibly with no vars

    nodes = {
        h: Node(EXISTENTIAL, {y for y, d in prefix.deps.items() if d == h}, h)
        for h in elements
    }

    # Longest-chain depth below each element; ties share a level (antichains).
    depth: dict[frozenset[int], int] = {}
    for h in sorted(elements, key=lambda s: (len(s), tuple(sorted(s)))):
        below = [depth[g] for g in elements if g < h]
        depth[h] = 1 + max(below) if below else 0

    levels: list[Level] = []
    bound_univ: set[int] = set()
    for d in range(max(depth.values()) + 1):
        group = sorted(
            (h for h in elements if depth[h] == d), key=lambda s: tuple(sorted(s))
        )
        fresh = set().union(*group) - bound_univ if group else set()
        if fresh:
            levels.append(Level(UNIVERSAL, [Node(UNIVERSAL, fresh, None)]))
            bound_univ |= fresh
        levels.append(Level(EXISTENTIAL, [nodes[h] for h in group]))

    for i, level in enumerate(levels):
        for n in level.nodes:
            n.level = i

    structure = SolverStructure(levels=levels, by_dep=nodes)
    structure.maximal = nodes[all_universals]
    structure.root = nodes[frozenset()]
    return structure


def validate(structure: SolverStructure, formula: DqbfFormula) -> list[str]:
    """Check the five structural properties; empty list iff all hold."""
    violations: list[str] = []
    prefix = formula.prefix

    seen: dict[int, int] = {}
    for level in structure.levels:
        for node in level.nodes:
            for v in node.vars:
                seen[v] = seen.get(v, 0) + 1
    for v in prefix.variables():
        if seen.get(v, 0) != 1:
            violations.append(f"P1.1: variable {v} bound {seen.get(v, 0)} times")
    for v in seen:
        if not prefix.knows(v):
            violations.append(f"P1.1: node binds unknown variable {v}")

    for level in structure.levels:
        if level.kind != EXISTENTIAL:
            continue
        ns = level.nodes
        for i in range(len(ns)):
            for j in range(i + 1, len(ns)):
                h1, h2 = ns[i].dep, ns[j].dep
                if h1 <= h2 or h2 <= h1:
                    violations.append(
                        f"P1.2: comparable deps {ns[i].name()} and {ns[j].name()} share a level"
                    )

    ex_nodes = list(structure.existential_nodes())
    for a in ex_nodes:
        for b in ex_nodes:
            if a.level < b.level and not (a.dep < b.dep) and not _incomparable(a.dep, b.dep):
                violations.append(
                    f"P1.3: {a.name()} at earlier level not below/incomparable to {b.name()}"
                )

    for node in ex_nodes:
        bu, _ = structure.bound_vars(node)
        if not node.dep <= bu:
            violations.append(f"P1.4: {node.name()} has unbound dependencies")

    maximal = [
        n for n in ex_nodes if all(n is m or m.dep < n.dep for m in ex_nodes)
    ]
    if len(maximal) != 1:
        violations.append(f"P1.5: {len(maximal)} maximal nodes")

    return violations


def _incomparable(a: frozenset, b: frozenset) -> bool:
    return not (a <= b) and not (b <= a)


def node_for_dep(
    structure: SolverStructure, formula: DqbfFormula, h: frozenset[int]
) -> tuple[SolverStructure, Node, bool]:
    """Return the existential node with dependency set exactly ``h``,
    rebuilding the structure if ``h`` is not yet a lattice element.

    Returns (structure, node, rebuilt).  A rebuild preserves clause ids and
    variable ids; callers must recreate per-node state when rebuilt is True.
    """
    if not h <= formula.prefix.universals:
        raise FormulaError(f"dependency set {sorted(h)} not within the universals")
    node = structure.by_dep.get(h)
    if node is not None:
        return structure, node, False
    rebuilt = build_structure(formula)
    return rebuilt, rebuilt.by_dep[h], True


def format_structure(structure: SolverStructure) -> str:
    """Text tree of the quantifier levels, for the CLI debug dump."""
    lines = []
    for i, level in enumerate(structure.levels):
        lines.append(f"level {i} ({level.kind})")
        for node in level.nodes:
            lines.append(f"  {node.name()}")
    return "\n".join(lines)
