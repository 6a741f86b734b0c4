"""Per-node clausal abstractions.

Every quantifier node owns one incremental SAT instance.  A clause is split
three ways relative to an existential node: the part over the node's
extended dependencies (abstracted by a satisfaction variable s_i), the part
over the node's own variables (kept verbatim), and the part over everything
else (abstracted by an assumption variable a_i).  s_i is omitted when the
first part is empty, a_i when the last part is empty.  Universal nodes keep
only satisfaction variables: s_i must be true unless the node falsifies
every one of the clause's own literals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .formula import (
    Assignment,
    Clause,
    DqbfFormula,
    eval_clause,
    exdep,
    restrict_clause,
)
from .lattice import EXISTENTIAL, Node, SolverStructure
from .sat import SatSolver


class RefinementTargetError(Exception):
    """A refinement referenced a clause with no interface variable here."""


@dataclass
class ClauseSplit:
    lt: Clause  # literals over the node's extended dependencies
    eq: Clause  # literals the node binds
    gt: Clause  # literals the node may not observe


def split_clause(clause: Clause, node: Node, prefix) -> ClauseSplit:
    ex = exdep(node.vars & set(prefix.deps), prefix) if node.kind == EXISTENTIAL else frozenset()
    lt, eq, gt = [], [], []
    for l in clause:
        v = abs(l)
        if v in node.vars:
            eq.append(l)
        elif v in ex:
            lt.append(l)
        else:
            gt.append(l)
    return ClauseSplit(tuple(lt), tuple(eq), tuple(gt))


@dataclass
class NodeAbstraction:
    node: Node
    formula: DqbfFormula
    solver: SatSolver = field(default_factory=SatSolver)
    var_map: dict[int, int] = field(default_factory=dict)  # formula var -> solver var
    s_var: dict[int, int] = field(default_factory=dict)  # clause id -> solver var
    a_var: dict[int, int] = field(default_factory=dict)
    lt_part: dict[int, Clause] = field(default_factory=dict)  # clause id -> C_i^<
    eq_part: dict[int, Clause] = field(default_factory=dict)  # clause id -> C_i^=
    exdep_set: set[int] = field(default_factory=set)
    learned: list[tuple[int, ...]] = field(default_factory=list)  # universal, reset-scoped
    unsat_cores: list[frozenset[int]] = field(default_factory=list)
    default_phases: dict[int, bool] = field(default_factory=dict)
    _bound_parts: dict[int, Clause] = field(default_factory=dict)
    _visible_parts: dict[int, Clause] = field(default_factory=dict)

    # -- construction ----------------------------------------------------------

    @classmethod
    def build(
        cls,
        node: Node,
        formula: DqbfFormula,
        phases: dict[int, bool] | None = None,
        validate: bool = False,
    ) -> "NodeAbstraction":
        abs_ = cls(node, formula, solver=SatSolver(validate=validate))
        abs_.default_phases = dict(phases or {})
        if node.kind == EXISTENTIAL:
            abs_.exdep_set = set(
                exdep(node.vars & set(formula.prefix.deps), formula.prefix)
            )
        for v in sorted(node.vars):
            abs_._register_var(v)
        for cid, clause in formula.active_items():
            abs_.add_matrix_clause(cid, clause)
        return abs_

    def _register_var(self, v: int) -> int:
        sv = self.solver.new_var()
        self.var_map[v] = sv
        if v in self.default_phases:
            self.solver.set_default_phase(sv, self.default_phases[v])
        return sv

    def register_node_var(self, v: int) -> None:
        """A fresh formula variable joined this node (fork extension)."""
        self.node.vars.add(v)
        if v not in self.var_map:
            self._register_var(v)

    def note_new_variable(self, v: int, dep_set: frozenset[int]) -> None:
        """Track a fresh existential that enlarges this node's extended
        dependency set (only new clauses can mention it)."""
        if self.node.kind == EXISTENTIAL and self.node.dep is not None:
            if dep_set < self.node.dep:
                self.exdep_set.add(v)

    def add_matrix_clause(self, cid: int, clause: Clause) -> None:
        if self.node.kind == EXISTENTIAL:
            self._encode_existential(cid, clause)
        else:
            self._encode_universal(cid, clause)

    def _encode_existential(self, cid: int, clause: Clause) -> None:
        lt, eq, gt = [], [], []
        for l in clause:
            v = abs(l)
            if v in self.node.vars:
                eq.append(l)
            elif v in self.exdep_set:
                lt.append(l)
            else:
                gt.append(l)
        body = []
        if lt:
            self.s_var[cid] = self.solver.new_var()
            self.lt_part[cid] = tuple(lt)
            body.append(self.s_var[cid])
        if gt:
            self.a_var[cid] = self.solver.new_var()
            body.append(self.a_var[cid])
        self.eq_part[cid] = tuple(eq)
        body.extend(self._lit(l) for l in eq)
        if body:
            self.solver.add_clause(body)
        else:
            # No interface variable and no own literal: unsatisfiable clause.
            self.solver.ok = False

    def _encode_universal(self, cid: int, clause: Clause) -> None:
        own = [l for l in clause if abs(l) in self.node.vars]
        if not own:
            return
        s = self.solver.new_var()
        self.s_var[cid] = s
        for l in own:
            self.solver.add_clause([s, -self._lit(l)])

    def _lit(self, l: int) -> int:
        v = abs(l)
        if v not in self.var_map:
            self._register_var(v)
        sv = self.var_map[v]
        return sv if l > 0 else -sv

    # -- projections -----------------------------------------------------------

    def prj_exists(self, alpha_v: Assignment) -> dict[int, bool]:
        """s_i is true iff the dependencies visible here already satisfy C_i."""
        out = {}
        for cid, part in self.lt_part.items():
            val = eval_clause(part, alpha_v)
            if val is None:
                raise RefinementTargetError(
                    f"projection at {self.node.name()} hit an unassigned dependency"
                )
            out[cid] = val
        return out

    def prj_forall(self, alpha_v: Assignment, bound: set[int]) -> dict[int, bool]:
        """s_i assumed true iff the bound prefix of C_i is already satisfied;
        otherwise left unconstrained."""
        out = {}
        parts = self._bound_parts
        for cid in self.s_var:
            part = parts.get(cid)
            if part is None:
                part = parts[cid] = restrict_clause(self.formula.clauses[cid], bound)
            if eval_clause(part, alpha_v) is True:
                out[cid] = True
        return out

    def visible_part(self, cid: int, visible: set[int]) -> Clause:
        """Clause restricted to the given variables, cached (the set is fixed
        for this abstraction's lifetime)."""
        part = self._visible_parts.get(cid)
        if part is None:
            part = self._visible_parts[cid] = restrict_clause(
                self.formula.clauses[cid], visible
            )
        return part

    # -- solving and refinement --------------------------------------------------

    def assumptions(
        self, alpha_y: Assignment, alpha_s: dict[int, bool]
    ) -> list[int]:
        lits = [self.var_map[v] if b else -self.var_map[v] for v, b in sorted(alpha_y.items())]
        lits += [self.s_var[c] if b else -self.s_var[c] for c, b in sorted(alpha_s.items())]
        return lits

    def split_core(self, failed: set[int]) -> tuple[set[int], set[int], Assignment]:
        """Partition failed assumptions into clause ids of negative and
        positive satisfaction literals plus node-variable literals that were
        consistency assumptions."""
        s_rev = {sv: cid for cid, sv in self.s_var.items()}
        v_rev = {sv: v for v, sv in self.var_map.items()}
        s_neg: set[int] = set()
        s_pos: set[int] = set()
        ylits: Assignment = {}
        for lit in failed:
            sv = abs(lit)
            if sv in s_rev:
                (s_neg if lit < 0 else s_pos).add(s_rev[sv])
            elif sv in v_rev:
                ylits[v_rev[sv]] = lit > 0
            else:
                raise AssertionError(f"core literal {lit} maps to no interface")
        return s_neg, s_pos, ylits

    def model_of_vars(self) -> Assignment:
        return {v: self.solver.model_value(sv) for v, sv in self.var_map.items()}

    def refine_existential(self, core: set[int]) -> tuple[int, ...]:
        missing = [cid for cid in core if cid not in self.a_var]
        if missing:
            raise RefinementTargetError(
                f"no assumption variable for clauses {sorted(missing)} at {self.node.name()}"
            )
        lits = tuple(-self.a_var[cid] for cid in sorted(core))
        self.unsat_cores.append(frozenset(core))
        self.solver.add_clause(lits)
        return lits

    def deferral_snapshot(self) -> dict[int, bool]:
        """Assumption-variable values of the current model (for entry replay)."""
        return {cid: self.solver.model_value(av) for cid, av in self.a_var.items()}

    def entry_still_valid(
        self,
        alpha_y: Assignment,
        a_snap: dict[int, bool],
        alpha_s: dict[int, bool],
    ) -> bool:
        """Whether a recorded model still satisfies this abstraction under the
        current satisfaction-variable projection: checked by evaluation, no
        SAT call.  The projection can only have grown more positive on the
        clauses the entry's condition pins, so failures come from refinement
        clauses learned after the entry."""
        for cid, eq in self.eq_part.items():
            if alpha_s.get(cid):
                continue
            if a_snap.get(cid):
                continue
            if eq and eval_clause(eq, alpha_y) is True:
                continue
            return False
        for core in self.unsat_cores:
            if all(a_snap[c] for c in core):
                return False
        return True

    def refine_universal(self, witness: set[int]) -> tuple[int, ...]:
        missing = [cid for cid in witness if cid not in self.s_var]
        if missing:
            raise RefinementTargetError(
                f"no satisfaction variable for clauses {sorted(missing)} at {self.node.name()}"
            )
        lits = tuple(-self.s_var[cid] for cid in sorted(witness))
        self.learned.append(lits)
        self.solver.add_clause(lits)
        return lits
