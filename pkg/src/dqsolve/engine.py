"""The main solving loop.

Levels are processed outermost-first.  Each node produces a candidate
assignment for its variables or a conflict.  Unsat conflicts at existential
nodes turn their failed-assumption core into a universally reduced conflict
clause; a clause with an information fork is split (fresh variables, new
clauses, consistency reset), otherwise a backward search over the levels
finds the unique node to refine.  Sat conflicts walk outward, learning
consistency entries at over-approximating existential nodes and refining
the innermost universal node that still has a refutable satisfied clause.
A conflict that propagates past level 0 is the final verdict.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .abstraction import NodeAbstraction
from .formula import (
    Assignment,
    Clause,
    DqbfFormula,
    eval_clause,
    make_clause,
    restrict_clause,
    universal_reduce,
)
from .forks import CycleError, clause_poset, eliminate_forks
from .lattice import EXISTENTIAL, UNIVERSAL, Node, build_structure, node_for_dep

TRUE, FALSE, UNKNOWN = "true", "false", "unknown"


class InternalSolverError(Exception):
    """An invariant the refinement scheme relies on was violated."""


@dataclass
class EngineOptions:
    strong_fork_extension: bool = True
    max_conflicts: int | None = None
    seed: int = 0
    decision_phases: dict[int, bool] | None = None  # test hook: var -> initial phase
    record_events: bool = False
    debug_checks: bool = False


@dataclass
class Result:
    verdict: str  # "true" | "false" | "unknown"
    reason: str = ""
    stats: dict[str, int] = field(default_factory=dict)
    events: list[tuple] = field(default_factory=list)


class _Limit(Exception):
    pass


@dataclass
class _Conflict:
    level: int


@dataclass
class _Verdict:
    verdict: str


_CANDIDATE = object()


class Engine:
    def __init__(self, formula: DqbfFormula, opts: EngineOptions | None = None):
        self.opts = opts or EngineOptions()
        self.f = formula.copy()
        self.structure = None
        self.abstractions: dict[Any, NodeAbstraction] = {}
        self.persistent_cores: dict[frozenset, list[frozenset[int]]] = {}
        self.entries: dict[frozenset, list[tuple[tuple[Clause, ...], Assignment]]] = {}
        self.last_solve: dict[frozenset, tuple[dict[int, bool], Assignment]] = {}
        self.alpha_v: Assignment = {}
        self.stats: dict[str, int] = {
            "sat_calls": 0,
            "conflicts": 0,
            "unsat_refinements": 0,
            "sat_refinements": 0,
            "fork_extensions": 0,
            "strong_fork_extensions": 0,
            "consistency_resets": 0,
            "stale_entry_resets": 0,
            "entries_learned": 0,
            "structure_rebuilds": 0,
        }
        self.events: list[tuple] = []
        self._consistency_log: dict[tuple, Assignment] = {}

    # -- setup -----------------------------------------------------------------

    def _event(self, *item) -> None:
        if self.opts.record_events:
            self.events.append(item)

    def _preprocess(self) -> str | None:
        """Tautology drop, universal reduction, fork elimination on input
        clauses.  Returns a verdict string when decided outright."""
        f = self.f
        for cid, clause in list(f.active_items()):
            reduced = universal_reduce(clause, f.prefix)
            if reduced != clause:
                f.replace_clause(cid, reduced)
        for cid, clause in list(f.active_items()):
            if not clause:
                return FALSE
            if clause_poset(clause, f.prefix).has_fork:
                products, new_vars = eliminate_forks(
                    f, clause, strong=self.opts.strong_fork_extension
                )
                self.stats["fork_extensions"] += len(new_vars)
                f.deactivate(cid)
                for p in products:
                    if not p:
                        return FALSE
                    f.append_clause(p)
        if not any(True for _ in f.active_items()):
            return TRUE
        return None

    def _abstraction(self, node: Node) -> NodeAbstraction:
        key = self._key(node)
        abs_ = self.abstractions.get(key)
        if abs_ is None:
            abs_ = NodeAbstraction.build(
                node,
                self.f,
                phases=self.opts.decision_phases,
                validate=self.opts.debug_checks,
            )
            if node.kind == EXISTENTIAL:
                for core in self.persistent_cores.get(node.dep, []):
                    abs_.refine_existential(core)
            self.abstractions[key] = abs_
        return abs_

    @staticmethod
    def _key(node: Node):
        if node.kind == EXISTENTIAL:
            return ("e", node.dep)
        return ("a", frozenset(node.vars))

    # -- main loop ---------------------------------------------------------------

    def solve(self) -> Result:
        try:
            early = self._preprocess()
        except CycleError as e:
            return Result(UNKNOWN, f"dependency cycle: {e}", dict(self.stats), self.events)
        if early is not None:
            self._event("verdict", early)
            return Result(early, "decided during preprocessing", dict(self.stats), self.events)
        self.structure = build_structure(self.f)
        lvl = 0
        try:
            while True:
                step = self._solve_level(lvl)
                if step is _CANDIDATE:
                    lvl += 1
                elif isinstance(step, _Conflict):
                    lvl = step.level
                    self._trim_alpha(lvl)
                else:
                    assert isinstance(step, _Verdict)
                    self._event("verdict", step.verdict)
                    return Result(step.verdict, "", dict(self.stats), self.events)
        except _Limit:
            return Result(
                UNKNOWN, "conflict limit reached", dict(self.stats), self.events
            )

    def _trim_alpha(self, lvl: int) -> None:
        keep = set()
        for level in self.structure.levels[:lvl]:
            for n in level.nodes:
                keep |= n.vars
        self.alpha_v = {v: b for v, b in self.alpha_v.items() if v in keep}

    def _solve_level(self, lvl: int):
        assert 0 <= lvl < len(self.structure.levels), "ran past the last level"
        level = self.structure.levels[lvl]
        if level.kind == UNIVERSAL:
            return self._solve_universal(level.nodes[0])
        for node in level.nodes:
            step = self._solve_existential(node)
            if step is not _CANDIDATE:
                return step
        return _CANDIDATE

    # -- node solving --------------------------------------------------------------

    def _solve_existential(self, node: Node):
        abs_ = self._abstraction(node)
        alpha_s = abs_.prj_exists(self.alpha_v)
        entry = self._check_consistency(node)
        alpha_y: Assignment = {}
        if entry is not None:
            # A verified recorded assignment.  If its stored model still
            # satisfies the abstraction (checked by evaluation), replay it
            # without a SAT call; otherwise keep the pinned values assumed
            # and let the solver rearrange the deferral bookkeeping.
            alpha_y = entry[1]
            if abs_.entry_still_valid(alpha_y, entry[2], alpha_s):
                if self.opts.debug_checks:
                    self._log_consistency(node, alpha_y)
                self.alpha_v.update(alpha_y)
                self.last_solve[node.dep] = (alpha_s, dict(alpha_y), dict(entry[2]))
                self._event("consistency_hit", self._key(node))
                return _CANDIDATE
        self.stats["sat_calls"] += 1
        sat = abs_.solver.solve(abs_.assumptions(alpha_y, alpha_s))
        if not sat:
            core, s_pos, ylits = abs_.split_core(abs_.solver.failed)
            assert not s_pos, "positive satisfaction literal in an existential core"
            if ylits:
                # The pinned assignment itself is infeasible against clauses
                # learned after it was recorded: the reset-scoped state
                # (entries, universal refinements) is stale as a whole.
                return self._stale_entry_restart(node)
            self._event("solve", self._key(node), "unsat", frozenset(core))
            return self._refine("unsat", core, node)
        model_y = {v: b for v, b in abs_.model_of_vars().items() if v in node.vars}
        if entry is not None:
            entry[2] = abs_.deferral_snapshot()  # refresh the replay model
        if self.opts.debug_checks:
            self._check_deferral(node, abs_, alpha_s)
            self._log_consistency(node, model_y)
        self.alpha_v.update(model_y)
        # Deferral snapshot taken lazily at entry-learning time; the model is
        # still current then (no re-solve happens before the backward walk).
        self.last_solve[node.dep] = (alpha_s, model_y, None)
        self._event("solve", self._key(node), "sat", None)
        if node is self.structure.maximal:
            return self._refine("sat", set(c for c, b in alpha_s.items() if b), node)
        return _CANDIDATE

    def _solve_universal(self, node: Node):
        abs_ = self._abstraction(node)
        bound = set()
        for level in self.structure.levels[: node.level]:
            for n in level.nodes:
                bound |= n.vars
        alpha_s = abs_.prj_forall(self.alpha_v, bound)
        self.stats["sat_calls"] += 1
        sat = abs_.solver.solve(abs_.assumptions({}, alpha_s))
        if not sat:
            _, core, _ = abs_.split_core(abs_.solver.failed)
            self._event("solve", self._key(node), "unsat", frozenset(core))
            return self._refine("sat", core, node)
        model_x = abs_.model_of_vars()
        if self.opts.debug_checks:
            self._check_falsification(node, abs_, alpha_s, bound, model_x)
        self.alpha_v.update(model_x)
        self._event("solve", self._key(node), "sat", None)
        return _CANDIDATE

    # -- consistency ------------------------------------------------------------------

    def _check_consistency(self, node: Node):
        """First entry whose condition holds under the current assignment."""
        for entry in self.entries.get(node.dep, []):
            if all(eval_clause(c, self.alpha_v) is True for c in entry[0]):
                return entry
        return None

    def _learn_entry(self, node: Node) -> None:
        last = self.last_solve.get(node.dep)
        if last is None:
            return
        alpha_s, alpha_y, a_snap = last
        abs_ = self._abstraction(node)
        if a_snap is None:
            a_snap = abs_.deferral_snapshot()
            self.last_solve[node.dep] = (alpha_s, alpha_y, a_snap)
        cond = tuple(abs_.lt_part[c] for c, b in sorted(alpha_s.items()) if b)
        bucket = self.entries.setdefault(node.dep, [])
        for have_cond, have_y, _ in bucket:
            if have_cond == cond and have_y == alpha_y:
                return
        bucket.append([cond, dict(alpha_y), dict(a_snap)])
        self.stats["entries_learned"] += 1
        self._event("entry", node.dep, cond, dict(alpha_y))

    def _reset_consistency(self) -> None:
        self.entries.clear()
        self._consistency_log.clear()
        for key in [k for k in self.abstractions if k[0] == "a"]:
            del self.abstractions[key]
        self.stats["consistency_resets"] += 1

    def _stale_entry_restart(self, node: Node):
        self.stats["stale_entry_resets"] += 1
        self.stats["conflicts"] += 1
        if (
            self.opts.max_conflicts is not None
            and self.stats["conflicts"] > self.opts.max_conflicts
        ):
            raise _Limit()
        self._event("stale_entry", self._key(node))
        self._reset_consistency()
        self.last_solve.clear()
        return _Conflict(0)

    # -- refinement ---------------------------------------------------------------------

    def _refine(self, res: str, core_or_witness: set[int], node: Node):
        self.stats["conflicts"] += 1
        if (
            self.opts.max_conflicts is not None
            and self.stats["conflicts"] > self.opts.max_conflicts
        ):
            raise _Limit()
        if res == "unsat":
            bound = set()
            for level in self.structure.levels[: node.level]:
                for n in level.nodes:
                    bound |= n.vars
            union: set[int] = set()
            for cid in core_or_witness:
                union.update(restrict_clause(self.f.clauses[cid], bound))
            conflict = universal_reduce(make_clause(union), self.f.prefix)
            self._event("conflict_clause", conflict)
            if clause_poset(conflict, self.f.prefix).has_fork:
                self._fork_eliminate_conflict(conflict)
                return _Conflict(0)
            target = self._determine_refinement_node(
                "unsat", core_or_witness, conflict, node.level
            )
        else:
            target = self._determine_refinement_node(
                "sat", core_or_witness, (), node.level
            )
        if target is None:
            return _Verdict(TRUE if res == "sat" else FALSE)
        return _Conflict(target.level)

    def _determine_refinement_node(
        self, res: str, witness: set[int], conflict: Clause, origin_level: int
    ) -> Node | None:
        """Backward search strictly below the conflict origin.

        unsat: refine the first existential node binding a conflict-clause
        variable (unique, the clause being fork-free).  sat: learn entries at
        over-approximating existential nodes on the way out and refine the
        first universal node with a satisfied clause it could falsify; the
        witness there is recomputed against the variables bound up to and
        including that node, so a refuted universal candidate is actually
        excluded."""
        for lvl in range(origin_level - 1, -1, -1):
            level = self.structure.levels[lvl]
            if res == "unsat" and level.kind == EXISTENTIAL:
                cvars = {abs(l) for l in conflict}
                for node in level.nodes:
                    if node.vars & cvars:
                        lits = self._abstraction(node).refine_existential(witness)
                        self.stats["unsat_refinements"] += 1
                        self._event("refine", self._key(node), "unsat", frozenset(witness), lits)
                        return node
            elif res == "sat" and level.kind == UNIVERSAL:
                node = level.nodes[0]
                w = self._universal_witness(node)
                if w:
                    lits = self._abstraction(node).refine_universal(w)
                    self.stats["sat_refinements"] += 1
                    self._event("refine", self._key(node), "sat", frozenset(w), lits)
                    return node
            elif res == "sat" and level.kind == EXISTENTIAL:
                for node in level.nodes:
                    bu, _ = self.structure.bound_vars(node)
                    if node.dep < bu:
                        self._learn_entry(node)
        return None

    def _universal_witness(self, node: Node) -> set[int]:
        """Clauses this universal node could still refuse: satisfied by the
        variables bound up to and including the node, and carrying a
        satisfaction variable here."""
        abs_ = self._abstraction(node)
        visible = self.structure.bound_through(node.level)
        out = set()
        for cid in abs_.s_var:
            if not self.f.active[cid]:
                continue
            if eval_clause(abs_.visible_part(cid, visible), self.alpha_v) is True:
                out.add(cid)
        return out

    # -- fork elimination mid-run ----------------------------------------------------------

    def _fork_eliminate_conflict(self, conflict: Clause) -> None:
        before = len(self.f.prefix.deps)
        products, new_vars = eliminate_forks(
            self.f, conflict, strong=self.opts.strong_fork_extension
        )
        self.stats["fork_extensions"] += len(new_vars)
        self._event("fork_extension", conflict, tuple(new_vars), tuple(products))
        rebuilt_any = False
        for v, h in new_vars:
            self.structure, target, rebuilt = node_for_dep(self.structure, self.f, h)
            if rebuilt:
                rebuilt_any = True
                self.stats["structure_rebuilds"] += 1
            target.vars.add(v)
        if rebuilt_any:
            self.abstractions.clear()
        else:
            for v, h in new_vars:
                for abs_ in self.abstractions.values():
                    if abs_.node.dep == h and abs_.node.kind == EXISTENTIAL:
                        abs_.register_node_var(v)
                    else:
                        abs_.note_new_variable(v, h)
        new_ids = [self.f.append_clause(p) for p in products]
        if not rebuilt_any:
            for cid in new_ids:
                for abs_ in self.abstractions.values():
                    abs_.add_matrix_clause(cid, self.f.clauses[cid])
        self._reset_consistency()
        self.last_solve.clear()

    # -- debug invariants ---------------------------------------------------------------------

    def _check_deferral(self, node, abs_, alpha_s) -> None:
        """A clause whose assumption variable is false must be satisfied by
        the node's own model together with the assignment so far."""
        combined = dict(self.alpha_v)
        combined.update(abs_.model_of_vars())
        for cid, av in abs_.a_var.items():
            if not self.f.active[cid]:
                continue
            if not abs_.solver.model_value(av):
                visible = set(abs_.exdep_set) | set(node.vars)
                part = restrict_clause(self.f.clauses[cid], visible)
                if eval_clause(part, combined) is not True:
                    raise InternalSolverError(
                        f"clause {cid} not satisfied despite a_{cid} false at {node.name()}"
                    )

    def _check_falsification(self, node, abs_, alpha_s, bound, model_x) -> None:
        """A satisfaction variable set false at a universal node means the
        clause's visible part is actually falsified."""
        combined = dict(self.alpha_v)
        combined.update(model_x)
        for cid, sv in abs_.s_var.items():
            if not self.f.active[cid]:
                continue
            if cid in alpha_s:
                continue
            if not abs_.solver.model_value(sv):
                part = restrict_clause(self.f.clauses[cid], bound | set(node.vars))
                if eval_clause(part, combined) is not False:
                    raise InternalSolverError(
                        f"clause {cid} not falsified despite s_{cid} false at {node.name()}"
                    )

    def _log_consistency(self, node, model_y) -> None:
        key_vars = sorted(self._abstraction(node).exdep_set)
        key = (node.dep, tuple((v, self.alpha_v.get(v)) for v in key_vars))
        prev = self._consistency_log.get(key)
        if prev is not None and prev != model_y:
            raise InternalSolverError(
                f"inconsistent replies at {node.name()} for equal dependency assignment"
            )
        self._consistency_log[key] = dict(model_y)


def solve(formula: DqbfFormula, opts: EngineOptions | None = None) -> Result:
    """Decide a DQBF.  Returns a Result with verdict "true", "false", or
    "unknown" (resource limit or disabled strong fork extension on a
    dependency cycle)."""
    return Engine(formula, opts).solve()
