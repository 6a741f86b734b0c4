"""Incremental CDCL SAT backend.

Exactly the contract the solving loop needs: add clauses and variables
forever, solve under assumptions, get back a total model or the subset of
assumptions responsible for unsatisfiability (the failed assumptions).

Implementation: two-watched literals, first-UIP learning, phase saving,
Luby restarts, exponential VSIDS decay with a lazy activity heap.
Assumptions are handled as forced decisions at trail levels 1..k with
final-conflict analysis producing the core.  Cores are sound but not
necessarily minimal.  Fully deterministic for a fixed clause/solve history.
"""

from __future__ import annotations

from heapq import heappush, heappop, heapify

TRUE, FALSE, UNDEF = 1, 0, -1


def luby(i: int) -> int:
    """i-th element (1-based) of the Luby restart sequence."""
    k = 1
    while (1 << (k + 1)) - 1 <= i:
        k += 1
    while (1 << k) - 1 != i:
        i = i - (1 << (k - 1)) + 1
        k = 1
        while (1 << (k + 1)) - 1 <= i:
            k += 1
    return 1 << (k - 1)


class SatSolver:
    RESTART_BASE = 64
    VAR_DECAY = 0.95

    def __init__(self, validate: bool = False):
        self.validate = validate
        self.n_vars = 0
        self.clauses: list[list[int]] = []  # positions 0 and 1 are watched
        self.watches: dict[int, list[int]] = {}
        self.value: list[int] = [UNDEF]  # 1-indexed by variable
        self.level_of: list[int] = [0]
        self.reason: list[int | None] = [None]
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.level = 0
        self.qhead = 0
        self.activity: list[float] = [0.0]
        self.var_inc = 1.0
        self.order: list[tuple[float, int]] = []  # lazy max-heap (-activity, var)
        self.saved_phase: list[bool] = [False]
        self.ok = True
        self.model: list[int] | None = None  # value array snapshot after Sat
        self.failed: set[int] | None = None  # failed assumption literals after Unsat
        self.n_solves = 0
        self.n_conflicts = 0

    # -- variables and clauses ------------------------------------------------

    def new_var(self) -> int:
        self.n_vars += 1
        v = self.n_vars
        self.value.append(UNDEF)
        self.level_of.append(0)
        self.reason.append(None)
        self.activity.append(0.0)
        self.saved_phase.append(False)
        self.watches[v] = []
        self.watches[-v] = []
        heappush(self.order, (0.0, v))
        return v

    def set_default_phase(self, var: int, phase: bool) -> None:
        self.saved_phase[var] = phase

    def _val(self, lit: int) -> int:
        v = self.value[abs(lit)]
        if v == UNDEF:
            return UNDEF
        return v if lit > 0 else 1 - v

    def add_clause(self, literals) -> None:
        """Conjoin a clause permanently.  An empty clause (after level-0
        simplification) puts the instance in a root-conflict state."""
        self._backtrack(0)
        litset = set(literals)
        lits = sorted(litset, key=lambda l: (abs(l), l < 0))
        for l in lits:
            if abs(l) > self.n_vars:
                raise ValueError(f"unregistered variable {abs(l)}")
        if any(-l in litset for l in lits):
            return  # tautology, no constraint
        if any(self._val(l) == TRUE for l in lits):
            return
        lits = [l for l in lits if self._val(l) != FALSE]
        if not lits:
            self.ok = False
            return
        if len(lits) == 1:
            self._enqueue(lits[0], None)
            if self._propagate() is not None:
                self.ok = False
            return
        ci = len(self.clauses)
        self.clauses.append(lits)
        self.watches[lits[0]].append(ci)
        self.watches[lits[1]].append(ci)

    # -- trail ----------------------------------------------------------------

    def _enqueue(self, lit: int, reason_ci: int | None) -> None:
        v = abs(lit)
        self.value[v] = TRUE if lit > 0 else FALSE
        self.level_of[v] = self.level
        self.reason[v] = reason_ci
        self.trail.append(lit)

    def _backtrack(self, level: int) -> None:
        if self.level <= level:
            return
        limit = self.trail_lim[level]
        value = self.value
        saved = self.saved_phase
        order = self.order
        activity = self.activity
        for lit in reversed(self.trail[limit:]):
            v = abs(lit)
            saved[v] = lit > 0
            value[v] = UNDEF
            self.reason[v] = None
            heappush(order, (-activity[v], v))
        del self.trail[limit:]
        del self.trail_lim[level:]
        self.level = level
        self.qhead = min(self.qhead, len(self.trail))

    # -- search ---------------------------------------------------------------

    def _propagate(self) -> int | None:
        trail = self.trail
        value = self.value
        clauses = self.clauses
        watches = self.watches
        while self.qhead < len(trail):
            lit = trail[self.qhead]
            self.qhead += 1
            neg = -lit
            ws = watches[neg]
            i = 0
            while i < len(ws):
                ci = ws[i]
                c = clauses[ci]
                if c[0] == neg:
                    c[0], c[1] = c[1], c[0]
                first = c[0]
                fv = value[first] if first > 0 else (
                    UNDEF if value[-first] == UNDEF else 1 - value[-first]
                )
                if fv == TRUE:
                    i += 1
                    continue
                for j in range(2, len(c)):
                    lj = c[j]
                    vj = value[lj] if lj > 0 else (
                        UNDEF if value[-lj] == UNDEF else 1 - value[-lj]
                    )
                    if vj != FALSE:
                        c[1], c[j] = c[j], c[1]
                        watches[lj].append(ci)
                        ws[i] = ws[-1]
                        ws.pop()
                        break
                else:
                    if fv == FALSE:
                        self.qhead = len(trail)
                        return ci
                    v = abs(first)
                    value[v] = TRUE if first > 0 else FALSE
                    self.level_of[v] = self.level
                    self.reason[v] = ci
                    trail.append(first)
                    i += 1
        return None

    def _bump(self, v: int) -> None:
        self.activity[v] += self.var_inc
        if self.activity[v] > 1e100:
            for u in range(1, self.n_vars + 1):
                self.activity[u] *= 1e-100
            self.var_inc *= 1e-100
            self.order = [
                (-self.activity[u], u)
                for u in range(1, self.n_vars + 1)
                if self.value[u] == UNDEF
            ]
            heapify(self.order)

    def _analyze(self, confl_ci: int) -> tuple[list[int], int]:
        """First-UIP conflict analysis.  Returns (learnt, backtrack level)
        with the asserting literal at learnt[0]."""
        level = self.level
        seen = [False] * (self.n_vars + 1)
        learnt: list[int] = []
        counter = 0
        p = None
        index = len(self.trail) - 1
        c = self.clauses[confl_ci]
        while True:
            for q in c:
                if p is not None and q == p:
                    continue
                v = abs(q)
                if not seen[v] and self.level_of[v] > 0:
                    seen[v] = True
                    self._bump(v)
                    if self.level_of[v] >= level:
                        counter += 1
                    else:
                        learnt.append(q)
            while not seen[abs(self.trail[index])]:
                index -= 1
            p = self.trail[index]
            index -= 1
            seen[abs(p)] = False
            counter -= 1
            if counter == 0:
                break
            c = self.clauses[self.reason[abs(p)]]
        learnt.insert(0, -p)
        if len(learnt) == 1:
            return learnt, 0
        best = max(range(1, len(learnt)), key=lambda k: self.level_of[abs(learnt[k])])
        learnt[1], learnt[best] = learnt[best], learnt[1]
        return learnt, self.level_of[abs(learnt[1])]

    def _analyze_final(self, p: int) -> set[int]:
        """Failed assumptions responsible for assumption literal ``p`` being
        falsified."""
        out = {p}
        if self.level == 0:
            return out
        seen = [False] * (self.n_vars + 1)
        seen[abs(p)] = True
        for i in range(len(self.trail) - 1, self.trail_lim[0] - 1, -1):
            lit = self.trail[i]
            v = abs(lit)
            if not seen[v]:
                continue
            if self.reason[v] is None:
                out.add(lit)  # an assumption decision
            else:
                for q in self.clauses[self.reason[v]]:
                    if abs(q) != v and self.level_of[abs(q)] > 0:
                        seen[abs(q)] = True
            seen[v] = False
        return out

    def _pick_branch(self) -> int:
        order = self.order
        value = self.value
        activity = self.activity
        while order:
            act, v = order[0]
            if value[v] != UNDEF or -act != activity[v]:
                heappop(order)
                continue
            return v
        return 0

    def solve(self, assumptions=()) -> bool:
        """Solve under assumptions.  On True, ``model`` holds a total model
        extending the assumptions; on False, ``failed`` holds the failed
        assumption subset (re-assuming it alone stays Unsat)."""
        self.n_solves += 1
        self.model = None
        self.failed = None
        if not self.ok:
            self.failed = set()
            return False
        assumps = list(assumptions)
        for a in assumps:
            if abs(a) > self.n_vars:
                raise ValueError(f"assumption on unregistered variable {abs(a)}")
        self._backtrack(0)
        if self._propagate() is not None:
            self.ok = False
            self.failed = set()
            return False
        n_assumps = len(assumps)
        restart_round = 1
        conflicts_left = self.RESTART_BASE * luby(restart_round)
        confl = self._propagate()
        while True:
            if confl is not None:
                self.n_conflicts += 1
                conflicts_left -= 1
                if self.level == 0:
                    self.ok = False
                    self.failed = set()
                    return False
                learnt, bt = self._analyze(confl)
                self._backtrack(bt)
                if len(learnt) == 1:
                    self._enqueue(learnt[0], None)
                else:
                    ci = len(self.clauses)
                    self.clauses.append(learnt)
                    self.watches[learnt[0]].append(ci)
                    self.watches[learnt[1]].append(ci)
                    self._enqueue(learnt[0], ci)
                self.var_inc /= self.VAR_DECAY
                confl = self._propagate()
                continue
            if conflicts_left <= 0 and self.level > n_assumps:
                restart_round += 1
                conflicts_left = self.RESTART_BASE * luby(restart_round)
                self._backtrack(0)
                confl = self._propagate()
                continue
            if self.level < n_assumps:
                # Establish the assumption prefix; only a real enqueue can
                # produce new propagations.
                while self.level < n_assumps:
                    p = assumps[self.level]
                    val = self._val(p)
                    if val == TRUE:
                        self.trail_lim.append(len(self.trail))
                        self.level += 1
                    elif val == FALSE:
                        self.failed = self._analyze_final(p)
                        return False
                    else:
                        self.trail_lim.append(len(self.trail))
                        self.level += 1
                        self._enqueue(p, None)
                        confl = self._propagate()
                        if confl is not None:
                            break
                continue
            v = self._pick_branch()
            if v == 0:
                self.model = list(self.value)
                if self.validate:
                    self._check_model()
                return True
            self.trail_lim.append(len(self.trail))
            self.level += 1
            self._enqueue(v if self.saved_phase[v] else -v, None)
            confl = self._propagate()

    def model_value(self, var: int) -> bool:
        if self.model is None:
            raise RuntimeError("no model available")
        return self.model[var] == TRUE

    def _check_model(self) -> None:
        for c in self.clauses:
            if not any(self.model[abs(l)] == (TRUE if l > 0 else FALSE) for l in c):
                raise AssertionError(f"model violates clause {c}")

    def dump_dimacs(self) -> str:
        lines = [f"p cnf {self.n_vars} {len(self.clauses)}"]
        for l in self.trail[: self.trail_lim[0] if self.trail_lim else len(self.trail)]:
            lines.append(f"{l} 0")
        for c in self.clauses:
            lines.append(" ".join(str(l) for l in c) + " 0")
        return "\n".join(lines) + "\n"
