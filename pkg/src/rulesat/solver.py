"""MaxSAT backends: exhaustive oracle, branch-and-bound, external process bridge.

Every backend returns a SolveResult whose assignment is re-checkable with
wcnf.cost(); a result is never handed back with a violated hard clause.
"""

from __future__ import annotations

import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from .wcnf import Assignment, WcnfFormula, cost, parse_solver_output, write_wdimacs

BRUTE_FORCE_VAR_CAP = 26


class SolveError(RuntimeError):
    pass


@dataclass
class SolveResult:
    assignment: Assignment | None
    cost: int | None
    status: str  # 'optimal' | 'best-effort' | 'hard-unsat'
    elapsed: float


def _clause_mask(block: np.ndarray, clause) -> np.ndarray:
    sat = np.zeros(block.shape[0], dtype=bool)
    for lit in clause:
        col = block[:, abs(lit) - 1]
        sat |= col if lit > 0 else ~col
    return sat


def solve_brute_force(formula: WcnfFormula) -> SolveResult:
    """Enumerate every assignment; exact and deterministic, capped at 26 variables.

    Assignment index i sets variable j+1 to bit j of i, so ties resolve to
    the numerically smallest assignment.
    """
    start = time.monotonic()
    n = formula.num_vars
    if n > BRUTE_FORCE_VAR_CAP:
        raise SolveError(f"brute force capped at {BRUTE_FORCE_VAR_CAP} variables, got {n}")
    total = 1 << n
    chunk = min(total, 1 << 20)
    shifts = np.arange(n, dtype=np.uint64)
    best_cost = None
    best_index = None
    for lo in range(0, total, chunk):
        idx = np.arange(lo, min(lo + chunk, total), dtype=np.uint64)
        block = ((idx[:, None] >> shifts) & 1).astype(bool)
        ok = np.ones(len(idx), dtype=bool)
        for clause in formula.hard:
            ok &= _clause_mask(block, clause)
        if not ok.any():
            continue
        costs = np.zeros(len(idx), dtype=np.int64)
        for clause, weight in formula.soft:
            costs[~_clause_mask(block, clause)] += weight
        costs[~ok] = np.iinfo(np.int64).max
        pos = int(np.argmin(costs))
        if best_cost is None or costs[pos] < best_cost:
            best_cost = int(costs[pos])
            best_index = lo + pos
    elapsed = time.monotonic() - start
    if best_index is None:
        return SolveResult(None, None, "hard-unsat", elapsed)
    assignment = [bool((best_index >> j) & 1) for j in range(n)]
    return SolveResult(assignment, best_cost, "optimal", elapsed)


def _is_tautology(clause) -> bool:
    lits = set(clause)
    return any(-lit in lits for lit in lits)


class _Search:
    """Counter-based DPLL branch and bound over one formula."""

    def __init__(self, formula: WcnfFormula):
        self.n = formula.num_vars
        self.root_unsat = False
        self.base_cost = 0  # weight of soft clauses that are empty up front

        self.hard = []
        for clause in formula.hard:
            lits = tuple(dict.fromkeys(clause))
            if not lits:
                self.root_unsat = True
            elif not _is_tautology(lits):
                self.hard.append(lits)
        self.soft = []
        self.weights = []
        for clause, weight in formula.soft:
            lits = tuple(dict.fromkeys(clause))
            if not lits:
                self.base_cost += weight
            elif not _is_tautology(lits):
                self.soft.append(lits)
                self.weights.append(weight)

        n = self.n
        self.assigned: list[bool | None] = [None] * (n + 1)
        self.occ_hard = [[] for _ in range(2 * n + 2)]
        self.occ_soft = [[] for _ in range(2 * n + 2)]
        for ci, lits in enumerate(self.hard):
            for lit in lits:
                self.occ_hard[self._key(lit)].append(ci)
        for ci, lits in enumerate(self.soft):
            for lit in lits:
                self.occ_soft[self._key(lit)].append(ci)
        self.h_sat = [0] * len(self.hard)
        self.h_unass = [len(c) for c in self.hard]
        self.s_sat = [0] * len(self.soft)
        self.s_unass = [len(c) for c in self.soft]
        # score[v]: hard clauses containing v that no assigned literal satisfies yet
        self.score = [0] * (n + 1)
        for lits in self.hard:
            for lit in lits:
                self.score[abs(lit)] += 1
        self.bound = self.base_cost
        self.trail: list[int] = []  # assigned vars in order

    @staticmethod
    def _key(lit: int) -> int:
        return 2 * lit if lit > 0 else -2 * lit + 1

    def assign(self, var: int, value: bool) -> list[tuple[int, bool]] | None:
        """Set var; returns implied (var, value) units, or None on hard conflict."""
        self.assigned[var] = value
        self.trail.append(var)
        implied = []
        sat_key = self._key(var if value else -var)
        uns_key = self._key(-var if value else var)
        for ci in self.occ_hard[sat_key]:
            self.h_unass[ci] -= 1
            if self.h_sat[ci] == 0:
                for lit in self.hard[ci]:
                    self.score[abs(lit)] -= 1
            self.h_sat[ci] += 1
        conflict = False
        for ci in self.occ_hard[uns_key]:
            self.h_unass[ci] -= 1
            if self.h_sat[ci] == 0:
                if self.h_unass[ci] == 0:
                    conflict = True
                elif self.h_unass[ci] == 1:
                    for lit in self.hard[ci]:
                        if self.assigned[abs(lit)] is None:
                            implied.append((abs(lit), lit > 0))
                            break
        for ci in self.occ_soft[sat_key]:
            self.s_unass[ci] -= 1
            self.s_sat[ci] += 1
        for ci in self.occ_soft[uns_key]:
            self.s_unass[ci] -= 1
            if self.s_sat[ci] == 0 and self.s_unass[ci] == 0:
                self.bound += self.weights[ci]
        return None if conflict else implied

    def unassign(self, var: int) -> None:
        value = self.assigned[var]
        self.assigned[var] = None
        self.trail.pop()
        sat_key = self._key(var if value else -var)
        uns_key = self._key(-var if value else var)
        for ci in self.occ_hard[sat_key]:
            self.h_unass[ci] += 1
            self.h_sat[ci] -= 1
            if self.h_sat[ci] == 0:
                for lit in self.hard[ci]:
                    self.score[abs(lit)] += 1
        for ci in self.occ_hard[uns_key]:
            self.h_unass[ci] += 1
        for ci in self.occ_soft[sat_key]:
            self.s_unass[ci] += 1
            self.s_sat[ci] -= 1
        for ci in self.occ_soft[uns_key]:
            if self.s_sat[ci] == 0 and self.s_unass[ci] == 0:
                self.bound -= self.weights[ci]
            self.s_unass[ci] += 1

    def pick_branch_var(self) -> int | None:
        best, best_score = None, -1
        for v in range(1, self.n + 1):
            if self.assigned[v] is None and self.score[v] > best_score:
                best, best_score = v, self.score[v]
        return best


def _root_implications(formula: WcnfFormula) -> dict[int, bool] | None:
    """Fixpoint of unit propagation over hard clauses from the empty assignment."""
    forced: dict[int, bool] = {}
    changed = True
    while changed:
        changed = False
        for clause in formula.hard:
            unassigned = []
            satisfied = False
            for lit in clause:
                val = forced.get(abs(lit))
                if val is None:
                    unassigned.append(lit)
                elif val == (lit > 0):
                    satisfied = True
                    break
            if satisfied:
                continue
            if not unassigned:
                return None
            if len(unassigned) == 1:
                lit = unassigned[0]
                forced[abs(lit)] = lit > 0
                changed = True
    return forced


def _greedy_repair(formula: WcnfFormula, values: Assignment) -> Assignment | None:
    """Flip variables until no hard clause is violated, or give up."""

    def violated_hard(vals):
        return [c for c in formula.hard if not any(vals[abs(l) - 1] == (l > 0) for l in c)]

    values = list(values)
    for _ in range(4 * max(1, formula.num_vars)):
        bad = violated_hard(values)
        if not bad:
            return values
        clause = bad[0]
        if not clause:
            return None
        best_var, best_count = None, None
        for lit in clause:
            var = abs(lit)
            values[var - 1] = not values[var - 1]
            count = len(violated_hard(values))
            values[var - 1] = not values[var - 1]
            if best_count is None or count < best_count:
                best_var, best_count = var, count
        values[best_var - 1] = not values[best_var - 1]
    return values if not violated_hard(values) else None


def solve_branch_and_bound(
    formula: WcnfFormula,
    timeout: float | None = None,
    seed: int = 0,
    hints: list[Assignment] | None = None,
) -> SolveResult:
    """DPLL-style branch and bound with unit propagation on hard clauses.

    Anytime: on timeout the best incumbent is returned with status
    'best-effort'; with no timeout the search is exhaustive and the result
    is 'optimal'. Branching picks the unassigned variable most frequent in
    unresolved hard clauses (ties to the lowest id) and tries false first,
    which leans toward sparse rules. `hints` are candidate assignments
    evaluated alongside the propagated all-false start when seeding the
    incumbent. `seed` is accepted for interface stability; the search
    itself is deterministic.
    """
    del seed
    start = time.monotonic()
    deadline = None if timeout is None else start + timeout
    n = formula.num_vars

    best_assignment = None
    best_cost = None

    root = _root_implications(formula)
    if root is not None:
        base = [False] * n
        for var, val in root.items():
            base[var - 1] = val
        candidates = [base]
    else:
        candidates = []
    repaired = None
    if candidates and cost(formula, candidates[0]) is None:
        repaired = _greedy_repair(formula, candidates[0])
        candidates = [repaired] if repaired is not None else []
    for hint in hints or []:
        if len(hint) == n:
            candidates.append(list(hint))
    for cand in candidates:
        c = cost(formula, cand)
        if c is not None and (best_cost is None or c < best_cost):
            best_assignment, best_cost = list(cand), c

    if root is None:
        # Hard fragment refuted by unit propagation alone.
        return SolveResult(None, None, "hard-unsat", time.monotonic() - start)

    search = _Search(formula)
    if search.root_unsat:
        return SolveResult(None, None, "hard-unsat", time.monotonic() - start)

    def timed_out() -> bool:
        return deadline is not None and time.monotonic() >= deadline

    # Decision stack entries: (var, tried_second) with trail length at decision.
    decisions: list[list] = []
    pending: list[tuple[int, bool]] = [(v, val) for v, val in root.items()]
    conflict = False
    ticks = 0
    exhausted = False

    def backtrack() -> bool:
        """Undo to the deepest unflipped decision and flip it. False if none."""
        nonlocal pending, conflict
        while decisions:
            var, tried_second, mark = decisions[-1]
            while len(search.trail) > mark:
                search.unassign(search.trail[-1])
            if tried_second:
                decisions.pop()
                continue
            decisions[-1][1] = True
            pending = [(var, True)]
            conflict = False
            return True
        return False

    while True:
        ticks += 1
        if (ticks & 255) == 0 and timed_out():
            break

        # Propagate pending assignments to fixpoint.
        while pending and not conflict:
            var, val = pending.pop()
            cur = search.assigned[var]
            if cur is not None:
                if cur != val:
                    conflict = True
                continue
            implied = search.assign(var, val)
            if implied is None:
                conflict = True
            else:
                pending.extend(implied)
            if best_cost is not None and search.bound >= best_cost:
                conflict = True

        if conflict or (best_cost is not None and search.bound >= best_cost):
            if not backtrack():
                exhausted = True
                break
            continue

        if len(search.trail) == n:
            if best_cost is None or search.bound < best_cost:
                best_cost = search.bound
                best_assignment = [bool(search.assigned[v]) for v in range(1, n + 1)]
            if not backtrack():
                exhausted = True
                break
            continue

        var = search.pick_branch_var()
        if var is None:  # pragma: no cover - trail length guard above
            exhausted = True
            break
        decisions.append([var, False, len(search.trail)])
        pending = [(var, False)]

    elapsed = time.monotonic() - start
    if best_assignment is None:
        if exhausted:
            return SolveResult(None, None, "hard-unsat", elapsed)
        raise SolveError("timeout before any hard-satisfying assignment was found")
    status = "optimal" if exhausted else "best-effort"
    return SolveResult(best_assignment, best_cost, status, elapsed)


def solve_external(formula: WcnfFormula, command: str, timeout: float | None = None) -> SolveResult:
    """Run a WDIMACS-conformant solver process and verify its answer locally.

    The command receives the formula file path as its last argument and must
    print MaxSAT-evaluation style s/o/v lines on stdout.
    """
    start = time.monotonic()
    argv = shlex.split(command)
    if not argv:
        raise SolveError("empty external solver command")
    with tempfile.NamedTemporaryFile("w", suffix=".wcnf", delete=False) as handle:
        handle.write(write_wdimacs(formula))
        path = handle.name
    try:
        proc = subprocess.Popen(
            argv + [path], stdout=subprocess.PIPE, stderr=subprocess.DEVNULL, text=True
        )
    except OSError as exc:
        raise SolveError(f"cannot launch external solver {argv[0]!r}: {exc}") from exc
    try:
        out, _ = proc.communicate(timeout=timeout)
    except subprocess.TimeoutExpired:
        proc.kill()
        out, _ = proc.communicate()
    elapsed = time.monotonic() - start

    parsed = parse_solver_output(out or "", formula.num_vars)
    if parsed.status == "unsatisfiable":
        return SolveResult(None, None, "hard-unsat", elapsed)
    if parsed.assignment is None:
        raise SolveError(f"external solver produced no model (status {parsed.status})")
    recomputed = cost(formula, parsed.assignment)
    if recomputed is None:
        raise SolveError("invalid model from external solver: hard clause violated")
    if parsed.reported_cost is not None and parsed.reported_cost != recomputed:
        raise SolveError(
            f"cost mismatch: solver reported {parsed.reported_cost}, recomputed {recomputed}"
        )
    status = "optimal" if parsed.status == "optimal" else "best-effort"
    return SolveResult(parsed.assignment, recomputed, status, elapsed)
