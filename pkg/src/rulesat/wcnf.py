"""Weighted-partial CNF formulas and the WDIMACS exchange format.

A formula holds hard clauses (must be satisfied, written with weight
``top``) and integer-weighted soft clauses over variables numbered from 1.
Assignments are plain lists of booleans indexed by ``var - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

Assignment = list[bool]


class WcnfError(ValueError):
    """Malformed formula, file, or solver output."""


@dataclass
class WcnfFormula:
    """Weighted-partial CNF over variables 1..num_vars.

    Clauses are tuples of nonzero signed variable ids. ``top`` is the
    hard-clause sentinel weight: one more than the sum of soft weights,
    so no combination of soft violations can ever reach it.
    """

    num_vars: int
    hard: list[tuple[int, ...]] = field(default_factory=list)
    soft: list[tuple[tuple[int, ...], int]] = field(default_factory=list)

    def __post_init__(self):
        if self.num_vars < 0:
            raise WcnfError("num_vars must be nonnegative")
        for clause in self.hard:
            self._check_clause(clause)
        for clause, weight in self.soft:
            self._check_clause(clause)
            self._check_weight(weight)

    def _check_clause(self, clause):
        for lit in clause:
            if lit == 0 or abs(lit) > self.num_vars:
                raise WcnfError(f"literal {lit} out of range for {self.num_vars} variables")

    @staticmethod
    def _check_weight(weight):
        if not isinstance(weight, int) or weight < 1:
            raise WcnfError(f"soft weight must be a positive integer, got {weight!r}")

    @property
    def top(self) -> int:
        return sum(w for _, w in self.soft) + 1

    @property
    def num_clauses(self) -> int:
        return len(self.hard) + len(self.soft)

    def add_hard(self, clause) -> None:
        clause = tuple(clause)
        self._check_clause(clause)
        self.hard.append(clause)

    def add_soft(self, clause, weight: int) -> None:
        clause = tuple(clause)
        self._check_clause(clause)
        self._check_weight(weight)
        self.soft.append((clause, weight))


def clause_satisfied(clause, assignment: Assignment) -> bool:
    return any(assignment[abs(lit) - 1] == (lit > 0) for lit in clause)


def cost(formula: WcnfFormula, assignment: Assignment) -> int | None:
    """Sum of unsatisfied soft weights, or None if any hard clause is violated.

    The assignment must be total (one boolean per variable).
    """
    if len(assignment) != formula.num_vars:
        raise WcnfError(
            f"assignment has {len(assignment)} values for {formula.num_vars} variables"
        )
    for clause in formula.hard:
        if not clause_satisfied(clause, assignment):
            return None
    return sum(w for clause, w in formula.soft if not clause_satisfied(clause, assignment))


def scale_weights(weights, precision: int) -> list[int]:
    """Quantize positive real weights to integers as max(1, round(w * precision)).

    The floor at 1 keeps every soft clause visible to the solver; weight
    differences finer than 1/precision collapse.
    """
    if precision < 1:
        raise WcnfError("precision must be >= 1")
    out = []
    for w in weights:
        if w <= 0:
            raise WcnfError(f"weights must be positive, got {w!r}")
        out.append(max(1, round(w * precision)))
    return out


def write_wdimacs(formula: WcnfFormula) -> str:
    """Render the classic WDIMACS text: header then hard then soft clauses."""
    top = formula.top
    lines = [f"p wcnf {formula.num_vars} {formula.num_clauses} {top}"]
    for clause in formula.hard:
        lines.append(" ".join([str(top), *map(str, clause), "0"]))
    for clause, weight in formula.soft:
        lines.append(" ".join([str(weight), *map(str, clause), "0"]))
    return "\n".join(lines) + "\n"


def parse_wdimacs(text: str) -> WcnfFormula:
    """Parse WDIMACS text, rejecting anything that breaks a formula invariant."""
    header = None
    clauses = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            if header is not None:
                raise WcnfError(f"line {lineno}: duplicate header")
            parts = line.split()
            if len(parts) != 5 or parts[0] != "p" or parts[1] != "wcnf":
                raise WcnfError(f"line {lineno}: malformed header {line!r}")
            try:
                header = tuple(int(p) for p in parts[2:])
            except ValueError:
                raise WcnfError(f"line {lineno}: malformed header {line!r}") from None
            continue
        if header is None:
            raise WcnfError(f"line {lineno}: clause before header")
        try:
            nums = [int(tok) for tok in line.split()]
        except ValueError:
            raise WcnfError(f"line {lineno}: non-integer token in {line!r}") from None
        if len(nums) < 2 or nums[-1] != 0:
            raise WcnfError(f"line {lineno}: clause line must end with 0")
        weight, lits = nums[0], tuple(nums[1:-1])
        if 0 in lits:
            raise WcnfError(f"line {lineno}: literal 0 inside clause")
        clauses.append((lineno, weight, lits))
    if header is None:
        raise WcnfError("missing 'p wcnf' header")
    num_vars, num_clauses, top = header
    if num_vars < 0 or top < 1:
        raise WcnfError("header declares invalid num_vars or top")
    if len(clauses) != num_clauses:
        raise WcnfError(f"header declares {num_clauses} clauses, found {len(clauses)}")
    formula = WcnfFormula(num_vars)
    for lineno, weight, lits in clauses:
        for lit in lits:
            if abs(lit) > num_vars:
                raise WcnfError(f"line {lineno}: literal {lit} exceeds num_vars {num_vars}")
        if weight == top:
            formula.add_hard(lits)
        elif 1 <= weight < top:
            formula.add_soft(lits, weight)
        else:
            raise WcnfError(f"line {lineno}: weight {weight} outside [1, top]")
    if formula.top > top:
        raise WcnfError(f"declared top {top} does not exceed soft weight sum")
    return formula


@dataclass
class SolverOutput:
    """Parsed s/o/v lines of a MaxSAT solver run."""

    status: str  # 'optimal' | 'satisfiable' | 'unsatisfiable' | 'unknown'
    assignment: Assignment | None
    reported_cost: int | None


_STATUS = {
    "OPTIMUM FOUND": "optimal",
    "SATISFIABLE": "satisfiable",
    "UNSATISFIABLE": "unsatisfiable",
    "UNKNOWN": "unknown",
}


def parse_solver_output(text: str, num_vars: int | None = None) -> SolverOutput:
    """Read MaxSAT-evaluation style output (s/o/v lines) into a SolverOutput.

    Supports both literal-list v lines ("v 1 -2 0") and the newer compact
    binary form ("v 10"). The last o line wins as the reported cost.
    """
    status = None
    reported = None
    v_tokens = []
    for raw in text.splitlines():
        line = raw.strip()
        if line.startswith("s "):
            status = _STATUS.get(line[2:].strip())
            if status is None:
                raise WcnfError(f"unrecognized status line {line!r}")
        elif line.startswith("o "):
            try:
                reported = int(line[2:].strip())
            except ValueError:
                raise WcnfError(f"malformed o line {line!r}") from None
        elif line.startswith("v ") or line == "v":
            v_tokens.extend(line[1:].split())
    if status is None:
        raise WcnfError("solver output has no status line")
    if status == "unsatisfiable" or not v_tokens:
        return SolverOutput(status, None, reported)

    # Compact binary form: tokens of 0/1 only with at least one multi-bit run.
    binary_form = all(set(tok) <= {"0", "1"} for tok in v_tokens) and any(
        len(tok) > 1 for tok in v_tokens
    )
    if not binary_form:
        try:
            lits = [int(tok) for tok in v_tokens]
        except ValueError:
            raise WcnfError("malformed v line") from None
        if lits and lits[-1] == 0:
            lits.pop()
        size = num_vars if num_vars is not None else max((abs(l) for l in lits), default=0)
        values = [False] * size
        for lit in lits:
            if lit == 0 or abs(lit) > size:
                raise WcnfError(f"v-line literal {lit} out of range")
            values[abs(lit) - 1] = lit > 0
    else:
        bits = "".join(v_tokens)
        if num_vars is not None and len(bits) < num_vars:
            raise WcnfError(f"v line assigns {len(bits)} of {num_vars} variables")
        size = num_vars if num_vars is not None else len(bits)
        values = [bits[i] == "1" for i in range(size)]
    return SolverOutput(status, values, reported)
