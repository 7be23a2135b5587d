"""Exact mixed-integer linear programming over rationals.

Small, dependency-free solver used by the schedule optimizer: a two-phase
primal simplex with Bland's rule on ``Fraction`` arithmetic (no tolerances,
no cycling), wrapped in depth-first branch and bound for integer variables.
Problem sizes here are tiny (tens of rows), so a dense tableau is fine.

Rows are stored as ``a . x <= b``. Parallel rows (equal normalized
coefficient vectors) are merged to the tightest bound before solving; this
is mechanical presolve and preserves the feasible set exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd, lcm

Status = str
OPTIMAL: Status = "optimal"
INFEASIBLE: Status = "infeasible"
UNBOUNDED: Status = "unbounded"

_ZERO = Fraction(0)
_ONE = Fraction(1)


@dataclass
class Variable:
    name: str
    lower: Fraction
    upper: Fraction | None
    objective: Fraction
    integer: bool


@dataclass
class Problem:
    """min  c . x   s.t.  rows (a . x <= b),  lower <= x <= upper."""

    variables: list[Variable] = field(default_factory=list)
    rows: list[tuple[dict[int, Fraction], Fraction]] = field(default_factory=list)

    def add_variable(
        self,
        name: str,
        lower: Fraction | int = 0,
        upper: Fraction | int | None = None,
        objective: Fraction | int = 0,
        integer: bool = False,
    ) -> int:
        self.variables.append(
            Variable(
                name=name,
                lower=Fraction(lower),
                upper=None if upper is None else Fraction(upper),
                objective=Fraction(objective),
                integer=integer,
            )
        )
        return len(self.variables) - 1

    def add_le(self, coeffs: dict[int, Fraction | int], rhs: Fraction | int) -> None:
        cleaned = {j: Fraction(a) for j, a in coeffs.items() if a != 0}
        self.rows.append((cleaned, Fraction(rhs)))

    def add_ge(self, coeffs: dict[int, Fraction | int], rhs: Fraction | int) -> None:
        self.add_le({j: -Fraction(a) for j, a in coeffs.items()}, -Fraction(rhs))

    def add_eq(self, coeffs: dict[int, Fraction | int], rhs: Fraction | int) -> None:
        self.add_le(coeffs, rhs)
        self.add_ge(coeffs, rhs)

    def copy(self) -> "Problem":
        return Problem(
            variables=[
                Variable(v.name, v.lower, v.upper, v.objective, v.integer)
                for v in self.variables
            ],
            rows=list(self.rows),
        )


@dataclass
class Solution:
    status: Status
    objective: Fraction | None = None
    values: list[Fraction] | None = None


_IMPOSSIBLE = ({}, Fraction(-1))


def _canonical_rows(
    rows: list[tuple[dict[int, Fraction], Fraction]],
) -> list[tuple[dict[int, Fraction], Fraction]]:
    """Merge rows with identical normalized normals, keeping the tightest rhs."""
    best: dict[tuple, Fraction] = {}
    coeff_of: dict[tuple, dict[int, Fraction]] = {}
    order: list[tuple] = []
    for coeffs, rhs in rows:
        if not coeffs:
            if rhs < 0:
                return [_IMPOSSIBLE]
            continue
        denom = lcm(*(a.denominator for a in coeffs.values()))
        ints = {j: int(a * denom) for j, a in coeffs.items()}
        scale = gcd(*(abs(v) for v in ints.values()))
        key = tuple(sorted((j, v // scale) for j, v in ints.items()))
        norm_rhs = rhs * denom / scale
        if key not in best:
            best[key] = norm_rhs
            coeff_of[key] = {j: Fraction(v) for j, v in key}
            order.append(key)
        elif norm_rhs < best[key]:
            best[key] = norm_rhs
    return [(coeff_of[k], best[k]) for k in order]


class _Tableau:
    """Dense simplex tableau with an explicit basis, all entries Fractions."""

    def __init__(self, rows: list[list[Fraction]], basis: list[int]):
        self.rows = rows
        self.basis = basis

    @property
    def m(self) -> int:
        return len(self.rows)

    def pivot(self, prow: int, pcol: int) -> None:
        rowdata = self.rows[prow]
        inv = _ONE / rowdata[pcol]
        self.rows[prow] = rowdata = [a * inv for a in rowdata]
        for r in range(self.m):
            if r == prow:
                continue
            factor = self.rows[r][pcol]
            if factor != 0:
                self.rows[r] = [a - factor * b for a, b in zip(self.rows[r], rowdata)]
        self.basis[prow] = pcol

    def minimize(self, costs: list[Fraction], enterable: int) -> Status:
        """Run Bland's rule until optimal/unbounded; only columns below
        ``enterable`` may enter the basis."""
        while True:
            reduced = list(costs[:enterable])
            for i, b in enumerate(self.basis):
                cb = costs[b]
                if cb != 0:
                    rowi = self.rows[i]
                    for j in range(enterable):
                        if rowi[j] != 0:
                            reduced[j] -= cb * rowi[j]
            basic = set(self.basis)
            enter = -1
            for j in range(enterable):
                if reduced[j] < 0 and j not in basic:
                    enter = j
                    break
            if enter < 0:
                return OPTIMAL
            leave = -1
            best_ratio: Fraction | None = None
            for i in range(self.m):
                a = self.rows[i][enter]
                if a > 0:
                    ratio = self.rows[i][-1] / a
                    if (
                        best_ratio is None
                        or ratio < best_ratio
                        or (ratio == best_ratio and self.basis[i] < self.basis[leave])
                    ):
                        best_ratio = ratio
                        leave = i
            if leave < 0:
                return UNBOUNDED
            self.pivot(leave, enter)


def solve_lp(prob: Problem) -> Solution:
    """Exact LP relaxation solve (integrality flags ignored)."""
    n = len(prob.variables)
    rows = _canonical_rows(prob.rows)
    if rows == [_IMPOSSIBLE]:
        return Solution(INFEASIBLE)
    for v in prob.variables:
        if v.upper is not None and v.lower > v.upper:
            return Solution(INFEASIBLE)

    # Shift every variable by its lower bound: x = lo + y with y >= 0.
    lows = [v.lower for v in prob.variables]
    work_rows: list[tuple[list[Fraction], Fraction]] = []
    for coeffs, rhs in rows:
        dense = [_ZERO] * n
        shift = _ZERO
        for j, a in coeffs.items():
            dense[j] = a
            shift += a * lows[j]
        work_rows.append((dense, rhs - shift))
    for j, v in enumerate(prob.variables):
        if v.upper is not None:
            dense = [_ZERO] * n
            dense[j] = _ONE
            work_rows.append((dense, v.upper - v.lower))

    obj = [v.objective for v in prob.variables]
    if not work_rows:
        values: list[Fraction] = []
        for v in prob.variables:
            if v.objective < 0:
                if v.upper is None:
                    return Solution(UNBOUNDED)
                values.append(v.upper)
            else:
                values.append(v.lower)
        total = sum((v.objective * x for v, x in zip(prob.variables, values)), _ZERO)
        return Solution(OPTIMAL, total, values)

    # Columns: y (n) | one slack or surplus per row (m) | artificials | rhs.
    m = len(work_rows)
    ncols = n + m
    art_of_row: dict[int, int] = {}
    next_art = ncols
    for i, (_, rhs) in enumerate(work_rows):
        if rhs < 0:
            art_of_row[i] = next_art
            next_art += 1
    total_cols = next_art

    rows_out: list[list[Fraction]] = []
    basis: list[int] = []
    for i, (dense, rhs) in enumerate(work_rows):
        if rhs >= 0:
            row = list(dense) + [_ZERO] * (total_cols - n) + [rhs]
            row[n + i] = _ONE
            rows_out.append(row)
            basis.append(n + i)
        else:
            # Negate to get a nonnegative rhs; slack becomes a surplus.
            row = [-a for a in dense] + [_ZERO] * (total_cols - n) + [-rhs]
            row[n + i] = -_ONE
            row[art_of_row[i]] = _ONE
            rows_out.append(row)
            basis.append(art_of_row[i])
    tab = _Tableau(rows_out, basis)

    if art_of_row:
        phase1 = [_ZERO] * total_cols
        for col in art_of_row.values():
            phase1[col] = _ONE
        if tab.minimize(phase1, total_cols) != OPTIMAL:
            return Solution(INFEASIBLE)
        art_cols = set(art_of_row.values())
        if any(tab.rows[i][-1] != 0 for i in range(tab.m) if tab.basis[i] in art_cols):
            return Solution(INFEASIBLE)
        # Drive zero-valued artificials out of the basis; a row that cannot
        # pivot on any structural column is redundant and is dropped.
        for i in range(tab.m - 1, -1, -1):
            if tab.basis[i] in art_cols:
                for j in range(ncols):
                    if tab.rows[i][j] != 0:
                        tab.pivot(i, j)
                        break
                else:
                    del tab.rows[i]
                    del tab.basis[i]

    phase2 = list(obj) + [_ZERO] * (total_cols - n)
    status = tab.minimize(phase2, ncols)
    if status != OPTIMAL:
        return Solution(status)

    y = [_ZERO] * total_cols
    for i, b in enumerate(tab.basis):
        y[b] = tab.rows[i][-1]
    values = [lows[j] + y[j] for j in range(n)]
    total = sum((obj[j] * values[j] for j in range(n)), _ZERO)
    return Solution(OPTIMAL, total, values)


def solve_milp(prob: Problem, node_limit: int = 200_000) -> Solution:
    """Depth-first branch and bound; exact optimum of the integer program.

    Branching is deterministic (first fractional integer variable, floor
    branch explored first), so repeated solves return identical solutions.
    """
    int_vars = [j for j, v in enumerate(prob.variables) if v.integer]

    # Canonicalize once; branch nodes only vary bounds, never rows.
    rows = _canonical_rows(prob.rows)
    if rows == [_IMPOSSIBLE]:
        return Solution(INFEASIBLE)
    prob = Problem(variables=prob.variables, rows=rows)

    best = Solution(INFEASIBLE)
    stack: list[list[tuple[int, Fraction | None, Fraction | None]]] = [[]]
    nodes = 0
    while stack:
        extra = stack.pop()
        nodes += 1
        if nodes > node_limit:
            raise RuntimeError("branch-and-bound node limit exhausted")
        node_prob = prob.copy()
        bounds_ok = True
        for j, lo, hi in extra:
            var = node_prob.variables[j]
            if lo is not None and lo > var.lower:
                var.lower = lo
            if hi is not None and (var.upper is None or hi < var.upper):
                var.upper = hi
            if var.upper is not None and var.lower > var.upper:
                bounds_ok = False
                break
        if not bounds_ok:
            continue
        relax = solve_lp(node_prob)
        if relax.status == UNBOUNDED:
            return Solution(UNBOUNDED)
        if relax.status != OPTIMAL:
            continue
        assert relax.objective is not None and relax.values is not None
        if best.status == OPTIMAL and relax.objective >= best.objective:
            continue
        # Branch the tightest-range fractional variable first: binary
        # selectors resolve before wide start windows, which keeps the
        # relaxation bounds meaningful.
        frac_var = -1
        frac_range: Fraction | None = None
        for j in int_vars:
            if relax.values[j].denominator != 1:
                v = node_prob.variables[j]
                rng = None if v.upper is None else v.upper - v.lower
                if frac_var < 0 or (
                    rng is not None and (frac_range is None or rng < frac_range)
                ):
                    frac_var = j
                    frac_range = rng
        if frac_var < 0:
            best = relax
            continue
        x = relax.values[frac_var]
        floor_x = Fraction(x.numerator // x.denominator)
        # Floor branch goes on top of the stack so it is explored first.
        stack.append(extra + [(frac_var, floor_x + 1, None)])
        stack.append(extra + [(frac_var, None, floor_x)])
    return best
