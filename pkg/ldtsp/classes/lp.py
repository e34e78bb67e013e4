"""
Bounded-variable primal simplex for the LP relaxations met during branch
and bound.

Every column has finite lower and upper bounds, so nonbasic columns sit at
one of their bounds and no big-M bounds are needed. Each row gets one extra
column (slack, surplus or a zero-width artificial) and any starting basis
is repaired by a composite phase 1 that minimises the total bound violation
of the basic columns. The same phase 1 serves cold starts, warm starts from
a parent basis and the cleanup after bound perturbation.

The tableau is dense and updated in place; it is rebuilt from the original
data periodically to stop round-off from accumulating.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
import math
from pathlib import Path
import sys
import time
from typing import Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

# Project root added to the sys.path, so that scripts can be run unpackaged as well as packaged.
sys.path.append(str(Path(__file__).resolve().parent.parent))

# Local libraries
from ldtsp.classes.exceptions import ModelError
from ldtsp.classes.model import LinearConstraint, LinearModel, Sense, VarId


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    ITERATION_LIMIT = "iteration_limit"
    TIME_LIMIT = "time_limit"


@dataclass(frozen=True)
class LpConfig:
    """
    Tolerances are absolute and apply to row-scaled data (each row divided
    by its largest absolute coefficient).

    Fields:
     - feasibility_tol (float): bound and row violation allowed.
     - optimality_tol (float): reduced-cost threshold for entering columns.
     - pivot_tol (float): smallest tableau entry accepted as a pivot.
     - max_iterations (int or None): pivot limit; None means
        50 * (rows + columns).
     - stall_factor (int): Bland's rule is engaged after more than
        stall_factor * rows consecutive degenerate pivots.
     - refactor_interval (int): pivots between tableau rebuilds.
     - perturbation (float): relative width by which free column bounds are
        widened before solving; 0 disables it. The exact bounds are restored
        once the widened LP is optimal.
     - perturb_seed (int): seed of the widening draws.
    """

    feasibility_tol: float = 1e-7
    optimality_tol: float = 1e-7
    pivot_tol: float = 1e-9
    max_iterations: Optional[int] = None
    stall_factor: int = 3
    refactor_interval: int = 200
    perturbation: float = 1e-6
    perturb_seed: int = 0

    def __post_init__(self):
        for name in ("feasibility_tol", "optimality_tol", "pivot_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.stall_factor < 1 or self.refactor_interval < 1:
            raise ValueError("stall_factor and refactor_interval must be >= 1")
        if not 0 <= self.perturbation < 1e-2:
            raise ValueError("perturbation must be in [0, 0.01)")


class _StandardRows(NamedTuple):
    """Scaled rows with one extra column each; empty rows are dropped."""

    a: np.ndarray
    b: np.ndarray
    le: np.ndarray
    ge: np.ndarray
    signs: np.ndarray
    a_ext: np.ndarray
    consistent: bool


@dataclass(frozen=True, eq=False)
class LpProblem:
    """
    min c.x subject to rows a.x <sense> b and lb <= x <= ub.
    Integrality is not represented.
    """

    c: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    a: np.ndarray
    senses: Tuple[Sense, ...]
    b: np.ndarray
    tags: Tuple[str, ...] = ()
    columns: Tuple[VarId, ...] = ()

    def __post_init__(self):
        for name in ("c", "lb", "ub", "b"):
            object.__setattr__(self, name, _frozen(getattr(self, name)).reshape(-1))
        object.__setattr__(self, "a", _frozen(self.a).reshape(len(self.b), len(self.c)))
        object.__setattr__(self, "senses", tuple(self.senses))
        if not self.tags:
            object.__setattr__(self, "tags", ("row",) * len(self.b))
        n = len(self.c)
        if n < 1:
            raise ModelError("an LP needs at least one column")
        if len(self.lb) != n or len(self.ub) != n:
            raise ModelError("bounds must match the column count")
        if len(self.senses) != len(self.b):
            raise ModelError("one sense per row is required")
        if not (np.all(np.isfinite(self.lb)) and np.all(np.isfinite(self.ub))):
            raise ModelError("all column bounds must be finite")
        if np.any(self.lb > self.ub):
            raise ModelError("a column has lb > ub")

    @property
    def n_rows(self) -> int:
        return len(self.b)

    @property
    def n_cols(self) -> int:
        return len(self.c)

    @cached_property
    def standard_rows(self) -> _StandardRows:
        """
        Row data in the solver's standard form. Depends on the rows only,
        so copies made by with_bounds share it.
        """
        tol = LpConfig().feasibility_tol
        scale = np.max(np.abs(self.a), axis=1) if self.n_rows else np.zeros(0)
        empty = scale == 0.0
        consistent = True
        for i in np.flatnonzero(empty):
            rhs = self.b[i]
            holds = {
                Sense.LE: 0.0 <= rhs + tol,
                Sense.GE: 0.0 >= rhs - tol,
                Sense.EQ: abs(rhs) <= tol,
            }[self.senses[i]]
            consistent = consistent and holds
        keep = np.flatnonzero(~empty)
        a = self.a[keep] / scale[keep, None]
        b = self.b[keep] / scale[keep]
        senses = [self.senses[i] for i in keep]
        le = np.array([s is Sense.LE for s in senses], dtype=bool)
        ge = np.array([s is Sense.GE for s in senses], dtype=bool)
        signs = np.where(ge, -1.0, 1.0)
        a_ext = np.hstack([a, np.diag(signs)])
        for arr in (a, b, le, ge, signs, a_ext):
            arr.setflags(write=False)
        return _StandardRows(a, b, le, ge, signs, a_ext, consistent)

    @classmethod
    def from_model(cls, model: LinearModel) -> "LpProblem":
        """Relaxation of a linear model (integrality dropped)."""
        if not model.is_linear:
            raise ModelError("the nonlinear model has no LP relaxation here")
        index = model.index
        c = np.zeros(len(model.variables))
        for var, coef in model.objective:
            c[index[var]] += coef
        lb = np.array([v.lb for v in model.variables])
        ub = np.array([v.ub for v in model.variables])
        a, b = _rows_to_arrays(model.constraints, index, len(c))
        return cls(
            c=c,
            lb=lb,
            ub=ub,
            a=a,
            senses=tuple(row.sense for row in model.constraints),
            b=b,
            tags=tuple(row.tag for row in model.constraints),
            columns=tuple(v.var for v in model.variables),
        )

    def with_rows(
        self, rows: Sequence[LinearConstraint], index: Mapping[VarId, int]
    ) -> "LpProblem":
        """Copy with extra rows appended (cuts)."""
        if not rows:
            return self
        a, b = _rows_to_arrays(rows, index, self.n_cols)
        return LpProblem(
            c=self.c,
            lb=self.lb,
            ub=self.ub,
            a=np.vstack([self.a, a]),
            senses=self.senses + tuple(row.sense for row in rows),
            b=np.concatenate([self.b, b]),
            tags=self.tags + tuple(row.tag for row in rows),
            columns=self.columns,
        )

    def with_bounds(self, lb: np.ndarray, ub: np.ndarray) -> "LpProblem":
        copy = LpProblem(
            c=self.c,
            lb=lb,
            ub=ub,
            a=self.a,
            senses=self.senses,
            b=self.b,
            tags=self.tags,
            columns=self.columns,
        )
        copy.__dict__["standard_rows"] = self.standard_rows
        return copy


def _frozen(values) -> np.ndarray:
    """Read-only float array; already frozen arrays are shared, not copied."""
    if isinstance(values, np.ndarray) and values.dtype == float and not values.flags.writeable:
        return values
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


def _rows_to_arrays(rows, index, n_cols):
    a = np.zeros((len(rows), n_cols))
    b = np.zeros(len(rows))
    for r, row in enumerate(rows):
        for var, coef in row.terms:
            a[r, index[var]] += coef
        b[r] = row.rhs
    return a, b


@dataclass(frozen=True, eq=False)
class LpBasis:
    """
    Final basis of a solve, used to warm-start a related LP: same columns,
    same leading rows, possibly other bounds and extra rows at the end.

    Fields:
     - n_cols (int): structural columns.
     - basis (np.ndarray): standard-form column basic in each kept row.
     - at_upper (np.ndarray): nonbasic standard-form columns at their upper bound.
     - tableau (np.ndarray or None): final tableau; only reused for an LP
        sharing the very same row data (`rows`).
     - rows (_StandardRows or None)
    """

    n_cols: int
    basis: np.ndarray
    at_upper: np.ndarray
    tableau: Optional[np.ndarray] = field(default=None, repr=False)
    rows: Optional[_StandardRows] = field(default=None, repr=False)

    @property
    def n_rows(self) -> int:
        return len(self.basis)

    def without_tableau(self) -> "LpBasis":
        return LpBasis(
            self.n_cols, self.basis.astype(np.int32), self.at_upper.copy()
        )


@dataclass
class LpResult:
    status: LpStatus
    objective: float
    x: np.ndarray
    iterations: int
    phase1_iterations: int = 0
    bland_engaged: bool = False
    pivots: list = field(default_factory=list, repr=False)
    basis: Optional[LpBasis] = field(default=None, repr=False)

    @property
    def is_optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class BoundedSimplex:
    """
    Bounded-variable primal simplex on a dense tableau.

    Pricing is Dantzig's largest reduced cost. Free column bounds are first
    widened by small random amounts so that basic values almost never tie
    at a bound; once that LP is optimal the exact bounds come back and the
    basis is repaired with a few more pivots. If degenerate pivots still
    pile up, Bland's smallest-index rule takes over for the rest of the
    solve, refactorizations included.

    Inputs:
     - problem (LpProblem)
     - config (LpConfig or None)
     - record_pivots (bool): keep (entering, leaving) pairs; leaving is -1
        for a bound flip.
     - start (LpBasis or None): basis to start from.
     - deadline (float or None): time.perf_counter() value after which the
        solve stops with TIME_LIMIT.
    """

    def __init__(
        self,
        problem: LpProblem,
        config: Optional[LpConfig] = None,
        record_pivots=False,
        start: Optional[LpBasis] = None,
        deadline: Optional[float] = None,
    ):
        self.problem = problem
        self.config = config or LpConfig()
        self.record_pivots = record_pivots
        self.start = start
        self.deadline = deadline
        self.iterations = 0
        self.phase1_iterations = 0
        self.bland_engaged = False
        self.stall = 0
        self.since_refactor = 0
        self.violation_tol = self.config.feasibility_tol
        self.pivots = []

    # Setup -------------------------------------------------------------

    def _exact_bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        p = self.problem
        rows = self.rows
        a = rows.a
        min_act = np.where(a > 0, a * p.lb, a * p.ub).sum(axis=1)
        max_act = np.where(a > 0, a * p.ub, a * p.lb).sum(axis=1)
        extra_ub = np.zeros(len(rows.b))
        extra_ub[rows.le] = np.maximum(0.0, rows.b[rows.le] - min_act[rows.le])
        extra_ub[rows.ge] = np.maximum(0.0, max_act[rows.ge] - rows.b[rows.ge])
        lb = np.concatenate([p.lb, np.zeros(len(rows.b))])
        ub = np.concatenate([p.ub, extra_ub])
        return lb, ub

    def _perturbed_bounds(self, lb: np.ndarray, ub: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        cfg = self.config
        rng = np.random.default_rng(cfg.perturb_seed)
        free = ~self.fixed
        draws = rng.uniform(0.5, 1.0, size=(2, len(lb)))
        widen_low = cfg.perturbation * (1.0 + np.abs(lb)) * draws[0]
        widen_high = cfg.perturbation * (1.0 + np.abs(ub)) * draws[1]
        return np.where(free, lb - widen_low, lb), np.where(free, ub + widen_high, ub)

    def _install(self, basis: np.ndarray, tableau: Optional[np.ndarray]) -> bool:
        rows = self.rows
        if tableau is None and not len(basis):
            tableau = np.zeros((0, self.total))
        elif tableau is None:
            try:
                tableau = np.linalg.solve(rows.a_ext[:, basis], rows.a_ext)
            except np.linalg.LinAlgError:
                return False
        self.basis = basis.astype(int)
        self.is_basic = np.zeros(self.total, dtype=bool)
        self.is_basic[self.basis] = True
        self.at_upper[self.basis] = False
        self.tableau = tableau
        self.since_refactor = 0
        self._place_nonbasic()
        self._recompute_basic_values()
        return True

    def _start_basis(self):
        n = self.problem.n_cols
        m = len(self.rows.b)
        self.at_upper = np.zeros(self.total, dtype=bool)
        start = self.start
        if start is not None and start.n_cols == n and start.n_rows <= m:
            k = start.n_rows
            basis = np.concatenate([start.basis, n + np.arange(k, m)])
            self.at_upper[: n + k] = start.at_upper[: n + k]
            tableau = None
            if start.tableau is not None and start.rows is self.rows:
                tableau = start.tableau.copy()
            if self._install(basis, tableau):
                return
            self.at_upper[:] = False
        identity = n + np.arange(m)
        self._install(identity, self.rows.a_ext * self.rows.signs[:, None])

    def _place_nonbasic(self):
        self.at_upper &= ~self.fixed
        self.x = np.where(self.at_upper, self.ub, self.lb)

    # Solve -------------------------------------------------------------

    def solve(self) -> LpResult:
        p = self.problem
        cfg = self.config
        self.rows = p.standard_rows
        if not self.rows.consistent:
            return LpResult(LpStatus.INFEASIBLE, math.inf, p.lb.copy(), 0)
        self.c_ext = np.concatenate([p.c, np.zeros(len(self.rows.b))])
        self.total = len(self.c_ext)
        self.limit = cfg.max_iterations or 50 * (len(self.rows.b) + p.n_cols)

        exact_lb, exact_ub = self._exact_bounds()
        self.fixed = (exact_ub - exact_lb) <= cfg.feasibility_tol
        perturbed = cfg.perturbation > 0
        if perturbed:
            self.lb, self.ub = self._perturbed_bounds(exact_lb, exact_ub)
        else:
            self.lb, self.ub = exact_lb, exact_ub
        self._start_basis()

        status = self._run()
        if status is LpStatus.OPTIMAL and perturbed:
            self.lb, self.ub = exact_lb, exact_ub
            self.violation_tol = cfg.feasibility_tol
            self._place_nonbasic()
            self._refactor()
            self._recompute_basic_values()
            status = self._run()
        return self._result(status)

    def _full_values(self) -> np.ndarray:
        x = self.x.copy()
        x[self.basis] = self.xb
        return x

    def _result(self, status: LpStatus) -> LpResult:
        n = self.problem.n_cols
        if self.since_refactor:
            self._recompute_basic_values()
        x = np.clip(self._full_values()[:n], self.problem.lb, self.problem.ub)
        optimal = status is LpStatus.OPTIMAL
        basis = None
        if optimal:
            basis = LpBasis(n, self.basis.copy(), self.at_upper.copy(), self.tableau, self.rows)
        return LpResult(
            status=status,
            objective=float(np.dot(self.problem.c, x)) if optimal else math.inf,
            x=x,
            iterations=self.iterations,
            phase1_iterations=self.phase1_iterations,
            bland_engaged=self.bland_engaged,
            pivots=self.pivots,
            basis=basis,
        )

    def _recompute_basic_values(self):
        rows = self.rows
        n = self.problem.n_cols
        # Columns n.. of the tableau hold B^-1 up to the sign of each extra column.
        inverse = self.tableau[:, n:] * rows.signs[None, :]
        x = self.x.copy()
        x[self.basis] = 0.0
        self.xb = inverse @ (rows.b - rows.a_ext @ x)

    def _refactor(self):
        if not len(self.basis):
            return
        try:
            self.tableau = np.linalg.solve(self.rows.a_ext[:, self.basis], self.rows.a_ext)
        except np.linalg.LinAlgError:
            pass
        self.since_refactor = 0
        self._recompute_basic_values()

    # Core iteration ----------------------------------------------------

    def _pricing(self, phase_two_reduced):
        """Phase-1 reduced costs when a basic value is out of bounds, else phase-2 ones."""
        tol = self.violation_tol
        lbb = self.lb[self.basis]
        ubb = self.ub[self.basis]
        below = self.xb < lbb - tol
        above = self.xb > ubb + tol
        if below.any() or above.any():
            weights = above.astype(float) - below.astype(float)
            active = np.flatnonzero(weights)
            return 1, -(weights[active] @ self.tableau[active]), below, above
        if phase_two_reduced is None:
            phase_two_reduced = self.c_ext - self.c_ext[self.basis] @ self.tableau
        return 2, phase_two_reduced, below, above

    def _ratio_test(self, alpha, below, above):
        """
        Largest step for the entering column. Returns per-row step limits and
        whether each row's basic column would leave at its upper bound.
        """
        cfg = self.config
        lbb = self.lb[self.basis]
        ubb = self.ub[self.basis]
        inside = ~(below | above)
        ratios = np.full(len(alpha), np.inf)
        to_upper = np.zeros(len(alpha), dtype=bool)

        dec = alpha > cfg.pivot_tol
        mask = dec & inside
        ratios[mask] = np.maximum(self.xb[mask] - lbb[mask], 0.0) / alpha[mask]
        mask = dec & above
        ratios[mask] = (self.xb[mask] - ubb[mask]) / alpha[mask]
        to_upper[mask] = True

        inc = alpha < -cfg.pivot_tol
        mask = inc & inside
        ratios[mask] = np.maximum(ubb[mask] - self.xb[mask], 0.0) / -alpha[mask]
        to_upper[mask] = True
        mask = inc & below
        ratios[mask] = (lbb[mask] - self.xb[mask]) / -alpha[mask]
        return ratios, to_upper

    def _accept_residual(self, below, above) -> bool:
        """
        Called when phase 1 has no improving column. Violations left by
        round-off are accepted after a fresh factorization; anything larger
        means the LP is infeasible.
        """
        if self.since_refactor:
            self._refactor()
            return True
        lbb = self.lb[self.basis]
        ubb = self.ub[self.basis]
        violation = max(
            float(np.max(lbb[below] - self.xb[below], initial=0.0)),
            float(np.max(self.xb[above] - ubb[above], initial=0.0)),
        )
        if violation <= 100.0 * self.config.feasibility_tol:
            self.violation_tol = 2.0 * violation
            return True
        return False

    def _run(self) -> LpStatus:
        cfg = self.config
        m = len(self.basis)
        reduced = None

        while True:
            if self.iterations >= self.limit:
                return LpStatus.ITERATION_LIMIT
            if self.deadline is not None and time.perf_counter() >= self.deadline:
                return LpStatus.TIME_LIMIT
            if self.since_refactor >= cfg.refactor_interval:
                self._refactor()
                reduced = None

            phase, prices, below, above = self._pricing(reduced)
            reduced = prices if phase == 2 else None

            movable = ~(self.is_basic | self.fixed)
            up = movable & ~self.at_upper & (prices < -cfg.optimality_tol)
            down = movable & self.at_upper & (prices > cfg.optimality_tol)
            candidates = np.flatnonzero(up | down)
            if candidates.size == 0:
                if phase == 2:
                    return LpStatus.OPTIMAL
                if not self._accept_residual(below, above):
                    return LpStatus.INFEASIBLE
                reduced = None
                continue
            if self.bland_engaged:
                q = int(candidates[0])
            else:
                q = int(candidates[np.argmax(np.abs(prices[candidates]))])
            direction = 1.0 if up[q] else -1.0

            alpha = direction * self.tableau[:, q]
            ratios, to_upper = self._ratio_test(alpha, below, above)
            flip = self.ub[q] - self.lb[q]
            theta = float(ratios.min()) if m else math.inf

            self.iterations += 1
            if phase == 1:
                self.phase1_iterations += 1

            if flip <= theta:
                # Bound flip: the entering column crosses to its other bound.
                self.xb = self.xb - flip * alpha
                self.at_upper[q] = not self.at_upper[q]
                self.x[q] = self.ub[q] if self.at_upper[q] else self.lb[q]
                self.stall = 0
                if self.record_pivots:
                    self.pivots.append((q, -1))
                continue

            ties = np.flatnonzero(ratios <= theta + cfg.pivot_tol)
            if self.bland_engaged:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(alpha[ties]))])

            leaving = int(self.basis[r])
            entering_value = self.x[q] + direction * theta
            self.xb = self.xb - theta * alpha
            self.at_upper[leaving] = to_upper[r]
            self.x[leaving] = self.ub[leaving] if to_upper[r] else self.lb[leaving]
            self.is_basic[leaving] = False

            pivot_row = self.tableau[r] / self.tableau[r, q]
            column = self.tableau[:, q].copy()
            column[r] = 0.0
            touched = np.flatnonzero(column)
            if touched.size:
                self.tableau[touched] -= np.outer(column[touched], pivot_row)
            self.tableau[r] = pivot_row
            if reduced is not None:
                reduced = reduced - reduced[q] * pivot_row

            self.basis[r] = q
            self.is_basic[q] = True
            self.at_upper[q] = False
            self.xb[r] = entering_value
            self.since_refactor += 1
            if self.record_pivots:
                self.pivots.append((q, leaving))

            if theta <= cfg.feasibility_tol:
                self.stall += 1
                if not self.bland_engaged and self.stall > cfg.stall_factor * m:
                    self.bland_engaged = True
            else:
                self.stall = 0


def solve_lp(
    problem: LpProblem,
    config: Optional[LpConfig] = None,
    start: Optional[LpBasis] = None,
    deadline: Optional[float] = None,
) -> LpResult:
    """
    Solves an LP relaxation.

    Inputs:
     - problem (LpProblem)
     - config (LpConfig or None): tolerances and limits.
     - start (LpBasis or None): warm-start basis, e.g. the parent node's
        result.basis. Rows beyond the basis get their slack as basic.
     - deadline (float or None): time.perf_counter() value.

    Returns:
     - LpResult. status is optimal, infeasible (no basis reaches zero bound
        violation), iteration_limit or time_limit. result.basis is set when
        optimal.
    """
    return BoundedSimplex(problem, config, start=start, deadline=deadline).solve()


def fix_variable(problem: LpProblem, column: int, value: float) -> LpProblem:
    """
    Copy of `problem` with column `column` fixed to `value` (lb = ub = value).
    The original problem is untouched.
    """
    if not 0 <= column < problem.n_cols:
        raise ModelError(f"column {column} is out of range")
    if value < problem.lb[column] or value > problem.ub[column]:
        raise ModelError(
            f"cannot fix column {column} to {value}: outside "
            f"[{problem.lb[column]}, {problem.ub[column]}]"
        )
    return fix_variables(problem, {column: value})


def fix_variables(problem: LpProblem, fixes: Mapping[int, float]) -> LpProblem:
    """Copy of `problem` with several columns fixed at once."""
    if not fixes:
        return problem
    lb = problem.lb.copy()
    ub = problem.ub.copy()
    columns = np.fromiter(fixes.keys(), dtype=int, count=len(fixes))
    values = np.fromiter(fixes.values(), dtype=float, count=len(fixes))
    lb[columns] = values
    ub[columns] = values
    return problem.with_bounds(lb, ub)
