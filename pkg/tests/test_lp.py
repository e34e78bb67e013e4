import itertools
import time
import unittest

import numpy as np

from ldtsp.classes.exceptions import ModelError
from ldtsp.classes.lp import (
    BoundedSimplex,
    LpBasis,
    LpConfig,
    LpProblem,
    LpStatus,
    fix_variable,
    fix_variables,
    solve_lp,
)
from ldtsp.classes.model import ModelVariant, Sense, VarKind
from ldtsp.helpers.formulation import build_milp, build_minlp, evaluate_tour, tour_solution
from ldtsp.helpers.heuristics import warm_start
from ldtsp.helpers.oracles import held_karp
from ldtsp.helpers.tsplib import random_instance


def small_problem(c, lb, ub, rows=(), senses=(), b=()):
    a = np.array(rows, dtype=float).reshape(len(b), len(c))
    return LpProblem(c=c, lb=lb, ub=ub, a=a, senses=tuple(senses), b=b)


def assignment_problem(costs):
    """Assignment LP: every row and column of the cost matrix used once."""
    n = costs.shape[0]
    rows = []
    for i in range(n):
        row = np.zeros((n, n))
        row[i, :] = 1.0
        rows.append(row.ravel())
    for j in range(n):
        col = np.zeros((n, n))
        col[:, j] = 1.0
        rows.append(col.ravel())
    return LpProblem(
        c=costs.ravel(),
        lb=np.zeros(n * n),
        ub=np.ones(n * n),
        a=np.array(rows),
        senses=(Sense.EQ,) * (2 * n),
        b=np.ones(2 * n),
    )


def assignment_optimum(costs):
    n = costs.shape[0]
    return min(
        sum(costs[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n))
    )


class TestSolveLp(unittest.TestCase):
    def test_bounds_only(self):
        result = solve_lp(small_problem([1.0], [1.0], [2.0]))
        self.assertIs(result.status, LpStatus.OPTIMAL)
        self.assertEqual(result.objective, 1.0)
        self.assertEqual(result.iterations, 0)

    def test_upper_bound_reached_by_flip(self):
        result = solve_lp(small_problem([-1.0, 2.0], [0.0, 0.0], [3.0, 1.0]))
        self.assertEqual(result.objective, -3.0)
        np.testing.assert_allclose(result.x, [3.0, 0.0])

    def test_covering_row(self):
        result = solve_lp(
            small_problem([1.0, 1.0], [0.0, 0.0], [1.0, 1.0], [[1.0, 1.0]], [Sense.GE], [1.0])
        )
        self.assertIs(result.status, LpStatus.OPTIMAL)
        self.assertAlmostEqual(result.objective, 1.0, places=9)

    def test_packing_row(self):
        result = solve_lp(
            small_problem(
                [-1.0, -2.0], [0.0, 0.0], [1.0, 1.0], [[1.0, 1.0]], [Sense.LE], [1.5]
            )
        )
        self.assertAlmostEqual(result.objective, -2.5, places=9)
        np.testing.assert_allclose(result.x, [0.5, 1.0], atol=1e-9)

    def test_equality_rows(self):
        # x + y = 1, x - y = 0.5
        result = solve_lp(
            small_problem(
                [1.0, 3.0],
                [0.0, 0.0],
                [5.0, 5.0],
                [[1.0, 1.0], [1.0, -1.0]],
                [Sense.EQ, Sense.EQ],
                [1.0, 0.5],
            )
        )
        np.testing.assert_allclose(result.x, [0.75, 0.25], atol=1e-9)
        self.assertAlmostEqual(result.objective, 1.5, places=9)

    def test_infeasible(self):
        result = solve_lp(
            small_problem([1.0, 1.0], [0.0, 0.0], [1.0, 1.0], [[1.0, 1.0]], [Sense.GE], [3.0])
        )
        self.assertIs(result.status, LpStatus.INFEASIBLE)
        self.assertFalse(result.is_optimal)

    def test_empty_row(self):
        ok = small_problem([1.0], [0.0], [1.0], [[0.0]], [Sense.LE], [1.0])
        self.assertIs(solve_lp(ok).status, LpStatus.OPTIMAL)
        bad = small_problem([1.0], [0.0], [1.0], [[0.0]], [Sense.EQ], [1.0])
        self.assertIs(solve_lp(bad).status, LpStatus.INFEASIBLE)

    def test_iteration_limit(self):
        costs = np.arange(16, dtype=float).reshape(4, 4)
        result = solve_lp(assignment_problem(costs), LpConfig(max_iterations=1))
        self.assertIs(result.status, LpStatus.ITERATION_LIMIT)

    def test_validation(self):
        with self.assertRaises(ModelError):
            small_problem([1.0], [0.0], [np.inf])
        with self.assertRaises(ModelError):
            small_problem([1.0], [2.0], [1.0])
        with self.assertRaises(ValueError):
            LpConfig(feasibility_tol=0.0)

    def test_problem_not_mutated(self):
        problem = small_problem([1.0, 1.0], [0.0, 0.0], [1.0, 1.0], [[1.0, 1.0]], [Sense.GE], [1.0])
        before = problem.a.copy()
        solve_lp(problem)
        np.testing.assert_array_equal(problem.a, before)


class TestDegenerate(unittest.TestCase):
    """
    Assignment polytopes are highly degenerate; the solver must terminate
    at the permutation optimum, including on all-equal costs.
    """

    def test_assignment_library(self):
        rng = np.random.default_rng(5)
        matrices = [np.ones((5, 5)), np.zeros((4, 4)), np.eye(5)]
        matrices += [rng.integers(0, 4, size=(5, 5)).astype(float) for _ in range(6)]
        for costs in matrices:
            result = solve_lp(assignment_problem(costs))
            self.assertIs(result.status, LpStatus.OPTIMAL)
            self.assertAlmostEqual(result.objective, assignment_optimum(costs), delta=1e-7)

    def test_bland_terminates(self):
        costs = np.ones((5, 5))
        config = LpConfig(stall_factor=1)
        result = BoundedSimplex(assignment_problem(costs), config).solve()
        self.assertIs(result.status, LpStatus.OPTIMAL)
        self.assertAlmostEqual(result.objective, 5.0, delta=1e-9)

    def test_library_without_perturbation(self):
        config = LpConfig(perturbation=0.0)
        for costs in (np.ones((5, 5)), np.zeros((4, 4)), np.eye(5)):
            result = solve_lp(assignment_problem(costs), config)
            self.assertIs(result.status, LpStatus.OPTIMAL)
            self.assertAlmostEqual(result.objective, assignment_optimum(costs), delta=1e-7)

    def test_heavy_root_relaxation(self):
        # Twelve targets with gamma=10 used to cycle at the root.
        instance = random_instance(12, gamma=10, seed=1)
        _, upper = warm_start(instance)
        result = solve_lp(LpProblem.from_model(build_milp(instance)))
        self.assertIs(result.status, LpStatus.OPTIMAL)
        self.assertLessEqual(result.objective, upper + 1e-6)
        self.assertGreater(result.objective, 0.0)

    def test_deterministic_pivots(self):
        problem = LpProblem.from_model(build_milp(random_instance(4, gamma=2, seed=3)))
        first = BoundedSimplex(problem, record_pivots=True).solve()
        second = BoundedSimplex(problem, record_pivots=True).solve()
        self.assertEqual(first.pivots, second.pivots)
        self.assertEqual(first.objective, second.objective)
        np.testing.assert_array_equal(first.x, second.x)


class TestWarmStart(unittest.TestCase):
    def setUp(self):
        self.instance = random_instance(5, gamma=5, seed=2)
        self.model = build_milp(self.instance)
        self.problem = LpProblem.from_model(self.model)
        self.parent = solve_lp(self.problem)
        self.x_columns = [
            k for k, v in enumerate(self.model.variables) if v.var.kind is VarKind.X
        ]

    def test_parent_basis_returned(self):
        basis = self.parent.basis
        self.assertIsInstance(basis, LpBasis)
        self.assertEqual(basis.n_cols, self.problem.n_cols)
        self.assertIs(basis.rows, self.problem.standard_rows)
        compact = basis.without_tableau()
        self.assertIsNone(compact.tableau)
        np.testing.assert_array_equal(compact.basis, basis.basis)

    def test_children_match_cold_solve(self):
        for column in self.x_columns[:6]:
            for value in (0.0, 1.0):
                child = fix_variable(self.problem, column, value)
                cold = solve_lp(child)
                for start in (self.parent.basis, self.parent.basis.without_tableau()):
                    warm = solve_lp(child, start=start)
                    self.assertIs(warm.status, cold.status)
                    if cold.is_optimal:
                        self.assertAlmostEqual(warm.objective, cold.objective, delta=1e-7)

    def test_extra_rows_after_basis(self):
        # Cuts are appended after the rows the basis knows about.
        index = self.model.index
        cut_rows = [
            row for row in self.model.constraints if row.tag == self.model.constraints[0].tag
        ][:2]
        extended = self.problem.with_rows(cut_rows, index)
        cold = solve_lp(extended)
        warm = solve_lp(extended, start=self.parent.basis)
        self.assertIs(warm.status, LpStatus.OPTIMAL)
        self.assertAlmostEqual(warm.objective, cold.objective, delta=1e-7)

    def test_fewer_iterations_on_resolve(self):
        again = solve_lp(self.problem, start=self.parent.basis)
        self.assertIs(again.status, LpStatus.OPTIMAL)
        self.assertAlmostEqual(again.objective, self.parent.objective, delta=1e-7)
        self.assertLess(again.iterations, self.parent.iterations)

    def test_mismatched_basis_ignored(self):
        other = solve_lp(
            small_problem([1.0, 1.0], [0.0, 0.0], [1.0, 1.0], [[1.0, 1.0]], [Sense.GE], [1.0])
        )
        result = solve_lp(self.problem, start=other.basis)
        self.assertIs(result.status, LpStatus.OPTIMAL)
        self.assertAlmostEqual(result.objective, self.parent.objective, delta=1e-7)


class TestDeadline(unittest.TestCase):
    def test_past_deadline(self):
        problem = LpProblem.from_model(build_milp(random_instance(5, gamma=2, seed=4)))
        result = solve_lp(problem, deadline=time.perf_counter() - 1.0)
        self.assertIs(result.status, LpStatus.TIME_LIMIT)
        self.assertEqual(result.iterations, 0)
        self.assertIsNone(result.basis)
        self.assertEqual(result.objective, float("inf"))

    def test_distant_deadline(self):
        problem = LpProblem.from_model(build_milp(random_instance(4, gamma=2, seed=4)))
        result = solve_lp(problem, deadline=time.perf_counter() + 3600.0)
        self.assertIs(result.status, LpStatus.OPTIMAL)

    def test_large_relaxation_stops_on_time(self):
        problem = LpProblem.from_model(build_milp(random_instance(15, gamma=10, seed=1)))
        started = time.perf_counter()
        result = solve_lp(problem, deadline=started + 0.05)
        self.assertIn(result.status, (LpStatus.TIME_LIMIT, LpStatus.OPTIMAL))
        self.assertLess(time.perf_counter() - started, 5.0)


class TestRelaxation(unittest.TestCase):
    def test_from_model(self):
        model = build_milp(random_instance(2, seed=1))
        problem = LpProblem.from_model(model)
        self.assertEqual(problem.n_cols, 18)
        self.assertEqual(problem.n_rows, 40)
        self.assertEqual(problem.tags[0], "degree-out")
        with self.assertRaises(ModelError):
            LpProblem.from_model(build_minlp(random_instance(2, seed=1)))

    def test_root_bound_below_optimum(self):
        for seed, gamma in enumerate((0, 2, 5, 10)):
            instance = random_instance(3, gamma=gamma, seed=seed)
            _, optimum = held_karp(instance)
            for variant in (ModelVariant.CORE_MILP, ModelVariant.BASELINE1_MILP):
                result = solve_lp(LpProblem.from_model(build_milp(instance, variant)))
                self.assertIs(result.status, LpStatus.OPTIMAL)
                self.assertLessEqual(result.objective, optimum + 1e-6)

    def test_tour_point_bounds_relaxation(self):
        instance = random_instance(4, gamma=5, seed=7)
        model = build_milp(instance)
        problem = LpProblem.from_model(model)
        relaxed = solve_lp(problem).objective
        for order in itertools.permutations(instance.targets):
            tour, cost = evaluate_tour(instance, order)
            values = tour_solution(model, instance, tour)
            self.assertLessEqual(relaxed, model.objective_value(values) + 1e-6)
            self.assertAlmostEqual(model.objective_value(values), cost, delta=1e-9)


class TestFixVariable(unittest.TestCase):
    def setUp(self):
        self.instance = random_instance(3, gamma=2, seed=11)
        self.model = build_milp(self.instance)
        self.problem = LpProblem.from_model(self.model)
        self.parent = solve_lp(self.problem).objective

    def test_original_untouched(self):
        fixed = fix_variable(self.problem, 0, 1.0)
        self.assertEqual(fixed.lb[0], 1.0)
        self.assertEqual(self.problem.lb[0], 0.0)
        self.assertTrue(np.shares_memory(fixed.a, self.problem.a))

    def test_children_bound_parent(self):
        x_columns = [
            k for k, v in enumerate(self.model.variables) if v.var.kind is VarKind.X
        ]
        for column in x_columns:
            children = []
            for value in (0.0, 1.0):
                result = solve_lp(fix_variable(self.problem, column, value))
                if result.is_optimal:
                    self.assertGreaterEqual(result.objective, self.parent - 1e-6)
                    children.append(result.objective)
            self.assertTrue(children)
            self.assertGreaterEqual(min(children), self.parent - 1e-6)

    def test_fix_to_tour(self):
        index = self.model.index
        for order in itertools.permutations(self.instance.targets):
            tour, cost = evaluate_tour(self.instance, order)
            values = tour_solution(self.model, self.instance, tour)
            fixes = {
                index[var]: value for var, value in values.items() if var.kind is VarKind.X
            }
            result = solve_lp(fix_variables(self.problem, fixes))
            self.assertIs(result.status, LpStatus.OPTIMAL)
            self.assertAlmostEqual(result.objective, cost, delta=1e-7)

    def test_out_of_bounds(self):
        with self.assertRaises(ModelError):
            fix_variable(self.problem, 0, 2.0)
        with self.assertRaises(ModelError):
            fix_variable(self.problem, self.problem.n_cols, 0.0)


def main():
    unittest.main()


if __name__ == "__main__":
    main()
