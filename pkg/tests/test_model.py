import itertools
import unittest

from ldtsp.classes.exceptions import ModelError
from ldtsp.classes.instance import NodeSet
from ldtsp.classes.lp import LpProblem, LpStatus, fix_variables, solve_lp
from ldtsp.classes.model import ModelVariant, Sense, Tour, VarId, VarKind
from ldtsp.helpers.formulation import (
    build_milp,
    build_minlp,
    decode_tour,
    dfj_cut,
    evaluate_tour,
    successor_cycles,
    tour_solution,
    validate_tour,
)
from ldtsp.helpers.tsplib import make_instance, random_instance


def line_instance(masses, gamma=1.0, alpha=0.1):
    """Targets on the x axis at 1, 2, ... with the depot at the origin (last id)."""
    n = len(masses)
    coords = tuple((k + 1, float(k + 1), 0.0) for k in range(n)) + ((n + 1, 0.0, 0.0),)
    return make_instance(NodeSet(coords, name="line"), masses=masses, gamma=gamma, alpha=alpha)


def derangements(ids):
    """Every successor map on `ids` with no fixed point."""
    for image in itertools.permutations(ids):
        if all(i != j for i, j in zip(ids, image)):
            yield dict(zip(ids, image))


def x_fixes(model, successor):
    index = model.index
    return {
        index[VarId.x(i, j)]: 1.0 if successor[i] == j else 0.0
        for i in successor
        for j in successor
        if i != j
    }


class TestBuildMilp(unittest.TestCase):
    def setUp(self):
        self.instance = random_instance(2, gamma=10, seed=4)

    def test_core_counts(self):
        model = build_milp(self.instance)
        kinds = [v.var.kind for v in model.variables]
        self.assertEqual(kinds.count(VarKind.X), 6)
        self.assertEqual(kinds.count(VarKind.ZETA), 6)
        self.assertEqual(kinds.count(VarKind.ETA), 6)
        self.assertEqual(len(model.constraints), 40)
        counts = {
            "degree-out": 3,
            "degree-in": 3,
            "depot-laden": 2,
            "depot-unladen": 2,
            "mass-drop": 4,
            "mass-flow": 2,
            "zeta-lower": 6,
            "zeta-upper": 6,
            "eta-lower": 6,
            "eta-upper": 6,
        }
        for tag, count in counts.items():
            self.assertEqual(len(model.rows_tagged(tag)), count, tag)

    def test_baseline_rows(self):
        core = build_milp(self.instance)
        first = build_milp(self.instance, ModelVariant.BASELINE1_MILP)
        second = build_milp(self.instance, ModelVariant.BASELINE2_MILP_DFJ)
        self.assertEqual(len(first.constraints) - len(core.constraints), 24)
        self.assertEqual(first.constraints[: len(core.constraints)], core.constraints)
        self.assertEqual(first.constraints, second.constraints)
        self.assertFalse(first.separates_dfj)
        self.assertTrue(second.separates_dfj)

    def test_bounds_and_binaries(self):
        model = build_milp(self.instance)
        laden = self.instance.laden_mass
        for v in model.variables:
            if v.var.kind is VarKind.X:
                self.assertTrue(v.integer)
                self.assertEqual((v.lb, v.ub), (0.0, 1.0))
            else:
                self.assertFalse(v.integer)
                self.assertEqual((v.lb, v.ub), (0.0, laden))

    def test_hazmat_return_fixing(self):
        model = build_milp(random_instance(3, gamma=0, seed=2))
        for row in model.rows_tagged("depot-unladen"):
            # eta_jD = 0 * x_jD: the x term vanishes
            self.assertEqual(len(row.terms), 1)
            self.assertEqual(row.rhs, 0.0)

    def test_minlp_rejected(self):
        with self.assertRaises(ModelError):
            build_milp(self.instance, ModelVariant.MINLP)

    def test_self_loop_rejected(self):
        with self.assertRaises(ModelError):
            VarId.x(2, 2)


class TestBuildMinlp(unittest.TestCase):
    def test_single_target(self):
        instance = line_instance([0.5], gamma=2)
        model = build_minlp(instance)
        names = [v.var.name for v in model.variables]
        self.assertEqual(names, ["x_1_2", "x_2_1", "M_1", "M_2"])
        depot_mass = model.variables[model.index[VarId.mass(2)]]
        self.assertEqual((depot_mass.lb, depot_mass.ub), (1.5, 1.5))
        self.assertFalse(model.is_linear)
        self.assertEqual(len(model.quadratic), 2)

    def test_mass_drop_rows(self):
        instance = line_instance([0.5, 0.3], gamma=2)
        model = build_minlp(instance)
        upper = model.rows_tagged("mass-drop-upper")
        lower = model.rows_tagged("mass-drop-lower")
        self.assertEqual(len(upper), 4)
        self.assertEqual(len(lower), 4)
        total = instance.total_mass
        # x_3_1 = 1 forces M_3 - M_1 = m_1
        values = {VarId.x(3, 1): 1.0, VarId.mass(3): 2.4, VarId.mass(1): 1.9}
        for row in upper + lower:
            if VarId.x(3, 1) in dict(row.terms):
                self.assertLessEqual(row.violation(values), 1e-12)
        values[VarId.mass(1)] = 2.0
        self.assertTrue(
            any(row.violation(values) > 0 for row in upper + lower if VarId.x(3, 1) in dict(row.terms))
        )
        # x_3_1 = 0 only bounds |M_3 - M_1| by the total package mass
        values = {VarId.x(3, 1): 0.0, VarId.mass(3): 2.4, VarId.mass(1): 2.4 - total}
        for row in upper + lower:
            if VarId.x(3, 1) in dict(row.terms):
                self.assertLessEqual(row.violation(values), 1e-12)

    def test_objective_matches_tour_cost(self):
        instance = random_instance(4, gamma=5, seed=8)
        model = build_minlp(instance)
        for order in itertools.permutations(instance.targets):
            tour, cost = evaluate_tour(instance, order)
            values = tour_solution(model, instance, tour)
            self.assertTrue(model.is_feasible(values, tol=1e-9))
            self.assertAlmostEqual(model.objective_value(values), cost, delta=1e-9)


class TestDfjCut(unittest.TestCase):
    def test_depot_only(self):
        cut = dfj_cut({3}, (1, 2, 3), 3)
        self.assertEqual(cut.sense, Sense.GE)
        self.assertEqual(cut.rhs, 1.0)
        self.assertEqual(cut.tag, "dfj")
        self.assertEqual([var for var, _ in cut.terms], [VarId.x(3, 1), VarId.x(3, 2)])

    def test_two_node_set(self):
        cut = dfj_cut({4, 1}, (1, 2, 3, 4), 4)
        edges = sorted(var.edge for var, _ in cut.terms)
        self.assertEqual(edges, [(1, 2), (1, 3), (4, 2), (4, 3)])

    def test_invalid_sets(self):
        with self.assertRaises(ModelError):
            dfj_cut({1, 2, 3}, (1, 2, 3), 3)
        with self.assertRaises(ModelError):
            dfj_cut({1}, (1, 2, 3), 3)


class TestEvaluateTour(unittest.TestCase):
    def test_single_target(self):
        instance = line_instance([0.5], gamma=2, alpha=0.1)
        tour, cost = evaluate_tour(instance, [1])
        m, big_m = 0.5, 1.0
        self.assertAlmostEqual(cost, 0.1 * ((big_m + m) * 1.0 + big_m * 1.0), places=12)
        self.assertEqual(tour.sequence, (2, 1, 2))
        self.assertEqual(tour.masses, (1.5, 1.0))

    def test_hazmat_last_leg_free(self):
        instance = random_instance(4, gamma=0, seed=5)
        tour, _ = evaluate_tour(instance, instance.targets)
        self.assertEqual(tour.masses[-1], 0.0)

    def test_orientation_matters(self):
        instance = line_instance([1.0, 0.2], gamma=1, alpha=0.1)
        # forward: depot->1->2->depot with distances 1, 1, 2
        _, forward = evaluate_tour(instance, [1, 2])
        _, backward = evaluate_tour(instance, [2, 1])
        big_m = 1.2
        expected_forward = 0.1 * ((big_m + 1.2) * 1 + (big_m + 0.2) * 1 + big_m * 2)
        expected_backward = 0.1 * ((big_m + 1.2) * 2 + (big_m + 1.0) * 1 + big_m * 1)
        self.assertAlmostEqual(forward, expected_forward, delta=1e-12)
        self.assertAlmostEqual(backward, expected_backward, delta=1e-12)
        self.assertAlmostEqual(backward - forward, 0.1 * 2.0, delta=1e-12)

    def test_bad_sequences(self):
        instance = random_instance(3, seed=1)
        with self.assertRaises(ModelError):
            evaluate_tour(instance, [1, 1, 2])
        with self.assertRaises(ModelError):
            evaluate_tour(instance, [1, 2])

    def test_validate_tour(self):
        instance = random_instance(3, seed=1)
        tour, _ = evaluate_tour(instance, [3, 1, 2])
        self.assertEqual(validate_tour(instance, tour), [])
        broken = Tour(tour.sequence, (tour.masses[0] + 1.0,) + tour.masses[1:])
        self.assertEqual(len(validate_tour(instance, broken)), 1)
        short = Tour((4, 1, 2, 4), (1.0, 1.0, 1.0))
        self.assertTrue(validate_tour(instance, short))


class TestFormulationProperties(unittest.TestCase):
    """
    Exhaustive checks at integrality: the core constraint set accepts exactly
    the Hamiltonian tours, at the cost `evaluate_tour` gives them.
    """

    def test_tour_points_feasible_with_matching_objective(self):
        for seed, gamma in enumerate((0, 2, 5, 10)):
            instance = random_instance(3, gamma=gamma, seed=seed)
            for variant in (ModelVariant.CORE_MILP, ModelVariant.BASELINE1_MILP):
                model = build_milp(instance, variant)
                for order in itertools.permutations(instance.targets):
                    tour, cost = evaluate_tour(instance, order)
                    values = tour_solution(model, instance, tour)
                    self.assertTrue(model.is_feasible(values, tol=1e-9))
                    self.assertAlmostEqual(model.objective_value(values), cost, delta=1e-9)

    def test_integral_feasibility_is_hamiltonicity(self):
        instance = random_instance(3, gamma=2, seed=6)  # N = 4
        model = build_milp(instance)
        problem = LpProblem.from_model(model)
        ids = instance.nodes.ids
        degree_rows = model.rows_tagged("degree-out") + model.rows_tagged("degree-in")
        edges = instance.edges()
        hamiltonian = 0
        for bits in itertools.product((0.0, 1.0), repeat=len(edges)):
            values = {VarId.x(i, j): bit for (i, j), bit in zip(edges, bits)}
            if any(row.violation(values) > 0 for row in degree_rows):
                continue
            successor = {i: j for (i, j), bit in zip(edges, bits) if bit == 1.0}
            cycles = successor_cycles({e: b for e, b in zip(edges, bits)})
            is_tour = len(cycles) == 1
            result = solve_lp(fix_variables(problem, x_fixes(model, successor)))
            self.assertEqual(result.status is LpStatus.OPTIMAL, is_tour, successor)
            if is_tour:
                hamiltonian += 1
                order = decode_tour({e: b for e, b in zip(edges, bits)}, instance)
                _, cost = evaluate_tour(instance, order)
                self.assertAlmostEqual(result.objective, cost, delta=1e-7)
        self.assertEqual(hamiltonian, 6)
        self.assertEqual(len(ids), 4)

    def test_subtours_infeasible_up_to_five_nodes(self):
        for n_targets in (2, 3, 4):
            instance = random_instance(n_targets, gamma=5, seed=n_targets)
            model = build_milp(instance)
            problem = LpProblem.from_model(model)
            ids = instance.nodes.ids
            for successor in derangements(ids):
                x_values = {(i, j): 1.0 if successor[i] == j else 0.0 for i in ids for j in ids if i != j}
                if len(successor_cycles(x_values)) == 1:
                    continue
                result = solve_lp(fix_variables(problem, x_fixes(model, successor)))
                self.assertIs(result.status, LpStatus.INFEASIBLE, successor)

    def test_baseline_rows_redundant_at_integrality(self):
        instance = random_instance(4, gamma=2, seed=12)
        core = build_milp(instance)
        first = build_milp(instance, ModelVariant.BASELINE1_MILP)
        extra = first.constraints[len(core.constraints):]
        for order in itertools.permutations(instance.targets):
            tour, _ = evaluate_tour(instance, order)
            values = tour_solution(core, instance, tour)
            self.assertTrue(all(row.violation(values) <= 1e-9 for row in extra))


class TestDecode(unittest.TestCase):
    def test_decode(self):
        instance = random_instance(3, seed=0)
        x_values = {e: 0.0 for e in instance.edges()}
        for edge in ((4, 2), (2, 3), (3, 1), (1, 4)):
            x_values[edge] = 1.0
        self.assertEqual(decode_tour(x_values, instance), (2, 3, 1))

    def test_fractional_and_subtour(self):
        instance = random_instance(3, seed=0)
        x_values = {e: 0.0 for e in instance.edges()}
        for edge in ((4, 1), (1, 4), (2, 3), (3, 2)):
            x_values[edge] = 1.0
        self.assertIsNone(decode_tour(x_values, instance))
        self.assertEqual(successor_cycles(x_values), [[1, 4], [2, 3]])
        x_values[(4, 1)] = 0.5
        self.assertIsNone(successor_cycles(x_values))


def main():
    unittest.main()


if __name__ == "__main__":
    main()
