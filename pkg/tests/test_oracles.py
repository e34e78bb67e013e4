import itertools
import types
import unittest

from ldtsp.classes.exceptions import OracleGuardError
from ldtsp.classes.instance import NodeSet
from ldtsp.classes.model import Tour
from ldtsp.helpers.formulation import evaluate_tour
from ldtsp.helpers.oracles import (
    Verdict,
    brute_force,
    distance_brute_force,
    held_karp,
    verify_solution,
)
from ldtsp.helpers.tsplib import make_instance, random_instance, tour_length


def close(a, b):
    return abs(a - b) <= 1e-9 * max(1.0, abs(a), abs(b))


class TestExactOracles(unittest.TestCase):
    def test_brute_force_matches_held_karp(self):
        for n in (1, 2, 3, 5, 7):
            for gamma in (0, 2, 5, 10):
                instance = random_instance(n, gamma=gamma, seed=n + int(gamma))
                _, brute = brute_force(instance)
                _, dynamic = held_karp(instance)
                self.assertTrue(close(brute, dynamic), f"n={n} gamma={gamma}")

    def test_exhaustive_minimum(self):
        instance = random_instance(4, gamma=2, seed=13)
        costs = [evaluate_tour(instance, order)[1] for order in itertools.permutations(instance.targets)]
        _, brute = brute_force(instance)
        self.assertTrue(close(brute, min(costs)))

    def test_lexicographic_tie_break(self):
        # Four targets on a circle around the depot, equal masses: each
        # orientation pair ties and the smaller sequence wins.
        nodes = NodeSet(((1, 1, 0), (2, 0, 1), (3, -1, 0), (4, 0, -1), (5, 0, 0)))
        instance = make_instance(nodes, masses=[0.5] * 4, gamma=0)
        tour, _ = brute_force(instance)
        costs = {
            order: evaluate_tour(instance, order)[1]
            for order in itertools.permutations(instance.targets)
        }
        best = min(costs.values())
        first = min(order for order, cost in costs.items() if cost <= best + 1e-12)
        self.assertEqual(tour.targets, first)

    def test_single_target(self):
        nodes = NodeSet(((1, 0.0, 0.0), (2, 3.0, 4.0)))
        instance = make_instance(nodes, masses=[1.0], gamma=2)
        for oracle in (brute_force, held_karp):
            tour, cost = oracle(instance)
            self.assertEqual(tour.sequence, (2, 1, 2))
            self.assertAlmostEqual(cost, 2.5, places=12)

    def test_guards(self):
        with self.assertRaises(OracleGuardError):
            brute_force(random_instance(11))
        with self.assertRaises(OracleGuardError):
            distance_brute_force(random_instance(11))
        with self.assertRaises(OracleGuardError):
            held_karp(random_instance(21))

    def test_relabel_invariance(self):
        instance = random_instance(6, gamma=5, seed=17)
        _, cost = held_karp(instance)
        targets = instance.targets
        coords = {node: (x, y) for node, x, y in instance.nodes.coords}
        for shift in (1, 3):
            order = targets[shift:] + targets[:shift]
            relabeled = NodeSet(
                tuple((k + 1, *coords[t]) for k, t in enumerate(order))
                + ((instance.depot, *coords[instance.depot]),)
            )
            other = make_instance(
                relabeled, masses=[instance.masses[t] for t in order], gamma=5
            )
            _, other_cost = held_karp(other)
            self.assertTrue(close(cost, other_cost))

    def test_large_gamma_tends_to_shortest_tour(self):
        for seed in (1, 2, 3):
            instance = random_instance(6, gamma=1e4, seed=seed)
            tour, _ = brute_force(instance)
            _, shortest = distance_brute_force(instance)
            length = tour_length(tour.targets, instance.distances, instance.depot)
            self.assertGreaterEqual(length, shortest - 1e-9)
            self.assertLessEqual(length, shortest * (1 + 1e-4) + 1e-9)

    def test_zero_gamma_ignores_return_leg(self):
        instance = random_instance(5, gamma=0, seed=4)
        tour, cost = held_karp(instance)
        self.assertEqual(tour.masses[-1], 0.0)
        self.assertTrue(close(cost, evaluate_tour(instance, tour.targets)[1]))


class TestVerifySolution(unittest.TestCase):
    def setUp(self):
        self.instance = random_instance(4, gamma=2, seed=3)
        self.tour, self.cost = held_karp(self.instance)

    def report(self, **changes):
        fields = dict(incumbent=self.tour, incumbent_cost=self.cost, best_bound=self.cost)
        fields.update(changes)
        return types.SimpleNamespace(**fields)

    def test_accepts_optimum(self):
        verdict = verify_solution(self.instance, self.report())
        self.assertIsInstance(verdict, Verdict)
        self.assertTrue(verdict)

    def test_no_incumbent(self):
        verdict = verify_solution(self.instance, self.report(incumbent=None, incumbent_cost=None))
        self.assertEqual(verdict.reasons, ("no incumbent",))

    def test_wrong_mass_schedule(self):
        masses = list(self.tour.masses)
        masses[1] += 0.5
        broken = Tour(self.tour.sequence, masses)
        verdict = verify_solution(self.instance, self.report(incumbent=broken))
        self.assertFalse(verdict)
        self.assertIn("mass schedule does not match the packages delivered", verdict.reasons)

    def test_missing_target(self):
        sequence = self.tour.sequence[:2] + self.tour.sequence[3:]
        broken = Tour(sequence, self.tour.masses[: len(sequence) - 1])
        verdict = verify_solution(self.instance, self.report(incumbent=broken))
        self.assertIn("tour does not visit every target exactly once", verdict.reasons)

    def test_cost_and_bound(self):
        verdict = verify_solution(
            self.instance, self.report(incumbent_cost=self.cost * 2, best_bound=self.cost * 3)
        )
        self.assertEqual(verdict.reasons, ("cost mismatch", "bound exceeds incumbent"))


def main():
    unittest.main()


if __name__ == "__main__":
    main()
