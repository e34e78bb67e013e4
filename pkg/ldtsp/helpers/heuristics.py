"""
Warm starts: a distance-only tour (nearest neighbor, then 2-opt) whose
orientation is chosen by load-dependent cost.
"""

from pathlib import Path
import sys
from typing import Sequence, Tuple

import numpy as np

# Project root added to the sys.path, so that scripts can be run unpackaged as well as packaged.
sys.path.append(str(Path(__file__).resolve().parent.parent))

# Local libraries
from ldtsp.classes.instance import DistanceMatrix, Instance
from ldtsp.classes.model import Tour
from ldtsp.helpers.formulation import evaluate_tour
from ldtsp.helpers.oracles import held_karp

IMPROVEMENT_TOL = 1e-12


def nearest_neighbor(dist: DistanceMatrix, start: int) -> Tuple[int, ...]:
    """
    Greedy closed tour from `start`: always move to the closest unvisited
    node, smallest id on ties.

    Returns:
     - (start, ..., start) visiting every node once
    """
    d = dist.d
    n = len(dist)
    visited = np.zeros(n, dtype=bool)
    current = start - 1
    visited[current] = True
    route = [start]
    for _ in range(n - 1):
        row = np.where(visited, np.inf, d[current])
        current = int(np.argmin(row))
        visited[current] = True
        route.append(current + 1)
    route.append(start)
    return tuple(route)


def two_opt(route: Sequence[int], dist: DistanceMatrix) -> Tuple[int, ...]:
    """
    First-improvement 2-opt on total distance. The scan runs i ascending,
    then j, and restarts after every improving move; the first and last
    positions (the depot) stay fixed.

    Inputs:
     - route (sequence of int): closed tour, route[0] == route[-1]
     - dist (DistanceMatrix)

    Returns:
     - closed tour, no longer than the input
    """
    d = dist.d
    route = [int(node) for node in route]
    last = len(route) - 1
    improved = True
    while improved:
        improved = False
        for i in range(1, last - 1):
            a, b = route[i - 1] - 1, route[i] - 1
            for j in range(i + 1, last):
                c, e = route[j] - 1, route[j + 1] - 1
                delta = d[a, c] + d[b, e] - d[a, b] - d[c, e]
                if delta < -IMPROVEMENT_TOL:
                    route[i : j + 1] = reversed(route[i : j + 1])
                    improved = True
                    break
            if improved:
                break
    return tuple(route)


def warm_start(instance: Instance) -> Tuple[Tour, float]:
    """
    Distance tour from nearest neighbor plus 2-opt, evaluated in both
    orientations under the load-dependent cost; the cheaper one is
    returned (forward on ties).
    """
    dist = instance.distances
    route = two_opt(nearest_neighbor(dist, instance.depot), dist)
    sequence = route[1:-1]
    forward = evaluate_tour(instance, sequence)
    backward = evaluate_tour(instance, tuple(reversed(sequence)))
    if backward[1] < forward[1]:
        return backward
    return forward


def warm_start_costs(instance: Instance) -> Tuple[float, float]:
    """(warm start cost, Held-Karp optimum). n <= 20."""
    _, warm = warm_start(instance)
    _, optimal = held_karp(instance)
    return warm, optimal


def warm_start_gap(instance: Instance) -> float:
    """
    Percentage by which the warm start exceeds the exact optimum,
    100 * (warm - optimal) / optimal. Uses Held-Karp, so n <= 20.
    """
    warm, optimal = warm_start_costs(instance)
    return excess_percent(warm, optimal)


def excess_percent(warm: float, optimal: float) -> float:
    """100 * (warm - optimal) / optimal; 0 when the optimum is not positive."""
    if optimal <= 0:
        return 0.0
    return 100.0 * (warm - optimal) / optimal
