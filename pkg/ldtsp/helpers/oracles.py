"""
Exact reference solvers for cross-checking the branch and bound:
permutation brute force and Held-Karp dynamic programming.

Held-Karp applies because the vehicle's mass after a set S of deliveries is
M + Mbar - sum(m_t for t in S), a function of S alone.
"""

import itertools
import math
from pathlib import Path
import sys
from typing import Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

# Project root added to the sys.path, so that scripts can be run unpackaged as well as packaged.
sys.path.append(str(Path(__file__).resolve().parent.parent))

# Local libraries
from ldtsp.classes.config import Config
from ldtsp.classes.exceptions import OracleGuardError
from ldtsp.classes.instance import Instance
from ldtsp.classes.model import Tour
from ldtsp.helpers.formulation import evaluate_tour, validate_tour
from ldtsp.helpers.tsplib import tour_length

BRUTE_FORCE_MAX_TARGETS = 10
HELD_KARP_MAX_TARGETS = 20
VERIFY_TOL = 1e-7
# Permutations costed per numpy batch.
CHUNK = 50_000


def _permutation_chunks(n: int) -> Iterator[np.ndarray]:
    """All permutations of range(n) in lexicographic order, in batches."""
    perms = itertools.permutations(range(n))
    while True:
        block = list(itertools.islice(perms, CHUNK))
        if not block:
            return
        yield np.array(block, dtype=np.int64)


def _best_permutation(n: int, chunk_cost) -> Tuple[int, ...]:
    """Lexicographically first permutation of minimum chunk_cost."""
    best_cost = math.inf
    best = None
    for block in _permutation_chunks(n):
        costs = chunk_cost(block)
        k = int(np.argmin(costs))
        if costs[k] < best_cost:
            best_cost = costs[k]
            best = tuple(int(p) for p in block[k])
    return best


def _guard(instance: Instance, limit: int, name: str):
    n = len(instance.targets)
    if n > limit:
        raise OracleGuardError(f"{name} is limited to {limit} targets, got {n}")


def brute_force(instance: Instance) -> Tuple[Tour, float]:
    """
    Evaluates every visiting order and returns the cheapest; ties go to the
    lexicographically smallest sequence.

    Inputs:
     - instance (Instance): at most 10 targets.

    Returns:
     - (Tour, cost)
    """
    _guard(instance, BRUTE_FORCE_MAX_TARGETS, "brute_force")
    targets = np.array(instance.targets)
    idx = targets - 1
    d = instance.distances.d
    depot = instance.depot - 1
    masses = np.array([instance.masses[t] for t in instance.targets])
    laden = instance.laden_mass
    to_first = d[depot, idx]
    to_depot = d[idx, depot]
    between = d[np.ix_(idx, idx)]

    def chunk_cost(perm):
        # Departure mass before leg k+1 is laden minus the first k+1 drops.
        departed = laden - np.cumsum(masses[perm], axis=1)
        legs = between[perm[:, :-1], perm[:, 1:]]
        cost = laden * to_first[perm[:, 0]]
        cost = cost + (departed[:, :-1] * legs).sum(axis=1)
        return cost + instance.unladen * to_depot[perm[:, -1]]

    best = _best_permutation(len(targets), chunk_cost)
    return evaluate_tour(instance, tuple(int(targets[p]) for p in best))


def distance_brute_force(instance: Instance) -> Tuple[Tuple[int, ...], float]:
    """
    Shortest plain (distance-only) tour through the targets from the depot,
    lexicographic tie-break.

    Returns:
     - (target sequence, tour length)
    """
    _guard(instance, BRUTE_FORCE_MAX_TARGETS, "distance_brute_force")
    targets = np.array(instance.targets)
    idx = targets - 1
    d = instance.distances.d
    depot = instance.depot - 1
    between = d[np.ix_(idx, idx)]

    def chunk_cost(perm):
        legs = between[perm[:, :-1], perm[:, 1:]].sum(axis=1)
        return d[depot, idx][perm[:, 0]] + legs + d[idx, depot][perm[:, -1]]

    best = _best_permutation(len(targets), chunk_cost)
    sequence = tuple(int(targets[p]) for p in best)
    return sequence, tour_length(sequence, instance.distances, instance.depot)


def held_karp(instance: Instance) -> Tuple[Tour, float]:
    """
    Exact dynamic program over (delivered set S, last target).

    cost(S, last) = min over prev of cost(S - {last}, prev)
                    + alpha * (M + Mbar - mass(S - {last})) * d[prev, last]
    with cost({t}, t) = alpha * (M + Mbar) * d[D, t]; the answer adds the
    return leg alpha * M * d[last, D]. Ties go to the smallest node index.

    Inputs:
     - instance (Instance): at most 20 targets.

    Returns:
     - (Tour, cost)
    """
    _guard(instance, HELD_KARP_MAX_TARGETS, "held_karp")
    targets = instance.targets
    n = len(targets)
    idx = np.array(targets) - 1
    d = instance.distances.d
    depot = instance.depot - 1
    alpha = instance.alpha
    laden = instance.laden_mass
    masses = np.array([instance.masses[t] for t in targets])
    between = d[np.ix_(idx, idx)]

    size = 1 << n
    delivered = np.zeros(size)
    for b in range(n):
        delivered[1 << b : 1 << (b + 1)] = delivered[: 1 << b] + masses[b]
    masks = np.arange(size, dtype=np.int64)
    popcount = np.zeros(size, dtype=np.int64)
    for b in range(n):
        popcount += (masks >> b) & 1

    cost = np.full((size, n), np.inf)
    parent = np.full((size, n), -1, dtype=np.int64)
    for b in range(n):
        cost[1 << b, b] = alpha * laden * d[depot, idx[b]]

    for level in range(2, n + 1):
        level_masks = masks[popcount == level]
        for last in range(n):
            subsets = level_masks[(level_masks >> last) & 1 == 1]
            prev = subsets ^ (1 << last)
            mass_before = laden - delivered[prev]
            candidates = cost[prev] + alpha * mass_before[:, None] * between[:, last][None, :]
            best = np.argmin(candidates, axis=1)
            cost[subsets, last] = candidates[np.arange(len(subsets)), best]
            parent[subsets, last] = best

    full = size - 1
    closing = cost[full] + alpha * instance.unladen * d[idx, depot]
    last = int(np.argmin(closing))
    order = []
    mask = full
    while last != -1:
        order.append(last)
        previous = int(parent[mask, last])
        mask ^= 1 << last
        last = previous
    sequence = tuple(targets[k] for k in reversed(order))
    return evaluate_tour(instance, sequence)


class Verdict(NamedTuple):
    ok: bool
    reasons: Tuple[str, ...]

    def __bool__(self):
        return self.ok


def verify_solution(instance: Instance, report, config: Optional[Config] = None) -> Verdict:
    """
    Audits a solve report: the incumbent must be a valid tour, its recorded
    cost must match a recomputation, and the bound must not exceed it.

    Inputs:
     - instance (Instance)
     - report (SolveReport): anything with incumbent, incumbent_cost and
        best_bound attributes.
     - config (ldtsp.Config or None)

    Returns:
     - Verdict(ok, reasons)
    """
    if config is None:
        config = Config()
    reasons: List[str] = []
    tour = report.incumbent
    if tour is None:
        return Verdict(False, ("no incumbent",))
    problems = validate_tour(instance, tour)
    reasons.extend(problems)
    recomputed: Optional[float] = None
    if not problems:
        _, recomputed = evaluate_tour(instance, tour.targets)
        if report.incumbent_cost is None or abs(recomputed - report.incumbent_cost) > VERIFY_TOL:
            reasons.append("cost mismatch")
    reference = recomputed if recomputed is not None else report.incumbent_cost
    if (
        report.best_bound is not None
        and reference is not None
        and report.best_bound > reference + VERIFY_TOL
    ):
        reasons.append("bound exceeds incumbent")
    for reason in reasons:
        config.logger.warning("Verification failed: %s", reason)
    return Verdict(not reasons, tuple(reasons))
