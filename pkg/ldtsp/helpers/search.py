"""
A*-style tree search over partial delivery sequences, used as a benchmark
against branch and bound.

A state is (delivered set, current node). g is the load-dependent cost of
the prefix; h is alpha * M * MST(current + undelivered + depot). Every
remaining leg is flown at mass >= M and the remaining closed walk is at
least as long as that spanning tree, so h never overestimates; it is also
consistent, so the first expansion of a state is final. With M = 0 the
search is uniform-cost.
"""

import heapq
import math
from pathlib import Path
import sys
import time
from typing import Dict, Optional, Tuple

import numpy as np

# Project root added to the sys.path, so that scripts can be run unpackaged as well as packaged.
sys.path.append(str(Path(__file__).resolve().parent.parent))

# Local libraries
from ldtsp.classes.config import Config
from ldtsp.classes.instance import Instance
from ldtsp.classes.solver import SolveConfig, SolveEvent, SolveReport, SolveStatus
from ldtsp.helpers.formulation import evaluate_tour
from ldtsp.helpers.general import gap_percent
from ldtsp.helpers.heuristics import warm_start


def mst_length(d: np.ndarray, nodes) -> float:
    """Prim's algorithm on the complete graph over `nodes` (0-based)."""
    nodes = list(nodes)
    if len(nodes) < 2:
        return 0.0
    sub = d[np.ix_(nodes, nodes)]
    in_tree = np.zeros(len(nodes), dtype=bool)
    in_tree[0] = True
    best = sub[0].copy()
    total = 0.0
    for _ in range(len(nodes) - 1):
        candidates = np.where(in_tree, np.inf, best)
        k = int(np.argmin(candidates))
        total += candidates[k]
        in_tree[k] = True
        best = np.minimum(best, sub[k])
    return float(total)


class _Heuristic:
    """Cached alpha * M * MST bound; identically zero when M = 0."""

    def __init__(self, instance: Instance, targets):
        self.scale = instance.alpha * instance.unladen
        self.d = instance.distances.d
        self.depot = instance.depot - 1
        self.index = [t - 1 for t in targets]
        self.cache: Dict[Tuple[int, int], float] = {}

    def __call__(self, mask: int, current: int) -> float:
        if self.scale == 0.0:
            return 0.0
        key = (mask, current)
        if key not in self.cache:
            remaining = [k for b, k in enumerate(self.index) if not mask >> b & 1]
            nodes = {current, self.depot, *remaining}
            self.cache[key] = self.scale * mst_length(self.d, sorted(nodes))
        return self.cache[key]


def astar_search(
    instance: Instance, config: Optional[SolveConfig] = None, log_config=None
) -> SolveReport:
    """
    Best-first search over delivery prefixes.

    Heap entries are ordered by (f, -depth, prefix) so the expansion order is
    fully deterministic. Completed prefixes are pushed with their return leg
    and h = 0; the first one popped is optimal.

    Inputs:
     - instance (Instance)
     - config (SolveConfig or None): time_limit, max_open and warm_start are
        used. On a limit the warm start (when enabled) is the incumbent.
     - log_config (ldtsp.Config or None)

    Returns:
     - SolveReport with method "astar"
    """
    config = config or SolveConfig()
    log = log_config or Config()
    start_time = time.perf_counter()
    targets = instance.targets
    n = len(targets)
    full = (1 << n) - 1
    d = instance.distances.d
    depot = instance.depot - 1
    alpha = instance.alpha
    masses = [instance.masses[t] for t in targets]
    heuristic = _Heuristic(instance, targets)

    # (f, -depth, prefix, g, mask, current, terminal)
    open_list = [(heuristic(0, depot), 0, (), 0.0, 0, depot, False)]
    closed: Dict[Tuple[int, int], float] = {}
    expanded = 0
    status = None
    result = None

    while open_list:
        if time.perf_counter() - start_time >= config.time_limit:
            status = SolveStatus.FEASIBLE_TIME_LIMIT
            break
        if len(open_list) > config.max_open:
            status = SolveStatus.NODE_LIMIT
            break
        f, _, prefix, g, mask, current, terminal = heapq.heappop(open_list)
        if terminal:
            result = (prefix, f)
            break
        key = (mask, current)
        if key in closed and closed[key] <= g:
            continue
        closed[key] = g
        expanded += 1

        onboard = instance.laden_mass - math.fsum(masses[b] for b in range(n) if mask >> b & 1)
        if mask == full:
            total = g + alpha * instance.unladen * d[current, depot]
            heapq.heappush(open_list, (total, -(n + 1), prefix, total, mask, depot, True))
            continue
        for b in range(n):
            if mask >> b & 1:
                continue
            nxt = targets[b] - 1
            g_next = g + alpha * onboard * d[current, nxt]
            mask_next = mask | (1 << b)
            known = closed.get((mask_next, nxt))
            if known is not None and known <= g_next:
                continue
            h = heuristic(mask_next, nxt)
            heapq.heappush(
                open_list,
                (g_next + h, -(len(prefix) + 1), prefix + (targets[b],), g_next, mask_next, nxt, False),
            )

    wall = time.perf_counter() - start_time
    if result is not None:
        tour, cost = evaluate_tour(instance, result[0])
        bound = min(result[1], cost)
        status = SolveStatus.OPTIMAL
    else:
        tour, cost = warm_start(instance) if config.warm_start else (None, None)
        bound = open_list[0][0] if open_list else 0.0
        if cost is not None:
            bound = min(bound, cost)
        if status is None:
            status = SolveStatus.INFEASIBLE

    gap = None
    if cost is not None:
        gap = gap_percent(cost, bound) if cost > 0 else 0.0
    event = SolveEvent(wall, expanded, bound, cost, gap)
    log.logger.info("%s", event)
    report = SolveReport(
        status=status,
        incumbent=tour,
        incumbent_cost=cost,
        best_bound=bound,
        gap_percent=gap,
        nodes_explored=expanded,
        cuts_added=0,
        lp_iterations=0,
        wall_time=wall,
        root_bound=heuristic(0, depot),
        method="astar",
        events=[event],
    )
    log.logger.info("%s", report.summary())
    return report
