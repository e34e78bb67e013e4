"""
Subtour (DFJ) cut separation by max-flow min-cut.
"""

# System libraries
import collections
from pathlib import Path
import sys
from typing import List, Mapping, NamedTuple, Optional, Tuple

import numpy as np

# Project root added to the sys.path, so that scripts can be run unpackaged as well as packaged.
sys.path.append(str(Path(__file__).resolve().parent.parent))

# Local libraries
from ldtsp.classes.config import Config
from ldtsp.classes.instance import Instance
from ldtsp.classes.model import LinearConstraint
from ldtsp.helpers.formulation import dfj_cut

FLOW_TOL = 1e-6
# Residual capacities below this are treated as saturated.
RESIDUAL_EPS = 1e-12


class MinCut(NamedTuple):
    flow: float
    source_side: Tuple[int, ...]


def _bfs(residual: np.ndarray, source: int, sink: int, parent: np.ndarray) -> bool:
    """Breadth-first search for an augmenting path; fills `parent`."""
    parent.fill(-1)
    visited = np.zeros(len(residual), dtype=bool)
    queue = collections.deque([source])
    visited[source] = True
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero((residual[u] > RESIDUAL_EPS) & ~visited):
            visited[v] = True
            parent[v] = u
            if v == sink:
                return True
            queue.append(v)
    return bool(visited[sink])


def _reachable(residual: np.ndarray, source: int) -> np.ndarray:
    visited = np.zeros(len(residual), dtype=bool)
    queue = collections.deque([source])
    visited[source] = True
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero((residual[u] > RESIDUAL_EPS) & ~visited):
            visited[v] = True
            queue.append(v)
    return visited


def max_flow_min_cut(capacity: np.ndarray, source: int, sink: int) -> Tuple[float, np.ndarray]:
    """
    Edmonds-Karp max-flow on a dense capacity matrix (0-based indices).

    Returns:
     - (flow value, boolean mask of the source side of a minimum cut)
    """
    residual = np.array(capacity, dtype=float)
    parent = np.full(len(residual), -1, dtype=int)
    flow = 0.0
    while _bfs(residual, source, sink, parent):
        path_flow = np.inf
        v = sink
        while v != source:
            u = parent[v]
            path_flow = min(path_flow, residual[u, v])
            v = u
        v = sink
        while v != source:
            u = parent[v]
            residual[u, v] -= path_flow
            residual[v, u] += path_flow
            v = u
        flow += path_flow
    return flow, _reachable(residual, source)


def depot_min_cut(
    x_values: Mapping[Tuple[int, int], float], instance: Instance, target: int
) -> MinCut:
    """Max-flow from the depot to `target` with capacities x_ij."""
    capacity = _capacity_matrix(x_values, instance.size)
    flow, side = max_flow_min_cut(capacity, instance.depot - 1, target - 1)
    return MinCut(flow, tuple(int(k) + 1 for k in np.flatnonzero(side)))


def _capacity_matrix(x_values, size):
    capacity = np.zeros((size, size))
    for (i, j), value in x_values.items():
        if value > 0:
            capacity[i - 1, j - 1] = value
    return capacity


def separate_dfj(
    x_values: Mapping[Tuple[int, int], float],
    instance: Instance,
    tol: float = FLOW_TOL,
    config: Optional[Config] = None,
) -> List[LinearConstraint]:
    """
    Finds violated subtour cuts in an edge solution.

    For each target t in ascending id order, computes the max-flow from the
    depot to t with capacities x_ij. When the flow is below 1 - tol, the
    source side S of the minimum cut gives the cut "at least one selected
    edge leaves S". Cuts with the same S are emitted once.

    Inputs:
     - x_values (dict): (i, j) -> x_ij in [0, 1]
     - instance (Instance)
     - tol (float): flow tolerance. Default: 1e-6
     - config (ldtsp.Config or None)

    Returns:
     - list of LinearConstraint tagged "dfj", in discovery order
    """
    if config is None:
        config = Config()
    capacity = _capacity_matrix(x_values, instance.size)
    depot = instance.depot
    nodes = instance.nodes.ids
    seen = set()
    cuts = []
    for target in instance.targets:
        flow, side = max_flow_min_cut(capacity, depot - 1, target - 1)
        if flow >= 1.0 - tol:
            continue
        subset = frozenset(int(k) + 1 for k in np.flatnonzero(side))
        if subset in seen:
            continue
        seen.add(subset)
        config.logger.debug(
            "DFJ cut: flow %.6g to target %s, S=%s", flow, target, sorted(subset)
        )
        cuts.append(dfj_cut(subset, nodes, depot))
    return cuts
