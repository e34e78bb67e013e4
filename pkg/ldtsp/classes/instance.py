"""
Node sets, distance matrices and LD-TSP instances.

Node ids are 1-based and contiguous; matrix row/column k holds node id k+1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
import math
from pathlib import Path
import sys
from typing import Dict, Optional, Tuple

import numpy as np

# Project root added to the sys.path, so that scripts can be run unpackaged as well as packaged.
sys.path.append(str(Path(__file__).resolve().parent.parent))

# Local libraries
from ldtsp.classes.exceptions import InstanceError


class Metric(Enum):
    """Distance conventions. Values are the native file keywords."""

    EUCLID_EXACT = "EUC_2D_EXACT"
    EUCLID_TSPLIB_ROUNDED = "EUC_2D_ROUND"
    GEO_TSPLIB = "GEO"


@dataclass(frozen=True)
class NodeSet:
    """
    Ordered node coordinates: `coords` is a tuple of (id, x, y) with ids
    1..N in order. For the GEO metric x is latitude and y longitude in
    TSPLIB's DDD.MM encoding.
    """

    coords: Tuple[Tuple[int, float, float], ...]
    metric: Metric = Metric.EUCLID_EXACT
    name: str = "unnamed"

    def __post_init__(self):
        coords = tuple((int(i), float(x), float(y)) for i, x, y in self.coords)
        object.__setattr__(self, "coords", coords)
        if not isinstance(self.metric, Metric):
            object.__setattr__(self, "metric", Metric(self.metric))
        if len(coords) < 2:
            raise InstanceError("a node set needs at least two nodes")
        for expected, (node_id, x, y) in enumerate(coords, start=1):
            if node_id != expected:
                raise InstanceError(
                    f"node ids must be contiguous from 1; expected {expected}, got {node_id}"
                )
            if not (math.isfinite(x) and math.isfinite(y)):
                raise InstanceError(f"node {node_id} has a non-finite coordinate")

    def __len__(self) -> int:
        return len(self.coords)

    @property
    def ids(self) -> Tuple[int, ...]:
        return tuple(node_id for node_id, _, _ in self.coords)

    def xy(self) -> np.ndarray:
        """N x 2 array of coordinates."""
        return np.array([[x, y] for _, x, y in self.coords], dtype=float)


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Read-only N x N distance table indexed by id-1."""

    d: np.ndarray

    def __post_init__(self):
        d = np.array(self.d, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise InstanceError("distance matrix must be square")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise InstanceError("distances must be finite and nonnegative")
        if np.any(np.diag(d) != 0):
            raise InstanceError("distance matrix must have a zero diagonal")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)

    def __len__(self) -> int:
        return self.d.shape[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, DistanceMatrix) and np.array_equal(self.d, other.d)

    def __call__(self, i: int, j: int) -> float:
        """Distance between node ids i and j."""
        return float(self.d[i - 1, j - 1])

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.d, self.d.T))


@dataclass(frozen=True)
class Instance:
    """
    An LD-TSP instance.

    Fields:
     - nodes (NodeSet)
     - depot (int): depot node id; carries no package.
     - masses (dict): target id -> package mass m_t > 0.
     - unladen (float): vehicle mass with no packages aboard, M >= 0.
     - alpha (float): energy per unit mass per unit distance, > 0.
     - gamma (float or None): unladen mass factor M / sum(m_t), when M was
        derived from it.
    """

    nodes: NodeSet
    depot: int
    masses: Dict[int, float]
    unladen: float
    alpha: float = 0.1
    gamma: Optional[float] = None
    name: str = field(default="")

    def __post_init__(self):
        object.__setattr__(
            self, "masses", {int(k): float(v) for k, v in sorted(self.masses.items())}
        )
        if not self.name:
            object.__setattr__(self, "name", self.nodes.name)
        ids = set(self.nodes.ids)
        if self.depot not in ids:
            raise InstanceError(f"depot {self.depot} is not a node id")
        if self.depot in self.masses:
            raise InstanceError("the depot cannot carry a package mass")
        missing = ids - {self.depot} - set(self.masses)
        if missing:
            raise InstanceError(f"targets without a mass: {sorted(missing)}")
        extra = set(self.masses) - ids
        if extra:
            raise InstanceError(f"masses given for unknown nodes: {sorted(extra)}")
        for node_id, mass in self.masses.items():
            if not (math.isfinite(mass) and mass > 0):
                raise InstanceError(
                    f"target {node_id} has mass {mass}; every package mass must be > 0"
                )
        if not (math.isfinite(self.unladen) and self.unladen >= 0):
            raise InstanceError(f"unladen mass must be >= 0, got {self.unladen}")
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise InstanceError(f"alpha must be > 0, got {self.alpha}")
        if self.gamma is not None:
            if abs(self.unladen - self.gamma * self.total_mass) > 1e-9:
                raise InstanceError(
                    f"unladen mass {self.unladen} does not equal gamma {self.gamma} "
                    f"times total package mass {self.total_mass}"
                )

    def __hash__(self):
        return hash((self.nodes, self.depot, tuple(self.masses.items()), self.unladen))

    @property
    def size(self) -> int:
        """N, the number of nodes including the depot."""
        return len(self.nodes)

    @property
    def targets(self) -> Tuple[int, ...]:
        """Target ids in ascending order."""
        return tuple(i for i in self.nodes.ids if i != self.depot)

    @property
    def total_mass(self) -> float:
        """Sum of package masses, M-bar."""
        return math.fsum(self.masses.values())

    @property
    def laden_mass(self) -> float:
        """Departure mass at the depot, M + M-bar."""
        return self.unladen + self.total_mass

    @cached_property
    def distances(self) -> DistanceMatrix:
        # Deferred import: the helper module imports this one.
        from ldtsp.helpers.tsplib import compute_distances

        return compute_distances(self.nodes)

    def edges(self) -> Tuple[Tuple[int, int], ...]:
        """The complete directed edge set in (tail, head) lexicographic order."""
        ids = self.nodes.ids
        return tuple((i, j) for i in ids for j in ids if i != j)
