"""
Solver-agnostic linear model representation and tours.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
import math
from pathlib import Path
import sys
from typing import Dict, NamedTuple, Optional, Tuple

# Project root added to the sys.path, so that scripts can be run unpackaged as well as packaged.
sys.path.append(str(Path(__file__).resolve().parent.parent))

# Local libraries
from ldtsp.classes.exceptions import ModelError


class VarKind(Enum):
    X = "x"  # edge selected
    ZETA = "z"  # tail mass times x
    ETA = "e"  # head mass times x
    MASS = "M"  # vehicle mass at a node (nonlinear model only)


class VarId(NamedTuple):
    """Variable identity. Edge kinds use (i, j); MASS uses (i, None)."""

    kind: VarKind
    i: int
    j: Optional[int] = None

    @property
    def name(self) -> str:
        if self.kind is VarKind.MASS:
            return f"M_{self.i}"
        return f"{self.kind.value}_{self.i}_{self.j}"

    @property
    def edge(self) -> Tuple[int, int]:
        return (self.i, self.j)

    @classmethod
    def x(cls, i: int, j: int) -> "VarId":
        return cls._edge(VarKind.X, i, j)

    @classmethod
    def zeta(cls, i: int, j: int) -> "VarId":
        return cls._edge(VarKind.ZETA, i, j)

    @classmethod
    def eta(cls, i: int, j: int) -> "VarId":
        return cls._edge(VarKind.ETA, i, j)

    @classmethod
    def mass(cls, i: int) -> "VarId":
        return cls(VarKind.MASS, i, None)

    @classmethod
    def _edge(cls, kind: VarKind, i: int, j: int) -> "VarId":
        if i == j:
            raise ModelError(f"self-loop {kind.value}_{i}_{j} is not a valid edge variable")
        return cls(kind, i, j)


class Sense(Enum):
    LE = "<="
    EQ = "="
    GE = ">="


@dataclass(frozen=True)
class LinearConstraint:
    """
    sum(coef * var) <sense> rhs, with a provenance tag such as
    "degree-out", "mass-drop" or "dfj".
    """

    terms: Tuple[Tuple[VarId, float], ...]
    sense: Sense
    rhs: float
    tag: str

    def __post_init__(self):
        terms = tuple((var, float(coef)) for var, coef in self.terms)
        object.__setattr__(self, "terms", terms)
        if not self.tag:
            raise ModelError("constraints must carry a provenance tag")
        seen = set()
        for var, coef in terms:
            if var in seen:
                raise ModelError(f"{var.name} appears twice in a {self.tag} row")
            if not math.isfinite(coef):
                raise ModelError(f"non-finite coefficient on {var.name} in a {self.tag} row")
            seen.add(var)
        if not math.isfinite(self.rhs):
            raise ModelError(f"non-finite right-hand side in a {self.tag} row")

    def activity(self, values: Dict[VarId, float]) -> float:
        return math.fsum(coef * values.get(var, 0.0) for var, coef in self.terms)

    def violation(self, values: Dict[VarId, float]) -> float:
        """How far `values` is from satisfying the row (0 when satisfied)."""
        lhs = self.activity(values)
        if self.sense is Sense.LE:
            return max(0.0, lhs - self.rhs)
        if self.sense is Sense.GE:
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)


@dataclass(frozen=True)
class Variable:
    var: VarId
    lb: float
    ub: float
    integer: bool = False


class ModelVariant(Enum):
    CORE_MILP = "core_milp"
    BASELINE1_MILP = "baseline1_milp"
    BASELINE2_MILP_DFJ = "baseline2_milp_dfj"
    MINLP = "minlp"

    @property
    def separates_dfj(self) -> bool:
        """Whether subtour cuts are added lazily while solving."""
        return self is ModelVariant.BASELINE2_MILP_DFJ

    @classmethod
    def from_name(cls, name: str) -> "ModelVariant":
        """Accepts full values and the short CLI names (core, baseline1, ...)."""
        short = {
            "core": cls.CORE_MILP,
            "baseline1": cls.BASELINE1_MILP,
            "baseline2": cls.BASELINE2_MILP_DFJ,
            "minlp": cls.MINLP,
        }
        key = name.strip().lower()
        if key in short:
            return short[key]
        return cls(key)


@dataclass(frozen=True)
class LinearModel:
    """
    Minimization model. `objective` holds linear terms; `quadratic` holds
    bilinear objective terms (var_a, var_b, coef) and is only non-empty for
    the nonlinear model.
    """

    variables: Tuple[Variable, ...]
    constraints: Tuple[LinearConstraint, ...]
    objective: Tuple[Tuple[VarId, float], ...]
    variant: ModelVariant
    quadratic: Tuple[Tuple[VarId, VarId, float], ...] = ()
    name: str = "ldtsp"
    objective_offset: float = field(default=0.0)

    def __post_init__(self):
        declared = set()
        for v in self.variables:
            if v.var in declared:
                raise ModelError(f"{v.var.name} declared twice")
            if not v.lb <= v.ub:
                raise ModelError(f"{v.var.name} has lb {v.lb} > ub {v.ub}")
            if v.integer and (v.lb, v.ub) != (0.0, 1.0):
                raise ModelError(f"binary {v.var.name} must have bounds [0, 1]")
            declared.add(v.var)
        referenced = [var for var, _ in self.objective]
        referenced += [var for row in self.constraints for var, _ in row.terms]
        referenced += [var for a, b, _ in self.quadratic for var in (a, b)]
        for var in referenced:
            if var not in declared:
                raise ModelError(f"{var.name} is used but not declared")

    @cached_property
    def index(self) -> Dict[VarId, int]:
        """Column position of each variable."""
        return {v.var: k for k, v in enumerate(self.variables)}

    @property
    def is_linear(self) -> bool:
        return not self.quadratic

    @property
    def separates_dfj(self) -> bool:
        return self.variant.separates_dfj

    def rows_tagged(self, tag: str) -> Tuple[LinearConstraint, ...]:
        return tuple(row for row in self.constraints if row.tag == tag)

    def objective_value(self, values: Dict[VarId, float]) -> float:
        linear = math.fsum(coef * values.get(var, 0.0) for var, coef in self.objective)
        bilinear = math.fsum(
            coef * values.get(a, 0.0) * values.get(b, 0.0) for a, b, coef in self.quadratic
        )
        return self.objective_offset + linear + bilinear

    def is_feasible(self, values: Dict[VarId, float], tol: float = 1e-9) -> bool:
        """Bound, integrality and row check of a full assignment."""
        for v in self.variables:
            value = values.get(v.var, 0.0)
            if value < v.lb - tol or value > v.ub + tol:
                return False
            if v.integer and abs(value - round(value)) > tol:
                return False
        return all(row.violation(values) <= tol for row in self.constraints)


@dataclass(frozen=True)
class Tour:
    """
    Depot-rooted tour. `sequence` starts and ends at the depot; `masses[k]`
    is the vehicle mass when departing sequence[k] (one entry per leg).
    """

    sequence: Tuple[int, ...]
    masses: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "sequence", tuple(int(i) for i in self.sequence))
        object.__setattr__(self, "masses", tuple(float(m) for m in self.masses))
        if len(self.sequence) < 3 or self.sequence[0] != self.sequence[-1]:
            raise ModelError("a tour must start and end at the depot and visit a target")
        if len(self.masses) != len(self.sequence) - 1:
            raise ModelError("a tour needs one departure mass per leg")

    @property
    def depot(self) -> int:
        return self.sequence[0]

    @property
    def targets(self) -> Tuple[int, ...]:
        """Visiting order without the depot."""
        return self.sequence[1:-1]

    @property
    def legs(self) -> Tuple[Tuple[int, int], ...]:
        return tuple(zip(self.sequence, self.sequence[1:]))

    def reversed(self) -> Tuple[int, ...]:
        return tuple(reversed(self.targets))
