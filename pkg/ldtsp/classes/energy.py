"""
Value classes for the vehicle power model and trajectory simulation.

Units are SI throughout: metres, seconds, kilograms, newtons, watts, joules.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
import math
from pathlib import Path
import sys
from typing import Tuple

# Project root added to the sys.path, so that scripts can be run unpackaged as well as packaged.
sys.path.append(str(Path(__file__).resolve().parent.parent))

# Local libraries
from ldtsp.classes.exceptions import EnergyModelError


class DragMode(Enum):
    """How the dissipative force magnitude phi(V0) is obtained."""

    AERODYNAMIC = "aerodynamic"  # 0.5 * rho * cd * af * v0**2
    ROLLING = "rolling"  # mass * g * fr
    AFFINE = "affine"  # a + b * mass


@dataclass(frozen=True)
class DragParams:
    """
    Drag parameters. Only the fields used by `mode` are validated; the
    others are ignored.

    Fields:
     - mode (DragMode)
     - rho (float): fluid density, kg/m^3
     - cd (float): drag coefficient
     - af (float): frontal area, m^2
     - fr (float): rolling-resistance coefficient
     - g (float): gravitational acceleration, m/s^2
     - mass (float): nominal mass M, kg
     - a, b (float): intercept (N) and slope (N/kg) of an affine drag law
    """

    mode: DragMode = DragMode.AERODYNAMIC
    rho: float = 1.225
    cd: float = 1.0
    af: float = 0.1
    fr: float = 0.01
    g: float = 9.81
    mass: float = 1.0
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if not isinstance(self.mode, DragMode):
            object.__setattr__(self, "mode", DragMode(self.mode))
        if self.mode is DragMode.AERODYNAMIC:
            active = {"rho": self.rho, "cd": self.cd, "af": self.af}
        elif self.mode is DragMode.ROLLING:
            active = {"mass": self.mass, "g": self.g, "fr": self.fr}
        else:
            active = {"mass": self.mass, "b": self.b}
            if not (math.isfinite(self.a) and self.a >= 0):
                raise EnergyModelError(f"affine intercept a must be >= 0, got {self.a}")
        for name, value in active.items():
            if not (math.isfinite(value) and value > 0):
                raise EnergyModelError(
                    f"{name} must be strictly positive in {self.mode.value} mode, got {value}"
                )


@dataclass(frozen=True)
class PowerModel:
    """
    Dissipated power P(theta) = p0 + p1 * cos(theta) for an agent moving at
    speed v0 relative to a medium that flows east at vw.
    """

    v0: float
    vw: float
    phi: float
    p0: float
    p1: float

    @property
    def min_power(self) -> float:
        """Smallest instantaneous power over all headings (p0 - p1)."""
        return self.p0 - self.p1

    @property
    def time_coefficient(self) -> float:
        """Energy per second of the affine energy identity, p0 - p1*vw/v0."""
        return self.p0 - self.p1 * self.vw / self.v0

    @property
    def displacement_coefficient(self) -> float:
        """Energy per metre of eastward displacement, p1/v0."""
        return self.p1 / self.v0


@dataclass(frozen=True)
class HeadingProfile:
    """
    Piecewise-linear heading theta(t) through the breakpoints in `samples`,
    each a (time, heading) pair. The turn rate u(t) is piecewise constant.
    """

    samples: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        samples = tuple((float(t), float(theta)) for t, theta in self.samples)
        object.__setattr__(self, "samples", samples)
        if len(samples) < 2:
            raise EnergyModelError("a heading profile needs at least two breakpoints")
        if samples[0][0] != 0.0:
            raise EnergyModelError("heading profile must start at t=0")
        for (t_prev, _), (t_next, _) in zip(samples, samples[1:]):
            if not t_next > t_prev:
                raise EnergyModelError("heading profile times must be strictly increasing")
        for t, theta in samples:
            if not (math.isfinite(t) and math.isfinite(theta)):
                raise EnergyModelError("heading profile values must be finite")

    @property
    def duration(self) -> float:
        return self.samples[-1][0]

    @property
    def times(self) -> Tuple[float, ...]:
        return tuple(t for t, _ in self.samples)

    @property
    def headings(self) -> Tuple[float, ...]:
        return tuple(theta for _, theta in self.samples)

    @classmethod
    def constant(cls, theta: float, duration: float) -> "HeadingProfile":
        return cls(((0.0, theta), (duration, theta)))


@dataclass(frozen=True)
class KinematicState:
    """
    Planar pose. `theta` is carried through simulation but boundary headings
    are never imposed as constraints.
    """

    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.theta)):
            raise EnergyModelError("kinematic state must be finite")
