"""
Power model, trajectory integration and the energy/time identity.

The routing layer only ever needs `edge_energy`; the rest of this module
backs the claim that, at constant airspeed in a steady medium, expended
energy is an affine function of elapsed time and eastward displacement, so
a minimum-time path is also a minimum-energy path.
"""

from __future__ import annotations

import math
from pathlib import Path
import sys
from typing import NamedTuple, Optional

import numpy as np

# Project root added to the sys.path, so that scripts can be run unpackaged as well as packaged.
sys.path.append(str(Path(__file__).resolve().parent.parent))

# Local libraries
from ldtsp.classes.energy import (
    DragMode,
    DragParams,
    HeadingProfile,
    KinematicState,
    PowerModel,
)
from ldtsp.classes.exceptions import EnergyModelError


class Trajectory(NamedTuple):
    """Result of `simulate`; unpacks as (end, elapsed, energy)."""

    end: KinematicState
    elapsed: float
    energy: float


def drag_force(drag: DragParams, v0: float) -> float:
    """
    Magnitude of the dissipative force phi(V0) in newtons.
    """
    if drag.mode is DragMode.AERODYNAMIC:
        return 0.5 * drag.rho * drag.cd * drag.af * v0 * v0
    if drag.mode is DragMode.ROLLING:
        return drag.mass * drag.g * drag.fr
    return drag.a + drag.b * drag.mass


def build_power_model(drag: DragParams, v0: float, vw: float = 0.0) -> PowerModel:
    """
    Builds the power model P(theta) = p0 + p1*cos(theta).

    Inputs:
     - drag (DragParams): drag law and its constants.
     - v0 (float): speed relative to the medium, m/s. Must be > 0.
     - vw (float): eastward medium speed, m/s. Must satisfy 0 <= vw < v0,
        otherwise the agent cannot make headway against the medium.

    Returns:
     - PowerModel with phi, p0 = phi*v0 and p1 = phi*vw.
    """
    if not (math.isfinite(v0) and v0 > 0):
        raise EnergyModelError(f"v0 must be strictly positive, got {v0}")
    if not (math.isfinite(vw) and vw >= 0):
        raise EnergyModelError(f"vw must be nonnegative, got {vw}")
    if vw >= v0:
        raise EnergyModelError(
            f"medium speed vw={vw} must be below v0={v0} to keep the agent controllable"
        )
    phi = drag_force(drag, v0)
    return PowerModel(v0=v0, vw=vw, phi=phi, p0=phi * v0, p1=phi * vw)


def instantaneous_power(model: PowerModel, theta):
    """
    Power drawn at heading theta (radians, 0 = east, downwind). theta may be
    a float or an array of headings.
    """
    return model.p0 + model.p1 * np.cos(theta)


def _midpoints(duration: float, dt: float):
    n_full = int(math.floor(duration / dt))
    steps = np.full(n_full, dt, dtype=float)
    remainder = duration - n_full * dt
    if remainder > 1e-12 * duration:
        steps = np.append(steps, remainder)
    left = np.concatenate(([0.0], np.cumsum(steps)[:-1]))
    return left + 0.5 * steps, steps


def simulate(
    model: PowerModel,
    profile: Optional[HeadingProfile],
    start: KinematicState,
    dt: float,
) -> Trajectory:
    """
    Integrates x' = v0*cos(theta) + vw, y' = v0*sin(theta) and the power
    along a heading profile with the fixed-step midpoint rule (second order).
    The last step is shortened when dt does not divide the duration.

    Inputs:
     - model (PowerModel)
     - profile (HeadingProfile): piecewise-linear heading.
     - start (KinematicState): initial pose.
     - dt (float): step, 0 < dt <= duration/10.

    Returns:
     - Trajectory(end, elapsed, energy)
    """
    if profile is None or not profile.samples:
        raise EnergyModelError("cannot simulate an empty heading profile")
    duration = profile.duration
    if not (dt > 0 and dt <= duration / 10):
        raise EnergyModelError(
            f"step dt={dt} must satisfy 0 < dt <= duration/10 = {duration / 10}"
        )

    mid, steps = _midpoints(duration, dt)
    theta = np.interp(mid, profile.times, profile.headings)
    cos_integral = float(np.dot(np.cos(theta), steps))
    sin_integral = float(np.dot(np.sin(theta), steps))

    end = KinematicState(
        x=start.x + model.v0 * cos_integral + model.vw * duration,
        y=start.y + model.v0 * sin_integral,
        theta=profile.headings[-1],
    )
    energy = float(np.dot(instantaneous_power(model, theta), steps))
    return Trajectory(end=end, elapsed=duration, energy=energy)


def energy_identity_residual(
    model: PowerModel,
    profile: HeadingProfile,
    start: KinematicState,
    dt: float,
) -> float:
    """
    Absolute gap between simulated energy and the affine prediction
    (p0 - p1*vw/v0)*T + (p1/v0)*(x_end - x_start). The identity holds for any
    trajectory, optimal or not.
    """
    end, elapsed, energy = simulate(model, profile, start, dt)
    predicted = (
        model.time_coefficient * elapsed
        + model.displacement_coefficient * (end.x - start.x)
    )
    return abs(energy - predicted)


def edge_energy(alpha: float, mass: float, distance: float) -> float:
    """
    Energy to move `mass` over `distance` in a still medium: alpha*mass*distance.
    """
    if not alpha > 0:
        raise EnergyModelError(f"alpha must be positive, got {alpha}")
    if mass < 0 or distance < 0:
        raise EnergyModelError("mass and distance must be nonnegative")
    return alpha * mass * distance


def alpha_from_power(model: PowerModel, nominal_mass: float) -> float:
    """
    Energy per unit mass per unit distance implied by a still-medium power
    model: an edge of length d takes d/v0 seconds at p0 watts for the nominal
    mass, and cost scales linearly with mass.
    """
    if model.vw != 0:
        raise EnergyModelError("alpha is only defined for a still medium (vw=0)")
    if not nominal_mass > 0:
        raise EnergyModelError("nominal mass must be positive")
    return model.p0 / (model.v0 * nominal_mass)


def edge_energy_from_power(
    model: PowerModel, mass: float, nominal_mass: float, distance: float
) -> float:
    """Straight-line edge energy at `mass`, scaled from the nominal-mass cost."""
    nominal_cost = model.p0 * distance / model.v0
    return nominal_cost * mass / nominal_mass


def random_profile(
    rng: np.random.Generator, breakpoints: int = 20, duration: float = 10.0
) -> HeadingProfile:
    """
    Random piecewise-linear heading profile with `breakpoints` samples,
    headings uniform in [-pi, pi).
    """
    if breakpoints < 2:
        raise EnergyModelError("a profile needs at least two breakpoints")
    interior = np.sort(rng.uniform(0.0, duration, size=breakpoints - 2))
    times = np.concatenate(([0.0], interior, [duration]))
    if np.any(np.diff(times) <= 0):
        times = np.linspace(0.0, duration, breakpoints)
    headings = rng.uniform(-math.pi, math.pi, size=breakpoints)
    return HeadingProfile(tuple(zip(times.tolist(), headings.tolist())))
