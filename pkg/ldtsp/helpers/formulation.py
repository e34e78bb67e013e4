"""
Builds the LD-TSP models as LinearModel instances, evaluates tours under
the load-dependent cost and constructs subtour (DFJ) cuts.

Row tags:
 - degree-out / degree-in: one selected edge leaving / entering each node
 - depot-laden: zeta_Dj = (M + Mbar) x_Dj
 - depot-unladen: eta_jD = M x_jD
 - mass-drop: zeta_ij - eta_ij - m_j x_ij = 0 for target heads j
 - mass-flow: incoming eta equals outgoing zeta at each target
 - zeta-lower / zeta-upper / eta-lower / eta-upper: M x <= var <= (M + Mbar) x
 - zeta-tail-upper / zeta-tail-lower / eta-head-upper / eta-head-lower:
   the redundant tail/head rows of the first baseline
 - mass-drop-upper / mass-drop-lower: linearized absolute value of the
   nonlinear model
 - dfj: subtour cut
"""

from __future__ import annotations

import math
from pathlib import Path
import sys
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

# Project root added to the sys.path, so that scripts can be run unpackaged as well as packaged.
sys.path.append(str(Path(__file__).resolve().parent.parent))

# Local libraries
from ldtsp.classes.exceptions import ModelError
from ldtsp.classes.instance import Instance
from ldtsp.classes.model import (
    LinearConstraint,
    LinearModel,
    ModelVariant,
    Sense,
    Tour,
    VarId,
    VarKind,
    Variable,
)
from ldtsp.helpers.energy import edge_energy

INTEGRALITY_TOL = 1e-6


def _row(terms: Iterable[Tuple[VarId, float]], sense: Sense, rhs: float, tag: str):
    """Merges duplicate variables and drops zero coefficients."""
    merged: Dict[VarId, float] = {}
    for var, coef in terms:
        merged[var] = merged.get(var, 0.0) + coef
    return LinearConstraint(
        tuple((var, coef) for var, coef in merged.items() if coef != 0.0), sense, rhs, tag
    )


def _degree_rows(instance: Instance) -> List[LinearConstraint]:
    ids = instance.nodes.ids
    rows = [
        _row([(VarId.x(i, j), 1.0) for j in ids if j != i], Sense.EQ, 1.0, "degree-out")
        for i in ids
    ]
    rows += [
        _row([(VarId.x(i, j), 1.0) for i in ids if i != j], Sense.EQ, 1.0, "degree-in")
        for j in ids
    ]
    return rows


def build_milp(instance: Instance, variant: ModelVariant = ModelVariant.CORE_MILP) -> LinearModel:
    """
    Builds the mixed-integer linear model on the complete directed graph.

    Inputs:
     - instance (Instance)
     - variant (ModelVariant): core_milp, baseline1_milp (adds the tail/head
        rows) or baseline2_milp_dfj (same rows as baseline1; subtour cuts are
        separated lazily by the solver).

    Returns:
     - LinearModel with x binary and zeta, eta continuous in [0, M + Mbar].
    """
    if variant is ModelVariant.MINLP:
        raise ModelError("use build_minlp for the nonlinear model")
    depot = instance.depot
    ids = instance.nodes.ids
    edges = instance.edges()
    unladen = instance.unladen
    laden = instance.laden_mass
    dist = instance.distances

    variables = [Variable(VarId.x(i, j), 0.0, 1.0, True) for i, j in edges]
    variables += [Variable(VarId.zeta(i, j), 0.0, laden) for i, j in edges]
    variables += [Variable(VarId.eta(i, j), 0.0, laden) for i, j in edges]
    objective = tuple(
        (VarId.zeta(i, j), instance.alpha * dist(i, j)) for i, j in edges if dist(i, j) != 0.0
    )

    rows = _degree_rows(instance)
    for j in instance.targets:
        rows.append(
            _row(
                [(VarId.zeta(depot, j), 1.0), (VarId.x(depot, j), -laden)],
                Sense.EQ,
                0.0,
                "depot-laden",
            )
        )
    for j in instance.targets:
        rows.append(
            _row(
                [(VarId.eta(j, depot), 1.0), (VarId.x(j, depot), -unladen)],
                Sense.EQ,
                0.0,
                "depot-unladen",
            )
        )
    for i, j in edges:
        if j == depot:
            continue
        rows.append(
            _row(
                [
                    (VarId.zeta(i, j), 1.0),
                    (VarId.eta(i, j), -1.0),
                    (VarId.x(i, j), -instance.masses[j]),
                ],
                Sense.EQ,
                0.0,
                "mass-drop",
            )
        )
    for j in instance.targets:
        incoming = [(VarId.eta(i, j), 1.0) for i in ids if i != j]
        outgoing = [(VarId.zeta(j, k), -1.0) for k in ids if k != j]
        rows.append(_row(incoming + outgoing, Sense.EQ, 0.0, "mass-flow"))
    for kind, name in ((VarKind.ZETA, "zeta"), (VarKind.ETA, "eta")):
        for i, j in edges:
            var = VarId(kind, i, j)
            x = VarId.x(i, j)
            rows.append(_row([(x, unladen), (var, -1.0)], Sense.LE, 0.0, f"{name}-lower"))
            rows.append(_row([(var, 1.0), (x, -laden)], Sense.LE, 0.0, f"{name}-upper"))

    if variant in (ModelVariant.BASELINE1_MILP, ModelVariant.BASELINE2_MILP_DFJ):
        rows += _tail_head_rows(instance)

    return LinearModel(
        variables=tuple(variables),
        constraints=tuple(rows),
        objective=objective,
        variant=variant,
        name=instance.name or "ldtsp",
    )


def _tail_head_rows(instance: Instance) -> List[LinearConstraint]:
    """
    Per edge (i, j), with the tail mass written as the sum of zeta over the
    edges leaving i and the head mass as the sum of eta over edges entering j:
      zeta_ij <= sum_k zeta_ik - M + M x_ij
      zeta_ij >= sum_k zeta_ik + (M + Mbar)(x_ij - 1)
    and the same two rows for eta over the edges entering j.
    """
    ids = instance.nodes.ids
    unladen = instance.unladen
    laden = instance.laden_mass
    rows = []
    for i, j in instance.edges():
        x = VarId.x(i, j)
        tail = [(VarId.zeta(i, k), -1.0) for k in ids if k != i]
        rows.append(
            _row(
                [(VarId.zeta(i, j), 1.0), *tail, (x, -unladen)],
                Sense.LE,
                -unladen,
                "zeta-tail-upper",
            )
        )
        rows.append(
            _row(
                [(VarId.zeta(i, j), 1.0), *tail, (x, -laden)],
                Sense.GE,
                -laden,
                "zeta-tail-lower",
            )
        )
        head = [(VarId.eta(k, j), -1.0) for k in ids if k != j]
        rows.append(
            _row(
                [(VarId.eta(i, j), 1.0), *head, (x, -unladen)],
                Sense.LE,
                -unladen,
                "eta-head-upper",
            )
        )
        rows.append(
            _row(
                [(VarId.eta(i, j), 1.0), *head, (x, -laden)],
                Sense.GE,
                -laden,
                "eta-head-lower",
            )
        )
    return rows


def build_minlp(instance: Instance) -> LinearModel:
    """
    Builds the nonlinear model: x binary, node masses M_i continuous in
    [M, M + Mbar] (the depot's fixed at M + Mbar), the bilinear objective
    sum alpha d_ij M_i x_ij, and the mass-drop condition
    |M_i - M_j - m_j x_ij| <= Mbar (1 - x_ij) as two linear rows for every
    edge whose head is a target.

    The model is meant for export; it is not solved in-house.
    """
    depot = instance.depot
    edges = instance.edges()
    dist = instance.distances
    total = instance.total_mass
    laden = instance.laden_mass

    variables = [Variable(VarId.x(i, j), 0.0, 1.0, True) for i, j in edges]
    for i in instance.nodes.ids:
        if i == depot:
            variables.append(Variable(VarId.mass(i), laden, laden))
        else:
            variables.append(Variable(VarId.mass(i), instance.unladen, laden))

    rows = _degree_rows(instance)
    for i, j in edges:
        if j == depot:
            continue
        m_j = instance.masses[j]
        x = VarId.x(i, j)
        rows.append(
            _row(
                [(VarId.mass(i), 1.0), (VarId.mass(j), -1.0), (x, total - m_j)],
                Sense.LE,
                total,
                "mass-drop-upper",
            )
        )
        rows.append(
            _row(
                [(VarId.mass(i), -1.0), (VarId.mass(j), 1.0), (x, total + m_j)],
                Sense.LE,
                total,
                "mass-drop-lower",
            )
        )
    quadratic = tuple(
        (VarId.mass(i), VarId.x(i, j), instance.alpha * dist(i, j))
        for i, j in edges
        if dist(i, j) != 0.0
    )
    return LinearModel(
        variables=tuple(variables),
        constraints=tuple(rows),
        objective=(),
        variant=ModelVariant.MINLP,
        quadratic=quadratic,
        name=instance.name or "ldtsp",
    )


def dfj_cut(subset: Iterable[int], nodes: Sequence[int], depot: int) -> LinearConstraint:
    """
    Subtour cut: at least one selected edge leaves `subset`.

    Inputs:
     - subset (iterable of int): node ids, must contain the depot and must
        not be every node.
     - nodes (sequence of int): all node ids.
     - depot (int)

    Returns:
     - LinearConstraint tagged "dfj"
    """
    inside = set(subset)
    if depot not in inside:
        raise ModelError("a subtour cut set must contain the depot")
    if not inside < set(nodes):
        raise ModelError("a subtour cut set must be a proper subset of the nodes")
    terms = [(VarId.x(i, j), 1.0) for i in sorted(inside) for j in nodes if j not in inside]
    return LinearConstraint(tuple(terms), Sense.GE, 1.0, "dfj")


def mass_schedule(instance: Instance, sequence: Sequence[int]) -> Tuple[float, ...]:
    """
    Departure masses along depot -> sequence -> depot: the unladen mass plus
    every package not yet delivered.
    """
    remaining = [instance.masses[t] for t in sequence]
    return tuple(
        instance.unladen + math.fsum(remaining[k:]) for k in range(len(sequence) + 1)
    )


def evaluate_tour(instance: Instance, sequence: Sequence[int]) -> Tuple[Tour, float]:
    """
    Load-dependent cost of visiting the targets in `sequence`.

    Inputs:
     - instance (Instance)
     - sequence (sequence of int): a permutation of the target ids.

    Returns:
     - (Tour, cost) where cost = alpha * sum(departure mass * leg length).
    """
    sequence = tuple(int(t) for t in sequence)
    if sorted(sequence) != list(instance.targets):
        raise ModelError(
            f"sequence {list(sequence)} must visit each of the targets "
            f"{list(instance.targets)} exactly once"
        )
    masses = mass_schedule(instance, sequence)
    route = (instance.depot, *sequence, instance.depot)
    dist = instance.distances
    cost = math.fsum(
        edge_energy(instance.alpha, mass, dist(a, b))
        for mass, (a, b) in zip(masses, zip(route, route[1:]))
    )
    return Tour(sequence=route, masses=masses), cost


def validate_tour(instance: Instance, tour: Tour, tol: float = 1e-9) -> List[str]:
    """
    Checks that a tour is a single depot-rooted Hamiltonian cycle with the
    right mass schedule. Returns the list of problems (empty when valid).
    """
    problems = []
    if tour.depot != instance.depot or tour.sequence[-1] != instance.depot:
        problems.append("tour is not rooted at the depot")
    if sorted(tour.targets) != list(instance.targets):
        problems.append("tour does not visit every target exactly once")
        return problems
    expected = mass_schedule(instance, tour.targets)
    if any(abs(a - b) > tol for a, b in zip(expected, tour.masses)):
        problems.append("mass schedule does not match the packages delivered")
    return problems


def tour_solution(model: LinearModel, instance: Instance, tour: Tour) -> Dict[VarId, float]:
    """
    The full variable assignment a tour induces on `model`: x = 1 on the
    tour's legs, zeta_ij = M_i x_ij, eta_ij = M_j x_ij (M at the returning
    depot), and node masses for the nonlinear model.
    """
    node_mass = {node: mass for node, mass in zip(tour.sequence[:-1], tour.masses)}
    arrival = dict(node_mass)
    arrival[instance.depot] = instance.unladen
    legs = set(tour.legs)
    values: Dict[VarId, float] = {}
    for v in model.variables:
        var = v.var
        if var.kind is VarKind.MASS:
            values[var] = node_mass[var.i]
            continue
        on = 1.0 if var.edge in legs else 0.0
        if var.kind is VarKind.X:
            values[var] = on
        elif var.kind is VarKind.ZETA:
            values[var] = node_mass[var.i] * on
        else:
            values[var] = arrival[var.j] * on
    return values


def edge_values(model: LinearModel, solution: Sequence[float]) -> Dict[Tuple[int, int], float]:
    """x values by edge from a column-ordered solution vector."""
    return {
        v.var.edge: float(solution[k])
        for k, v in enumerate(model.variables)
        if v.var.kind is VarKind.X
    }


def successor_cycles(
    x_values: Mapping[Tuple[int, int], float], tol: float = INTEGRALITY_TOL
) -> Optional[List[List[int]]]:
    """
    Splits an integral edge selection into its cycles. Returns None when the
    selection is fractional or some node does not have exactly one selected
    outgoing and one selected incoming edge.
    """
    successor = {}
    indegree: Dict[int, int] = {}
    nodes = set()
    for (i, j), value in x_values.items():
        nodes.update((i, j))
        if abs(value - round(value)) > tol:
            return None
        if round(value) == 1:
            if i in successor:
                return None
            successor[i] = j
            indegree[j] = indegree.get(j, 0) + 1
    if set(successor) != nodes or any(indegree.get(n, 0) != 1 for n in nodes):
        return None
    cycles = []
    unvisited = set(nodes)
    while unvisited:
        start = min(unvisited)
        cycle = [start]
        unvisited.discard(start)
        node = successor[start]
        while node != start:
            cycle.append(node)
            unvisited.discard(node)
            node = successor[node]
        cycles.append(cycle)
    return cycles


def decode_tour(
    x_values: Mapping[Tuple[int, int], float], instance: Instance, tol: float = INTEGRALITY_TOL
) -> Optional[Tuple[int, ...]]:
    """
    Target visiting order encoded by an integral x, or None if x is
    fractional or does not form one Hamiltonian cycle.
    """
    cycles = successor_cycles(x_values, tol)
    if cycles is None or len(cycles) != 1 or len(cycles[0]) != instance.size:
        return None
    cycle = cycles[0]
    start = cycle.index(instance.depot)
    ordered = cycle[start:] + cycle[:start]
    return tuple(ordered[1:])
