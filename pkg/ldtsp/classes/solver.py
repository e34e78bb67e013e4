"""
Branch and bound over the MILP relaxation, with lazy subtour cuts for the
second baseline.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
import heapq
import itertools
import math
from pathlib import Path
import sys
import time
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np

# Project root added to the sys.path, so that scripts can be run unpackaged as well as packaged.
sys.path.append(str(Path(__file__).resolve().parent.parent))

# Local libraries
from ldtsp.classes.config import Config
from ldtsp.classes.exceptions import SolverError
from ldtsp.classes.instance import Instance
from ldtsp.classes.lp import LpBasis, LpConfig, LpProblem, LpStatus, fix_variables, solve_lp
from ldtsp.classes.model import LinearConstraint, ModelVariant, Tour, VarKind
from ldtsp.helpers.formulation import (
    INTEGRALITY_TOL,
    build_milp,
    decode_tour,
    dfj_cut,
    evaluate_tour,
    successor_cycles,
)
from ldtsp.helpers.general import gap_percent
from ldtsp.helpers.heuristics import warm_start as heuristic_warm_start
from ldtsp.helpers.separation import separate_dfj


class NodeSelection(Enum):
    BEST_BOUND = "best_bound"
    DEPTH_FIRST = "depth_first"


class BranchRule(Enum):
    MOST_FRACTIONAL = "most_fractional"
    PSEUDO_FIRST = "pseudo_first"


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    FEASIBLE_TIME_LIMIT = "feasible_time_limit"
    INFEASIBLE = "infeasible"
    NODE_LIMIT = "node_limit"


@dataclass(frozen=True)
class SolveConfig:
    """
    Fields:
     - variant (ModelVariant): core_milp, baseline1_milp or baseline2_milp_dfj.
     - time_limit (float): seconds, > 0.
     - gap_tolerance (float): relative pruning tolerance. Default: 1e-6
     - warm_start (bool): seed the incumbent from the distance heuristic.
     - node_selection (NodeSelection)
     - branch_rule (BranchRule)
     - seed (int): tie-break seed for pseudo-cost branching; recorded in results.
     - max_nodes (int): node limit.
     - dive_interval (int): every k-th expansion takes the most recent node
        instead of the best bound one (best_bound selection only).
     - max_open (int): open-list limit for the A* search.
     - max_cut_rounds (int): separation rounds per node (second baseline).
     - workers (int): > 1 evaluates node LPs concurrently.
     - lp (LpConfig)
    """

    variant: ModelVariant = ModelVariant.CORE_MILP
    time_limit: float = 60.0
    gap_tolerance: float = 1e-6
    warm_start: bool = True
    node_selection: NodeSelection = NodeSelection.BEST_BOUND
    branch_rule: BranchRule = BranchRule.MOST_FRACTIONAL
    seed: int = 0
    max_nodes: int = 1_000_000
    dive_interval: int = 10
    max_open: int = 2_000_000
    max_cut_rounds: int = 50
    workers: int = 1
    lp: LpConfig = field(default_factory=LpConfig)

    def __post_init__(self):
        if isinstance(self.variant, str):
            object.__setattr__(self, "variant", ModelVariant.from_name(self.variant))
        if isinstance(self.node_selection, str):
            object.__setattr__(self, "node_selection", NodeSelection(self.node_selection))
        if isinstance(self.branch_rule, str):
            object.__setattr__(self, "branch_rule", BranchRule(self.branch_rule))
        if not self.time_limit > 0:
            raise ValueError(f"time_limit must be > 0, got {self.time_limit}")
        if not self.gap_tolerance >= 0:
            raise ValueError(f"gap_tolerance must be >= 0, got {self.gap_tolerance}")
        if self.max_nodes < 1 or self.max_open < 1:
            raise ValueError("max_nodes and max_open must be >= 1")
        if self.dive_interval < 1 or self.max_cut_rounds < 0 or self.workers < 1:
            raise ValueError("dive_interval and workers must be >= 1, max_cut_rounds >= 0")


class SolveEvent(NamedTuple):
    """An incumbent or bound improvement."""

    elapsed: float
    nodes: int
    bound: float
    incumbent: Optional[float]
    gap: Optional[float]

    def __str__(self):
        incumbent = "inf" if self.incumbent is None else f"{self.incumbent:.10g}"
        gap = "inf" if self.gap is None else f"{self.gap:.6g}"
        return (
            f"t={self.elapsed:.3f} nodes={self.nodes} bound={self.bound:.10g} "
            f"incumbent={incumbent} gap={gap}"
        )


@dataclass
class SolveReport:
    status: SolveStatus
    incumbent: Optional[Tour]
    incumbent_cost: Optional[float]
    best_bound: float
    gap_percent: Optional[float]
    nodes_explored: int
    cuts_added: int
    lp_iterations: int
    wall_time: float
    root_bound: Optional[float] = None
    method: str = "core_milp"
    events: List[SolveEvent] = field(default_factory=list, repr=False)

    def summary(self) -> str:
        cost = "-" if self.incumbent_cost is None else f"{self.incumbent_cost:.10g}"
        gap = "-" if self.gap_percent is None else f"{self.gap_percent:.4f}%"
        return (
            f"status={self.status.value} cost={cost} bound={self.best_bound:.10g} "
            f"gap={gap} nodes={self.nodes_explored} cuts={self.cuts_added} "
            f"time={self.wall_time:.3f}s"
        )

    def to_row(self, instance: Instance, seed: int = 0) -> dict:
        """One results CSV row (see ldtsp.helpers.general.RESULT_COLUMNS)."""
        return {
            "instance": instance.name,
            "variant": self.method,
            "gamma": instance.gamma,
            "alpha": instance.alpha,
            "seed": seed,
            "status": self.status.value,
            "cost": self.incumbent_cost,
            "bound": self.best_bound,
            "gap_pct": self.gap_percent,
            "nodes": self.nodes_explored,
            "cuts": self.cuts_added,
            "lp_iters": self.lp_iterations,
            "wall_s": round(self.wall_time, 6),
        }


@dataclass
class BnBNode:
    """
    Fields:
     - fixings (dict): LP column -> 0.0 or 1.0, x columns only.
     - bound (float): lower bound inherited from the parent LP.
     - depth (int)
     - node_id (int): creation order.
     - branch (tuple or None): (column, value, parent fractional value) of the
        decision that created the node; feeds pseudo-costs.
     - parent_id (int or None)
     - basis (LpBasis or None): parent's final LP basis, without tableau.
    """

    fixings: Dict[int, float]
    bound: float
    depth: int
    node_id: int
    branch: Optional[Tuple[int, float, float]] = None
    parent_id: Optional[int] = None
    basis: Optional[LpBasis] = None


class _Evaluation(NamedTuple):
    status: LpStatus
    objective: float
    x: Optional[np.ndarray]
    iterations: int
    cuts: Tuple[LinearConstraint, ...]
    basis: Optional[LpBasis] = None


class BranchAndBound:
    """
    Best-first branch and bound on x.

    Node LPs are the root relaxation plus the node's fixings plus every cut
    in the global pool. Fixing x_ij = 1 also fixes the other edges leaving i
    and entering j to 0.
    """

    def __init__(self, instance: Instance, config: Optional[SolveConfig] = None, log_config=None):
        self.instance = instance
        self.config = config or SolveConfig()
        self.log = log_config or Config()
        if self.config.variant is ModelVariant.MINLP:
            raise SolverError("the nonlinear model is export-only; pick a MILP variant")
        self.model = build_milp(instance, self.config.variant)
        self.root_problem = LpProblem.from_model(self.model)
        self.index = self.model.index
        self.x_columns = np.array(
            [k for k, v in enumerate(self.model.variables) if v.var.kind is VarKind.X], dtype=int
        )
        self.edge_of = {int(k): self.model.variables[k].var.edge for k in self.x_columns}
        self.column_of = {edge: k for k, edge in self.edge_of.items()}
        self.out_columns: Dict[int, List[int]] = {i: [] for i in instance.nodes.ids}
        self.in_columns: Dict[int, List[int]] = {i: [] for i in instance.nodes.ids}
        for k, (i, j) in self.edge_of.items():
            self.out_columns[i].append(k)
            self.in_columns[j].append(k)

        self.pool: List[LinearConstraint] = []
        self.pool_keys = set()
        self._pool_problem = self.root_problem
        self._pool_size = 0

        self.incumbent: Optional[Tour] = None
        self.incumbent_cost = math.inf
        # Costs are nonnegative, so 0 is a valid bound before any LP is solved.
        self.reported_bound = 0.0
        self.pruned_floor = math.inf
        self.events: List[SolveEvent] = []
        self.nodes_explored = 0
        self.lp_iterations = 0
        self.root_bound: Optional[float] = None
        self.pseudo = {}
        self.rng = np.random.default_rng(self.config.seed)
        self._ids = itertools.count()
        self._start = 0.0
        self._deadline: Optional[float] = None
        self._stopped_by_clock = False
        # (node_id, basis with tableau) of the last node that branched.
        self._last_basis: Optional[Tuple[int, LpBasis]] = None

    # Cut pool ----------------------------------------------------------

    def _cut_key(self, cut: LinearConstraint):
        return (frozenset(var for var, _ in cut.terms), cut.sense, cut.rhs)

    def _add_cuts(self, cuts) -> int:
        added = 0
        for cut in cuts:
            key = self._cut_key(cut)
            if key in self.pool_keys:
                continue
            self.pool_keys.add(key)
            self.pool.append(cut)
            added += 1
        return added

    def _problem(self, pool: List[LinearConstraint]) -> LpProblem:
        if len(pool) != self._pool_size:
            self._pool_problem = self.root_problem.with_rows(pool, self.index)
            self._pool_size = len(pool)
        return self._pool_problem

    # Node evaluation ---------------------------------------------------

    def _x_values(self, x: np.ndarray) -> Dict[Tuple[int, int], float]:
        return {self.edge_of[int(k)]: float(x[k]) for k in self.x_columns}

    def _start_basis(self, node: BnBNode) -> Optional[LpBasis]:
        """The parent's full basis, tableau included, when it is still cached."""
        cached = self._last_basis
        if cached is not None and node.parent_id is not None and cached[0] == node.parent_id:
            return cached[1]
        return node.basis

    def _evaluate(self, node: BnBNode, base: LpProblem) -> _Evaluation:
        """Solves a node LP; for the second baseline, separates and re-solves."""
        lp_config = self.config.lp
        problem = fix_variables(base, node.fixings)
        start = self._start_basis(node)
        result = solve_lp(problem, lp_config, start=start, deadline=self._deadline)
        iterations = result.iterations
        new_cuts: List[LinearConstraint] = []
        seen = set()
        if self.model.separates_dfj:
            for _ in range(self.config.max_cut_rounds):
                if not result.is_optimal:
                    break
                found = [
                    cut
                    for cut in separate_dfj(self._x_values(result.x), self.instance, config=self.log)
                    if self._cut_key(cut) not in self.pool_keys and self._cut_key(cut) not in seen
                ]
                if not found:
                    break
                for cut in found:
                    seen.add(self._cut_key(cut))
                new_cuts += found
                problem = problem.with_rows(found, self.index)
                result = solve_lp(problem, lp_config, start=result.basis, deadline=self._deadline)
                iterations += result.iterations
        x = result.x if result.is_optimal else None
        return _Evaluation(
            result.status, result.objective, x, iterations, tuple(new_cuts), result.basis
        )

    def _evaluate_batch(self, nodes: List[BnBNode], executor) -> List[_Evaluation]:
        base = self._problem(self.pool)
        if executor is None or len(nodes) == 1:
            return [self._evaluate(node, base) for node in nodes]
        return list(executor.map(lambda node: self._evaluate(node, base), nodes))

    # Incumbent and bound bookkeeping -----------------------------------

    def _elapsed(self) -> float:
        return time.perf_counter() - self._start

    def _gap(self) -> Optional[float]:
        if not math.isfinite(self.incumbent_cost):
            return None
        if self.incumbent_cost <= 0:
            return 0.0
        return gap_percent(self.incumbent_cost, min(self.reported_bound, self.incumbent_cost))

    def _record_event(self):
        event = SolveEvent(
            elapsed=self._elapsed(),
            nodes=self.nodes_explored,
            bound=self.reported_bound,
            incumbent=self.incumbent_cost if math.isfinite(self.incumbent_cost) else None,
            gap=self._gap(),
        )
        self.events.append(event)
        self.log.logger.info("%s", event)

    def _offer(self, tour: Tour, cost: float) -> bool:
        if cost < self.incumbent_cost - 1e-12:
            self.incumbent = tour
            self.incumbent_cost = cost
            self._update_bound(self.reported_bound, force_event=True)
            return True
        return False

    def _update_bound(self, open_bound: float, force_event=False):
        bound = min(open_bound, self.pruned_floor, self.incumbent_cost)
        if math.isfinite(self.incumbent_cost):
            bound = min(bound, self.incumbent_cost)
        improved = bound > self.reported_bound
        if improved:
            self.reported_bound = bound
        if improved or force_event:
            self._record_event()

    def _prunable(self, bound: float) -> bool:
        if not math.isfinite(self.incumbent_cost):
            return False
        return bound >= self.incumbent_cost - self.config.gap_tolerance * abs(self.incumbent_cost)

    # Branching ---------------------------------------------------------

    def _fractional(self, x: np.ndarray, node: BnBNode) -> np.ndarray:
        values = x[self.x_columns]
        frac = np.abs(values - np.round(values)) > INTEGRALITY_TOL
        free = np.array([int(k) not in node.fixings for k in self.x_columns])
        return self.x_columns[frac & free]

    def _choose_column(self, x: np.ndarray, candidates: np.ndarray) -> int:
        values = x[candidates]
        if self.config.branch_rule is BranchRule.PSEUDO_FIRST:
            return self._pseudo_choice(candidates, values)
        score = 0.5 - np.abs(values - 0.5)
        # Columns are in lexicographic edge order, so argmax breaks ties by (i, j).
        return int(candidates[int(np.argmax(score))])

    def _pseudo_choice(self, candidates: np.ndarray, values: np.ndarray) -> int:
        known = [gain for entry in self.pseudo.values() for gain in entry.values()]
        default = float(np.mean(known)) if known else 1.0
        scores = []
        for column, value in zip(candidates, values):
            entry = self.pseudo.get(int(column), {})
            down = entry.get(0.0, default) * value
            up = entry.get(1.0, default) * (1.0 - value)
            scores.append(max(down, 1e-9) * max(up, 1e-9))
        scores = np.array(scores)
        order = self.rng.permutation(len(candidates))
        best = order[int(np.argmax(scores[order]))]
        return int(candidates[best])

    def _learn_pseudo(self, node: BnBNode, objective: float):
        if node.branch is None:
            return
        column, value, frac_value = node.branch
        distance = frac_value if value == 0.0 else 1.0 - frac_value
        if distance <= 0:
            return
        gain = max(0.0, objective - node.bound) / distance
        entry = self.pseudo.setdefault(column, {})
        if value in entry:
            entry[value] = 0.5 * (entry[value] + gain)
        else:
            entry[value] = gain

    def _children(
        self, node: BnBNode, column: int, value: float, bound: float, basis: Optional[LpBasis] = None
    ) -> List[BnBNode]:
        i, j = self.edge_of[column]
        up = dict(node.fixings)
        up[column] = 1.0
        consistent = True
        for other in self.out_columns[i] + self.in_columns[j]:
            if other == column:
                continue
            if up.get(other) == 1.0:
                consistent = False
                break
            up[other] = 0.0
        down = dict(node.fixings)
        down[column] = 0.0
        depth = node.depth + 1
        children = [
            BnBNode(down, bound, depth, next(self._ids), (column, 0.0, value), node.node_id, basis)
        ]
        if consistent:
            children.append(
                BnBNode(up, bound, depth, next(self._ids), (column, 1.0, value), node.node_id, basis)
            )
        return children

    # Main loop ---------------------------------------------------------

    def _integral_solution(self, node: BnBNode, x: np.ndarray, objective: float) -> Optional[BnBNode]:
        """
        Handles an integral LP point. Returns the node again when it must be
        re-solved with new subtour cuts.
        """
        x_values = self._x_values(x)
        sequence = decode_tour(x_values, self.instance)
        if sequence is not None:
            tour, cost = evaluate_tour(self.instance, sequence)
            if self._offer(tour, cost):
                self.log.logger.debug("New incumbent %.10g from node %s", cost, node.node_id)
            self.pruned_floor = min(self.pruned_floor, objective)
            return None
        cycles = successor_cycles(x_values) or []
        depot_cycle = next((c for c in cycles if self.instance.depot in c), None)
        if depot_cycle is None or len(depot_cycle) == self.instance.size:
            self.log.logger.warning("Node %s: integral point could not be decoded", node.node_id)
            self.pruned_floor = min(self.pruned_floor, objective)
            return None
        cut = dfj_cut(depot_cycle, self.instance.nodes.ids, self.instance.depot)
        self.log.logger.warning(
            "Node %s: integral point with subtours; adding a subtour cut", node.node_id
        )
        if self._add_cuts([cut]) == 0:
            self.pruned_floor = min(self.pruned_floor, objective)
            return None
        return BnBNode(node.fixings, objective, node.depth, next(self._ids), node.branch)

    def solve(self) -> SolveReport:
        """
        Runs branch and bound until the tree is exhausted or a limit is hit.

        Returns:
         - SolveReport
        """
        cfg = self.config
        self._start = time.perf_counter()
        self._deadline = self._start + cfg.time_limit
        self.log.logger.info(
            "Solving %s (%s targets) with %s",
            self.instance.name,
            len(self.instance.targets),
            cfg.variant.value,
        )
        if cfg.warm_start:
            tour, cost = heuristic_warm_start(self.instance)
            self.log.logger.info("Warm start cost %.10g", cost)
            self._offer(tour, cost)

        best_heap: List[Tuple[float, int]] = []
        recent_heap: List[Tuple[int, int]] = []
        open_nodes: Dict[int, BnBNode] = {}

        def push(node: BnBNode):
            open_nodes[node.node_id] = node
            heapq.heappush(best_heap, (node.bound, node.node_id))
            heapq.heappush(recent_heap, (-node.node_id, node.node_id))

        def pop(take_recent: bool) -> Optional[BnBNode]:
            heap = recent_heap if take_recent else best_heap
            while heap:
                _, node_id = heapq.heappop(heap)
                if node_id in open_nodes:
                    return open_nodes.pop(node_id)
            return None

        def open_bound() -> float:
            while best_heap and best_heap[0][1] not in open_nodes:
                heapq.heappop(best_heap)
            return best_heap[0][0] if best_heap else math.inf

        push(BnBNode({}, -math.inf, 0, next(self._ids)))
        status = None
        expansions = 0
        executor = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
        try:
            while open_nodes:
                if self._prunable(open_bound()):
                    break
                if self._stopped_by_clock or (
                    self.nodes_explored and self._elapsed() >= cfg.time_limit
                ):
                    status = SolveStatus.FEASIBLE_TIME_LIMIT
                    break
                if self.nodes_explored >= cfg.max_nodes:
                    status = SolveStatus.NODE_LIMIT
                    break

                batch = []
                while open_nodes and len(batch) < cfg.workers:
                    expansions += 1
                    take_recent = cfg.node_selection is NodeSelection.DEPTH_FIRST or (
                        expansions % cfg.dive_interval == 0
                    )
                    node = pop(take_recent)
                    if node is None:
                        break
                    if self._prunable(node.bound):
                        self.pruned_floor = min(self.pruned_floor, node.bound)
                        continue
                    batch.append(node)
                if not batch:
                    continue

                evaluations = self._evaluate_batch(batch, executor)
                for node, evaluation in zip(batch, evaluations):
                    self._process(node, evaluation, push)
                self._update_bound(open_bound())
        finally:
            if executor is not None:
                executor.shutdown()

        return self._report(status, open_bound())

    def _process(self, node: BnBNode, evaluation: _Evaluation, push):
        self.lp_iterations += evaluation.iterations
        if evaluation.cuts:
            added = self._add_cuts(evaluation.cuts)
            self.log.logger.debug("Node %s: %s subtour cuts added", node.node_id, added)
        if evaluation.status is LpStatus.TIME_LIMIT:
            # The node stays open so its bound keeps counting.
            self.log.logger.info("Node %s: time limit reached inside the LP", node.node_id)
            self._stopped_by_clock = True
            push(node)
            return
        self.nodes_explored += 1
        if evaluation.status is LpStatus.INFEASIBLE:
            return
        if evaluation.status is LpStatus.ITERATION_LIMIT:
            self.log.logger.warning(
                "Node %s: LP iteration limit; keeping the parent bound", node.node_id
            )
            self.pruned_floor = min(self.pruned_floor, node.bound)
            return

        objective = max(evaluation.objective, node.bound)
        if node.depth == 0 and self.root_bound is None:
            self.root_bound = evaluation.objective
            self.log.logger.info("Root LP bound %.10g", evaluation.objective)
        if self.config.branch_rule is BranchRule.PSEUDO_FIRST:
            self._learn_pseudo(node, evaluation.objective)
        if self._prunable(objective):
            self.pruned_floor = min(self.pruned_floor, objective)
            return

        x = evaluation.x
        candidates = self._fractional(x, node)
        values = x[self.x_columns]
        if candidates.size == 0 and np.all(np.abs(values - np.round(values)) <= INTEGRALITY_TOL):
            retry = self._integral_solution(node, x, objective)
            if retry is not None:
                push(retry)
            return
        if candidates.size == 0:
            # Fractional only on fixed columns: cannot branch further.
            self.log.logger.warning("Node %s: no branchable column", node.node_id)
            self.pruned_floor = min(self.pruned_floor, objective)
            return
        column = self._choose_column(x, candidates)
        basis = None
        if evaluation.basis is not None:
            self._last_basis = (node.node_id, evaluation.basis)
            basis = evaluation.basis.without_tableau()
        for child in self._children(node, column, float(x[column]), objective, basis):
            push(child)

    def _report(self, status: Optional[SolveStatus], open_bound: float) -> SolveReport:
        has_incumbent = math.isfinite(self.incumbent_cost)
        if status is None:
            # Tree exhausted, or every open node is within the gap tolerance.
            self._update_bound(open_bound)
            if not has_incumbent:
                status = SolveStatus.INFEASIBLE
            elif self._gap() is not None and self._gap() <= 100.0 * self.config.gap_tolerance + 1e-12:
                status = SolveStatus.OPTIMAL
            else:
                self.log.logger.warning("Tree exhausted with an open gap; reporting node_limit")
                status = SolveStatus.NODE_LIMIT
        else:
            self._update_bound(open_bound)

        bound = self.reported_bound
        report = SolveReport(
            status=status,
            incumbent=self.incumbent,
            incumbent_cost=self.incumbent_cost if has_incumbent else None,
            best_bound=bound,
            gap_percent=self._gap(),
            nodes_explored=self.nodes_explored,
            cuts_added=len(self.pool),
            lp_iterations=self.lp_iterations,
            wall_time=self._elapsed(),
            root_bound=self.root_bound,
            method=self.config.variant.value,
            events=list(self.events),
        )
        self.log.logger.info("%s", report.summary())
        return report


def solve(instance: Instance, config: Optional[SolveConfig] = None, log_config=None) -> SolveReport:
    """
    Solves an instance exactly with branch and bound.

    Inputs:
     - instance (Instance)
     - config (SolveConfig or None): variant, limits and rules.
     - log_config (ldtsp.Config or None)

    Returns:
     - SolveReport
    """
    return BranchAndBound(instance, config, log_config).solve()
