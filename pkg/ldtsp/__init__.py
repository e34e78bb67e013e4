"""
Exact solvers for the load-dependent TSP, with the energy model, oracles,
heuristics and model export that back them.
"""

__version__ = "0.1.0"

__all__ = ["classes", "helpers"]

# classes
from ldtsp.classes.config import *
from ldtsp.classes.exceptions import *
from ldtsp.classes.energy import DragMode, DragParams, HeadingProfile, KinematicState, PowerModel
from ldtsp.classes.instance import DistanceMatrix, Instance, Metric, NodeSet
from ldtsp.classes.model import LinearModel, ModelVariant, Sense, Tour, VarId
from ldtsp.classes.lp import LpBasis, LpConfig, LpProblem, LpResult, LpStatus, solve_lp
from ldtsp.classes.solver import (
    BranchRule,
    NodeSelection,
    SolveConfig,
    SolveReport,
    SolveStatus,
    solve,
)

# helpers
from ldtsp.helpers.energy import (
    build_power_model,
    edge_energy,
    energy_identity_residual,
    simulate,
)
from ldtsp.helpers.formulation import build_milp, build_minlp, evaluate_tour, validate_tour
from ldtsp.helpers.general import gap_percent
from ldtsp.helpers.heuristics import warm_start
from ldtsp.helpers.oracles import brute_force, held_karp, verify_solution
from ldtsp.helpers.search import astar_search
from ldtsp.helpers.tsplib import (
    generate_masses,
    make_instance,
    parse_tsplib,
    read_instance,
    read_instance_file,
    write_instance,
    write_instance_file,
)
import ldtsp.helpers.export as export
import ldtsp.helpers.plots as plots
