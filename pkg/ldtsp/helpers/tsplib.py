# pylint: disable=broad-except

"""
Instance I/O and generation: TSPLIB parsing, distance tables, package
masses and the native LD-TSP instance file format.
"""

# System Libraries
from __future__ import annotations

from importlib import resources
import math
from pathlib import Path
import sys
from typing import Iterable, List, Optional, Sequence

import numpy as np

# Project root added to the sys.path, so that scripts can be run unpackaged as well as packaged.
sys.path.append(str(Path(__file__).resolve().parent.parent))

# Local libraries
from ldtsp.classes.config import Config
from ldtsp.classes.exceptions import InstanceError, InstanceFormatError
from ldtsp.classes.instance import DistanceMatrix, Instance, Metric, NodeSet

FORMAT_VERSION = "1"
MASS_VALUES = tuple(k / 10 for k in range(1, 11))  # 0.1, 0.2, ..., 1.0
GEO_RADIUS = 6378.388
GEO_PI = 3.141592

_TSPLIB_METRICS = {"EUC_2D": Metric.EUCLID_EXACT, "GEO": Metric.GEO_TSPLIB}


def _number(token: str, line_no: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise InstanceFormatError(f"malformed {what} {token!r}", line=line_no) from None
    if not math.isfinite(value):
        raise InstanceFormatError(f"non-finite {what} {token!r}", line=line_no)
    return value


def _integer(token: str, line_no: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise InstanceFormatError(f"malformed {what} {token!r}", line=line_no) from None


def parse_tsplib(text: str, rounded=False, config=None) -> NodeSet:
    """
    Parses a TSPLIB document with EUC_2D or GEO coordinates.

    Inputs:
     - text (str): full document.
     - rounded (bool): For EUC_2D, use TSPLIB's nearest-integer distances
        instead of exact Euclidean distances.
     - config ([None, classes.config.Config]): Config object.

    Returns:
     - NodeSet, with the metric inferred from EDGE_WEIGHT_TYPE.
    """
    if config is None:
        config = Config()

    header = {}
    coords = []
    in_coords = False
    coord_line = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        keyword = line.split(":", 1)[0].strip().upper()
        if keyword == "EOF":
            break
        if keyword == "NODE_COORD_SECTION":
            in_coords = True
            coord_line = line_no
            continue
        if keyword.endswith("_SECTION"):
            # DISPLAY_DATA_SECTION and friends are not needed
            in_coords = False
            continue
        if in_coords:
            fields = line.split()
            if len(fields) != 3:
                raise InstanceFormatError(
                    f"expected '<id> <x> <y>', got {line!r}", line=line_no
                )
            coords.append(
                (
                    _integer(fields[0], line_no, "node id"),
                    _number(fields[1], line_no, "coordinate"),
                    _number(fields[2], line_no, "coordinate"),
                )
            )
            continue
        if ":" in line:
            key, value = line.split(":", 1)
            header[key.strip().upper()] = (value.strip(), line_no)
        else:
            parts = line.split(None, 1)
            header[parts[0].upper()] = (parts[1].strip() if len(parts) > 1 else "", line_no)

    if coord_line is None:
        raise InstanceFormatError("document has no NODE_COORD_SECTION")
    for key in ("NAME", "DIMENSION", "EDGE_WEIGHT_TYPE"):
        if key not in header:
            raise InstanceFormatError(f"missing {key} header")

    weight_type, weight_line = header["EDGE_WEIGHT_TYPE"]
    weight_type = weight_type.upper()
    if weight_type not in _TSPLIB_METRICS:
        raise InstanceFormatError(
            f"unsupported EDGE_WEIGHT_TYPE {weight_type}", line=weight_line
        )
    metric = _TSPLIB_METRICS[weight_type]
    if rounded and metric is Metric.EUCLID_EXACT:
        metric = Metric.EUCLID_TSPLIB_ROUNDED

    dimension = _integer(header["DIMENSION"][0], header["DIMENSION"][1], "DIMENSION")
    if dimension != len(coords):
        raise InstanceFormatError(
            f"DIMENSION is {dimension} but {len(coords)} coordinates were given",
            line=header["DIMENSION"][1],
        )

    try:
        nodes = NodeSet(tuple(coords), metric=metric, name=header["NAME"][0])
    except InstanceError as e:
        raise InstanceFormatError(str(e), line=coord_line) from None
    config.logger.debug("Parsed TSPLIB %s: %s nodes, %s", nodes.name, len(nodes), metric.value)
    return nodes


def _geo_radians(values: np.ndarray) -> np.ndarray:
    degrees = np.trunc(values)
    minutes = values - degrees
    return GEO_PI * (degrees + 5.0 * minutes / 3.0) / 180.0


def compute_distances(nodes: NodeSet) -> DistanceMatrix:
    """
    Distance table for a node set.

    - EUC_2D_EXACT: unrounded Euclidean distance.
    - EUC_2D_ROUND: TSPLIB nint of the Euclidean distance.
    - GEO: TSPLIB great-circle distance (DDD.MM encoding, R = 6378.388,
       truncated to an integer).

    Only the upper triangle is evaluated and mirrored, so the table is
    exactly symmetric with a zero diagonal.
    """
    xy = nodes.xy()
    if nodes.metric is Metric.GEO_TSPLIB:
        lat = _geo_radians(xy[:, 0])
        lon = _geo_radians(xy[:, 1])
        q1 = np.cos(lon[:, None] - lon[None, :])
        q2 = np.cos(lat[:, None] - lat[None, :])
        q3 = np.cos(lat[:, None] + lat[None, :])
        arg = np.clip(0.5 * ((1.0 + q1) * q2 - (1.0 - q1) * q3), -1.0, 1.0)
        d = np.trunc(GEO_RADIUS * np.arccos(arg) + 1.0)
    else:
        d = np.hypot(xy[:, None, 0] - xy[None, :, 0], xy[:, None, 1] - xy[None, :, 1])
        if nodes.metric is Metric.EUCLID_TSPLIB_ROUNDED:
            d = np.floor(d + 0.5)
    upper = np.triu(d, k=1)
    return DistanceMatrix(upper + upper.T)


def tour_length(sequence: Sequence[int], dist: DistanceMatrix, depot: int) -> float:
    """Length of the closed tour depot -> sequence -> depot."""
    route = [depot, *sequence, depot]
    return math.fsum(dist(a, b) for a, b in zip(route, route[1:]))


def generate_masses(n_targets: int, seed: int) -> List[float]:
    """
    Draws package masses uniformly from {0.1, 0.2, ..., 1.0}.

    The stream comes from numpy's PCG64 bit generator seeded through
    SeedSequence(seed); index k in 0..9 is drawn with
    Generator.integers(0, 10) and mapped to (k+1)/10. Both algorithms are
    published, so the stream is reproducible outside Python.

    Inputs:
     - n_targets (int): number of masses, >= 1.
     - seed (int): nonnegative seed.

    Returns:
     - list of floats
    """
    if n_targets < 1:
        raise InstanceError(f"need at least one target, got {n_targets}")
    rng = np.random.Generator(np.random.PCG64(seed))
    draws = rng.integers(0, 10, size=n_targets)
    return [MASS_VALUES[k] for k in draws.tolist()]


def make_instance(
    nodes: NodeSet,
    depot: Optional[int] = None,
    masses: Iterable[float] = (),
    gamma: float = 10.0,
    alpha: float = 0.1,
) -> Instance:
    """
    Builds an instance with unladen mass M = gamma * sum(masses).

    Inputs:
     - nodes (NodeSet)
     - depot (int or None): depot id; defaults to the last node.
     - masses (iterable of float): one mass per target, assigned to targets
        in ascending id order.
     - gamma (float): unladen mass factor, >= 0. Zero gives the zero-cost
        return (hazmat) setting.
     - alpha (float): energy scale.

    Returns:
     - Instance
    """
    if depot is None:
        depot = nodes.ids[-1]
    if depot not in nodes.ids:
        raise InstanceError(f"depot {depot} is outside 1..{len(nodes)}")
    masses = [float(m) for m in masses]
    targets = [i for i in nodes.ids if i != depot]
    if len(masses) != len(targets):
        raise InstanceError(
            f"expected {len(targets)} masses (one per target), got {len(masses)}"
        )
    if not (math.isfinite(gamma) and gamma >= 0):
        raise InstanceError(f"gamma must be >= 0, got {gamma}")
    unladen = gamma * math.fsum(masses)
    return Instance(
        nodes=nodes,
        depot=depot,
        masses=dict(zip(targets, masses)),
        unladen=unladen,
        alpha=alpha,
        gamma=float(gamma),
    )


def random_instance(
    n_targets: int, gamma: float = 10.0, seed: int = 0, alpha: float = 0.1, span: float = 100.0
) -> Instance:
    """
    Seeded random instance: integer coordinates uniform on [0, span]^2 for
    n_targets + 1 nodes (depot last) and masses from `generate_masses`.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    xy = rng.integers(0, int(span) + 1, size=(n_targets + 1, 2))
    nodes = NodeSet(
        tuple((k + 1, float(x), float(y)) for k, (x, y) in enumerate(xy.tolist())),
        name=f"rand{n_targets}_s{seed}",
    )
    return make_instance(nodes, masses=generate_masses(n_targets, seed), gamma=gamma, alpha=alpha)


def _fmt(value: float) -> str:
    return format(value, ".17g")


def write_instance(instance: Instance) -> str:
    """Serializes an instance to the native `LDTSP 1` text format."""
    lines = [
        f"LDTSP {FORMAT_VERSION}",
        f"NAME {instance.name}",
        f"DIMENSION {instance.size}",
        f"METRIC {instance.nodes.metric.value}",
        f"DEPOT {instance.depot}",
        f"ALPHA {_fmt(instance.alpha)}",
        f"UNLADEN {_fmt(instance.unladen)}",
    ]
    if instance.gamma is not None:
        lines.append(f"GAMMA {_fmt(instance.gamma)}")
    lines.append("NODE_COORD_SECTION")
    lines.extend(f"{i} {_fmt(x)} {_fmt(y)}" for i, x, y in instance.nodes.coords)
    lines.append("MASS_SECTION")
    lines.extend(f"{i} {_fmt(m)}" for i, m in instance.masses.items())
    lines.append("EOF")
    return "\n".join(lines) + "\n"


def read_instance(text: str) -> Instance:
    """
    Parses the native `LDTSP 1` format written by `write_instance`.
    Raises InstanceFormatError with the offending line number.
    """
    rows = [
        (line_no, raw.strip())
        for line_no, raw in enumerate(text.splitlines(), start=1)
        if raw.strip()
    ]
    if not rows:
        raise InstanceFormatError("empty instance document")
    line_no, first = rows[0]
    parts = first.split()
    if len(parts) != 2 or parts[0] != "LDTSP":
        raise InstanceFormatError("document does not start with 'LDTSP <version>'", line=line_no)
    if parts[1] != FORMAT_VERSION:
        raise InstanceFormatError(
            f"unsupported format version {parts[1]} (expected {FORMAT_VERSION})", line=line_no
        )

    header = {}
    coords = []
    masses = {}
    section = "header"
    saw_eof = False
    for line_no, line in rows[1:]:
        if line == "EOF":
            saw_eof = True
            break
        if line == "NODE_COORD_SECTION":
            section = "coords"
            continue
        if line == "MASS_SECTION":
            section = "masses"
            continue
        if section == "header":
            key, _, value = line.partition(" ")
            if key in header:
                raise InstanceFormatError(f"duplicate {key} header", line=line_no)
            header[key] = (value.strip(), line_no)
        elif section == "coords":
            fields = line.split()
            if len(fields) != 3:
                raise InstanceFormatError(f"expected '<id> <x> <y>', got {line!r}", line=line_no)
            coords.append(
                (
                    _integer(fields[0], line_no, "node id"),
                    _number(fields[1], line_no, "coordinate"),
                    _number(fields[2], line_no, "coordinate"),
                )
            )
        else:
            fields = line.split()
            if len(fields) != 2:
                raise InstanceFormatError(f"expected '<id> <mass>', got {line!r}", line=line_no)
            node_id = _integer(fields[0], line_no, "node id")
            if node_id in masses:
                raise InstanceFormatError(f"duplicate MASS entry for node {node_id}", line=line_no)
            mass = _number(fields[1], line_no, "mass")
            if not mass > 0:
                raise InstanceFormatError(
                    f"node {node_id} has mass {mass}; package masses must be > 0", line=line_no
                )
            masses[node_id] = mass

    if not saw_eof:
        raise InstanceFormatError("missing EOF terminator")
    if section != "masses":
        raise InstanceFormatError("missing NODE_COORD_SECTION or MASS_SECTION")
    for key in ("NAME", "DIMENSION", "METRIC", "DEPOT", "ALPHA", "UNLADEN"):
        if key not in header:
            raise InstanceFormatError(f"missing {key} header")

    dimension = _integer(header["DIMENSION"][0], header["DIMENSION"][1], "DIMENSION")
    if dimension != len(coords):
        raise InstanceFormatError(
            f"DIMENSION is {dimension} but {len(coords)} coordinates were given",
            line=header["DIMENSION"][1],
        )
    try:
        metric = Metric(header["METRIC"][0])
    except ValueError:
        raise InstanceFormatError(
            f"unknown METRIC {header['METRIC'][0]}", line=header["METRIC"][1]
        ) from None
    gamma = None
    if "GAMMA" in header:
        gamma = _number(header["GAMMA"][0], header["GAMMA"][1], "GAMMA")

    try:
        nodes = NodeSet(tuple(coords), metric=metric, name=header["NAME"][0])
        return Instance(
            nodes=nodes,
            depot=_integer(header["DEPOT"][0], header["DEPOT"][1], "DEPOT"),
            masses=masses,
            unladen=_number(header["UNLADEN"][0], header["UNLADEN"][1], "UNLADEN"),
            alpha=_number(header["ALPHA"][0], header["ALPHA"][1], "ALPHA"),
            gamma=gamma,
            name=header["NAME"][0],
        )
    except InstanceFormatError:
        raise
    except InstanceError as e:
        raise InstanceFormatError(str(e)) from None


def read_instance_file(path) -> Instance:
    """Reads a native instance file (UTF-8)."""
    return read_instance(Path(path).read_text(encoding="utf-8"))


def write_instance_file(instance: Instance, path) -> None:
    """Writes a native instance file (UTF-8, LF line endings)."""
    Path(path).write_text(write_instance(instance), encoding="utf-8", newline="\n")


def load_tsplib_file(path, rounded=False, config=None) -> NodeSet:
    """Reads and parses a TSPLIB file."""
    return parse_tsplib(Path(path).read_text(encoding="utf-8"), rounded=rounded, config=config)


def placeholder_mm1() -> Instance:
    """
    An 11-node stand-in for the MM1 benchmark (10 targets, depot last).
    The coordinates and masses are invented: it is NOT the published instance.
    """
    text = resources.files("ldtsp.data").joinpath("mm1_placeholder.ldtsp").read_text(
        encoding="utf-8"
    )
    return read_instance(text)
