"""
Writes models in LP and fixed-field MPS format for external solvers.

Output depends only on the model, so re-exporting gives identical bytes.
Rows are named c1, c2, ... in model order; in LP format each row is
preceded by a comment with its provenance tag.
"""

from pathlib import Path
import sys
from typing import Dict, List, Tuple

# Project root added to the sys.path, so that scripts can be run unpackaged as well as packaged.
sys.path.append(str(Path(__file__).resolve().parent.parent))

# Local libraries
from ldtsp.classes.exceptions import ModelError
from ldtsp.classes.model import LinearModel, Sense, VarId

LP_LINE_WIDTH = 78
MPS_NAME_WIDTH = 8
MPS_NUMBER_WIDTH = 12


def _num(value: float) -> str:
    """Shortest exact text for a float; integral values without a decimal point."""
    value = float(value) + 0.0  # no negative zero
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def _wrap(first: str, pieces: List[str], indent: str = "   ") -> List[str]:
    lines = []
    line = first
    for piece in pieces:
        if len(line) + 1 + len(piece) > LP_LINE_WIDTH and line.strip():
            lines.append(line)
            line = indent + piece
        else:
            line = f"{line} {piece}" if line else piece
    lines.append(line)
    return lines


def _linear_pieces(terms) -> List[str]:
    pieces = []
    for k, (var, coef) in enumerate(terms):
        sign = "-" if coef < 0 else "+"
        magnitude = abs(coef)
        body = var.name if magnitude == 1.0 else f"{_num(magnitude)} {var.name}"
        if k == 0:
            pieces.append(f"-{body}" if sign == "-" else body)
        else:
            pieces.append(f"{sign} {body}")
    return pieces


def export_lp(model: LinearModel) -> str:
    """
    LP-format text: Minimize / Subject To / Bounds / Binaries / End.

    The bilinear objective of the nonlinear model is written in bracketed
    quadratic syntax, "[ 2c M_i * x_i_j + ... ] / 2".

    Inputs:
     - model (LinearModel)

    Returns:
     - str, newline-terminated
    """
    lines = [f"\\ Problem: {model.name}", "Minimize"]
    pieces = _linear_pieces(model.objective)
    if model.objective_offset:
        pieces.append(f"+ {_num(model.objective_offset)}")
    if model.quadratic:
        quad = []
        for k, (a, b, coef) in enumerate(model.quadratic):
            term = f"{_num(abs(2.0 * coef))} {a.name} * {b.name}"
            if k == 0:
                quad.append(f"-{term}" if coef < 0 else term)
            else:
                quad.append(f"{'-' if coef < 0 else '+'} {term}")
        pieces += (["+"] if pieces else []) + ["["] + quad + ["]", "/", "2"]
    if not pieces:
        pieces = ["0", model.variables[0].var.name]
    lines += _wrap(" obj:", pieces)

    lines.append("Subject To")
    for k, row in enumerate(model.constraints, start=1):
        lines.append(f"\\ {row.tag}")
        body = _linear_pieces(row.terms) or ["0", model.variables[0].var.name]
        lines += _wrap(f" c{k}:", body + [row.sense.value, _num(row.rhs)])

    lines.append("Bounds")
    binaries = []
    for v in model.variables:
        if v.integer:
            binaries.append(v.var.name)
        elif v.lb == v.ub:
            lines.append(f" {v.var.name} = {_num(v.lb)}")
        else:
            lines.append(f" {_num(v.lb)} <= {v.var.name} <= {_num(v.ub)}")
    if binaries:
        lines.append("Binaries")
        lines += _wrap("", binaries, indent="")
    lines.append("End")
    return "\n".join(lines) + "\n"


def _mps_num(value: float) -> str:
    """Number text of at most 12 characters, as the fixed format requires."""
    text = _num(value)
    precision = 12
    while len(text) > MPS_NUMBER_WIDTH and precision > 0:
        text = format(float(value), f".{precision}g")
        precision -= 1
    return text


def _mps_line(f1="", f2="", f3="", f4="", f5="", f6="") -> str:
    """Fixed fields at columns 2-3, 5-12, 15-22, 25-36, 40-47 and 50-61."""
    line = (
        " " + f1.ljust(2) + " " + f2.ljust(8) + "  " + f3.ljust(8) + "  "
        + f4.ljust(12) + "   " + f5.ljust(8) + "  " + f6
    )
    return line.rstrip()


def _check_name(name: str):
    if len(name) > MPS_NAME_WIDTH:
        raise ModelError(f"name {name!r} does not fit the 8-character MPS field")


def _pairs(name: str, entries: List[Tuple[str, float]]) -> List[str]:
    lines = []
    for k in range(0, len(entries), 2):
        first = entries[k]
        second = entries[k + 1] if k + 1 < len(entries) else ("", None)
        lines.append(
            _mps_line(
                "",
                name,
                first[0],
                _mps_num(first[1]),
                second[0],
                "" if second[1] is None else _mps_num(second[1]),
            )
        )
    return lines


def export_mps(model: LinearModel) -> str:
    """
    Fixed-field MPS text with the same variable names as `export_lp`.
    Binary columns sit between INTORG/INTEND markers; the nonlinear model's
    bilinear objective goes to a QUADOBJ section (each off-diagonal entry
    once, objective = linear part + 1/2 x'Qx).
    """
    for v in model.variables:
        _check_name(v.var.name)
    row_names = [f"c{k}" for k in range(1, len(model.constraints) + 1)]
    for name in row_names:
        _check_name(name)
    senses = {Sense.LE: "L", Sense.EQ: "E", Sense.GE: "G"}

    lines = [f"NAME          {model.name}", "ROWS", _mps_line("N", "obj")]
    for name, row in zip(row_names, model.constraints):
        lines.append(_mps_line(senses[row.sense], name))

    entries: Dict[VarId, List[Tuple[str, float]]] = {v.var: [] for v in model.variables}
    for var, coef in model.objective:
        entries[var].append(("obj", coef))
    for name, row in zip(row_names, model.constraints):
        for var, coef in row.terms:
            entries[var].append((name, coef))

    lines.append("COLUMNS")
    in_marker = False
    for v in model.variables:
        if v.integer != in_marker:
            tag = "'INTEND'" if in_marker else "'INTORG'"
            lines.append(_mps_line("", "MARKER", "'MARKER'", "", tag))
            in_marker = v.integer
        lines += _pairs(v.var.name, entries[v.var])
    if in_marker:
        lines.append(_mps_line("", "MARKER", "'MARKER'", "", "'INTEND'"))

    lines.append("RHS")
    rhs = [(name, row.rhs) for name, row in zip(row_names, model.constraints) if row.rhs != 0.0]
    lines += _pairs("RHS", rhs)

    lines.append("BOUNDS")
    for v in model.variables:
        name = v.var.name
        if v.integer:
            lines.append(_mps_line("BV", "BND", name))
        elif v.lb == v.ub:
            lines.append(_mps_line("FX", "BND", name, _mps_num(v.lb)))
        else:
            if v.lb != 0.0:
                lines.append(_mps_line("LO", "BND", name, _mps_num(v.lb)))
            lines.append(_mps_line("UP", "BND", name, _mps_num(v.ub)))

    if model.quadratic:
        index = model.index
        lines.append("QUADOBJ")
        for a, b, coef in sorted(model.quadratic, key=lambda t: sorted((index[t[0]], index[t[1]]))):
            first, second = sorted((a, b), key=lambda var: index[var])
            lines.append(_mps_line("", first.name, second.name, _mps_num(coef)))
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"
