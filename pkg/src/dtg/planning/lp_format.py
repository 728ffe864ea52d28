# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

"""Exchange of models and solutions with external solvers.

Models are written in the CPLEX LP text format, which most MILP solvers read. Solutions are read back from a plain
text format with one ``name value`` pair per line::

    # Solution for dtg_milp
    =obj= 131.0
    p_1_1_1 10
    psi_2 1

Lines starting with ``#`` are comments, the ``=obj=`` line is optional and variables not listed are zero.
"""

import logging
import math

import numpy as np

from dtg.planning.model import MilpModel, OccupancySolution, Sense, VariableKind

logger = logging.getLogger(__name__)

# CPLEX limits lines to 255 characters
MAX_LINE_LENGTH = 200


class LPFormatError(ValueError):
    """Raised when a solution file cannot be parsed.

    Args:
        message (str): Description of the problem.
        lineno (int): 1-based number of the offending line.
    """

    def __init__(self, message: str, lineno: int) -> None:
        super().__init__(f"Line {lineno}: {message}")
        self.lineno = lineno


class SolutionValidationError(ValueError):
    """Raised when an imported solution violates the model's bounds or constraints."""


def _number(value: float) -> str:
    value = float(value)
    if value == math.floor(value) and abs(value) < 1e15:
        return repr(int(value))
    return repr(value)


def _expression(model: MilpModel, terms: tuple[tuple[int, float], ...]) -> list[str]:
    tokens = []
    for i, coef in terms:
        name = model.variables[i].name
        sign = "-" if coef < 0 else "+"
        magnitude = abs(coef)
        term = name if magnitude == 1.0 else f"{_number(magnitude)} {name}"
        if not tokens:
            tokens.append(f"-{term}" if sign == "-" else term)
        else:
            tokens.append(f"{sign} {term}")
    if not tokens and model.variables:
        tokens.append(f"0 {model.variables[0].name}")
    return tokens


def _wrap(head: str, tokens: list[str], tail: str = "") -> list[str]:
    lines, line = [], head
    for token in [*tokens, tail] if tail else tokens:
        if len(line) + len(token) + 1 > MAX_LINE_LENGTH and line.strip():
            lines.append(line)
            line = "   "
        line = f"{line} {token}" if line else token
    lines.append(line)
    return lines


def _bound(name: str, lb: float, ub: float) -> str:
    if math.isinf(lb) and math.isinf(ub):
        return f" {name} free"
    if math.isinf(lb):
        return f" -inf <= {name} <= {_number(ub)}"
    if math.isinf(ub):
        return f" {name} >= {_number(lb)}"
    return f" {_number(lb)} <= {name} <= {_number(ub)}"


def export_lp(model: MilpModel) -> str:
    """Writes a model in CPLEX LP format.

    The output only depends on the model, so identical models give identical text.

    Args:
        model (MilpModel): The model.

    Returns:
        str: LP text, ending with a newline.
    """
    lines = [f"\\ Problem: {model.name}", "Minimize"]
    lines.extend(_wrap(" obj:", _expression(model, model.objective) if model.objective else []))

    lines.append("Subject To")
    senses = {Sense.LE: "<=", Sense.GE: ">=", Sense.EQ: "="}
    for con in model.constraints:
        tail = f"{senses[con.sense]} {_number(con.rhs)}"
        lines.extend(_wrap(f" {con.name}:", _expression(model, con.coefficients), tail))

    lines.append("Bounds")
    for var in model.variables:
        if var.kind == VariableKind.BINARY and var.lb == 0.0 and var.ub == 1.0:
            continue
        lines.append(_bound(var.name, var.lb, var.ub))

    for section, kind in (("Generals", VariableKind.INTEGER), ("Binaries", VariableKind.BINARY)):
        names = [var.name for var in model.variables if var.kind == kind]
        if names:
            lines.append(section)
            lines.extend(_wrap("", names))
    lines.append("End")
    logger.debug(f"Exported {model!r} as {len(lines)} lines of LP text")
    return "\n".join(lines) + "\n"


def export_solution(model: MilpModel, values: np.ndarray, objective: float | None = None) -> str:
    """Writes variable values in the ``name value`` solution format, in variable order.

    Args:
        model (MilpModel): The model.
        values (np.ndarray): Value of every variable.
        objective (float | None): Objective written on the ``=obj=`` line. Defaults to the objective of ``values``.

    Returns:
        str: Solution text.
    """
    objective = model.objective_value(values) if objective is None else objective
    lines = [f"# Solution for {model.name}", f"=obj= {_number(objective)}"]
    lines.extend(f"{var.name} {_number(val)}" for var, val in zip(model.variables, values, strict=True))
    return "\n".join(lines) + "\n"


def parse_solution(text: str, model: MilpModel) -> np.ndarray:
    """Reads variable values from solution text.

    Args:
        text (str): Solution text.
        model (MilpModel): Model the solution belongs to.

    Returns:
        np.ndarray: Value of every variable, zero for those not listed.

    Raises:
        LPFormatError: On malformed lines, unknown or repeated variables.
    """
    values = np.zeros(model.n_variables)
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise LPFormatError(f"expected 'name value', got {raw.strip()!r}", lineno)
        name, value = fields
        try:
            number = float(value)
        except ValueError as e:
            raise LPFormatError(f"invalid value {value!r} for {name}", lineno) from e
        if name == "=obj=":
            continue
        if name not in model.variable_index:
            raise LPFormatError(f"unknown variable {name}", lineno)
        if name in seen:
            raise LPFormatError(f"variable {name} listed twice", lineno)
        seen.add(name)
        values[model.variable_index[name]] = number
    return values


def import_solution(text: str, model: MilpModel) -> OccupancySolution:
    """Reads a solution produced by an external solver and checks it against the model.

    Args:
        text (str): Solution text.
        model (MilpModel): Model the solution belongs to, built by ``build_milp`` or ``build_gmip``.

    Returns:
        OccupancySolution: The decoded solution.

    Raises:
        LPFormatError: If the text cannot be parsed.
        SolutionValidationError: If the point violates a bound, integrality or constraint.
    """
    values = parse_solution(text, model)
    violations = model.violations(values)
    if violations:
        shown = "; ".join(violations[:5])
        more = f" (and {len(violations) - 5} more)" if len(violations) > 5 else ""
        raise SolutionValidationError(f"Imported solution is infeasible for {model.name}: {shown}{more}")
    logger.info(f"Imported a feasible solution for {model.name} with objective {model.objective_value(values)}")
    return OccupancySolution.from_values(model, values)
