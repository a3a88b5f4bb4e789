"""Reference out-of-process LP backend.

Run as `python -m riskplan.solver_stdio`: reads one LP-text problem on
stdin, solves it with the builtin simplex, and writes the line-oriented
solution format on stdout.  Any backend speaking this protocol can replace
the builtin solver via `solver = "external:<command>"`.
"""

from __future__ import annotations

import sys

import numpy as np

from .errors import RiskplanError
from .lptext import parse_lp, write_solution
from .simplex import OPTIMAL, solve_lp


def solve_text(text: str) -> str:
    problem = parse_lp(text)
    variables = problem.variables
    col = {name: i for i, name in enumerate(variables)}
    c = np.zeros(len(variables))
    for name, value in problem.objective.items():
        c[col[name]] = value
    a_eq, b_eq, a_ub, b_ub = [], [], [], []
    for con in problem.constraints:
        row = np.zeros(len(variables))
        for name, value in con.coeffs.items():
            row[col[name]] = value
        if con.relation == "=":
            a_eq.append(row)
            b_eq.append(con.rhs)
        elif con.relation == "<=":
            a_ub.append(row)
            b_ub.append(con.rhs)
        else:  # >= rows flip into <= form
            a_ub.append(-row)
            b_ub.append(-con.rhs)
    result = solve_lp(
        c, a_eq or None, b_eq or None, a_ub or None, b_ub or None,
        maximize=problem.sense == "max",
    )
    if result.status != OPTIMAL:
        return write_solution(result.status, None, {})
    values = {name: float(result.x[col[name]]) for name in variables}
    return write_solution(result.status, result.objective, values)


def main() -> int:
    try:
        sys.stdout.write(solve_text(sys.stdin.read()))
        return 0
    except RiskplanError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
