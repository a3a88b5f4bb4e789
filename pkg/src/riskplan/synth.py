"""Risk-constrained policy synthesis over discounted occupation measures.

The decision variables are beta(z, a) for non-terminal product states.  Flow
balance ties them to the dynamics, the objective maximizes discounted inflow
into G, and a single inequality caps cost-weighted inflow into D at r_th.
Both inflow rows and the balance constraint carry the discount factor: beta
is a discounted measure, and arrival at a terminal happens one step after
the occupation being weighted.  The relaxed variant adds a slack variable
lambda >= 0 on the risk row, penalized in the objective.

The extracted stationary policy is the row-normalized occupation ratio
beta(z, a) / beta(z); states the optimal flow never visits fall back to a
uniform rule and are reported in `fallback`.
"""

from __future__ import annotations

import shlex
import subprocess
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalFailureError
from .lptext import LpConstraint, LpTextProblem, parse_solution, write_lp
from .product import ProductMdp
from .simplex import INFEASIBLE, OPTIMAL, solve_lp

SLACK = "lam"
DENOM_TOL = 1e-12


@dataclass(frozen=True)
class SynthesisConfig:
    gamma: float = 0.95
    r_th: float = float("inf")
    relaxed: bool = False
    penalty: float = 1e3
    solver: str = "builtin"
    feas_tol: float = 1e-8
    opt_tol: float = 1e-8

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")
        if self.r_th < 0:
            raise ValueError(f"r_th must be nonnegative, got {self.r_th}")
        if self.penalty <= 0:
            raise ValueError("penalty must be positive")


@dataclass
class LpProblem:
    columns: tuple  # (z, a) pairs, plus SLACK last when relaxed
    var_index: dict
    objective: np.ndarray
    objective_const: float
    a_eq: np.ndarray
    b_eq: np.ndarray
    risk_row: np.ndarray
    risk_rhs: float
    risk_const: float
    cfg: SynthesisConfig
    product: ProductMdp


@dataclass
class OccupationSolution:
    status: str
    beta: dict
    objective: float | None
    risk: float | None
    slack: float | None
    iterations: int = 0


@dataclass
class StochasticPolicy:
    rows: dict[int, tuple[tuple[int, float], ...]]
    fallback: frozenset[int] = field(default_factory=frozenset)


def build_lp(p: ProductMdp, cfg: SynthesisConfig) -> LpProblem:
    gamma = cfg.gamma
    columns = [(z, a) for z in range(p.n_states) if not p.is_terminal(z) for a in p.actions_of(z)]
    transient = sorted({z for z, _ in columns})
    row_index = {z: i for i, z in enumerate(transient)}
    if cfg.relaxed:
        columns.append(SLACK)
    var_index = {key: j for j, key in enumerate(columns)}
    n = len(columns)

    objective = np.zeros(n)
    a_eq = np.zeros((len(transient), n))
    b_eq = np.zeros(len(transient))
    risk_row = np.zeros(n)
    if transient:
        b_eq[row_index[p.z0]] = 1.0
    for key in columns:
        if key == SLACK:
            continue
        z, a = key
        j = var_index[key]
        a_eq[row_index[z], j] += 1.0
        for z2, pr in p.rows[(z, a)]:
            if z2 in p.goal:
                objective[j] += gamma * pr
            elif z2 in p.dead:
                risk_row[j] += gamma * pr * p.cost[z2]
            else:
                a_eq[row_index[z2], j] -= gamma * pr
    objective_const = 1.0 if p.z0 in p.goal else 0.0
    risk_const = p.cost[p.z0] if p.z0 in p.dead else 0.0
    if cfg.relaxed:
        j = var_index[SLACK]
        objective[j] = -cfg.penalty
        risk_row[j] = -1.0
    return LpProblem(
        columns=tuple(columns),
        var_index=var_index,
        objective=objective,
        objective_const=objective_const,
        a_eq=a_eq,
        b_eq=b_eq,
        risk_row=risk_row,
        risk_rhs=cfg.r_th - risk_const,
        risk_const=risk_const,
        cfg=cfg,
        product=p,
    )


def _var_name(key) -> str:
    return SLACK if key == SLACK else f"x_{key[0]}_{key[1]}"


def to_lp_text(lp: LpProblem) -> str:
    constraints = [
        LpConstraint(
            f"bal_{i}",
            {
                _var_name(lp.columns[j]): float(lp.a_eq[i, j])
                for j in range(len(lp.columns))
                if lp.a_eq[i, j] != 0.0
            },
            "=",
            float(lp.b_eq[i]),
        )
        for i in range(lp.a_eq.shape[0])
    ]
    if np.isfinite(lp.risk_rhs):
        constraints.append(
            LpConstraint(
                "risk",
                {
                    _var_name(lp.columns[j]): float(lp.risk_row[j])
                    for j in range(len(lp.columns))
                    if lp.risk_row[j] != 0.0
                },
                "<=",
                float(lp.risk_rhs),
            )
        )
    problem = LpTextProblem(
        sense="max",
        objective={
            _var_name(lp.columns[j]): float(c)
            for j, c in enumerate(lp.objective)
            if c != 0.0 or lp.columns[j] == SLACK
        },
        constraints=tuple(constraints),
    )
    return write_lp(problem)


def _solve_external(lp: LpProblem, command: str) -> tuple[str, np.ndarray | None, int]:
    proc = subprocess.run(
        shlex.split(command),
        input=to_lp_text(lp),
        capture_output=True,
        text=True,
        timeout=600,
    )
    if proc.returncode != 0:
        raise NumericalFailureError(
            f"external solver exited {proc.returncode}: {proc.stderr.strip()}"
        )
    status, _, values = parse_solution(proc.stdout)
    if status != OPTIMAL:
        return status, None, 0
    x = np.array([values.get(_var_name(key), 0.0) for key in lp.columns])
    return status, x, 0


def _crash_basis(lp: LpProblem) -> list[int] | None:
    """Feasible starting basis induced by a minimal-risk deterministic policy.

    Value iteration on expected discounted violation cost picks one action
    per transient state.  The matching basis matrix is I - gamma P^T, whose
    inverse is the nonnegative Neumann series, so the basic point solves the
    balance rows with nonnegative occupancies and phase 1 can be skipped.
    The budget slack joins the basis when the greedy policy fits the budget;
    the relaxed overflow column joins instead when it does not.
    """
    p = lp.product
    gamma = lp.cfg.gamma
    real = [key for key in lp.columns if key != SLACK]
    ncols = len(real)
    if ncols == 0:
        return None
    transient = sorted({z for z, _ in real})
    row_index = {z: i for i, z in enumerate(transient)}
    nrows = len(transient)

    col_row = np.empty(ncols, dtype=np.intp)
    imm = np.empty(ncols)
    flat_col: list[int] = []
    flat_row: list[int] = []
    flat_pr: list[float] = []
    for j, (z, a) in enumerate(real):
        col_row[j] = row_index[z]
        imm[j] = lp.risk_row[j]
        for z2, pr in p.rows[(z, a)]:
            if z2 in row_index:
                flat_col.append(j)
                flat_row.append(row_index[z2])
                flat_pr.append(pr)
    succ_col = np.asarray(flat_col, dtype=np.intp)
    succ_row = np.asarray(flat_row, dtype=np.intp)
    succ_pr = np.asarray(flat_pr)

    v = np.zeros(nrows)
    for _ in range(20_000):
        q = imm + gamma * np.bincount(
            succ_col, weights=succ_pr * v[succ_row], minlength=ncols
        )
        v2 = np.full(nrows, np.inf)
        np.minimum.at(v2, col_row, q)
        delta = float(np.abs(v2 - v).max(initial=0.0))
        v = v2
        if delta <= 1e-12 * max(1.0, float(np.abs(v).max(initial=0.0))):
            break
    q = imm + gamma * np.bincount(succ_col, weights=succ_pr * v[succ_row], minlength=ncols)

    chosen = np.full(nrows, -1, dtype=np.intp)
    for j in range(ncols):
        r = col_row[j]
        if chosen[r] < 0 and q[j] <= v[r] + 1e-10:
            chosen[r] = j
    if int(chosen.min(initial=0)) < 0:
        return None
    basis = [int(j) for j in chosen]
    if np.isfinite(lp.risk_rhs):
        risk0 = float(v[row_index[p.z0]])
        if risk0 > lp.risk_rhs and lp.cfg.relaxed:
            basis.append(lp.var_index[SLACK])
        else:
            basis.append(len(lp.columns))  # budget row slack
    return basis


def _solve_builtin(lp: LpProblem) -> tuple[str, np.ndarray | None, int]:
    hint = _crash_basis(lp)
    if np.isfinite(lp.risk_rhs):
        result = solve_lp(
            lp.objective,
            a_eq=lp.a_eq,
            b_eq=lp.b_eq,
            a_ub=lp.risk_row[None, :],
            b_ub=[lp.risk_rhs],
            maximize=True,
            basis_hint=hint,
        )
    else:
        result = solve_lp(
            lp.objective, a_eq=lp.a_eq, b_eq=lp.b_eq, maximize=True, basis_hint=hint
        )
    return result.status, result.x, result.iterations


def solve(lp: LpProblem) -> OccupationSolution:
    cfg = lp.cfg
    if not lp.columns:  # z0 is terminal: nothing to decide, only constants
        risk = lp.risk_const
        if risk > cfg.r_th + cfg.feas_tol and not cfg.relaxed:
            return OccupationSolution(INFEASIBLE, {}, None, None, None)
        slack = max(0.0, risk - cfg.r_th) if cfg.relaxed else None
        return OccupationSolution(OPTIMAL, {}, lp.objective_const, risk, slack)

    if cfg.solver == "builtin":
        status, x, iterations = _solve_builtin(lp)
    elif cfg.solver.startswith("external:"):
        status, x, iterations = _solve_external(lp, cfg.solver.split(":", 1)[1])
    else:
        raise ValueError(f"unknown solver {cfg.solver!r}")
    if status != OPTIMAL:
        return OccupationSolution(status, {}, None, None, None, iterations)

    residual = float(np.abs(lp.a_eq @ x - lp.b_eq).max(initial=0.0))
    if residual > cfg.feas_tol:
        raise NumericalFailureError(f"balance residual {residual:.3e} above tolerance")
    beta = {}
    slack = None
    for key, value in zip(lp.columns, x):
        if key == SLACK:
            slack = float(value)
        else:
            beta[key] = float(value)
    sol = OccupationSolution(OPTIMAL, beta, None, None, slack, iterations)
    sol.objective = reward_of(sol, lp.product, cfg)
    sol.risk = risk_of(sol, lp.product, cfg)
    if not cfg.relaxed and sol.risk > cfg.r_th + cfg.feas_tol:
        raise NumericalFailureError(
            f"solver returned risk {sol.risk} above threshold {cfg.r_th}"
        )
    return sol


def synthesize(p: ProductMdp, cfg: SynthesisConfig) -> OccupationSolution:
    return solve(build_lp(p, cfg))


def reward_of(sol: OccupationSolution, p: ProductMdp, cfg: SynthesisConfig) -> float:
    value = 1.0 if p.z0 in p.goal else 0.0
    for (z, a), beta in sol.beta.items():
        inflow = sum(pr for z2, pr in p.rows[(z, a)] if z2 in p.goal)
        value += cfg.gamma * beta * inflow
    return value


def risk_of(sol: OccupationSolution, p: ProductMdp, cfg: SynthesisConfig) -> float:
    value = p.cost[p.z0] if p.z0 in p.dead else 0.0
    for (z, a), beta in sol.beta.items():
        inflow = sum(pr * p.cost[z2] for z2, pr in p.rows[(z, a)] if z2 in p.dead)
        value += cfg.gamma * beta * inflow
    return value


def extract_policy(sol: OccupationSolution, p: ProductMdp) -> StochasticPolicy:
    if sol.status != OPTIMAL:
        raise ValueError(f"cannot extract a policy from a {sol.status} solution")
    rows: dict[int, tuple[tuple[int, float], ...]] = {}
    fallback = set()
    for z in range(p.n_states):
        if p.is_terminal(z):
            continue
        acts = p.actions_of(z)
        mass = {a: max(sol.beta.get((z, a), 0.0), 0.0) for a in acts}
        denom = sum(mass.values())
        if denom > DENOM_TOL:
            rows[z] = tuple((a, mass[a] / denom) for a in acts)
        else:
            rows[z] = tuple((a, 1.0 / len(acts)) for a in acts)
            fallback.add(z)
    return StochasticPolicy(rows=rows, fallback=frozenset(fallback))


def solution_to_json(sol: OccupationSolution, pol: StochasticPolicy | None = None) -> dict:
    out = {
        "status": sol.status,
        "objective": sol.objective,
        "risk": sol.risk,
        "slack": sol.slack,
        "beta": [
            {"state": z, "action": a, "value": v}
            for (z, a), v in sorted(sol.beta.items())
        ],
    }
    if pol is not None:
        out["policy"] = [
            {"state": z, "probs": {str(a): pr for a, pr in row}}
            for z, row in sorted(pol.rows.items())
        ]
        out["fallback"] = sorted(pol.fallback)
    return out


def policy_to_json(pol: StochasticPolicy) -> dict:
    return {
        "rows": {str(z): {str(a): pr for a, pr in row} for z, row in pol.rows.items()},
        "fallback": sorted(pol.fallback),
    }


def policy_from_json(data: dict) -> StochasticPolicy:
    return StochasticPolicy(
        rows={
            int(z): tuple(sorted((int(a), float(pr)) for a, pr in row.items()))
            for z, row in data["rows"].items()
        },
        fallback=frozenset(data["fallback"]),
    )
