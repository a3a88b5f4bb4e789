"""Dense two-phase primal simplex for desk-scale synthesis problems.

Solves min/max of c.x subject to A_eq x = b_eq, A_ub x <= b_ub, x >= 0.
Pivoting uses Dantzig's rule for speed, breaks ratio-test ties
lexicographically to avoid wandering on degenerate plateaus, and switches
to Bland's rule permanently once the objective stalls, which guarantees
termination.  A caller who knows a basic feasible point can pass it as
basis_hint to skip phase 1 entirely; infeasible or singular hints fall
back to the ordinary artificial start.  Claimed optima are certified by
re-solving the final basis from the original data; on certification
failure the tableau is rebuilt from that fresh factorization and pivoting
resumes (up to three refreshes) before giving up.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailureError

FEAS_TOL = 1e-8
OPT_TOL = 1e-9
PIVOT_TOL = 1e-10
STALL_LIMIT = 1000
REFRESH_EVERY = 250
MAX_REFRESH = 3

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"


@dataclass
class LpResult:
    status: str
    x: np.ndarray | None
    objective: float | None
    iterations: int


class _Unbounded(Exception):
    def __init__(self, col: int):
        self.col = col


class _Simplex:
    """Tableau state: constraint rows, one cost row, explicit basis."""

    def __init__(self, a: np.ndarray, b: np.ndarray, cost: np.ndarray, basis: list[int]):
        self.a = a
        self.b = b
        self.cost = cost
        self.basis = basis
        self._factorize()
        self.iterations = 0
        self.bland = False
        self._stall = 0
        self._last_obj = np.inf

    def _factorize(self) -> None:
        """Rebuild the tableau from the original data and the current basis."""
        m, n = self.a.shape
        self.tab = np.zeros((m + 1, n + 1))
        try:
            # express constraints in the given basis: B^-1 [A | b]
            solved = np.linalg.solve(
                self.a[:, self.basis], np.hstack([self.a, self.b[:, None]])
            )
        except np.linalg.LinAlgError as exc:
            raise NumericalFailureError(f"singular starting basis: {exc}") from exc
        self.tab[:m, :n] = solved[:, :n]
        self.tab[:m, n] = solved[:, n]
        self._recompute_cost_row()

    def _recompute_cost_row(self) -> None:
        m, n = self.a.shape
        base = self.tab[:m, :n][:, self.basis]
        try:
            y = np.linalg.solve(base.T, self.cost[self.basis])
        except np.linalg.LinAlgError as exc:
            raise NumericalFailureError(f"singular working basis: {exc}") from exc
        self.tab[m, :n] = self.cost - y @ self.tab[:m, :n]
        self.tab[m, n] = -float(self.cost[self.basis] @ self.tab[:m, n])

    def objective(self) -> float:
        return -float(self.tab[-1, -1])

    def _entering(self, allowed: np.ndarray) -> int | None:
        row = self.tab[-1, :-1]
        if self.bland:
            for j in np.flatnonzero(allowed):
                if row[j] < -OPT_TOL:
                    return int(j)
            return None
        masked = np.where(allowed, row, np.inf)
        j = int(np.argmin(masked))
        return j if masked[j] < -OPT_TOL else None

    def _leaving(self, col: int) -> int:
        coefs = self.tab[:-1, col]
        rhs = self.tab[:-1, -1]
        candidates = np.flatnonzero(coefs > PIVOT_TOL)
        if candidates.size == 0:
            raise _Unbounded(col)
        ratios = np.maximum(rhs[candidates], 0.0) / coefs[candidates]
        best = ratios.min()
        tied = candidates[ratios <= best + 1e-12]
        if self.bland:
            # leave the tied row whose basic variable has the lowest index
            return int(min(tied, key=lambda r: self.basis[r]))
        if tied.size > 1:
            # break degenerate ties on the largest pivot element: tiny
            # pivots inject 1/eps multipliers that corrupt the tableau
            return int(tied[np.argmax(coefs[tied])])
        return int(tied[0])

    def _pivot(self, row: int, col: int) -> None:
        tab = self.tab
        tab[row] /= tab[row, col]
        colvals = tab[:, col].copy()
        colvals[row] = 0.0
        tab -= np.outer(colvals, tab[row])
        tab[:, col] = 0.0
        tab[row, col] = 1.0
        self.basis[row] = col
        self.iterations += 1
        obj = self.objective()
        if obj < self._last_obj - 1e-12:
            self._stall = 0
        else:
            self._stall += 1
            if self._stall >= STALL_LIMIT:
                self.bland = True
        self._last_obj = obj

    def run(self, allowed: np.ndarray, max_iter: int) -> None:
        since_refresh = 0
        while True:
            if self.iterations > max_iter:
                raise NumericalFailureError(
                    f"no convergence within {max_iter} pivots"
                )
            if since_refresh >= REFRESH_EVERY:
                # discard accumulated pivot roundoff
                self._factorize()
                since_refresh = 0
            col = self._entering(allowed)
            if col is None:
                return
            row = self._leaving(col)
            self._pivot(row, col)
            since_refresh += 1


def _certify(a, b, cost, basis, allowed):
    """Fresh solve of the final basis; returns (x, ok) with x over all columns."""
    base = a[:, basis]
    try:
        xb = np.linalg.solve(base, b)
        y = np.linalg.solve(base.T, cost[basis])
    except np.linalg.LinAlgError:
        return None, False
    x = np.zeros(a.shape[1])
    x[basis] = xb
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    feasible = (
        float(np.abs(a @ x - b).max(initial=0.0)) <= FEAS_TOL * scale
        and float(xb.min(initial=0.0)) >= -1e-9
    )
    reduced = cost - y @ a
    optimal = float(reduced[allowed].min(initial=0.0)) >= -1e-7
    return x, feasible and optimal


def _feasible_hint(a: np.ndarray, b: np.ndarray, hint, n_work: int) -> list[int] | None:
    """Accept a starting basis only if it is nonsingular and primal feasible."""
    m = a.shape[0]
    basis = [int(j) for j in hint]
    if len(basis) != m or len(set(basis)) != m:
        return None
    if any(j < 0 or j >= n_work for j in basis):
        return None
    try:
        xb = np.linalg.solve(a[:, basis], b)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(xb)):
        return None
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    if float(xb.min(initial=0.0)) < -FEAS_TOL * scale:
        return None
    return basis


def solve_lp(
    c,
    a_eq=None,
    b_eq=None,
    a_ub=None,
    b_ub=None,
    *,
    maximize: bool = False,
    max_iter: int = 200_000,
    basis_hint=None,
) -> LpResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    m_eq = m_ub = 0
    if a_eq is not None and len(a_eq):
        a_eq = np.asarray(a_eq, dtype=float).reshape(-1, n)
        b_eq = np.asarray(b_eq, dtype=float).ravel()
        m_eq = a_eq.shape[0]
    if a_ub is not None and len(a_ub):
        a_ub = np.asarray(a_ub, dtype=float).reshape(-1, n)
        b_ub = np.asarray(b_ub, dtype=float).ravel()
        m_ub = a_ub.shape[0]
    m = m_eq + m_ub
    if m == 0:
        raise NumericalFailureError("problem has no constraints")
    a = np.zeros((m, n + m_ub))
    b = np.zeros(m)
    if m_eq:
        a[:m_eq, :n] = a_eq
        b[:m_eq] = b_eq
    if m_ub:
        a[m_eq:, :n] = a_ub
        a[m_eq:, n:] = np.eye(m_ub)
        b[m_eq:] = b_ub
    neg = b < 0
    a[neg] *= -1
    b[neg] *= -1

    cost = np.concatenate([-c if maximize else c, np.zeros(m_ub)])
    n_work = n + m_ub

    total_iters = 0
    basis = _feasible_hint(a, b, basis_hint, n_work) if basis_hint is not None else None
    if basis is None:
        # phase 1: artificial basis, minimize total infeasibility
        a1 = np.hstack([a, np.eye(m)])
        cost1 = np.concatenate([np.zeros(n_work), np.ones(m)])
        state = _Simplex(a1, b, cost1, basis=list(range(n_work, n_work + m)))
        allowed1 = np.ones(n_work + m, dtype=bool)
        try:
            state.run(allowed1, max_iter)
        except _Unbounded as exc:  # phase-1 objective is bounded below by 0
            raise NumericalFailureError(f"phase-1 unbounded at column {exc.col}") from exc
        if state.objective() > FEAS_TOL * max(1.0, float(np.abs(b).max(initial=0.0))):
            return LpResult(INFEASIBLE, None, None, state.iterations)

        # pivot residual artificials out of the basis; drop redundant rows
        keep_rows = []
        for row in range(m):
            var = state.basis[row]
            if var < n_work:
                keep_rows.append(row)
                continue
            cols = np.flatnonzero(np.abs(state.tab[row, :n_work]) > 1e-9)
            if cols.size:
                state._pivot(row, int(cols[0]))
                keep_rows.append(row)
        basis = [state.basis[r] for r in keep_rows]
        a = a[keep_rows]
        b = b[keep_rows]
        total_iters = state.iterations
    allowed = np.ones(n_work, dtype=bool)
    refreshes = 0
    state = _Simplex(a, b, cost, basis=basis)
    state.iterations = total_iters
    while True:
        try:
            state.run(allowed, max_iter)
        except _Unbounded:
            return LpResult(UNBOUNDED, None, None, state.iterations)
        x, ok = _certify(a, b, cost, state.basis, allowed)
        if ok:
            value = float(cost[: n] @ x[:n]) * (-1.0 if maximize else 1.0)
            # tiny negatives from the solve are noise, not infeasibility
            solution = np.where(np.abs(x[:n]) < 1e-12, 0.0, x[:n])
            return LpResult(OPTIMAL, solution, value, state.iterations)
        refreshes += 1
        if refreshes > MAX_REFRESH:
            raise NumericalFailureError(
                "optimality certificate failed after basis refreshes"
            )
        iters = state.iterations
        state = _Simplex(a, b, cost, basis=state.basis)
        state.iterations = iters
        state.bland = True
