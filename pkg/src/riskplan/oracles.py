"""Independent checks for synthesized policies.

Three estimators of the same quantities, kept deliberately separate from the
LP path: exact fixed-policy evaluation by dense linear solves, optimal
unconstrained values by value iteration, and seeded Monte-Carlo rollouts.
All three operate on a ProductMdp with first-hit terminal semantics: a
trajectory earns gamma^tau on entering G at step tau, gamma^tau * c(z) on
entering D, and nothing if truncated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidModelError, NumericalFailureError
from .product import ProductMdp

POLICY_ROW_TOL = 1e-6


@dataclass
class EvaluationResult:
    reward: float
    risk: float
    occupation: dict[int, float]
    values_reward: np.ndarray
    values_risk: np.ndarray


@dataclass
class ValueIterationResult:
    values: np.ndarray
    residuals: tuple[float, ...]


@dataclass
class RolloutStats:
    n: int
    reward_mean: float
    reward_stderr: float
    risk_mean: float
    risk_stderr: float
    goal_hits: int
    dead_hits: int
    truncated: int
    seed: int
    horizon: int


def _policy_rows(pol) -> dict:
    return getattr(pol, "rows", pol)


def _transient_states(p: ProductMdp) -> list[int]:
    return [z for z in range(p.n_states) if not p.is_terminal(z)]


def policy_eval(p: ProductMdp, pol, gamma: float) -> EvaluationResult:
    """Exact reward/risk/occupation of a fixed policy via linear solves."""
    rows = _policy_rows(pol)
    transient = _transient_states(p)
    idx = {z: i for i, z in enumerate(transient)}
    n = len(transient)
    kernel = np.zeros((n, n))
    goal_in = np.zeros(n)
    dead_in = np.zeros(n)
    for z in transient:
        if z not in rows:
            raise InvalidModelError(f"policy undefined for non-terminal state {z}")
        dist = dict(rows[z])
        total = sum(dist.values())
        if abs(total - 1.0) > POLICY_ROW_TOL:
            raise InvalidModelError(f"policy row at state {z} sums to {total!r}")
        i = idx[z]
        for a, pa in dist.items():
            if pa == 0.0:
                continue
            for z2, pt in p.rows[(z, a)]:
                w = pa * pt
                if z2 in p.goal:
                    goal_in[i] += w
                elif z2 in p.dead:
                    dead_in[i] += w * p.cost[z2]
                else:
                    kernel[i, idx[z2]] += w
    system = np.eye(n) - gamma * kernel
    try:
        v_reward = np.linalg.solve(system, gamma * goal_in) if n else np.zeros(0)
        v_risk = np.linalg.solve(system, gamma * dead_in) if n else np.zeros(0)
        flow = np.zeros(n)
        if p.z0 in idx:
            rhs = np.zeros(n)
            rhs[idx[p.z0]] = 1.0
            flow = np.linalg.solve(system.T, rhs)
    except np.linalg.LinAlgError as exc:  # not reachable for gamma < 1
        raise NumericalFailureError(f"singular evaluation system: {exc}") from exc

    values_reward = np.zeros(p.n_states)
    values_risk = np.zeros(p.n_states)
    for z in p.goal:
        values_reward[z] = 1.0
    for z in p.dead:
        values_risk[z] = p.cost[z]
    for z, i in idx.items():
        values_reward[z] = v_reward[i]
        values_risk[z] = v_risk[i]
    return EvaluationResult(
        reward=float(values_reward[p.z0]),
        risk=float(values_risk[p.z0]),
        occupation={z: float(flow[i]) for z, i in idx.items()},
        values_reward=values_reward,
        values_risk=values_risk,
    )


def value_iteration_reach(
    p: ProductMdp,
    gamma: float,
    eps: float = 1e-8,
    max_iter: int = 10**6,
) -> ValueIterationResult:
    """Optimal discounted G-reach values, ignoring the risk constraint.

    For gamma < 1 the loop stops once the Bellman residual is below
    eps*(1-gamma)/gamma, which bounds the sup-norm error by eps.  gamma = 1
    computes the plain maximal reach probability and stops at residual eps.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    target = eps * (1.0 - gamma) / gamma if gamma < 1.0 else eps
    values = np.zeros(p.n_states)
    for z in p.goal:
        values[z] = 1.0
    transient = _transient_states(p)
    # freeze the sparse structure once: per (state, action) successor arrays
    acts = {z: p.actions_of(z) for z in transient}
    succ = {
        (z, a): (
            np.fromiter((z2 for z2, _ in p.rows[(z, a)]), dtype=np.int64),
            np.fromiter((pr for _, pr in p.rows[(z, a)]), dtype=np.float64),
        )
        for z in transient
        for a in acts[z]
    }
    residuals: list[float] = []
    for _ in range(max_iter):
        residual = 0.0
        new = values.copy()
        for z in transient:
            best = 0.0
            for a in acts[z]:
                targets, probs = succ[(z, a)]
                best = max(best, gamma * float(probs @ values[targets]))
            residual = max(residual, abs(best - values[z]))
            new[z] = best
        values = new
        residuals.append(residual)
        if residual <= target or residual == 0.0:
            break
    return ValueIterationResult(values=values, residuals=tuple(residuals))


def default_horizon(gamma: float) -> int:
    if not 0 < gamma < 1:
        raise ValueError("default horizon needs 0 < gamma < 1")
    return max(1, math.ceil(math.log(1e-6) / math.log(gamma)))


def rollout(
    p: ProductMdp,
    pol,
    gamma: float,
    n: int,
    horizon: int | None = None,
    seed: int = 0,
) -> RolloutStats:
    """n independent trajectories from z0 with per-trajectory RNG streams.

    Stream i is Philox keyed by (seed, i), so estimates are reproducible and
    order-independent.  horizon defaults to the gamma^t <= 1e-6 cutoff.
    """
    if n < 1:
        raise ValueError("need at least one trajectory")
    if horizon is None:
        horizon = default_horizon(gamma)
    rows = _policy_rows(pol)
    pol_cum: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for z in _transient_states(p):
        if z not in rows:
            raise InvalidModelError(f"policy undefined for non-terminal state {z}")
        pairs = tuple(rows[z])
        pol_cum[z] = (
            np.fromiter((a for a, _ in pairs), dtype=np.int64),
            np.cumsum(np.fromiter((pr for _, pr in pairs), dtype=np.float64)),
        )
    row_cum = {
        key: (
            np.fromiter((z2 for z2, _ in row), dtype=np.int64),
            np.cumsum(np.fromiter((pr for _, pr in row), dtype=np.float64)),
        )
        for key, row in p.rows.items()
    }

    rewards = np.zeros(n)
    risks = np.zeros(n)
    goal_hits = dead_hits = truncated = 0
    chunk = 64  # most trajectories terminate well before the horizon
    for i in range(n):
        rng = np.random.Generator(np.random.Philox(key=[seed, i]))
        u = rng.random((min(chunk, horizon + 1), 2))
        z = p.z0
        stopped = False
        for t in range(horizon + 1):
            if z in p.goal:
                rewards[i] = gamma**t
                goal_hits += 1
                stopped = True
                break
            if z in p.dead:
                risks[i] = gamma**t * p.cost[z]
                dead_hits += 1
                stopped = True
                break
            if t == horizon:
                break
            if t >= len(u):
                u = np.vstack([u, rng.random((min(chunk, horizon + 1 - len(u)), 2))])
            actions, acum = pol_cum[z]
            a = int(actions[np.searchsorted(acum, u[t, 0] * acum[-1])])
            succs, scum = row_cum[(z, a)]
            z = int(succs[np.searchsorted(scum, u[t, 1] * scum[-1])])
        if not stopped:
            truncated += 1

    def stderr(x: np.ndarray) -> float:
        return float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0

    return RolloutStats(
        n=n,
        reward_mean=float(rewards.mean()),
        reward_stderr=stderr(rewards),
        risk_mean=float(risks.mean()),
        risk_stderr=stderr(risks),
        goal_hits=goal_hits,
        dead_hits=dead_hits,
        truncated=truncated,
        seed=seed,
        horizon=horizon,
    )
