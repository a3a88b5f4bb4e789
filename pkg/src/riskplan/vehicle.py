"""Continuous vehicle layer: bicycle dynamics, grid abstraction, tracking.

The planner works on a finite grid MDP; this module supplies the other half
of the loop.  A kinematic bicycle with additive Gaussian disturbance is the
ground truth, `abstract` turns a gridded workspace plus expert action
distributions into the `Mdp` the synthesizer consumes, `track` refines an
abstract move into a steering/acceleration command, and `simulate` closes
the loop while running the task automata on the letters the vehicle
actually produces.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, TextIO

import numpy as np

from .errors import (
    AbstractionMismatchError,
    BadDistributionError,
    InputOutOfRangeError,
    InvalidModelError,
)
from .ltl import letter_names, step as dfa_step
from .models import Mdp

if TYPE_CHECKING:
    from .scenarios import CompiledScenario

INPUT_TOL = 1e-9
ROW_TOL = 1e-12

# substream roles for the per-run counter RNG
ENV_STREAM, ACTION_STREAM, NOISE_STREAM = 0, 1, 2


@dataclass(frozen=True)
class VehicleState:
    px: float
    py: float
    theta: float
    v: float


@dataclass(frozen=True)
class VehicleInput:
    phi: float
    a: float


@dataclass(frozen=True)
class BicycleParams:
    """Bicycle step size, disturbance and admissible ranges.

    `noise` holds the diagonal of the disturbance covariance (variances, one
    per state coordinate).  Inputs live in the box |phi| <= phi_max,
    |a| <= a_max; speed is clamped to [v_min, v_max] after every step.
    """

    wheelbase: float = 2.0
    dt: float = 1.0
    noise: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    v_min: float = 0.0
    v_max: float = 2.0
    phi_max: float = 1.0
    a_max: float = 1.5

    def __post_init__(self):
        if self.wheelbase <= 0.0:
            raise InvalidModelError("wheelbase must be positive")
        if self.dt <= 0.0:
            raise InvalidModelError("dt must be positive")
        if len(self.noise) != 4 or any(s < 0.0 for s in self.noise):
            raise InvalidModelError("noise must be four nonnegative variances")
        if self.v_min > self.v_max:
            raise InvalidModelError("empty speed range")
        if self.phi_max < 0.0 or self.a_max < 0.0:
            raise InvalidModelError("input box must be nonempty")


def bicycle_step(
    x: VehicleState,
    u: VehicleInput,
    p: BicycleParams,
    noise: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0),
) -> VehicleState:
    """One Euler step of the disturbed kinematic bicycle.

    Position advances along the current heading, the heading turns with
    v/L tan(phi), speed integrates the acceleration and is clamped to the
    admissible range.  `noise` is added componentwise.
    """
    if abs(u.phi) > p.phi_max + INPUT_TOL or abs(u.a) > p.a_max + INPUT_TOL:
        raise InputOutOfRangeError(
            f"input (phi={u.phi}, a={u.a}) outside |phi|<={p.phi_max}, |a|<={p.a_max}"
        )
    px = x.px + x.v * math.cos(x.theta) * p.dt + noise[0]
    py = x.py + x.v * math.sin(x.theta) * p.dt + noise[1]
    theta = x.theta + x.v / p.wheelbase * math.tan(u.phi) * p.dt + noise[2]
    v = x.v + u.a * p.dt + noise[3]
    v = min(max(v, p.v_min), p.v_max)
    return VehicleState(px, py, theta, v)


@dataclass(frozen=True)
class MotionPrimitive:
    """Named cell-offset action with an expert outcome distribution.

    `intended` is the offset the controller aims for; `outcomes` lists
    (dx, dy, probability) triples describing where the abstract model says
    the vehicle may actually end up.
    """

    name: str
    intended: tuple[int, int]
    outcomes: tuple[tuple[int, int, float], ...]


@dataclass(frozen=True)
class GridAbstraction:
    """Uniform cell grid over a rectangle plus the motion primitive set."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    cell: float
    primitives: tuple[MotionPrimitive, ...]

    def __post_init__(self):
        if self.cell <= 0.0:
            raise InvalidModelError("cell size must be positive")
        for axis, lo, hi in (("x", self.x_min, self.x_max), ("y", self.y_min, self.y_max)):
            if hi <= lo:
                raise InvalidModelError(f"{axis} bounds are empty")
            n = (hi - lo) / self.cell
            if abs(n - round(n)) > 1e-9 or round(n) < 1:
                raise InvalidModelError(f"{axis} extent is not a whole number of cells")

    @property
    def nx(self) -> int:
        return round((self.x_max - self.x_min) / self.cell)

    @property
    def ny(self) -> int:
        return round((self.y_max - self.y_min) / self.cell)

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    def index(self, ix: int, iy: int) -> int:
        return iy * self.nx + ix

    def coords(self, cell: int) -> tuple[int, int]:
        return cell % self.nx, cell // self.nx

    def center(self, cell: int) -> tuple[float, float]:
        ix, iy = self.coords(cell)
        return self.x_min + (ix + 0.5) * self.cell, self.y_min + (iy + 0.5) * self.cell

    def cell_name(self, ix: int, iy: int) -> str:
        return f"c{ix}_{iy}"

    def cell_of(self, px: float, py: float) -> int:
        """Cell containing (px, py); the max edges belong to the last cell."""
        if not (self.x_min <= px <= self.x_max and self.y_min <= py <= self.y_max):
            raise AbstractionMismatchError(
                f"position ({px}, {py}) left the gridded region "
                f"[{self.x_min}, {self.x_max}] x [{self.y_min}, {self.y_max}]"
            )
        ix = min(int((px - self.x_min) / self.cell), self.nx - 1)
        iy = min(int((py - self.y_min) / self.cell), self.ny - 1)
        return self.index(ix, iy)


def abstract(g: GridAbstraction, initial: int = 0) -> Mdp:
    """Finite MDP over grid cells from the expert offset distributions.

    Probability mass whose offset would leave the grid folds back into
    staying put, so every row stays stochastic and |S| equals the cell count.
    """
    if not g.primitives:
        raise BadDistributionError("no motion primitives")
    names = [p.name for p in g.primitives]
    if len(set(names)) != len(names):
        raise InvalidModelError("duplicate primitive names")
    if not (0 <= initial < g.n_cells):
        raise InvalidModelError(f"initial cell {initial} out of range")
    rows: dict[tuple[int, int], tuple[tuple[int, float], ...]] = {}
    for a, prim in enumerate(g.primitives):
        total = 0.0
        for _, _, pr in prim.outcomes:
            if pr < 0.0:
                raise BadDistributionError(f"action {prim.name!r} has negative mass {pr}")
            total += pr
        if abs(total - 1.0) > ROW_TOL:
            raise BadDistributionError(f"action {prim.name!r} outcome mass is {total!r}")
        for c in range(g.n_cells):
            ix, iy = g.coords(c)
            acc: dict[int, float] = {}
            for dx, dy, pr in prim.outcomes:
                if pr == 0.0:
                    continue
                jx, jy = ix + dx, iy + dy
                inside = 0 <= jx < g.nx and 0 <= jy < g.ny
                tgt = g.index(jx, jy) if inside else c
                acc[tgt] = acc.get(tgt, 0.0) + pr
            rows[(c, a)] = tuple(sorted(acc.items()))
    return Mdp(
        state_names=tuple(g.cell_name(*g.coords(c)) for c in range(g.n_cells)),
        action_names=tuple(names),
        initial=initial,
        rows=rows,
    )


@dataclass(frozen=True)
class TrackerParams:
    """Reference tracker settings.

    Horizon and weights are desk-scale defaults chosen for the bundled
    examples, not calibrated against any measured vehicle.
    """

    horizon: int = 3
    q: tuple[float, float, float, float] = (1.0, 1.0, 0.1, 0.1)
    r: tuple[float, float] = (0.1, 0.1)
    n_phi: int = 5
    n_acc: int = 5


def _wrap_angle(d: float) -> float:
    return (d + math.pi) % (2.0 * math.pi) - math.pi


def track(
    x0: VehicleState,
    x_ref: VehicleState,
    p: BicycleParams,
    tp: TrackerParams = TrackerParams(),
) -> VehicleInput:
    """Pick the input whose constant-input rollout best tracks x_ref.

    Enumerates an n_phi x n_acc lattice over the input box, holds each
    candidate for `horizon` noiseless steps, scores
    sum_k (x_k+1 - x_ref)' Q (x_k+1 - x_ref) + u' R u and returns the best
    candidate (ties go to the first in lattice order, so the choice is
    deterministic).
    """
    if tp.horizon < 1:
        raise InvalidModelError("tracking horizon must be at least 1")
    if tp.n_phi < 1 or tp.n_acc < 1:
        raise InvalidModelError("input lattice must be nonempty")
    phis = np.linspace(-p.phi_max, p.phi_max, tp.n_phi) if tp.n_phi > 1 else np.array([0.0])
    accs = np.linspace(-p.a_max, p.a_max, tp.n_acc) if tp.n_acc > 1 else np.array([0.0])
    best: VehicleInput | None = None
    best_cost = math.inf
    for phi in phis:
        for acc in accs:
            u = VehicleInput(float(phi), float(acc))
            x = x0
            cost = 0.0
            for _ in range(tp.horizon):
                x = bicycle_step(x, u, p)
                err = (
                    x.px - x_ref.px,
                    x.py - x_ref.py,
                    _wrap_angle(x.theta - x_ref.theta),
                    x.v - x_ref.v,
                )
                cost += sum(w * e * e for w, e in zip(tp.q, err))
                cost += tp.r[0] * u.phi * u.phi + tp.r[1] * u.a * u.a
            if cost < best_cost:
                best, best_cost = u, cost
    assert best is not None
    return best


@dataclass(frozen=True)
class TrajectoryStep:
    """State of the loop at tick t plus the input applied during the tick."""

    t: int
    state: VehicleState
    u: VehicleInput
    cell: int
    env: int
    q_cs: int
    q_s: int
    letter: int


@dataclass
class Trajectory:
    steps: list[TrajectoryStep]
    outcome: str  # "goal", "dead" or "truncated"
    final_state: VehicleState
    final_cell: int
    seed: int


def _stream(seed: int, role: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, role]))


def _sample_indexed(row, rng: np.random.Generator) -> int:
    u = rng.random()
    acc = 0.0
    for idx, pr in row:
        acc += pr
        if u < acc:
            return idx
    return row[-1][0]


def _reference(
    g: GridAbstraction, p: BicycleParams, x: VehicleState, cell: int, prim: MotionPrimitive
) -> VehicleState:
    ix, iy = g.coords(cell)
    jx, jy = ix + prim.intended[0], iy + prim.intended[1]
    if not (0 <= jx < g.nx and 0 <= jy < g.ny):
        jx, jy = ix, iy  # intended move leaves the grid: hold the cell
    cx, cy = g.center(g.index(jx, jy))
    if (jx, jy) == (ix, iy):
        return VehicleState(cx, cy, x.theta, 0.0)
    dx, dy = cx - x.px, cy - x.py
    dist = math.hypot(dx, dy)
    theta = math.atan2(dy, dx) if dist > 1e-6 else x.theta
    # ask for the speed that covers the hop in one control period
    v = min(p.v_max, dist / p.dt)
    return VehicleState(cx, cy, theta, v)


def simulate(sc: "CompiledScenario", policy, steps: int, seed: int) -> Trajectory:
    """Closed loop: policy on the abstract state, bicycle underneath.

    One bicycle step per abstract tick.  The abstract vehicle state is
    re-read from the continuous position every tick, so the recorded cell
    sequence is exactly what the automata consume; the environment chain
    advances in lockstep.  Three independent counter-based substreams
    (environment, action choice, disturbance) make the run reproducible
    from the seed alone.

    The episode stops when the automaton pair enters a goal or violation
    configuration, or after `steps` ticks.  A policy row is looked up by the
    current (composed state, automata) triple; triples the synthesized
    product never reached fall back to a uniform action choice.
    """
    g = sc.grid
    p = sc.vehicle
    env_rng = _stream(seed, ENV_STREAM)
    act_rng = _stream(seed, ACTION_STREAM)
    noise_rng = _stream(seed, NOISE_STREAM)
    noise_std = np.sqrt(np.asarray(p.noise, dtype=float))
    pol_rows = getattr(policy, "rows", policy)

    index: dict[tuple[int, int, int], int] = {}
    for z, triple in enumerate(sc.product.states):
        if not sc.product.is_terminal(z):
            index[triple] = z

    x = sc.initial_state
    env = sc.env.initial
    cell = g.cell_of(x.px, x.py)
    s = sc.composed.index_of(cell, env)
    # the initial label is consumed once before the loop, as in the product
    letter0 = sc.labeling.label_of(s)
    q_cs = dfa_step(sc.a_cs, sc.a_cs.initial, letter0)
    q_s = dfa_step(sc.a_s, sc.a_s.initial, letter0)

    out: list[TrajectoryStep] = []
    outcome = "truncated"
    for t in range(steps):
        if q_s in sc.a_s.final:
            outcome = "dead"
            break
        if q_cs in sc.a_cs.final:
            outcome = "goal"
            break
        letter = sc.labeling.label_of(s)
        z = index.get((s, q_cs, q_s))
        row = pol_rows.get(z) if z is not None else None
        if row:
            a = _sample_indexed(row, act_rng)
        else:
            a = int(act_rng.random() * len(g.primitives))
            a = min(a, len(g.primitives) - 1)
        prim = g.primitives[a]
        u = track(x, _reference(g, p, x, cell, prim), p, sc.tracker)
        w = noise_rng.standard_normal(4) * noise_std
        x2 = bicycle_step(x, u, p, (float(w[0]), float(w[1]), float(w[2]), float(w[3])))
        out.append(TrajectoryStep(t, x, u, cell, env, q_cs, q_s, letter))
        env = _sample_indexed(sc.env.rows[env], env_rng)
        q_cs = dfa_step(sc.a_cs, q_cs, letter)
        q_s = dfa_step(sc.a_s, q_s, letter)
        x = x2
        cell = g.cell_of(x.px, x.py)
        s = sc.composed.index_of(cell, env)
    else:
        if q_s in sc.a_s.final:
            outcome = "dead"
        elif q_cs in sc.a_cs.final:
            outcome = "goal"
    return Trajectory(steps=out, outcome=outcome, final_state=x, final_cell=cell, seed=seed)


CSV_COLUMNS = ("t", "px", "py", "theta", "v", "phi", "a", "cell", "q_cs", "q_s", "letter")


def write_trajectory_csv(traj: Trajectory, ap, fh: TextIO) -> None:
    """One row per executed tick; floats use repr so reruns are byte-equal."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for st in traj.steps:
        w.writerow(
            (
                st.t,
                repr(st.state.px),
                repr(st.state.py),
                repr(st.state.theta),
                repr(st.state.v),
                repr(st.u.phi),
                repr(st.u.a),
                st.cell,
                st.q_cs,
                st.q_s,
                "|".join(letter_names(st.letter, ap)),
            )
        )
