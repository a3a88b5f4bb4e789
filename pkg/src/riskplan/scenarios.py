"""Scenario definitions: file schema, built-in generators, and compilation.

A scenario bundles everything one synthesis run needs: the grid abstraction
with its action set, a labeling, an environment chain, the two formula
strings, the cost table for violation classes, synthesis settings, and the
continuous vehicle/tracker parameters used by the closed-loop simulator.
Files are accepted in TOML or JSON with the same section layout; saving
always writes JSON.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

try:  # stdlib from 3.11 on
    import tomllib as tomli
except ModuleNotFoundError:
    import tomli

from . import SCHEMA_VERSION
from .errors import (
    BadDistributionError,
    CostMissingError,
    FormulaSyntaxError,
    FragmentError,
    InvalidModelError,
    MissingLabelError,
    SchemaError,
    UnknownAtomError,
)
from .ltl import Dfa, letter_names, parse, step, translate_cosafe, translate_safety
from .models import (
    ComposedMdp,
    Labeling,
    Mc,
    Mdp,
    compose,
    labeling_from_json,
    mc_from_json,
    mc_to_json,
    validate,
)
from .product import ProductMdp, build_product, cost_of_letter, normalize_costs
from .synth import SynthesisConfig
from .vehicle import (
    BicycleParams,
    GridAbstraction,
    MotionPrimitive,
    TrackerParams,
    VehicleState,
    abstract,
)


@dataclass(frozen=True)
class SpecSection:
    ap: tuple[str, ...]
    cosafe: str
    safety: str


@dataclass(frozen=True)
class SynthSection:
    gamma: float = 0.95
    r_th: float = math.inf
    r_th_grid: tuple[float, ...] = ()


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario; `labels` and `costs` are kept as sorted tuples so
    that equality and hashing are order-independent."""

    name: str
    grid: GridAbstraction
    labels: tuple[tuple[str, tuple[str, ...]], ...]
    environment: Mc
    spec: SpecSection
    costs: tuple[tuple[tuple[str, ...], float], ...]
    synthesis: SynthSection
    vehicle: BicycleParams
    mpc: TrackerParams
    start: tuple[float, float, float, float] | None = None


@dataclass
class CompiledScenario:
    """Every pipeline stage of one scenario, built once and shared."""

    config: ScenarioConfig
    grid: GridAbstraction
    vehicle_mdp: Mdp
    env: Mc
    composed: ComposedMdp
    labeling: Labeling
    a_cs: Dfa
    a_s: Dfa
    product: ProductMdp
    synth: SynthesisConfig
    vehicle: BicycleParams
    tracker: TrackerParams
    initial_state: VehicleState


# ---------------------------------------------------------------------------
# dict <-> config


def _num_out(value: float):
    return "inf" if math.isinf(value) else value


def _num_in(value, path: str) -> float:
    if value == "inf":
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError("expected a number", path)
    return float(value)


def _get(data: dict, key: str, path: str, kind=None):
    if key not in data:
        raise SchemaError("missing required field", f"{path}.{key}" if path else key)
    value = data[key]
    if kind is not None and not isinstance(value, kind):
        raise SchemaError(
            f"expected {getattr(kind, '__name__', kind)}",
            f"{path}.{key}" if path else key,
        )
    return value


def config_to_dict(cfg: ScenarioConfig) -> dict:
    g, v, m = cfg.grid, cfg.vehicle, cfg.mpc
    return {
        "schema_version": SCHEMA_VERSION,
        "name": cfg.name,
        "grid": {
            "x_min": g.x_min,
            "x_max": g.x_max,
            "y_min": g.y_min,
            "y_max": g.y_max,
            "cell": g.cell,
            "actions": [
                {
                    "name": p.name,
                    "intended": list(p.intended),
                    "outcomes": [[dx, dy, pr] for dx, dy, pr in p.outcomes],
                }
                for p in g.primitives
            ],
        },
        "labels": {key: list(atoms) for key, atoms in cfg.labels},
        "environment": mc_to_json(cfg.environment),
        "spec": {"ap": list(cfg.spec.ap), "cosafe": cfg.spec.cosafe, "safety": cfg.spec.safety},
        "costs": {",".join(atoms): value for atoms, value in cfg.costs},
        "synthesis": {
            "gamma": cfg.synthesis.gamma,
            "r_th": _num_out(cfg.synthesis.r_th),
            "r_th_grid": [_num_out(r) for r in cfg.synthesis.r_th_grid],
        },
        "vehicle": {
            "wheelbase": v.wheelbase,
            "dt": v.dt,
            "noise": list(v.noise),
            "v_min": v.v_min,
            "v_max": v.v_max,
            "phi_max": v.phi_max,
            "a_max": v.a_max,
        },
        "mpc": {
            "horizon": m.horizon,
            "q": list(m.q),
            "r": list(m.r),
            "n_phi": m.n_phi,
            "n_acc": m.n_acc,
        },
        "start": None if cfg.start is None else list(cfg.start),
    }


def _grid_from_dict(data: dict) -> GridAbstraction:
    actions = _get(data, "actions", "grid", list)
    prims = []
    for i, entry in enumerate(actions):
        path = f"grid.actions[{i}]"
        if not isinstance(entry, dict):
            raise SchemaError("expected a table", path)
        name = _get(entry, "name", path, str)
        intended = _get(entry, "intended", path, list)
        outcomes = _get(entry, "outcomes", path, list)
        if len(intended) != 2:
            raise SchemaError("intended offset must be [dx, dy]", f"{path}.intended")
        rows = []
        for out in outcomes:
            if not isinstance(out, list) or len(out) != 3:
                raise SchemaError("each outcome must be [dx, dy, p]", f"{path}.outcomes")
            rows.append((int(out[0]), int(out[1]), float(out[2])))
        prims.append(
            MotionPrimitive(name, (int(intended[0]), int(intended[1])), tuple(rows))
        )
    try:
        return GridAbstraction(
            x_min=_num_in(_get(data, "x_min", "grid"), "grid.x_min"),
            x_max=_num_in(_get(data, "x_max", "grid"), "grid.x_max"),
            y_min=_num_in(_get(data, "y_min", "grid"), "grid.y_min"),
            y_max=_num_in(_get(data, "y_max", "grid"), "grid.y_max"),
            cell=_num_in(_get(data, "cell", "grid"), "grid.cell"),
            primitives=tuple(prims),
        )
    except InvalidModelError as e:
        raise SchemaError(str(e), "grid") from None


def _costs_from_dict(data: dict) -> tuple[tuple[tuple[str, ...], float], ...]:
    if not isinstance(data, dict):
        raise SchemaError("expected a table of atom-set -> cost", "costs")
    out = []
    for key, value in data.items():
        atoms = tuple(sorted(a.strip() for a in key.split(",") if a.strip()))
        if not atoms:
            raise SchemaError("empty atom set", f"costs.{key}")
        out.append((atoms, _num_in(value, f"costs.{key}")))
    return tuple(sorted(out))


def config_from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise SchemaError("scenario file must be a table at top level")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported version {version}", "schema_version")
    name = data.get("name", "scenario")
    if not isinstance(name, str):
        raise SchemaError("expected a string", "name")

    grid = _grid_from_dict(_get(data, "grid", "", dict))

    raw_labels = _get(data, "labels", "", dict)
    labels = []
    for key, atoms in raw_labels.items():
        if not isinstance(atoms, list) or not all(isinstance(a, str) for a in atoms):
            raise SchemaError("expected a list of atom names", f"labels.{key}")
        labels.append((key, tuple(atoms)))
    labels = tuple(sorted(labels))

    try:
        env = mc_from_json(_get(data, "environment", "", dict))
    except (InvalidModelError, KeyError) as e:
        raise SchemaError(str(e), "environment") from None
    problems = validate(env)
    if problems:
        raise SchemaError("; ".join(problems), "environment")

    spec_data = _get(data, "spec", "", dict)
    ap = _get(spec_data, "ap", "spec", list)
    if not all(isinstance(a, str) for a in ap):
        raise SchemaError("expected a list of atom names", "spec.ap")
    spec = SpecSection(
        ap=tuple(ap),
        cosafe=_get(spec_data, "cosafe", "spec", str),
        safety=_get(spec_data, "safety", "spec", str),
    )

    costs = _costs_from_dict(_get(data, "costs", "", dict))

    synth_data = _get(data, "synthesis", "", dict)
    gamma = _num_in(_get(synth_data, "gamma", "synthesis"), "synthesis.gamma")
    if not 0.0 < gamma < 1.0:
        raise SchemaError(f"gamma must lie in the open interval (0, 1), got {gamma}", "synthesis.gamma")
    r_th = _num_in(synth_data.get("r_th", "inf"), "synthesis.r_th")
    if r_th < 0:
        raise SchemaError("r_th must be nonnegative", "synthesis.r_th")
    grid_values = synth_data.get("r_th_grid", [])
    if not isinstance(grid_values, list):
        raise SchemaError("expected a list", "synthesis.r_th_grid")
    r_th_grid = tuple(_num_in(v, "synthesis.r_th_grid") for v in grid_values)
    if any(v < 0 for v in r_th_grid):
        raise SchemaError("thresholds must be nonnegative", "synthesis.r_th_grid")
    synthesis = SynthSection(gamma=gamma, r_th=r_th, r_th_grid=r_th_grid)

    vehicle_data = data.get("vehicle", {})
    if not isinstance(vehicle_data, dict):
        raise SchemaError("expected a table", "vehicle")
    try:
        vehicle = BicycleParams(
            wheelbase=_num_in(vehicle_data.get("wheelbase", 2.0), "vehicle.wheelbase"),
            dt=_num_in(vehicle_data.get("dt", 1.0), "vehicle.dt"),
            noise=tuple(_num_in(x, "vehicle.noise") for x in vehicle_data.get("noise", [0.0] * 4)),
            v_min=_num_in(vehicle_data.get("v_min", 0.0), "vehicle.v_min"),
            v_max=_num_in(vehicle_data.get("v_max", 2.0), "vehicle.v_max"),
            phi_max=_num_in(vehicle_data.get("phi_max", 1.0), "vehicle.phi_max"),
            a_max=_num_in(vehicle_data.get("a_max", 1.5), "vehicle.a_max"),
        )
    except InvalidModelError as e:
        raise SchemaError(str(e), "vehicle") from None

    mpc_data = data.get("mpc", {})
    if not isinstance(mpc_data, dict):
        raise SchemaError("expected a table", "mpc")
    mpc = TrackerParams(
        horizon=int(mpc_data.get("horizon", 3)),
        q=tuple(_num_in(x, "mpc.q") for x in mpc_data.get("q", [1.0, 1.0, 0.1, 0.1])),
        r=tuple(_num_in(x, "mpc.r") for x in mpc_data.get("r", [0.1, 0.1])),
        n_phi=int(mpc_data.get("n_phi", 5)),
        n_acc=int(mpc_data.get("n_acc", 5)),
    )
    if mpc.horizon < 1 or mpc.n_phi < 1 or mpc.n_acc < 1:
        raise SchemaError("horizon, n_phi and n_acc must be at least 1", "mpc")

    start_data = data.get("start")
    start = None
    if start_data is not None:
        if not isinstance(start_data, list) or len(start_data) != 4:
            raise SchemaError("start must be [px, py, theta, v]", "start")
        start = tuple(_num_in(x, "start") for x in start_data)

    cfg = ScenarioConfig(
        name=name,
        grid=grid,
        labels=labels,
        environment=env,
        spec=spec,
        costs=costs,
        synthesis=synthesis,
        vehicle=vehicle,
        mpc=mpc,
        start=start,
    )
    _check_semantics(cfg)
    return cfg


def _check_semantics(cfg: ScenarioConfig) -> None:
    """Cross-field checks that need the compiled pieces: label resolution,
    formula fragments, and cost coverage of every realizable violation."""
    if cfg.start is not None:
        g = cfg.grid
        if not (g.x_min <= cfg.start[0] <= g.x_max and g.y_min <= cfg.start[1] <= g.y_max):
            raise SchemaError("start position lies outside the grid", "start")
    try:
        vehicle_mdp = abstract(cfg.grid, initial=_initial_cell(cfg))
    except (BadDistributionError, InvalidModelError) as e:
        raise SchemaError(str(e), "grid.actions") from None
    composed = compose(vehicle_mdp, cfg.environment)
    try:
        labeling = labeling_from_json(
            {"ap": list(cfg.spec.ap), "labels": {k: list(v) for k, v in cfg.labels}},
            composed,
        )
    except MissingLabelError as e:
        raise SchemaError(str(e), "labels") from None

    try:
        a_cs = translate_cosafe(parse(cfg.spec.cosafe, cfg.spec.ap), cfg.spec.ap)
    except (FormulaSyntaxError, UnknownAtomError, FragmentError) as e:
        raise SchemaError(str(e), "spec.cosafe") from None
    try:
        a_s = translate_safety(parse(cfg.spec.safety, cfg.spec.ap), cfg.spec.ap)
    except (FormulaSyntaxError, UnknownAtomError, FragmentError) as e:
        raise SchemaError(str(e), "spec.safety") from None

    # every letter that can push the safety automaton into its sink needs a cost
    table = normalize_costs({atoms: value for atoms, value in cfg.costs})
    for letter in sorted(set(labeling.letters)):
        violating = any(
            q not in a_s.final and step(a_s, q, letter) in a_s.final
            for q in range(a_s.n_states)
        )
        if not violating:
            continue
        try:
            cost_of_letter(table, letter, cfg.spec.ap)
        except CostMissingError:
            names = ",".join(sorted(letter_names(letter, cfg.spec.ap)))
            raise SchemaError("no cost entry covers this violation", f"cost.{names}") from None


def _initial_cell(cfg: ScenarioConfig) -> int:
    if cfg.start is None:
        return 0
    return cfg.grid.cell_of(cfg.start[0], cfg.start[1])


# ---------------------------------------------------------------------------
# file I/O


def load(path) -> ScenarioConfig:
    p = Path(path)
    raw = p.read_bytes()
    suffix = p.suffix.lower()
    if suffix == ".toml":
        try:
            data = tomli.loads(raw.decode("utf-8"))
        except tomli.TOMLDecodeError as e:
            raise SchemaError(f"TOML parse error: {e}") from None
    elif suffix == ".json":
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as e:
            raise SchemaError(f"JSON parse error: {e}") from None
    else:
        try:
            data = json.loads(raw)
        except json.JSONDecodeError:
            try:
                data = tomli.loads(raw.decode("utf-8"))
            except (tomli.TOMLDecodeError, UnicodeDecodeError):
                raise SchemaError("file is neither valid JSON nor valid TOML") from None
    return config_from_dict(data)


def save(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(
        json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def canonical_hash(cfg: ScenarioConfig) -> str:
    """Digest of the canonical config rendering; file-format independent."""
    blob = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# compilation


def compile_scenario(
    cfg: ScenarioConfig,
    r_th: float | None = None,
    gamma: float | None = None,
    relaxed: bool = False,
    solver: str = "builtin",
) -> CompiledScenario:
    grid = cfg.grid
    cell0 = _initial_cell(cfg)
    vehicle_mdp = abstract(grid, initial=cell0)
    composed = compose(vehicle_mdp, cfg.environment)
    labeling = labeling_from_json(
        {"ap": list(cfg.spec.ap), "labels": {k: list(v) for k, v in cfg.labels}},
        composed,
    )
    a_cs = translate_cosafe(parse(cfg.spec.cosafe, cfg.spec.ap), cfg.spec.ap)
    a_s = translate_safety(parse(cfg.spec.safety, cfg.spec.ap), cfg.spec.ap)
    product = build_product(
        composed, labeling, a_cs, a_s, {atoms: value for atoms, value in cfg.costs}
    )
    synth = SynthesisConfig(
        gamma=cfg.synthesis.gamma if gamma is None else gamma,
        r_th=cfg.synthesis.r_th if r_th is None else r_th,
        relaxed=relaxed,
        solver=solver,
    )
    if cfg.start is not None:
        initial_state = VehicleState(*cfg.start)
    else:
        cx, cy = grid.center(cell0)
        initial_state = VehicleState(cx, cy, 0.0, 0.0)
    return CompiledScenario(
        config=cfg,
        grid=grid,
        vehicle_mdp=vehicle_mdp,
        env=cfg.environment,
        composed=composed,
        labeling=labeling,
        a_cs=a_cs,
        a_s=a_s,
        product=product,
        synth=synth,
        vehicle=cfg.vehicle,
        tracker=cfg.mpc,
        initial_state=initial_state,
    )


# ---------------------------------------------------------------------------
# built-in generators


def _cell_name(ix: int, iy: int) -> str:
    return f"c{ix}_{iy}"


_COMPASS_RING = (
    ("e", (1, 0)),
    ("ne", (1, 1)),
    ("n", (0, 1)),
    ("nw", (-1, 1)),
    ("w", (-1, 0)),
    ("sw", (-1, -1)),
    ("s", (0, -1)),
    ("se", (1, -1)),
)


def _compass_actions(main: float = 0.8, slip: float = 0.1) -> tuple[MotionPrimitive, ...]:
    """Deterministic stay plus eight compass moves with 45-degree flank slips."""
    prims = [MotionPrimitive("stay", (0, 0), ((0, 0, 1.0),))]
    n = len(_COMPASS_RING)
    for i, (name, move) in enumerate(_COMPASS_RING):
        left = _COMPASS_RING[(i + 1) % n][1]
        right = _COMPASS_RING[(i - 1) % n][1]
        prims.append(
            MotionPrimitive(
                name,
                move,
                (
                    (move[0], move[1], main),
                    (left[0], left[1], slip),
                    (right[0], right[1], slip),
                ),
            )
        )
    return tuple(prims)


_DESK_VEHICLE = BicycleParams(
    wheelbase=1.0,
    dt=1.0,
    noise=(0.0, 0.0, 0.0, 0.0),
    v_min=0.0,
    v_max=2.0,
    phi_max=1.0,
    a_max=1.5,
)


def gen_construction() -> ScenarioConfig:
    """Two-lane road blocked by a construction zone.

    The forward lane (y=1) is blocked at x=4,5 by construction cells c; the
    sidewalk below (y=0) carries cost 5 and the opposite lane above (y=2)
    cost 2, so any progress past x=3 must pick a violation class.  All three
    actions advance x by one cell, so stalling in front of the blockage is
    not available.
    """
    acts = (
        MotionPrimitive("fwd", (1, 0), ((1, 0, 1.0),)),
        MotionPrimitive("fwd_left", (1, 1), ((1, 1, 1.0),)),
        MotionPrimitive("fwd_right", (1, -1), ((1, -1, 1.0),)),
    )
    grid = GridAbstraction(0.0, 8.0, 0.0, 3.0, 1.0, acts)
    labels = []
    for ix in range(8):
        labels.append((_cell_name(ix, 0), ("s",)))
        labels.append((_cell_name(ix, 2), ("o",)))
    labels.append((_cell_name(4, 1), ("c",)))
    labels.append((_cell_name(5, 1), ("c",)))
    labels.append((_cell_name(7, 1), ("t",)))
    env = Mc(state_names=("calm",), initial=0, rows={0: ((0, 1.0),)})
    return ScenarioConfig(
        name="construction",
        grid=grid,
        labels=tuple(sorted(labels)),
        environment=env,
        spec=SpecSection(ap=("c", "o", "s", "t"), cosafe="F t", safety="G(!c & !o & !s)"),
        costs=((("c",), 10.0), (("o",), 2.0), (("s",), 5.0)),
        synthesis=SynthSection(gamma=0.95, r_th=1.6, r_th_grid=(1.6,)),
        vehicle=_DESK_VEHICLE,
        mpc=TrackerParams(),
        start=(0.5, 1.5, 0.0, 0.0),
    )


def gen_pedestrian(stationary: bool = False) -> ScenarioConfig:
    """Single lane with a crosswalk at x=5 and a pedestrian crossing it.

    The pedestrian chain walks approach -> {crossing <-> gap} -> done: while
    the episode lasts, the pedestrian alternates between blocking the lane
    (emitting p) and briefly stepping clear of it, then eventually finishes.
    Darting through a gap is survivable but the lane may re-fill while the
    car is still on the crosswalk, so a loose budget buys gap-timing while a
    tight one waits the whole episode out.  The stay action also leaks one
    cell forward with small probability, so holding position near the
    crosswalk is riskier than holding far from it.  With `stationary` the
    pedestrian never leaves the lane, which keeps only the wait-far policy
    feasible at the default threshold.  Transition rates are desk defaults,
    not measurements.
    """
    acts = (
        MotionPrimitive("go", (1, 0), ((1, 0, 1.0),)),
        MotionPrimitive("stay", (0, 0), ((0, 0, 0.95), (1, 0, 0.05))),
    )
    grid = GridAbstraction(0.0, 8.0, 0.0, 1.0, 1.0, acts)
    labels = (
        (_cell_name(5, 0), ("c",)),
        (_cell_name(7, 0), ("t",)),
        ("crossing", ("p",)),
    )
    dwell = ((1, 1.0),) if stationary else ((1, 0.60), (2, 0.30), (3, 0.10))
    env = Mc(
        state_names=("approach", "crossing", "gap", "done"),
        initial=0,
        rows={
            0: ((1, 1.0),),
            1: dwell,
            2: ((1, 0.30), (2, 0.62), (3, 0.08)),
            3: ((3, 1.0),),
        },
    )
    return ScenarioConfig(
        name="pedestrian",
        grid=grid,
        labels=tuple(sorted(labels)),
        environment=env,
        spec=SpecSection(ap=("c", "p", "t"), cosafe="F t", safety="G(p -> !c)"),
        costs=((("c", "p"), 10.0),),
        synthesis=SynthSection(gamma=0.95, r_th=1.0, r_th_grid=(0.1, 1.0, 5.0, 10.0)),
        vehicle=_DESK_VEHICLE,
        mpc=TrackerParams(),
        start=(0.5, 0.5, 0.0, 0.0),
    )


def gen_intersection() -> ScenarioConfig:
    """Signalized crossing with an opponent sweeping the opposing lane.

    Ego starts on row y=0 heading east and must climb the vertical road at
    x=4 to the far side t=(4,4).  The light is green for the first four of
    eight phases; the column cells are i and may only be occupied under g.
    The opponent occupies one cell of row y=1 per phase, sweeping westward
    with wraparound, and its cell carries v.  Four sidewalk segments on the
    top row are n.  Phase timing and slip rates are desk defaults.
    """
    grid = GridAbstraction(0.0, 8.0, 0.0, 5.0, 1.0, _compass_actions())
    labels = [
        (_cell_name(4, 4), ("t",)),
        (_cell_name(0, 4), ("n",)),
        (_cell_name(1, 4), ("n",)),
        (_cell_name(6, 4), ("n",)),
        (_cell_name(7, 4), ("n",)),
    ]
    for iy in range(4):
        labels.append((_cell_name(4, iy), ("i",)))
    for k in range(4):
        labels.append((f"e{k}", ("g",)))
    for k in range(8):
        opp_x = 7 - k
        labels.append((f"{_cell_name(opp_x, 1)}|e{k}", ("v",)))
    env = Mc(
        state_names=tuple(f"e{k}" for k in range(8)),
        initial=0,
        rows={k: (((k + 1) % 8, 1.0),) for k in range(8)},
    )
    return ScenarioConfig(
        name="intersection",
        grid=grid,
        labels=tuple(sorted(labels)),
        environment=env,
        spec=SpecSection(
            ap=("g", "i", "n", "v", "t"),
            cosafe="F t",
            safety="G(!g -> !i) & G(!n & !v)",
        ),
        costs=((("i",), 2.0), (("n",), 5.0), (("v",), 10.0)),
        synthesis=SynthSection(gamma=0.95, r_th=5.0, r_th_grid=(5.0,)),
        vehicle=_DESK_VEHICLE,
        mpc=TrackerParams(),
        start=(0.5, 0.5, 0.0, 0.0),
    )


def gen_reach_avoid() -> ScenarioConfig:
    """Static reach-avoid field: a wall of b cells at x=4 splits the grid.

    Start and target sit on the centre row; the wall spans the full height
    except for a one-cell door on that row.  Threading the door risks the
    flank slips, so a tight threshold forces the policy to discount that
    hazard by idling before the passage while a loose one sends the mass
    straight through; the resulting occupation fields differ sharply.
    """
    grid = GridAbstraction(0.0, 8.0, 0.0, 6.0, 1.0, _compass_actions())
    labels = [(_cell_name(7, 2), ("t",))]
    for iy in range(6):
        if iy != 2:
            labels.append((_cell_name(4, iy), ("b",)))
    env = Mc(state_names=("calm",), initial=0, rows={0: ((0, 1.0),)})
    return ScenarioConfig(
        name="reach-avoid",
        grid=grid,
        labels=tuple(sorted(labels)),
        environment=env,
        spec=SpecSection(ap=("b", "t"), cosafe="F t", safety="G !b"),
        costs=((("b",), 10.0),),
        synthesis=SynthSection(gamma=0.95, r_th=0.5, r_th_grid=(0.5, 5.0)),
        vehicle=_DESK_VEHICLE,
        mpc=TrackerParams(),
        start=(0.5, 2.5, 0.0, 0.0),
    )


BUILTIN = {
    "construction": gen_construction,
    "pedestrian": gen_pedestrian,
    "intersection": gen_intersection,
    "reach-avoid": gen_reach_avoid,
}


def builtin(name: str) -> ScenarioConfig:
    try:
        factory = BUILTIN[name]
    except KeyError:
        known = ", ".join(sorted(BUILTIN))
        raise SchemaError(f"unknown scenario {name!r}; built-ins are {known}") from None
    return factory()
