"""Command-line pipeline: scenario files in, policy artifacts out.

Four subcommands cover the full loop: `synthesize` runs formula
translation, model composition, product construction, and the occupation
LP, writing solution/policy JSON; `evaluate` reports exact and sampled
metrics for a stored policy; `simulate` rolls the closed-loop vehicle and
emits a trajectory CSV; `export-risk-field` aggregates occupation mass
onto the 2-D grid for plotting.  Every run writes a manifest recording
the scenario hash, overrides, and output list, and any command can be
replayed from its manifest with `--from-manifest`; replays of the same
manifest produce byte-identical artifacts.

Exit codes: 0 on success, 2 when the risk budget is infeasible, 1 on any
other error (stderr carries a stage tag).  All JSON artifacts embed a
schema_version field.  Set RISKPLAN_LOG to adjust log verbosity.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

from . import __version__
from .errors import (
    AbstractionMismatchError,
    AlphabetMismatchError,
    BadDistributionError,
    CostMissingError,
    FormulaSyntaxError,
    FragmentError,
    HashMismatchError,
    InputOutOfRangeError,
    InvalidModelError,
    MissingLabelError,
    NumericalFailureError,
    RiskplanError,
    SchemaError,
    StateBlowupError,
    UnknownAtomError,
)
from .oracles import policy_eval, rollout
from .scenarios import BUILTIN, builtin, canonical_hash, compile_scenario, load
from .simplex import INFEASIBLE, OPTIMAL
from .product import product_to_json
from .synth import extract_policy, policy_from_json, policy_to_json, solution_to_json, synthesize
from .vehicle import simulate, write_trajectory_csv

SCHEMA_VERSION = 1

log = logging.getLogger("riskplan.cli")

_STAGES = (
    ((FormulaSyntaxError, UnknownAtomError, FragmentError, StateBlowupError), "ltl"),
    ((InvalidModelError, BadDistributionError, AlphabetMismatchError, MissingLabelError), "models"),
    ((CostMissingError,), "product"),
    ((NumericalFailureError,), "synth"),
    ((AbstractionMismatchError, InputOutOfRangeError), "vehicle"),
    ((HashMismatchError, SchemaError), "config"),
)


def _stage_of(exc: Exception) -> str:
    for kinds, tag in _STAGES:
        if isinstance(exc, kinds):
            return tag
    return "cli"


# ---------------------------------------------------------------------------
# artifact plumbing


def _atomic_write(path: Path, text: str) -> None:
    # temp-then-rename so a failed run never leaves a partial artifact
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_json(path: Path, obj: dict) -> None:
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _num(v: float):
    return "inf" if math.isinf(v) else v


def _resolve_scenario(ref: str):
    if ref in BUILTIN:
        return builtin(ref)
    return load(Path(ref))


def _scenario_ref(arg: str) -> str:
    """Builtin names pass through; file paths are pinned absolute."""
    if arg in BUILTIN:
        return arg
    return str(Path(arg).resolve())


def _manifest(command: str, ref: str, digest: str, overrides: dict,
              outputs: list[str], timings: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "command": command,
        "scenario": {"ref": ref, "hash": digest},
        "overrides": overrides,
        "outputs": sorted(outputs),
        "timings": {k: round(v, 6) for k, v in timings.items()},
    }


def _load_manifest(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise SchemaError(f"cannot read manifest: {e}", "manifest") from None
    for key in ("command", "scenario", "overrides"):
        if key not in data:
            raise SchemaError(f"missing field {key!r}", "manifest")
    return data


def _check_hash(expected: str, cfg, what: str) -> None:
    actual = canonical_hash(cfg)
    if expected != actual:
        raise HashMismatchError(
            f"{what} was produced for a different scenario "
            f"(recorded {expected[:12]}…, loaded {actual[:12]}…)"
        )


def _load_artifact(path: str, what: str) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise SchemaError(f"cannot read {what}: {e}", what) from None
    return data


# ---------------------------------------------------------------------------
# synthesize


def _check_overrides(args) -> None:
    if args.gamma is not None and not 0.0 < args.gamma < 1.0:
        raise SchemaError("discount must lie in the open interval (0, 1)", "synthesis.gamma")
    for v in [args.rth] if args.rth is not None else []:
        if v < 0:
            raise SchemaError("risk budget must be nonnegative", "synthesis.r_th")
    for v in args.rth_grid or ():
        if v < 0:
            raise SchemaError("risk budget must be nonnegative", "synthesis.r_th_grid")


def _solve_into(out: Path, cfg, rth, args, rel: Path) -> tuple[str, list[str]]:
    comp = compile_scenario(cfg, r_th=rth, gamma=args.gamma,
                            relaxed=args.relaxed, solver=args.solver)
    t0 = time.perf_counter()
    sol = synthesize(comp.product, comp.synth)
    log.info("solve %s: %s in %.3fs (%d pivots)",
             rel or ".", sol.status, time.perf_counter() - t0, sol.iterations)
    tag = "" if str(rel) in ("", ".") else f"{rel}: "
    line = f"{tag}r_th={comp.synth.r_th:g} status={sol.status}"
    if sol.status == OPTIMAL:
        line += f" objective={sol.objective:.6f} risk={sol.risk:.6f}"
        if sol.slack is not None and sol.slack > 1e-12:
            line += f" slack={sol.slack:.6f}"
    print(line)
    header = {
        "schema_version": SCHEMA_VERSION,
        "scenario_hash": canonical_hash(cfg),
        "gamma": comp.synth.gamma,
        "r_th": _num(comp.synth.r_th),
        "relaxed": comp.synth.relaxed,
        "solver": comp.synth.solver,
    }
    out.mkdir(parents=True, exist_ok=True)
    written = []
    _write_json(out / "solution.json", {**header, **solution_to_json(sol)})
    written.append(str(rel / "solution.json"))
    if sol.status == OPTIMAL:
        pol = extract_policy(sol, comp.product)
        _write_json(out / "policy.json", {**header, **policy_to_json(pol)})
        written.append(str(rel / "policy.json"))
    if args.dump_product:
        _write_json(out / "product.json",
                    {"schema_version": SCHEMA_VERSION, **product_to_json(comp.product)})
        written.append(str(rel / "product.json"))
    return sol.status, written


def cmd_synthesize(args) -> int:
    timings: dict[str, float] = {}
    overrides = {
        "rth": _num(args.rth) if args.rth is not None else None,
        "rth_grid": [_num(v) for v in args.rth_grid] if args.rth_grid else None,
        "gamma": args.gamma,
        "relaxed": args.relaxed,
        "solver": args.solver,
        "dump_product": args.dump_product,
    }
    _check_overrides(args)
    ref = _scenario_ref(args.scenario)
    t0 = time.perf_counter()
    cfg = _resolve_scenario(ref)
    timings["load"] = time.perf_counter() - t0

    out = Path(args.out)
    statuses: list[str] = []
    outputs: list[str] = []
    t0 = time.perf_counter()
    if args.rth_grid:
        for v in args.rth_grid:
            status, written = _solve_into(out / f"rth_{v:g}", cfg, v, args, Path(f"rth_{v:g}"))
            statuses.append(status)
            outputs.extend(written)
    else:
        status, written = _solve_into(out, cfg, args.rth, args, Path())
        statuses.append(status)
        outputs.extend(written)
    timings["solve"] = time.perf_counter() - t0

    _write_json(out / "manifest.json",
                _manifest("synthesize", ref, canonical_hash(cfg), overrides, outputs, timings))
    if all(s == OPTIMAL for s in statuses):
        return 0
    if INFEASIBLE in statuses:
        print("risk budget infeasible; re-run with --relaxed to find the "
              "smallest achievable budget", file=sys.stderr)
        return 2
    print(f"solver finished with status {statuses}", file=sys.stderr)
    return 1


# ---------------------------------------------------------------------------
# evaluate


def cmd_evaluate(args) -> int:
    data = _load_artifact(args.policy, "policy")
    ref = _scenario_ref(args.scenario)
    cfg = _resolve_scenario(ref)
    _check_hash(data["scenario_hash"], cfg, "policy")
    gamma = float(data["gamma"])
    comp = compile_scenario(cfg, gamma=gamma)
    pol = policy_from_json(data)

    t0 = time.perf_counter()
    ev = policy_eval(comp.product, pol, gamma)
    timings = {"oracle": time.perf_counter() - t0}
    metrics: dict = {
        "schema_version": SCHEMA_VERSION,
        "scenario_hash": canonical_hash(cfg),
        "gamma": gamma,
        "oracle": {"reward": ev.reward, "risk": ev.risk},
    }
    if args.rollouts > 0:
        t0 = time.perf_counter()
        rs = rollout(comp.product, pol, gamma, args.rollouts, seed=args.seed)
        timings["rollout"] = time.perf_counter() - t0
        metrics["rollout"] = {
            "n": rs.n,
            "reward_mean": rs.reward_mean,
            "reward_stderr": rs.reward_stderr,
            "risk_mean": rs.risk_mean,
            "risk_stderr": rs.risk_stderr,
            "goal_hits": rs.goal_hits,
            "dead_hits": rs.dead_hits,
            "truncated": rs.truncated,
            "seed": rs.seed,
            "horizon": rs.horizon,
        }
    print(json.dumps(metrics, indent=2, sort_keys=True))
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "metrics.json", metrics)
        overrides = {"policy": str(Path(args.policy).resolve()),
                     "rollouts": args.rollouts, "seed": args.seed}
        _write_json(out / "manifest.json",
                    _manifest("evaluate", ref, canonical_hash(cfg), overrides,
                              ["metrics.json"], timings))
    return 0


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    data = _load_artifact(args.policy, "policy")
    ref = _scenario_ref(args.scenario)
    cfg = _resolve_scenario(ref)
    _check_hash(data["scenario_hash"], cfg, "policy")
    comp = compile_scenario(cfg)
    pol = policy_from_json(data)

    t0 = time.perf_counter()
    traj = simulate(comp, pol, steps=args.steps, seed=args.seed)
    timings = {"simulate": time.perf_counter() - t0}
    buf = io.StringIO()
    write_trajectory_csv(traj, comp.product.ap, buf)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "trajectory.csv", buf.getvalue())
    overrides = {"policy": str(Path(args.policy).resolve()),
                 "steps": args.steps, "seed": args.seed}
    _write_json(out / "manifest.json",
                _manifest("simulate", ref, canonical_hash(cfg), overrides,
                          ["trajectory.csv"], timings))
    print(f"outcome={traj.outcome} ticks={len(traj.steps)} final_cell={traj.final_cell}")
    return 0


# ---------------------------------------------------------------------------
# export-risk-field


def _greedy_path(grid, beta_by_cell: list[float], start: int) -> set[int]:
    """Follow the locally largest occupation mass across the 8-neighborhood."""
    path = {start}
    here = start
    for _ in range(grid.n_cells):
        ix, iy = grid.coords(here)
        best, best_mass = None, 0.0
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if dx == dy == 0:
                    continue
                jx, jy = ix + dx, iy + dy
                if not (0 <= jx < grid.nx and 0 <= jy < grid.ny):
                    continue
                c = grid.index(jx, jy)
                if c not in path and beta_by_cell[c] > best_mass:
                    best, best_mass = c, beta_by_cell[c]
        if best is None:
            break
        path.add(best)
        here = best
    return path


def cmd_export_risk_field(args) -> int:
    data = _load_artifact(args.solution, "solution")
    ref = _scenario_ref(args.scenario)
    cfg = _resolve_scenario(ref)
    _check_hash(data["scenario_hash"], cfg, "solution")
    if data["status"] != OPTIMAL:
        raise RiskplanError(f"risk field needs an Optimal solution, got {data['status']}")
    comp = compile_scenario(cfg)
    grid, p = comp.grid, comp.product

    t0 = time.perf_counter()
    beta_by_cell = [0.0] * grid.n_cells
    for entry in data["beta"]:
        s = p.states[entry["state"]][0]
        beta_by_cell[comp.composed.pair_of(s)[0]] += entry["value"]
    path = _greedy_path(grid, beta_by_cell, comp.vehicle_mdp.initial)
    lines = ["x,y,beta,on_path"]
    for c in range(grid.n_cells):
        x, y = grid.center(c)
        lines.append(f"{x!r},{y!r},{beta_by_cell[c]!r},{int(c in path)}")
    timings = {"aggregate": time.perf_counter() - t0}

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "risk_field.csv", "\n".join(lines) + "\n")
    overrides = {"solution": str(Path(args.solution).resolve())}
    _write_json(out / "manifest.json",
                _manifest("export-risk-field", ref, canonical_hash(cfg), overrides,
                          ["risk_field.csv"], timings))
    return 0


# ---------------------------------------------------------------------------
# argument plumbing


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage mistakes are errors, not budget infeasibility
        raise SchemaError(message, "usage")


def _rth_grid(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="riskplan", description=__doc__.splitlines()[0])
    top.add_argument("--version", action="version", version=f"riskplan {__version__}")
    sub = top.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        if scenario:
            p.add_argument("--scenario", help="builtin name or config file path")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--from-manifest", dest="from_manifest",
                       help="replay a recorded run; flags on the command line are ignored")

    p = sub.add_parser("synthesize", help="compile a scenario and solve the occupation LP")
    common(p)
    p.add_argument("--rth", type=float, default=None, help="risk budget override")
    p.add_argument("--rth-grid", dest="rth_grid", type=_rth_grid, default=None,
                   help="comma-separated budgets; one subdirectory per value")
    p.add_argument("--gamma", type=float, default=None, help="discount override")
    p.add_argument("--relaxed", action="store_true",
                   help="add a penalized slack on the risk budget")
    p.add_argument("--solver", default="builtin")
    p.add_argument("--dump-product", dest="dump_product", action="store_true")

    p = sub.add_parser("evaluate", help="exact and sampled metrics for a stored policy")
    common(p)
    p.set_defaults(out=None)
    p.add_argument("--policy", help="policy.json from synthesize")
    p.add_argument("--rollouts", type=int, default=0, help="0 means oracle-only")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("simulate", help="closed-loop vehicle run, trajectory CSV out")
    common(p)
    p.add_argument("--policy", help="policy.json from synthesize")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("export-risk-field",
                       help="aggregate occupation mass onto the grid as CSV")
    common(p)
    p.add_argument("--solution", help="solution.json from synthesize")
    return top


_DISPATCH = {
    "synthesize": cmd_synthesize,
    "evaluate": cmd_evaluate,
    "simulate": cmd_simulate,
    "export-risk-field": cmd_export_risk_field,
}

_REPLAY_KEYS = {
    "synthesize": ("rth", "rth_grid", "gamma", "relaxed", "solver", "dump_product"),
    "evaluate": ("policy", "rollouts", "seed"),
    "simulate": ("policy", "steps", "seed"),
    "export-risk-field": ("solution",),
}


def _apply_manifest(args) -> None:
    data = _load_manifest(args.from_manifest)
    if data["command"] != args.command:
        raise SchemaError(
            f"manifest records a {data['command']!r} run, not {args.command!r}", "manifest")
    args.scenario = data["scenario"]["ref"]
    ov = data["overrides"]
    for key in _REPLAY_KEYS[args.command]:
        if key not in ov:
            raise SchemaError(f"missing override {key!r}", "manifest")
        value = ov[key]
        if key in ("rth", "gamma") and isinstance(value, str):
            value = float(value)
        if key == "rth_grid" and value is not None:
            value = tuple(float(v) for v in value)
        setattr(args, key, value)


def main(argv=None) -> int:
    level = os.environ.get("RISKPLAN_LOG", "").upper()
    if level:
        logging.basicConfig(level=getattr(logging, level, logging.INFO),
                            format="%(name)s %(levelname)s %(message)s")
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "from_manifest", None):
            _apply_manifest(args)
        required = {"evaluate": "policy", "simulate": "policy",
                    "export-risk-field": "solution"}.get(args.command)
        if args.scenario is None or (required and getattr(args, required) is None):
            missing = "--scenario" if args.scenario is None else f"--{required}"
            raise SchemaError(f"{missing} is required (or use --from-manifest)", "usage")
        return _DISPATCH[args.command](args)
    except RiskplanError as e:
        print(f"error [{_stage_of(e)}]: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
