"""Sweep a scenario's declared risk budgets and report how the policy shifts.

Usage: python scripts/threshold_sweep.py [scenario] [--seed N]
Exact LP numbers sit next to Monte Carlo estimates from the same policy,
so a loosening budget shows up as growing accepted risk on both columns.
"""

import argparse
import sys

from riskplan.oracles import rollout
from riskplan.scenarios import builtin, compile_scenario
from riskplan.synth import extract_policy, synthesize


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("scenario", nargs="?", default="pedestrian")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--rollouts", type=int, default=2000)
    args = ap.parse_args()

    cfg = builtin(args.scenario)
    print(f"{'r_th':>8} {'status':<11} {'reward':>10} {'risk':>10} "
          f"{'mc_reward':>10} {'mc_risk':>10}")
    for rth in cfg.synthesis.r_th_grid or (cfg.synthesis.r_th,):
        comp = compile_scenario(cfg, r_th=rth)
        sol = synthesize(comp.product, comp.synth)
        if sol.status != "Optimal":
            print(f"{rth:>8.3g} {sol.status:<11}")
            continue
        pol = extract_policy(sol, comp.product)
        line = (f"{rth:>8.3g} {sol.status:<11} "
                f"{sol.objective:>10.4f} {sol.risk:>10.4f}")
        if args.rollouts > 0:
            stats = rollout(comp.product, pol, comp.synth.gamma,
                            args.rollouts, seed=args.seed)
            line += f" {stats.reward_mean:>10.4f} {stats.risk_mean:>10.4f}"
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
