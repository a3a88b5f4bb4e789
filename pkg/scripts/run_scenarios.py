"""Solve every built-in scenario at its default budget and print a summary table."""

import sys
import time

from riskplan.scenarios import BUILTIN, builtin, compile_scenario
from riskplan.synth import build_lp, synthesize


def main() -> int:
    print(f"{'scenario':<14} {'states':>7} {'columns':>8} {'status':<11} "
          f"{'reward':>10} {'risk':>10} {'r_th':>8} {'time':>7}")
    for name in sorted(BUILTIN):
        cfg = builtin(name)
        comp = compile_scenario(cfg)
        lp = build_lp(comp.product, comp.synth)
        t0 = time.perf_counter()
        sol = synthesize(comp.product, comp.synth)
        dt = time.perf_counter() - t0
        print(f"{name:<14} {comp.product.n_states:>7} {len(lp.columns):>8} "
              f"{sol.status:<11} {sol.objective:>10.4f} {sol.risk:>10.4f} "
              f"{comp.synth.r_th:>8.3g} {dt:>6.2f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
