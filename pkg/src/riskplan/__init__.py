"""Risk-bounded policy synthesis for temporal-logic tasks on stochastic models.

The pipeline: parse a task as a safety/co-safety formula pair, translate
both into deterministic automata, compose vehicle and environment models,
build the product decision process, and solve a discounted occupation-
measure linear program that maximizes task satisfaction under a bound on
expected discounted violation cost.  Independent evaluation oracles, a
closed-loop grid/bicycle simulator and scenario generators round out the
toolkit.
"""

__version__ = "0.1.0"

SCHEMA_VERSION = 1
