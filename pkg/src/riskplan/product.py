"""Product of a composed model with the two task automata.

States are (composed state, co-safety DFA state, safety DFA state) triples.
Both automata advance on the label of the *current* composed state while the
composed state itself moves stochastically, so the automaton coordinates of
a successor are fixed by the source state's letter.  The process stops on
first entry into G (co-safety automaton accepted) or D (safety automaton
detected a bad prefix): terminal states carry no kernel rows.

D-state costs are keyed by the violating letter, i.e. the label that drove
the safety automaton into its final state.  When the same triple is reached
under letters with different costs, the terminal is split per cost class so
c(z) stays a function of the state.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import AlphabetMismatchError, CostMissingError
from .ltl import Dfa, letter_names, step
from .models import ComposedMdp, Labeling, Row

CostTable = dict[frozenset[str], float]


class StateClass(Enum):
    GOAL = "Goal"
    VIOLATION = "Violation"
    TRANSIENT = "Transient"


@dataclass
class ProductMdp:
    """Reachable product with terminal (first-hit) semantics at G and D."""

    states: tuple[tuple[int, int, int], ...]
    z0: int
    action_names: tuple[str, ...]
    rows: dict[tuple[int, int], Row]
    goal: frozenset[int]
    dead: frozenset[int]
    cost: dict[int, float]
    ap: tuple[str, ...]

    @property
    def n_states(self) -> int:
        return len(self.states)

    def actions_of(self, state: int) -> list[int]:
        return [a for a in range(len(self.action_names)) if (state, a) in self.rows]

    def is_terminal(self, state: int) -> bool:
        return state in self.goal or state in self.dead


def normalize_costs(costs) -> CostTable:
    """Accept {atom: cost} or {iterable-of-atoms: cost}; keys become frozensets."""
    table: CostTable = {}
    for key, value in costs.items():
        fkey = frozenset((key,)) if isinstance(key, str) else frozenset(key)
        table[fkey] = float(value)
    return table


def cost_of_letter(table: CostTable, letter: int, ap) -> float:
    """Most severe table entry whose atom set is contained in the letter."""
    present = frozenset(letter_names(letter, ap))
    applicable = [c for key, c in table.items() if key <= present]
    if not applicable:
        raise CostMissingError(
            f"no cost entry applies to violating letter {set(present) or '{}'}"
        )
    return max(applicable)


def classify_state(p: ProductMdp, z: int) -> StateClass:
    if z in p.goal:
        return StateClass.GOAL
    if z in p.dead:
        return StateClass.VIOLATION
    return StateClass.TRANSIENT


def build_product(
    composed: ComposedMdp,
    labeling: Labeling,
    a_cs: Dfa,
    a_s: Dfa,
    costs,
) -> ProductMdp:
    if a_cs.ap != a_s.ap or a_cs.ap != labeling.ap:
        raise AlphabetMismatchError(
            f"automata and labeling disagree on AP: {a_cs.ap} / {a_s.ap} / {labeling.ap}"
        )
    table = normalize_costs(costs)
    ap = labeling.ap

    states: list[tuple[int, int, int]] = []
    cost: dict[int, float] = {}
    goal: set[int] = set()
    dead: set[int] = set()
    # D-terminals split per cost class; key carries the cost, others use None
    index: dict[tuple[int, int, int, float | None], int] = {}

    def intern(s: int, q_cs: int, q_s: int, violating_letter: int) -> int:
        if q_s in a_s.final:
            c = cost_of_letter(table, violating_letter, ap)
            key = (s, q_cs, q_s, c)
        else:
            c = None
            key = (s, q_cs, q_s, None)
        z = index.get(key)
        if z is None:
            z = len(states)
            index[key] = z
            states.append((s, q_cs, q_s))
            if c is not None:
                dead.add(z)
                cost[z] = c
            elif q_cs in a_cs.final:
                goal.add(z)
        return z

    letter0 = labeling.label_of(composed.initial)
    z0 = intern(
        composed.initial,
        step(a_cs, a_cs.initial, letter0),
        step(a_s, a_s.initial, letter0),
        letter0,
    )

    rows: dict[tuple[int, int], Row] = {}
    frontier = [z0]
    seen = {z0}
    while frontier:
        z = frontier.pop()
        if z in goal or z in dead:
            continue
        s, q_cs, q_s = states[z]
        letter = labeling.label_of(s)
        q_cs2 = step(a_cs, q_cs, letter)
        q_s2 = step(a_s, q_s, letter)
        for a in composed.actions_of(s):
            entries = []
            for s2, p in composed.rows[(s, a)]:
                z2 = intern(s2, q_cs2, q_s2, letter)
                entries.append((z2, p))
                if z2 not in seen:
                    seen.add(z2)
                    frontier.append(z2)
            rows[(z, a)] = tuple(entries)

    return ProductMdp(
        states=tuple(states),
        z0=z0,
        action_names=composed.action_names,
        rows=rows,
        goal=frozenset(goal),
        dead=frozenset(dead),
        cost=cost,
        ap=ap,
    )


def reachable_prune(p: ProductMdp) -> ProductMdp:
    """Drop states unreachable from z0; path distributions are untouched."""
    order: list[int] = []
    seen = {p.z0}
    stack = [p.z0]
    while stack:
        z = stack.pop()
        order.append(z)
        for a in p.actions_of(z):
            for z2, _ in p.rows[(z, a)]:
                if z2 not in seen:
                    seen.add(z2)
                    stack.append(z2)
    order.sort()
    renum = {old: new for new, old in enumerate(order)}
    return ProductMdp(
        states=tuple(p.states[old] for old in order),
        z0=renum[p.z0],
        action_names=p.action_names,
        rows={
            (renum[z], a): tuple((renum[z2], pr) for z2, pr in row)
            for (z, a), row in p.rows.items()
            if z in seen
        },
        goal=frozenset(renum[z] for z in p.goal if z in seen),
        dead=frozenset(renum[z] for z in p.dead if z in seen),
        cost={renum[z]: c for z, c in p.cost.items() if z in seen},
        ap=p.ap,
    )


def product_to_json(p: ProductMdp) -> dict:
    return {
        "states": [list(t) for t in p.states],
        "z0": p.z0,
        "actions": list(p.action_names),
        "G": sorted(p.goal),
        "D": sorted(p.dead),
        "cost": {str(z): c for z, c in sorted(p.cost.items())},
        "ap": list(p.ap),
        "transitions": [
            {"from": z, "action": p.action_names[a], "to": z2, "p": pr}
            for (z, a), row in sorted(p.rows.items())
            for z2, pr in row
        ],
    }


def product_from_json(data: dict) -> ProductMdp:
    actions = tuple(data["actions"])
    act_lookup = {name: i for i, name in enumerate(actions)}
    rows: dict[tuple[int, int], list[tuple[int, float]]] = {}
    for entry in data["transitions"]:
        key = (entry["from"], act_lookup[entry["action"]])
        rows.setdefault(key, []).append((entry["to"], float(entry["p"])))
    return ProductMdp(
        states=tuple(tuple(t) for t in data["states"]),
        z0=data["z0"],
        action_names=actions,
        rows={k: tuple(v) for k, v in rows.items()},
        goal=frozenset(data["G"]),
        dead=frozenset(data["D"]),
        cost={int(z): float(c) for z, c in data["cost"].items()},
        ap=tuple(data["ap"]),
    )
