"""Shared generators for property and acceptance tests."""

from __future__ import annotations

import random

import hypothesis.strategies as st

from riskplan import ltl


def _literals(atoms):
    atom = st.sampled_from([ltl.Atom(a) for a in atoms])
    return st.one_of(
        atom,
        atom.map(ltl.Not),
        st.just(ltl.TRUE),
        st.just(ltl.FALSE),
    )


def cosafe_formulas(atoms=("a", "b", "c"), max_leaves=8):
    def extend(children):
        return st.one_of(
            st.tuples(children, children).map(lambda t: ltl.And(*t)),
            st.tuples(children, children).map(lambda t: ltl.Or(*t)),
            children.map(ltl.Next),
            children.map(ltl.Eventually),
            st.tuples(children, children).map(lambda t: ltl.Until(*t)),
        )

    return st.recursive(_literals(atoms), extend, max_leaves=max_leaves)


def safety_formulas(atoms=("a", "b", "c"), max_leaves=8):
    def extend(children):
        return st.one_of(
            st.tuples(children, children).map(lambda t: ltl.And(*t)),
            st.tuples(children, children).map(lambda t: ltl.Or(*t)),
            children.map(ltl.Next),
            children.map(ltl.Always),
        )

    return st.recursive(_literals(atoms), extend, max_leaves=max_leaves)


def surface_formulas(atoms=("a", "b", "c"), max_leaves=10):
    """Arbitrary formulas over the full surface syntax (any fragment)."""

    def extend(children):
        return st.one_of(
            children.map(ltl.Not),
            st.tuples(children, children).map(lambda t: ltl.And(*t)),
            st.tuples(children, children).map(lambda t: ltl.Or(*t)),
            st.tuples(children, children).map(lambda t: ltl.Implies(*t)),
            children.map(ltl.Next),
            children.map(ltl.Eventually),
            children.map(ltl.Always),
            st.tuples(children, children).map(lambda t: ltl.Until(*t)),
        )

    return st.recursive(_literals(atoms), extend, max_leaves=max_leaves)


def random_fragment_formula(rng: random.Random, atoms, depth: int, kind: str) -> ltl.Formula:
    """Seeded fragment formula sampler used by the acceptance suite."""

    def literal():
        roll = rng.random()
        if roll < 0.06:
            return ltl.TRUE
        if roll < 0.12:
            return ltl.FALSE
        atom = ltl.Atom(rng.choice(atoms))
        return ltl.Not(atom) if rng.random() < 0.35 else atom

    def build(d: int) -> ltl.Formula:
        if d <= 0 or rng.random() < 0.28:
            return literal()
        if kind == "cosafe":
            op = rng.choice(("and", "or", "next", "until", "eventually"))
        else:
            op = rng.choice(("and", "or", "next", "always", "implies_lit"))
        if op == "and":
            return ltl.And(build(d - 1), build(d - 1))
        if op == "or":
            return ltl.Or(build(d - 1), build(d - 1))
        if op == "next":
            return ltl.Next(build(d - 1))
        if op == "until":
            return ltl.Until(build(d - 1), build(d - 1))
        if op == "eventually":
            return ltl.Eventually(build(d - 1))
        if op == "always":
            return ltl.Always(build(d - 1))
        # literal -> safety stays in the safety fragment
        return ltl.Implies(literal(), build(d - 1))

    return build(depth)


# ---------------------------------------------------------------------------
# Random product fixtures for the solver / oracle cross-checks


def random_product(rng: random.Random, max_states: int = 60, max_actions: int = 3):
    """Random ProductMdp honoring first-hit semantics and cost support.

    States 0..n_t-1 are transient (z0 = 0), followed by optional goal and
    dead terminals.  Every transient row mixes transient and terminal
    successors so products have nontrivial reach and risk values.
    """
    from riskplan.product import ProductMdp

    n_t = rng.randint(1, max(1, max_states - 2))
    n_g = rng.randint(0, 2)
    n_d = rng.randint(0, 2)
    n = n_t + n_g + n_d
    goal = frozenset(range(n_t, n_t + n_g))
    dead = frozenset(range(n_t + n_g, n))
    n_actions = rng.randint(1, max_actions)
    support_of: dict[tuple[int, int], set[int]] = {}
    first_action: dict[int, int] = {}
    for z in range(n_t):
        for a in range(rng.randint(1, n_actions)):
            first_action.setdefault(z, a)
            support_of[(z, a)] = set(
                rng.sample(range(n), k=min(n, rng.randint(1, 4)))
            )
    # spanning edges so every state is reachable from z0 = 0
    for s in range(1, n):
        pred = rng.randrange(min(s, n_t))
        support_of[(pred, first_action[pred])].add(s)
    rows = {}
    for key, support in support_of.items():
        ordered = sorted(support)
        weights = [rng.random() + 0.05 for _ in ordered]
        total = sum(weights)
        rows[key] = tuple((s, w / total) for s, w in zip(ordered, weights))
    return ProductMdp(
        states=tuple((z, 0, 0) for z in range(n)),
        z0=0,
        action_names=tuple(f"a{i}" for i in range(n_actions)),
        rows=rows,
        goal=goal,
        dead=dead,
        cost={z: rng.choice([2.0, 5.0, 10.0]) for z in dead},
        ap=("g",),
    )


def random_policy(rng: random.Random, p):
    """Random stochastic policy over each non-terminal state's actions."""
    rows = {}
    for z in range(p.n_states):
        if p.is_terminal(z):
            continue
        acts = p.actions_of(z)
        weights = [rng.random() + 0.05 for _ in acts]
        total = sum(weights)
        rows[z] = tuple((a, w / total) for a, w in zip(acts, weights))
    return rows


def chain_product(*, hops: int = 1, terminal: str = "goal", cost: float = 10.0):
    """Deterministic z0 -> ... -> terminal chain used by the worked examples."""
    from riskplan.product import ProductMdp

    last = hops
    rows = {(i, 0): ((i + 1, 1.0),) for i in range(hops)}
    return ProductMdp(
        states=tuple((i, 0, 0) for i in range(hops + 1)),
        z0=0,
        action_names=("a",),
        rows=rows,
        goal=frozenset({last} if terminal == "goal" else ()),
        dead=frozenset({last} if terminal == "dead" else ()),
        cost={last: cost} if terminal == "dead" else {},
        ap=("g",),
    )
