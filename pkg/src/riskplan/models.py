"""Stochastic transition-system containers and their composition.

A vehicle model is an MDP with sparse per-(state, action) probability rows;
an environment model is a Markov chain.  Their synchronous composition runs
both factors in parallel: the vehicle picks actions, the environment evolves
on its own, and the joint kernel multiplies the factor probabilities.
Atomic-proposition labels attach to composed states.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InvalidModelError, MissingLabelError, UnknownAtomError

STOCHASTIC_TOL = 1e-9

Row = tuple[tuple[int, float], ...]


@dataclass
class Mdp:
    """Finite MDP with sparse rows keyed by (state, action)."""

    state_names: tuple[str, ...]
    action_names: tuple[str, ...]
    initial: int
    rows: dict[tuple[int, int], Row]

    @property
    def n_states(self) -> int:
        return len(self.state_names)

    @property
    def n_actions(self) -> int:
        return len(self.action_names)

    def actions_of(self, state: int) -> list[int]:
        return [a for a in range(self.n_actions) if (state, a) in self.rows]


@dataclass
class Mc:
    """Finite Markov chain with one sparse row per state."""

    state_names: tuple[str, ...]
    initial: int
    rows: dict[int, Row]

    @property
    def n_states(self) -> int:
        return len(self.state_names)


@dataclass
class ComposedMdp(Mdp):
    """Vehicle/environment product; state i decodes as divmod(i, n_env)."""

    vehicle_names: tuple[str, ...] = ()
    env_names: tuple[str, ...] = ()

    @property
    def n_env(self) -> int:
        return len(self.env_names)

    def pair_of(self, state: int) -> tuple[int, int]:
        return divmod(state, self.n_env)

    def index_of(self, vehicle_state: int, env_state: int) -> int:
        return vehicle_state * self.n_env + env_state


def _check_row(row: Row, n_states: int, where: str, out: list[str]) -> None:
    total = 0.0
    for succ, p in row:
        if not 0 <= succ < n_states:
            out.append(f"{where}: successor index {succ} out of range")
        if p < 0:
            out.append(f"{where}: negative probability {p}")
        total += p
    if abs(total - 1.0) > STOCHASTIC_TOL:
        out.append(f"{where}: row sums to {total!r}, not 1 within {STOCHASTIC_TOL}")


def validate(model: Mdp | Mc) -> list[str]:
    """Collect violations; an empty list means the model is well-formed."""
    out: list[str] = []
    if not 0 <= model.initial < model.n_states:
        out.append(f"initial state {model.initial} out of range")
    if isinstance(model, Mdp):
        covered = set()
        for (s, a), row in model.rows.items():
            if not 0 <= s < model.n_states:
                out.append(f"row ({s},{a}): state index out of range")
                continue
            if not 0 <= a < model.n_actions:
                out.append(f"row ({s},{a}): action index out of range")
                continue
            covered.add(s)
            _check_row(row, model.n_states, f"state {model.state_names[s]} action {model.action_names[a]}", out)
        for s in range(model.n_states):
            if s not in covered:
                out.append(f"state {model.state_names[s]} has no defined action")
    else:
        for s in range(model.n_states):
            if s not in model.rows:
                out.append(f"state {model.state_names[s]} has no row")
        for s, row in model.rows.items():
            if not 0 <= s < model.n_states:
                out.append(f"row {s}: state index out of range")
                continue
            _check_row(row, model.n_states, f"state {model.state_names[s]}", out)
    return out


def compose(vehicle: Mdp, env: Mc) -> ComposedMdp:
    """Synchronous product kernel: T((sv,se),a,(sv',se')) = Tv * Te."""
    problems = validate(vehicle)
    if problems:
        raise InvalidModelError("vehicle model invalid: " + "; ".join(problems))
    problems = validate(env)
    if problems:
        raise InvalidModelError("environment model invalid: " + "; ".join(problems))
    n_env = env.n_states
    names = tuple(
        f"{v}|{e}" for v in vehicle.state_names for e in env.state_names
    )
    rows: dict[tuple[int, int], Row] = {}
    for (sv, a), vrow in vehicle.rows.items():
        for se in range(n_env):
            erow = env.rows[se]
            joint = sv * n_env + se
            rows[(joint, a)] = tuple(
                (sv2 * n_env + se2, pv * pe) for sv2, pv in vrow for se2, pe in erow
            )
    return ComposedMdp(
        state_names=names,
        action_names=vehicle.action_names,
        initial=vehicle.initial * n_env + env.initial,
        rows=rows,
        vehicle_names=vehicle.state_names,
        env_names=env.state_names,
    )


@dataclass
class Labeling:
    """Letter (AP bitmask) per composed state."""

    ap: tuple[str, ...]
    letters: tuple[int, ...]

    def label_of(self, state: int) -> int:
        if not 0 <= state < len(self.letters):
            raise MissingLabelError(f"state index {state} has no label")
        return self.letters[state]


def label_of(labeling: Labeling, state: int) -> int:
    return labeling.label_of(state)


# ---------------------------------------------------------------------------
# JSON model files


def mdp_to_json(m: Mdp) -> dict:
    return {
        "states": list(m.state_names),
        "actions": list(m.action_names),
        "initial": m.state_names[m.initial],
        "transitions": [
            {"from": m.state_names[s], "action": m.action_names[a], "to": m.state_names[t], "p": p}
            for (s, a), row in sorted(m.rows.items())
            for t, p in row
        ],
    }


def mdp_from_json(data: dict) -> Mdp:
    names = tuple(data["states"])
    actions = tuple(data["actions"])
    lookup = {name: i for i, name in enumerate(names)}
    act_lookup = {name: i for i, name in enumerate(actions)}
    if len(lookup) != len(names):
        raise InvalidModelError("duplicate state names")
    rows: dict[tuple[int, int], list[tuple[int, float]]] = {}
    seen: set[tuple[int, int, int]] = set()
    for entry in data["transitions"]:
        try:
            s = lookup[entry["from"]]
            a = act_lookup[entry["action"]]
            t = lookup[entry["to"]]
        except KeyError as missing:
            raise InvalidModelError(f"transition references unknown name {missing}") from None
        if (s, a, t) in seen:
            raise InvalidModelError(
                f"duplicate transition {entry['from']} --{entry['action']}--> {entry['to']}"
            )
        seen.add((s, a, t))
        rows.setdefault((s, a), []).append((t, float(entry["p"])))
    try:
        initial = lookup[data["initial"]]
    except KeyError:
        raise InvalidModelError(f"unknown initial state {data['initial']!r}") from None
    return Mdp(
        state_names=names,
        action_names=actions,
        initial=initial,
        rows={k: tuple(v) for k, v in rows.items()},
    )


def mc_to_json(c: Mc) -> dict:
    return {
        "states": list(c.state_names),
        "initial": c.state_names[c.initial],
        "transitions": [
            {"from": c.state_names[s], "to": c.state_names[t], "p": p}
            for s, row in sorted(c.rows.items())
            for t, p in row
        ],
    }


def mc_from_json(data: dict) -> Mc:
    names = tuple(data["states"])
    lookup = {name: i for i, name in enumerate(names)}
    if len(lookup) != len(names):
        raise InvalidModelError("duplicate state names")
    rows: dict[int, list[tuple[int, float]]] = {}
    seen: set[tuple[int, int]] = set()
    for entry in data["transitions"]:
        try:
            s = lookup[entry["from"]]
            t = lookup[entry["to"]]
        except KeyError as missing:
            raise InvalidModelError(f"transition references unknown name {missing}") from None
        if (s, t) in seen:
            raise InvalidModelError(f"duplicate transition {entry['from']} --> {entry['to']}")
        seen.add((s, t))
        rows.setdefault(s, []).append((t, float(entry["p"])))
    try:
        initial = lookup[data["initial"]]
    except KeyError:
        raise InvalidModelError(f"unknown initial state {data['initial']!r}") from None
    return Mc(state_names=names, initial=initial, rows={k: tuple(v) for k, v in rows.items()})


def labeling_from_json(data: dict, composed: ComposedMdp) -> Labeling:
    """Resolve a label file against a composed model.

    Keys of `labels` may name a composed state directly ("cell|env"), or a
    single factor state, in which case the entry expands to every composed
    state built from that factor.
    """
    ap = tuple(data["ap"])
    from .ltl import letter_of  # local import to avoid a cycle at module load

    letters = [0] * composed.n_states
    names = {name: i for i, name in enumerate(composed.state_names)}
    vehicle = {name: i for i, name in enumerate(composed.vehicle_names)}
    env = {name: i for i, name in enumerate(composed.env_names)}
    for key, aps in data["labels"].items():
        try:
            mask = letter_of(aps, ap)
        except UnknownAtomError:
            raise MissingLabelError(f"label entry {key!r} uses atoms outside {list(ap)}") from None
        if key in names:
            targets = [names[key]]
        elif key in vehicle:
            targets = [composed.index_of(vehicle[key], e) for e in range(len(env))]
        elif key in env:
            targets = [composed.index_of(v, env[key]) for v in range(len(vehicle))]
        else:
            raise MissingLabelError(f"label entry {key!r} matches no composed or factor state")
        for i in targets:
            letters[i] |= mask
    return Labeling(ap=ap, letters=tuple(letters))


def labeling_to_json(labeling: Labeling, composed: ComposedMdp) -> dict:
    from .ltl import letter_names

    return {
        "ap": list(labeling.ap),
        "labels": {
            composed.state_names[i]: list(letter_names(letter, labeling.ap))
            for i, letter in enumerate(labeling.letters)
            if letter
        },
    }
