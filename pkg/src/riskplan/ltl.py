"""Temporal-logic formulas and their finite-automaton translations.

This module covers the discrete-specification side of the toolkit: a small
LTL syntax (atoms, boolean connectives, X/F/G/U), classification into the
safety and co-safety fragments, and translation of fragment formulas into
deterministic finite automata over the alphabet 2^AP.

Letters are integer bitmasks over an ordered AP list: bit i set means the
i-th proposition holds.  A co-safety DFA's final states flag good prefixes
(every infinite extension satisfies the formula); a safety DFA's final
states flag bad prefixes (every infinite extension violates it).  Final
states are always sinks.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .errors import (
    AlphabetMismatchError,
    FormulaSyntaxError,
    FragmentError,
    StateBlowupError,
    UnknownAtomError,
)

MAX_AUTOMATON_STATES = 100_000


# ---------------------------------------------------------------------------
# Formula AST


@dataclass(frozen=True)
class Formula:
    def __str__(self) -> str:
        return _fmt(self, 0)


@dataclass(frozen=True)
class TrueFormula(Formula):
    pass


@dataclass(frozen=True)
class FalseFormula(Formula):
    pass


@dataclass(frozen=True)
class Atom(Formula):
    name: str


@dataclass(frozen=True)
class Not(Formula):
    child: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Next(Formula):
    child: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    child: Formula


@dataclass(frozen=True)
class Always(Formula):
    child: Formula


@dataclass(frozen=True)
class Release(Formula):
    """Dual of Until; produced by negation normal form, not by the parser."""

    left: Formula
    right: Formula


TRUE = TrueFormula()
FALSE = FalseFormula()

# Printer precedence levels; higher binds tighter.
_LEVEL_IMPLIES = 0
_LEVEL_OR = 1
_LEVEL_AND = 2
_LEVEL_UNTIL = 3
_LEVEL_UNARY = 4
_LEVEL_ATOM = 5


def _level(f: Formula) -> int:
    if isinstance(f, (TrueFormula, FalseFormula, Atom)):
        return _LEVEL_ATOM
    if isinstance(f, (Not, Next, Eventually, Always)):
        return _LEVEL_UNARY
    if isinstance(f, (Until, Release)):
        return _LEVEL_UNTIL
    if isinstance(f, And):
        return _LEVEL_AND
    if isinstance(f, Or):
        return _LEVEL_OR
    return _LEVEL_IMPLIES


def _wrap(f: Formula, minimum: int) -> str:
    text = _fmt(f, 0)
    if _level(f) < minimum:
        return f"({text})"
    return text


def _fmt(f: Formula, _depth: int) -> str:
    if isinstance(f, TrueFormula):
        return "true"
    if isinstance(f, FalseFormula):
        return "false"
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Not):
        return "!" + _wrap(f.child, _LEVEL_UNARY)
    if isinstance(f, Next):
        return "X " + _wrap(f.child, _LEVEL_UNARY)
    if isinstance(f, Eventually):
        return "F " + _wrap(f.child, _LEVEL_UNARY)
    if isinstance(f, Always):
        return "G " + _wrap(f.child, _LEVEL_UNARY)
    if isinstance(f, Until):
        # right-associative
        return _wrap(f.left, _LEVEL_UNTIL + 1) + " U " + _wrap(f.right, _LEVEL_UNTIL)
    if isinstance(f, Release):
        return _wrap(f.left, _LEVEL_UNTIL + 1) + " R " + _wrap(f.right, _LEVEL_UNTIL)
    if isinstance(f, And):
        # left-associative
        return _wrap(f.left, _LEVEL_AND) + " & " + _wrap(f.right, _LEVEL_AND + 1)
    if isinstance(f, Or):
        return _wrap(f.left, _LEVEL_OR) + " | " + _wrap(f.right, _LEVEL_OR + 1)
    if isinstance(f, Implies):
        return _wrap(f.left, _LEVEL_IMPLIES + 1) + " -> " + _wrap(f.right, _LEVEL_IMPLIES)
    raise TypeError(f"unknown formula node {f!r}")


def atoms_of(f: Formula) -> frozenset[str]:
    if isinstance(f, Atom):
        return frozenset((f.name,))
    if isinstance(f, (TrueFormula, FalseFormula)):
        return frozenset()
    if isinstance(f, (Not, Next, Eventually, Always)):
        return atoms_of(f.child)
    return atoms_of(f.left) | atoms_of(f.right)


# ---------------------------------------------------------------------------
# Parser

_ATOM_RE = re.compile(r"[a-z][a-z0-9_]*")

_TOKEN_SPEC = (
    ("->", "IMPLIES"),
    ("(", "LPAREN"),
    (")", "RPAREN"),
    ("!", "NOT"),
    ("&", "AND"),
    ("|", "OR"),
    ("U", "UNTIL"),
    ("X", "NEXT"),
    ("F", "EVENTUALLY"),
    ("G", "ALWAYS"),
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        for lexeme, kind in _TOKEN_SPEC:
            if text.startswith(lexeme, i):
                tokens.append((kind, lexeme, i))
                i += len(lexeme)
                break
        else:
            m = _ATOM_RE.match(text, i)
            if m:
                word = m.group(0)
                if word == "true":
                    tokens.append(("TRUE", word, i))
                elif word == "false":
                    tokens.append(("FALSE", word, i))
                else:
                    tokens.append(("ATOM", word, i))
                i = m.end()
            else:
                raise FormulaSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(("EOF", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str, ap: tuple[str, ...] | None):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.ap = ap

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.pos]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, expected: tuple[str, ...]) -> FormulaSyntaxError:
        kind, lexeme, at = self.peek()
        shown = lexeme if kind != "EOF" else "end of input"
        return FormulaSyntaxError(f"unexpected {shown}", at, expected)

    # precedence, loosest first: ->, |, &, U, unary
    def parse_implies(self) -> Formula:
        left = self.parse_or()
        if self.peek()[0] == "IMPLIES":
            self.advance()
            return Implies(left, self.parse_implies())
        return left

    def parse_or(self) -> Formula:
        f = self.parse_and()
        while self.peek()[0] == "OR":
            self.advance()
            f = Or(f, self.parse_and())
        return f

    def parse_and(self) -> Formula:
        f = self.parse_until()
        while self.peek()[0] == "AND":
            self.advance()
            f = And(f, self.parse_until())
        return f

    def parse_until(self) -> Formula:
        left = self.parse_unary()
        if self.peek()[0] == "UNTIL":
            self.advance()
            return Until(left, self.parse_until())
        return left

    def parse_unary(self) -> Formula:
        kind, lexeme, at = self.peek()
        if kind == "NOT":
            self.advance()
            return Not(self.parse_unary())
        if kind == "NEXT":
            self.advance()
            return Next(self.parse_unary())
        if kind == "EVENTUALLY":
            self.advance()
            return Eventually(self.parse_unary())
        if kind == "ALWAYS":
            self.advance()
            return Always(self.parse_unary())
        if kind == "LPAREN":
            self.advance()
            f = self.parse_implies()
            if self.peek()[0] != "RPAREN":
                raise self.fail((")",))
            self.advance()
            return f
        if kind == "TRUE":
            self.advance()
            return TRUE
        if kind == "FALSE":
            self.advance()
            return FALSE
        if kind == "ATOM":
            self.advance()
            if self.ap is not None and lexeme not in self.ap:
                raise UnknownAtomError(
                    f"atom {lexeme!r} at position {at} is not in the AP list {list(self.ap)}"
                )
            return Atom(lexeme)
        raise self.fail(("atom", "true", "false", "!", "X", "F", "G", "("))


def parse(text: str, ap: list[str] | tuple[str, ...] | None = None) -> Formula:
    """Parse a formula string.

    When `ap` is given, every atom must belong to it (UnknownAtomError
    otherwise).  Raises FormulaSyntaxError with position and expected-token
    information on malformed input.
    """
    parser = _Parser(text, tuple(ap) if ap is not None else None)
    f = parser.parse_implies()
    if parser.peek()[0] != "EOF":
        raise parser.fail(("end of input",))
    return f


# ---------------------------------------------------------------------------
# Negation normal form and fragment classification


class Fragment(Enum):
    COSAFETY = "cosafety"
    SAFETY = "safety"
    NEITHER = "neither"


def nnf(f: Formula, negated: bool = False) -> Formula:
    """Push negations to atoms; rewrite F, G, -> into core operators.

    The result uses only literals, true/false, And, Or, Next, Until and
    Release.  A co-safety formula normalizes to a Release-free tree, a
    safety formula to an Until-free one.
    """
    if isinstance(f, TrueFormula):
        return FALSE if negated else TRUE
    if isinstance(f, FalseFormula):
        return TRUE if negated else FALSE
    if isinstance(f, Atom):
        return Not(f) if negated else f
    if isinstance(f, Not):
        return nnf(f.child, not negated)
    if isinstance(f, And):
        if negated:
            return Or(nnf(f.left, True), nnf(f.right, True))
        return And(nnf(f.left), nnf(f.right))
    if isinstance(f, Or):
        if negated:
            return And(nnf(f.left, True), nnf(f.right, True))
        return Or(nnf(f.left), nnf(f.right))
    if isinstance(f, Implies):
        return nnf(Or(Not(f.left), f.right), negated)
    if isinstance(f, Next):
        return Next(nnf(f.child, negated))
    if isinstance(f, Until):
        if negated:
            return Release(nnf(f.left, True), nnf(f.right, True))
        return Until(nnf(f.left), nnf(f.right))
    if isinstance(f, Release):
        if negated:
            return Until(nnf(f.left, True), nnf(f.right, True))
        return Release(nnf(f.left), nnf(f.right))
    if isinstance(f, Eventually):
        return nnf(Until(TRUE, f.child), negated)
    if isinstance(f, Always):
        if negated:
            return Until(TRUE, nnf(f.child, True))
        return Release(FALSE, nnf(f.child))
    raise TypeError(f"unknown formula node {f!r}")


def _has_node(f: Formula, node_type: type) -> bool:
    if isinstance(f, node_type):
        return True
    if isinstance(f, (TrueFormula, FalseFormula, Atom)):
        return False
    if isinstance(f, (Not, Next, Eventually, Always)):
        return _has_node(f.child, node_type)
    return _has_node(f.left, node_type) or _has_node(f.right, node_type)


def is_cosafety(f: Formula) -> bool:
    return not _has_node(nnf(f), Release)


def is_safety(f: Formula) -> bool:
    return not _has_node(nnf(f), Until)


def classify(f: Formula) -> Fragment:
    """Assign a formula to the co-safety or safety fragment.

    Formulas in both fragments (purely bounded ones such as `p` or `X p`)
    report as CoSafety.
    """
    if is_cosafety(f):
        return Fragment.COSAFETY
    if is_safety(f):
        return Fragment.SAFETY
    return Fragment.NEITHER


# ---------------------------------------------------------------------------
# Canonical residual form for the automaton construction


def _flatten(f: Formula, node_type: type) -> list[Formula]:
    if isinstance(f, node_type):
        return _flatten(f.left, node_type) + _flatten(f.right, node_type)
    return [f]


def _mk_nary(children: list[Formula], node_type: type, unit: Formula, zero: Formula) -> Formula:
    # flatten, absorb units and dominating constants, dedupe, sort
    flat: list[Formula] = []
    for child in children:
        flat.extend(_flatten(child, node_type))
    out: dict[str, Formula] = {}
    for child in flat:
        if child == zero:
            return zero
        if child == unit:
            continue
        out.setdefault(str(child), child)
    if not out:
        return unit
    ordered = [out[k] for k in sorted(out)]
    acc = ordered[0]
    for child in ordered[1:]:
        acc = node_type(acc, child)
    return acc


def mk_and(*children: Formula) -> Formula:
    return _mk_nary(list(children), And, TRUE, FALSE)


def mk_or(*children: Formula) -> Formula:
    return _mk_nary(list(children), Or, FALSE, TRUE)


# Residual states of the automaton construction are kept in disjunctive
# normal form over "units" (literals, Next- and Until-subformulas): a
# frozenset of clauses, each clause a frozenset of units.  Units always come
# from the closure of the input formula, so the state space stays finite no
# matter how derivatives interleave conjunction and disjunction.

_DNF_TRUE = frozenset((frozenset(),))
_DNF_FALSE: frozenset = frozenset()


def _prune_clauses(clauses) -> frozenset:
    # drop clauses subsumed by a smaller one (X implies X|Y)
    pool = sorted(set(clauses), key=len)
    kept: list[frozenset] = []
    for clause in pool:
        if not any(other <= clause for other in kept):
            kept.append(clause)
    return frozenset(kept)


def _dnf_or(a: frozenset, b: frozenset) -> frozenset:
    return _prune_clauses(a | b)


def _dnf_and(a: frozenset, b: frozenset) -> frozenset:
    return _prune_clauses({x | y for x in a for y in b})


def _to_dnf(f: Formula) -> frozenset:
    if isinstance(f, TrueFormula):
        return _DNF_TRUE
    if isinstance(f, FalseFormula):
        return _DNF_FALSE
    if isinstance(f, And):
        return _dnf_and(_to_dnf(f.left), _to_dnf(f.right))
    if isinstance(f, Or):
        return _dnf_or(_to_dnf(f.left), _to_dnf(f.right))
    return frozenset((frozenset((f,)),))


def _dnf_formula(dnf: frozenset) -> Formula:
    """Display form of a residual state."""
    return mk_or(*[mk_and(*clause) for clause in dnf])


# ---------------------------------------------------------------------------
# DFA


@dataclass(frozen=True)
class Dfa:
    """Deterministic automaton over letters that are bitmasks over `ap`.

    `transitions[state][letter]` is the successor state; the table is total.
    Final states are sinks.  For polarity "cosafe" a run ending in a final
    state means the word read so far is a good prefix; for polarity
    "safety" it means a bad prefix.
    """

    ap: tuple[str, ...]
    initial: int
    final: frozenset[int]
    polarity: str
    transitions: tuple[tuple[int, ...], ...]

    @property
    def n_states(self) -> int:
        return len(self.transitions)

    @property
    def n_letters(self) -> int:
        return 1 << len(self.ap)


def letter_of(names, ap) -> int:
    """Bitmask letter for the set of propositions in `names`."""
    mask = 0
    for name in names:
        try:
            mask |= 1 << tuple(ap).index(name)
        except ValueError:
            raise UnknownAtomError(f"atom {name!r} is not in the AP list {list(ap)}") from None
    return mask


def letter_names(letter: int, ap) -> tuple[str, ...]:
    return tuple(name for i, name in enumerate(ap) if letter >> i & 1)


def step(dfa: Dfa, state: int, letter: int) -> int:
    if not 0 <= letter < dfa.n_letters:
        raise AlphabetMismatchError(
            f"letter {letter} out of range for {len(dfa.ap)} propositions"
        )
    return dfa.transitions[state][letter]


def accepts(dfa: Dfa, word) -> bool:
    """Run the DFA on a finite word; True iff the run ends in a final state."""
    state = dfa.initial
    for letter in word:
        state = step(dfa, state, letter)
    return state in dfa.final


def _derivative(f: Formula, letter: int, bit: dict[str, int]) -> frozenset:
    """Residual DNF after reading one letter."""
    if isinstance(f, TrueFormula):
        return _DNF_TRUE
    if isinstance(f, FalseFormula):
        return _DNF_FALSE
    if isinstance(f, Atom):
        return _DNF_TRUE if letter >> bit[f.name] & 1 else _DNF_FALSE
    if isinstance(f, Not):
        # NNF: negation only wraps atoms
        return _DNF_FALSE if letter >> bit[f.child.name] & 1 else _DNF_TRUE
    if isinstance(f, And):
        return _dnf_and(_derivative(f.left, letter, bit), _derivative(f.right, letter, bit))
    if isinstance(f, Or):
        return _dnf_or(_derivative(f.left, letter, bit), _derivative(f.right, letter, bit))
    if isinstance(f, Next):
        return _to_dnf(f.child)
    if isinstance(f, Until):
        return _dnf_or(
            _derivative(f.right, letter, bit),
            _dnf_and(_derivative(f.left, letter, bit), frozenset((frozenset((f,)),))),
        )
    raise TypeError(f"unexpected node in co-safety normal form: {f!r}")


def _derivative_state(dnf: frozenset, letter: int, bit: dict[str, int]) -> frozenset:
    out = _DNF_FALSE
    for clause in dnf:
        acc = _DNF_TRUE
        for unit in clause:
            acc = _dnf_and(acc, _derivative(unit, letter, bit))
            if not acc:
                break
        out = _dnf_or(out, acc)
    return out


def translate_cosafe(
    f: Formula, ap, max_states: int = MAX_AUTOMATON_STATES, _polarity: str = "cosafe"
) -> Dfa:
    """Translate a co-safety formula into a good-prefix DFA.

    States are residual formulas explored breadth-first; a word is accepted
    exactly when every infinite extension satisfies `f`.  Raises
    FragmentError for formulas outside the fragment, UnknownAtomError for
    atoms missing from `ap`, StateBlowupError past `max_states`.
    """
    ap = tuple(ap)
    normal = nnf(f)
    if _has_node(normal, Release):
        raise FragmentError(f"{f} is not a co-safety formula")
    missing = atoms_of(normal) - set(ap)
    if missing:
        raise UnknownAtomError(f"atoms {sorted(missing)} are not in the AP list {list(ap)}")
    bit = {name: i for i, name in enumerate(ap)}
    n_letters = 1 << len(ap)

    start = _to_dnf(normal)
    index: dict[frozenset, int] = {start: 0}
    states: list[frozenset] = [start]
    delta: list[list[int]] = []
    frontier = [start]
    while frontier:
        next_frontier = []
        for g in frontier:
            row = []
            for letter in range(n_letters):
                h = _derivative_state(g, letter, bit)
                if h not in index:
                    if len(states) >= max_states:
                        raise StateBlowupError(
                            f"automaton for {f} exceeded {max_states} states"
                        )
                    index[h] = len(states)
                    states.append(h)
                    next_frontier.append(h)
                row.append(index[h])
            delta.append(row)
        frontier = next_frontier
    # rows were appended in discovery order, which matches state order
    assert len(delta) == len(states)

    # A state accepts (is flagged final) when reaching the trivially-true
    # residual is unavoidable: no infinite run from it can dodge it.
    avoid = {i for i, g in enumerate(states) if g != _DNF_TRUE}
    changed = True
    while changed:
        changed = False
        for i in sorted(avoid):
            if not any(succ in avoid for succ in delta[i]):
                avoid.discard(i)
                changed = True
    final_raw = set(range(len(states))) - avoid

    # Collapse all final states into a single sink, prune unreachable states,
    # renumber in BFS discovery order.
    sink = len(states)  # virtual id before renumbering

    def target(i: int) -> int:
        return sink if i in final_raw else i

    start = target(0)
    order: dict[int, int] = {start: 0}
    queue = [start]
    rows: list[tuple[int, ...]] = []
    while queue:
        current = queue.pop(0)
        if current == sink:
            successors = [sink] * n_letters
        else:
            successors = [target(j) for j in delta[current]]
        for succ in successors:
            if succ not in order:
                order[succ] = len(order)
                queue.append(succ)
        rows.append(tuple(order[succ] for succ in successors))
    final = frozenset((order[sink],)) if sink in order else frozenset()
    return Dfa(
        ap=ap,
        initial=0,
        final=final,
        polarity=_polarity,
        transitions=tuple(rows),
    )


def translate_safety(f: Formula, ap, max_states: int = MAX_AUTOMATON_STATES) -> Dfa:
    """Translate a safety formula into a bad-prefix DFA.

    The automaton is the good-prefix DFA of the negation; a run ending in a
    final state means the safety formula is already violated by every
    extension.
    """
    if not is_safety(f):
        raise FragmentError(f"{f} is not a safety formula")
    return translate_cosafe(nnf(f, negated=True), ap, max_states, _polarity="safety")


def dfa_to_json(dfa: Dfa) -> dict:
    return {
        "alphabet": list(dfa.ap),
        "states": dfa.n_states,
        "initial": dfa.initial,
        "final": sorted(dfa.final),
        "polarity": dfa.polarity,
        "transitions": [
            [state, letter, succ]
            for state, row in enumerate(dfa.transitions)
            for letter, succ in enumerate(row)
        ],
    }


def dfa_from_json(data: dict) -> Dfa:
    n = data["states"]
    ap = tuple(data["alphabet"])
    n_letters = 1 << len(ap)
    table = [[-1] * n_letters for _ in range(n)]
    for state, letter, succ in data["transitions"]:
        table[state][letter] = succ
    for state, row in enumerate(table):
        if -1 in row:
            raise AlphabetMismatchError(f"state {state} is missing transitions")
    return Dfa(
        ap=ap,
        initial=data["initial"],
        final=frozenset(data["final"]),
        polarity=data["polarity"],
        transitions=tuple(tuple(row) for row in table),
    )
