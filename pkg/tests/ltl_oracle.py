"""Independent language oracle for good/bad-prefix checks.

The toolkit translates formulas via residual-formula derivatives; this
oracle instead runs a tableau over obligation sets.  A finite word w is a
good prefix of a co-safety formula f iff no infinite word satisfying !f
extends w.  Obligation sets track what a candidate extension still has to
make true *now*; survival of an obligation set is a greatest fixpoint over
the tableau graph.  Because the negation of a co-safety formula normalizes
without Until, the tableau carries no eventuality obligations and plain
graph survival is exact.

Only the AST dataclasses and nothing of the automaton construction are
shared with the package.
"""

from __future__ import annotations

from riskplan.ltl import (
    And,
    Atom,
    Eventually,
    FalseFormula,
    Formula,
    Implies,
    Next,
    Not,
    Or,
    Release,
    TrueFormula,
    Always,
    Until,
    FALSE,
    TRUE,
)


def neg_nnf(f: Formula, negated: bool = True) -> Formula:
    """Negation normal form of (not f) when negated=True, of f otherwise.

    Written out independently of riskplan.ltl.nnf.
    """
    if isinstance(f, TrueFormula):
        return FALSE if negated else TRUE
    if isinstance(f, FalseFormula):
        return TRUE if negated else FALSE
    if isinstance(f, Atom):
        return Not(f) if negated else f
    if isinstance(f, Not):
        return neg_nnf(f.child, not negated)
    if isinstance(f, And):
        ctor = Or if negated else And
        return ctor(neg_nnf(f.left, negated), neg_nnf(f.right, negated))
    if isinstance(f, Or):
        ctor = And if negated else Or
        return ctor(neg_nnf(f.left, negated), neg_nnf(f.right, negated))
    if isinstance(f, Implies):
        if negated:
            return And(neg_nnf(f.left, False), neg_nnf(f.right, True))
        return Or(neg_nnf(f.left, True), neg_nnf(f.right, False))
    if isinstance(f, Next):
        return Next(neg_nnf(f.child, negated))
    if isinstance(f, Until):
        ctor = Release if negated else Until
        return ctor(neg_nnf(f.left, negated), neg_nnf(f.right, negated))
    if isinstance(f, Release):
        ctor = Until if negated else Release
        return ctor(neg_nnf(f.left, negated), neg_nnf(f.right, negated))
    if isinstance(f, Eventually):
        if negated:
            return Release(FALSE, neg_nnf(f.child, True))
        return Until(TRUE, neg_nnf(f.child, False))
    if isinstance(f, Always):
        if negated:
            return Until(TRUE, neg_nnf(f.child, True))
        return Release(FALSE, neg_nnf(f.child, False))
    raise TypeError(f"unknown node {f!r}")


def _contains_until(f: Formula) -> bool:
    if isinstance(f, Until):
        return True
    if isinstance(f, (TrueFormula, FalseFormula, Atom)):
        return False
    if isinstance(f, (Not, Next)):
        return _contains_until(f.child)
    return _contains_until(f.left) or _contains_until(f.right)


def _expand(f: Formula, letter: int, bit: dict[str, int]) -> list[frozenset[Formula]]:
    """Alternative next-obligation sets for one formula under one letter."""
    if isinstance(f, TrueFormula):
        return [frozenset()]
    if isinstance(f, FalseFormula):
        return []
    if isinstance(f, Atom):
        return [frozenset()] if letter >> bit[f.name] & 1 else []
    if isinstance(f, Not):
        return [] if letter >> bit[f.child.name] & 1 else [frozenset()]
    if isinstance(f, And):
        out = []
        for a in _expand(f.left, letter, bit):
            for b in _expand(f.right, letter, bit):
                out.append(a | b)
        return out
    if isinstance(f, Or):
        return _expand(f.left, letter, bit) + _expand(f.right, letter, bit)
    if isinstance(f, Next):
        return [frozenset((f.child,))]
    if isinstance(f, Release):
        # a R b  ==  b and (a or X(a R b))
        return _expand(And(f.right, Or(f.left, Next(f))), letter, bit)
    raise TypeError(f"unexpected node in safety normal form: {f!r}")


def _minimal_antichain(sets) -> frozenset:
    """Drop every set that is a superset of another one.

    Sound for the existential survival verdict: a word meeting all
    obligations of a superset also meets those of the subset.
    """
    pool = sorted(set(sets), key=len)
    kept: list[frozenset] = []
    for candidate in pool:
        if not any(smaller <= candidate for smaller in kept):
            kept.append(candidate)
    return frozenset(kept)


class TableauMachine:
    """Frontier simulation for 'some extension satisfies chi'."""

    def __init__(self, chi: Formula, ap):
        if _contains_until(chi):
            raise ValueError("tableau survival is only exact without Until obligations")
        self.ap = tuple(ap)
        self.bit = {name: i for i, name in enumerate(self.ap)}
        self.n_letters = 1 << len(self.ap)
        self.initial: frozenset[frozenset[Formula]] = frozenset((frozenset((chi,)),))
        self._succ_cache: dict[tuple[frozenset, int], frozenset] = {}
        self._survivors = self._compute_survivors(frozenset((chi,)))

    def _obligation_successors(self, obligations: frozenset, letter: int) -> set[frozenset]:
        key = (obligations, letter)
        if key not in self._succ_cache:
            alternatives: list[frozenset] = [frozenset()]
            for f in obligations:
                expanded = _expand(f, letter, self.bit)
                alternatives = [acc | nxt for acc in alternatives for nxt in expanded]
                if not alternatives:
                    break
                alternatives = list(_minimal_antichain(alternatives))
            self._succ_cache[key] = frozenset(alternatives)
        return set(self._succ_cache[key])

    def _compute_survivors(self, start: frozenset) -> set[frozenset]:
        # reachable obligation sets
        seen = {start}
        queue = [start]
        while queue:
            current = queue.pop()
            for letter in range(self.n_letters):
                for succ in self._obligation_successors(current, letter):
                    if succ not in seen:
                        seen.add(succ)
                        queue.append(succ)
        # greatest fixpoint: keep sets with at least one surviving successor
        survivors = set(seen)
        changed = True
        while changed:
            changed = False
            for ob in list(survivors):
                if not any(
                    succ in survivors
                    for letter in range(self.n_letters)
                    for succ in self._obligation_successors(ob, letter)
                ):
                    survivors.discard(ob)
                    changed = True
        return survivors

    def step(self, frontier: frozenset, letter: int) -> frozenset:
        out: set[frozenset] = set()
        for obligations in frontier:
            out |= self._obligation_successors(obligations, letter)
        return _minimal_antichain(out)

    def some_extension_satisfies(self, frontier: frozenset) -> bool:
        return any(ob in self._survivors for ob in frontier)


def good_prefix_machine(f: Formula, ap) -> TableauMachine:
    """Machine whose dead frontier means 'good prefix of f' (f co-safety)."""
    return TableauMachine(neg_nnf(f, negated=True), ap)

def bad_prefix_machine(f: Formula, ap) -> TableauMachine:
    """Machine whose dead frontier means 'bad prefix of f' (f safety)."""
    return TableauMachine(neg_nnf(f, negated=False), ap)


def good_prefix(f: Formula, ap, word) -> bool:
    machine = good_prefix_machine(f, ap)
    frontier = machine.initial
    for letter in word:
        frontier = machine.step(frontier, letter)
    return not machine.some_extension_satisfies(frontier)


def bad_prefix(f: Formula, ap, word) -> bool:
    machine = bad_prefix_machine(f, ap)
    frontier = machine.initial
    for letter in word:
        frontier = machine.step(frontier, letter)
    return not machine.some_extension_satisfies(frontier)


def dfa_language_agrees(dfa, machine: TableauMachine, max_depth: int | None = None) -> bool:
    """Joint reachability check: DFA finality == dead oracle frontier.

    Explores the synchronized product of the DFA and the tableau frontier
    machine; with memoization the whole (finite) product graph is covered,
    which subsumes agreement on every finite word.
    """
    start = (dfa.initial, machine.initial)
    seen = {start}
    queue = [(start, 0)]
    while queue:
        (q, frontier), depth = queue.pop()
        dfa_accepts = q in dfa.final
        oracle_accepts = not machine.some_extension_satisfies(frontier)
        if dfa_accepts != oracle_accepts:
            return False
        if max_depth is not None and depth >= max_depth:
            continue
        for letter in range(machine.n_letters):
            succ = (dfa.transitions[q][letter], machine.step(frontier, letter))
            if succ not in seen:
                seen.add(succ)
                queue.append((succ, depth + 1))
    return True
