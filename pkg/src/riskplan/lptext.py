"""LP text interchange, CPLEX style, for out-of-process solvers.

Problem files look like:

    \\ synthesized occupation LP
    Maximize
     obj: 0.9 x_0_0 + 0.1 x_1_0
    Subject To
     bal_0: x_0_0 + x_1_0 = 1
     risk: 2 x_0_0 <= 0.5
    End

All variables are implicitly >= 0 (the format's default bound); a Bounds
section is accepted only if it restates that default.  Solution files are
line oriented:

    status Optimal
    objective 0.42
    x_0_0 1.0

with one `<variable> <value>` line per variable after the two header lines.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import SchemaError

_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_.#]*\Z")
_RELATIONS = {"<=": "<=", "<": "<=", ">=": ">=", ">": ">=", "=": "="}


@dataclass
class LpConstraint:
    name: str
    coeffs: dict[str, float]
    relation: str
    rhs: float


@dataclass
class LpTextProblem:
    sense: str
    objective: dict[str, float]
    constraints: tuple[LpConstraint, ...]

    @property
    def variables(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for name in self.objective:
            seen.setdefault(name)
        for con in self.constraints:
            for name in con.coeffs:
                seen.setdefault(name)
        return tuple(seen)


def _fmt_terms(coeffs: dict[str, float]) -> str:
    if not coeffs:
        return "0"
    parts = []
    for i, (name, value) in enumerate(coeffs.items()):
        sign = "-" if value < 0 else ("+" if i else "")
        parts.append(f"{sign} {abs(value):.17g} {name}".strip())
    return " ".join(parts)


def write_lp(problem: LpTextProblem) -> str:
    lines = ["Maximize" if problem.sense == "max" else "Minimize"]
    lines.append(f" obj: {_fmt_terms(problem.objective)}")
    lines.append("Subject To")
    for con in problem.constraints:
        lines.append(f" {con.name}: {_fmt_terms(con.coeffs)} {con.relation} {con.rhs:.17g}")
    lines.append("End")
    return "\n".join(lines) + "\n"


_TOKEN = re.compile(
    r"""\s*(?:
        (?P<num>[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?)
      | (?P<name>[A-Za-z_][A-Za-z0-9_.#]*)
      | (?P<op><=|>=|[<>=:+\-])
    )""",
    re.X,
)


def _tokenize(body: str) -> list[str]:
    out = []
    for raw in body.splitlines():
        line = raw.split("\\", 1)[0]
        pos = 0
        while pos < len(line):
            if line[pos].isspace():
                pos += 1
                continue
            match = _TOKEN.match(line, pos)
            if match is None:
                raise SchemaError(f"cannot tokenize {line[pos:pos+10]!r}", path="lp")
            out.append(match.group().strip())
            pos = match.end()
    return out


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


class _TokenReader:
    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise SchemaError("unexpected end of LP text", path="lp")
        self.pos += 1
        return tok

    def expr(self) -> dict[str, float]:
        coeffs: dict[str, float] = {}
        while True:
            tok = self.peek()
            if tok is None or tok in _RELATIONS or tok == ":":
                return coeffs
            sign = 1.0
            while tok in ("+", "-"):
                self.take()
                sign = -sign if tok == "-" else sign
                tok = self.peek()
                if tok is None:
                    raise SchemaError("dangling sign in LP expression", path="lp")
            if _is_number(tok):
                value = sign * float(self.take())
                nxt = self.peek()
                if nxt is not None and _NAME.match(nxt) and nxt.lower() not in _KEYWORDS:
                    name = self.take()
                    coeffs[name] = coeffs.get(name, 0.0) + value
                elif value != 0.0:
                    # bare constants only appear as the 0 placeholder
                    raise SchemaError(
                        f"constant term {value} has no variable", path="lp"
                    )
            elif _NAME.match(tok) and tok.lower() not in _KEYWORDS:
                name = self.take()
                coeffs[name] = coeffs.get(name, 0.0) + sign
            else:
                return coeffs


_KEYWORDS = {
    "maximize", "maximise", "max", "minimize", "minimise", "min",
    "subject", "to", "st", "s.t.", "such", "that", "bounds", "bound",
    "end", "free",
}


def _split_sections(text: str) -> dict[str, list[str]]:
    tokens = _tokenize(text)
    sections: dict[str, list[str]] = {}
    current: str | None = None
    i = 0
    while i < len(tokens):
        low = tokens[i].lower()
        if low in ("maximize", "maximise", "max"):
            current, i = "max", i + 1
            sections[current] = []
        elif low in ("minimize", "minimise", "min"):
            current, i = "min", i + 1
            sections[current] = []
        elif low in ("subject", "such") and i + 1 < len(tokens) and tokens[i + 1].lower() in ("to", "that"):
            current, i = "st", i + 2
            sections[current] = []
        elif low in ("st", "s.t."):
            current, i = "st", i + 1
            sections[current] = []
        elif low in ("bounds", "bound"):
            current, i = "bounds", i + 1
            sections[current] = []
        elif low == "end":
            break
        else:
            if current is None:
                raise SchemaError(f"token {tokens[i]!r} before any section", path="lp")
            sections[current].append(tokens[i])
            i += 1
    return sections


def parse_lp(text: str) -> LpTextProblem:
    sections = _split_sections(text)
    sense = "max" if "max" in sections else "min"
    if "max" in sections and "min" in sections:
        raise SchemaError("both Maximize and Minimize present", path="lp")
    if sense not in sections:
        raise SchemaError("missing objective section", path="lp")
    if "st" not in sections:
        raise SchemaError("missing Subject To section", path="lp")

    reader = _TokenReader(sections[sense])
    if reader.peek() is not None and reader.tokens[reader.pos + 1 : reader.pos + 2] == [":"]:
        reader.take()
        reader.take()
    objective = reader.expr()
    if reader.peek() is not None:
        raise SchemaError(f"trailing token {reader.peek()!r} in objective", path="lp")

    reader = _TokenReader(sections["st"])
    constraints = []
    while reader.peek() is not None:
        name = f"c{len(constraints)}"
        if reader.tokens[reader.pos + 1 : reader.pos + 2] == [":"]:
            name = reader.take()
            reader.take()
        coeffs = reader.expr()
        rel = reader.take()
        if rel not in _RELATIONS:
            raise SchemaError(f"expected relation, got {rel!r}", path=f"lp.{name}")
        sign = 1.0
        rhs_tok = reader.take()
        while rhs_tok in ("+", "-"):
            sign = -sign if rhs_tok == "-" else sign
            rhs_tok = reader.take()
        if not _is_number(rhs_tok):
            raise SchemaError(f"expected numeric rhs, got {rhs_tok!r}", path=f"lp.{name}")
        constraints.append(
            LpConstraint(
                name=name, coeffs=coeffs, relation=_RELATIONS[rel], rhs=sign * float(rhs_tok)
            )
        )

    for tok in sections.get("bounds", []):
        if tok.lower() == "free" or (_is_number(tok) and float(tok) != 0.0):
            raise SchemaError(
                "only the default bound 0 <= x is supported", path="lp.bounds"
            )
    return LpTextProblem(sense=sense, objective=objective, constraints=tuple(constraints))


# ---------------------------------------------------------------------------
# Solution exchange


def write_solution(status: str, objective: float | None, values: dict[str, float]) -> str:
    lines = [f"status {status}"]
    if objective is not None:
        lines.append(f"objective {objective:.17g}")
        for name, value in values.items():
            lines.append(f"{name} {value:.17g}")
    return "\n".join(lines) + "\n"


def parse_solution(text: str) -> tuple[str, float | None, dict[str, float]]:
    status = None
    objective = None
    values: dict[str, float] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        key, _, rest = line.partition(" ")
        if key == "status":
            status = rest.strip()
        elif key == "objective":
            objective = float(rest)
        else:
            values[key] = float(rest)
    if status is None:
        raise SchemaError("solver output has no status line", path="solution")
    return status, objective, values
