"""Concrete repair spaces: insert / delete / swap operators over numbered AST
statements and insertion places.

Statements and places are numbered from 1. A single concrete action has
probability

    insert(i, k)  p_insert / (n_place * n_ast)
    delete(j)     p_delete / n_ast
    swap(i, j)    p_swap / n_ast ** 2      (ordered pairs, i == j allowed)

and a fix made of several actions is scored with the same multinomial formula
as an abstract repair shape.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

from repair_miner.errors import DomainError, InputError
from repair_miner.repair_model import INFINITE, median_attempts, multinomial_probability

OPERATORS = ("insert", "delete", "swap")


@dataclass(frozen=True)
class ConcreteSpace:
    n_place: int
    n_ast: int
    p_insert: float
    p_delete: float
    p_swap: float
    tolerance: float = 1e-9

    def __post_init__(self):
        if self.n_place < 1 or self.n_ast < 1:
            raise DomainError("n_place and n_ast must be >= 1")
        ps = (self.p_insert, self.p_delete, self.p_swap)
        if any(p < 0 or math.isnan(p) for p in ps):
            raise DomainError("operator probabilities must be non-negative")
        if abs(math.fsum(ps) - 1.0) > self.tolerance + 1e-12:  # slack for decimal round-off
            raise DomainError(f"operator probabilities sum to {math.fsum(ps)!r} (tolerance {self.tolerance})")

    @property
    def operators(self) -> tuple[float, float, float]:
        return (self.p_insert, self.p_delete, self.p_swap)

    def with_operators(self, p_insert: float, p_delete: float, p_swap: float) -> "ConcreteSpace":
        return replace(self, p_insert=p_insert, p_delete=p_delete, p_swap=p_swap)

    def synthesis_sizes(self) -> dict[str, int]:
        return {"insert": self.n_place * self.n_ast, "delete": self.n_ast, "swap": self.n_ast ** 2}

    def actions(self) -> Iterable["ConcreteAction"]:
        """Every concrete action of the space."""
        for i in range(1, self.n_ast + 1):
            for k in range(1, self.n_place + 1):
                yield ConcreteAction("insert", i, k)
        for j in range(1, self.n_ast + 1):
            yield ConcreteAction("delete", j)
        for i in range(1, self.n_ast + 1):
            for j in range(1, self.n_ast + 1):
                yield ConcreteAction("swap", i, j)


@dataclass(frozen=True, order=True)
class ConcreteAction:
    op: str
    a: int
    b: Optional[int] = None  # place for insert, second statement for swap

    def __post_init__(self):
        if self.op not in OPERATORS:
            raise InputError(f"unknown concrete operator {self.op!r}")
        if (self.op == "delete") != (self.b is None):
            raise InputError(f"{self.op} takes {'one index' if self.op == 'delete' else 'two indices'}")

    def __str__(self) -> str:
        return f"{self.op}({self.a})" if self.b is None else f"{self.op}({self.a}, {self.b})"


def insert(ast: int, place: int) -> ConcreteAction:
    return ConcreteAction("insert", ast, place)


def delete(ast: int) -> ConcreteAction:
    return ConcreteAction("delete", ast)


def swap(first: int, second: int) -> ConcreteAction:
    return ConcreteAction("swap", first, second)


@dataclass(frozen=True)
class ConcreteFix:
    actions: tuple[ConcreteAction, ...]

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(sorted(self.actions)))
        if not self.actions:
            raise InputError("a concrete fix needs at least one action")

    @property
    def n(self) -> int:
        return len(self.actions)

    def grouped(self) -> list[tuple[ConcreteAction, int]]:
        return sorted(Counter(self.actions).items())


def _check_bounds(space: ConcreteSpace, action: ConcreteAction) -> None:
    def within(value, limit, what):
        if not 1 <= value <= limit:
            raise DomainError(f"{action}: {what} index {value} is outside 1..{limit}")

    within(action.a, space.n_ast, "statement")
    if action.op == "insert":
        within(action.b, space.n_place, "place")
    elif action.op == "swap":
        within(action.b, space.n_ast, "statement")


def concrete_action_probability(space: ConcreteSpace, action: ConcreteAction) -> float:
    _check_bounds(space, action)
    if action.op == "insert":
        return space.p_insert / (space.n_place * space.n_ast)
    if action.op == "delete":
        return space.p_delete / space.n_ast
    return space.p_swap / space.n_ast ** 2


def fix_probability(space: ConcreteSpace, fix: ConcreteFix) -> float:
    groups = fix.grouped()
    probs = [concrete_action_probability(space, a) for a, _ in groups]
    return multinomial_probability([e for _, e in groups], probs)


def logical_time(space: ConcreteSpace, fix: ConcreteFix):
    """Median attempts of uniform random search to draw ``fix``; INFINITE when impossible."""
    return median_attempts(fix_probability(space, fix))


multi_action_time = logical_time


def operator_sweep(space: ConcreteSpace, fix: ConcreteFix,
                   distributions: Sequence[tuple[float, float, float]]) -> list[tuple[tuple[float, float, float], object]]:
    return [(tuple(d), logical_time(space.with_operators(*d), fix)) for d in distributions]


def fault_localization_factor(space: ConcreteSpace, surviving_places: int) -> ConcreteSpace:
    if not 1 <= surviving_places <= space.n_place:
        raise DomainError(f"surviving places must be within 1..{space.n_place}, got {surviving_places}")
    return replace(space, n_place=surviving_places)


def format_time(value) -> str:
    return "inf" if value == INFINITE else str(int(value))


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p_insert", "p_delete", "p_swap", "logical_time"])
    for (pi, pd, ps), t in rows:
        w.writerow([repr(pi), repr(pd), repr(ps), format_time(t)])
    return buf.getvalue()


def sweep_markdown(rows) -> str:
    lines = ["| p_insert | p_delete | p_swap | Logical time |", "|---|---|---|---|"]
    for (pi, pd, ps), t in rows:
        shown = "∞" if t == INFINITE else str(int(t))
        lines.append(f"| {pi:g} | {pd:g} | {ps:g} | {shown} |")
    return "\n".join(lines) + "\n"


# -- scenario files -------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    space: ConcreteSpace
    fix: ConcreteFix
    operators: tuple[tuple[float, float, float], ...]
    surviving_places: Optional[int] = None
    name: str = ""

    def run(self):
        space = self.space
        if self.surviving_places is not None:
            space = fault_localization_factor(space, self.surviving_places)
        return operator_sweep(space, self.fix, self.operators)


def _action_from_record(rec) -> ConcreteAction:
    if not isinstance(rec, dict) or len(rec) != 1:
        raise InputError(f"fix action must be an object like {{\"insert\": [8, 3]}}, got {rec!r}")
    (op, args), = rec.items()
    args = args if isinstance(args, list) else [args]
    if not all(isinstance(x, int) and not isinstance(x, bool) for x in args):
        raise InputError(f"fix action {rec!r}: indices must be integers")
    return ConcreteAction(op, *args)


def scenario_from_record(doc: dict, name: str = "") -> Scenario:
    try:
        rows = [(float(o["p_insert"]), float(o["p_delete"]), float(o["p_swap"])) for o in doc["operators"]]
        if not rows:
            raise InputError("scenario needs at least one operator distribution")
        tol = float(doc.get("tolerance", 1e-9))
        space = None
        for number, r in enumerate(rows, 1):
            try:
                checked = ConcreteSpace(int(doc["n_place"]), int(doc["n_ast"]), *r, tolerance=tol)
            except DomainError as exc:
                raise DomainError(f"scenario {name or '<input>'}, operator row {number}: {exc}") from None
            space = space or checked
        fix = ConcreteFix(tuple(_action_from_record(a) for a in doc["fix"]))
    except KeyError as exc:
        raise InputError(f"scenario {name or '<input>'} is missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise InputError(f"scenario {name or '<input>'}: {exc}") from None
    for a in fix.actions:
        _check_bounds(space, a)
    surviving = doc.get("surviving_places")
    return Scenario(space, fix, tuple(rows), None if surviving is None else int(surviving), doc.get("name", name))


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise InputError(f"cannot read scenario {path}: {exc.strerror}") from None
    return scenario_from_record(doc, path.name)
