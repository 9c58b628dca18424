from __future__ import annotations

import random
from pathlib import Path

import pytest

from repair_miner.changes import SourceCodeChange, classify
from repair_miner.corpus import Transaction
from repair_miner.differ import diff
from repair_miner.syntax import parse_mini_java

DATA = Path(__file__).parent / "data"


def changes_between(before: str, after: str, strict: bool = True) -> list[tuple[str, str]]:
    ops = diff(parse_mini_java(before), parse_mini_java(after))
    return sorted((c.ct, c.et) for c in classify(ops, strict=strict))


def method(body: str, sig: str = "int f(int a, int b)", mods: str = "public") -> str:
    lines = "\n".join("    " + line for line in body.strip("\n").splitlines())
    return f"class C {{\n  {mods} {sig} {{\n{lines}\n  }}\n}}\n"


def synthetic_corpus(seed: int, projects=("alpha", "beta", "gamma"), per_project: int = 40,
                     change_types=None, max_size: int = 5) -> list[Transaction]:
    """Mined transactions with random CT labels, each project skewed differently."""
    rng = random.Random(seed)
    cts = change_types or ["statement_insert", "statement_delete", "statement_update",
                           "condition_expression_change", "additional_functionality", "parameter_change"]
    out = []
    for pi, project in enumerate(projects):
        weights = [rng.random() ** 2 + (1.0 if i == pi % len(cts) else 0.0) for i in range(len(cts))]
        for k in range(per_project):
            size = rng.randint(1, max_size)
            picked = rng.choices(cts, weights=weights, k=size)
            changes = tuple(SourceCodeChange(ct, "method_invocation" if ct.startswith("statement") else
                                             "if_statement" if ct.startswith("condition") else
                                             "parameter" if ct.startswith("parameter") else "method")
                            for ct in picked)
            message = rng.choice(["fix null check", "add feature", "refactor", "patch overflow", "cleanup"])
            out.append(Transaction(f"{project}-{k:03d}", project, message, 1000 + k, (), "source", changes))
    return out


@pytest.fixture
def gcd_source() -> str:
    return (DATA / "gcd.java").read_text()
