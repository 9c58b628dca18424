"""Probabilistic repair models, repair shapes and the median number of attempts.

A repair shape of size ``n`` with distinct actions ``r_j`` occurring ``e_j``
times is drawn, in one attempt, with the multinomial probability

    p = n! / prod(e_j!) * prod_j P(r_j) ** e_j

and attempts are independent, so the number of attempts until the shape is
first drawn is geometric. The median is the smallest ``k`` with
``1 - (1 - p) ** k >= 0.5``.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from repair_miner.changes import FeatureSpace, project_to_feature
from repair_miner.errors import (
    DomainError,
    EmptyShapeError,
    InputError,
    NonterminatingOracleError,
    NotMinedError,
    TrainingError,
    UnknownActionError,
)
from repair_miner.stats import frequencies

INFINITE = math.inf
PROBABILITY_FLOOR = 1e-15
EXACT_FACTORIAL_LIMIT = 20


@dataclass(frozen=True)
class RepairModel:
    space: FeatureSpace
    distribution: Mapping[str, float]
    provenance: str = "ALL"
    counts: Optional[Mapping[str, int]] = None

    def __post_init__(self):
        unknown = [a for a in self.distribution if a not in self.space]
        if unknown:
            raise UnknownActionError(f"actions outside the feature space: {unknown[:3]}")
        if any(p < 0 or math.isnan(p) for p in self.distribution.values()):
            raise InputError("probabilities must be non-negative")
        total = math.fsum(self.distribution.values())
        if abs(total - 1.0) > 1e-12:
            raise InputError(f"probabilities sum to {total!r}, not 1")
        full = {a: float(self.distribution.get(a, 0.0)) for a in self.space.features}
        object.__setattr__(self, "distribution", full)

    def probability(self, action: str) -> float:
        try:
            return self.distribution[action]
        except KeyError:
            raise UnknownActionError(f"action {action!r} is not in the {self.space.model} space") from None

    def to_record(self) -> dict:
        return {
            "space": {"model": self.space.model, "features": list(self.space.features)},
            "provenance": self.provenance,
            "counts": None if self.counts is None else dict(self.counts),
            "probabilities": dict(self.distribution),
        }

    @classmethod
    def from_record(cls, rec: dict, taxonomy=None) -> "RepairModel":
        space = FeatureSpace(rec["space"]["model"], tuple(rec["space"]["features"]), taxonomy=taxonomy)
        return cls(space, rec["probabilities"], rec.get("provenance", "ALL"), rec.get("counts"))

    def dumps(self) -> str:
        return json.dumps(self.to_record(), indent=1, sort_keys=True)


def train(bag: Iterable, space: FeatureSpace, provenance: Optional[str] = None) -> RepairModel:
    members = list(bag)
    table = frequencies(members, space)
    if not table.defined:
        raise TrainingError("cannot train a repair model on a bag without changes")
    name = provenance or getattr(bag, "name", "custom")
    return RepairModel(space, table.chi, name, dict(table.alpha))


def uniform_model(space: FeatureSpace) -> RepairModel:
    """The equally-distributed baseline (EQP)."""
    p = 1.0 / len(space)
    return RepairModel(space, {a: p for a in space.features}, "EQP")


@dataclass(frozen=True)
class RepairShape:
    """An unordered multiset of repair actions; ``actions`` holds ``(label, e_j)`` sorted by label."""

    actions: tuple[tuple[str, int], ...]
    n: int = field(init=False)

    def __post_init__(self):
        merged = Counter()
        for label, e in self.actions:
            if e < 1:
                raise InputError("multiplicities must be positive")
            merged[label] += e
        object.__setattr__(self, "actions", tuple(sorted(merged.items())))
        object.__setattr__(self, "n", sum(merged.values()))
        if self.n < 1:
            raise EmptyShapeError("a repair shape needs at least one action")

    @classmethod
    def of(cls, labels: Iterable[str]) -> "RepairShape":
        return cls(tuple(Counter(labels).items()))

    @property
    def multiplicities(self) -> tuple[int, ...]:
        return tuple(e for _, e in self.actions)

    def labels(self) -> list[str]:
        return [a for a, e in self.actions for _ in range(e)]


def extract_shape(transaction, space: FeatureSpace) -> RepairShape:
    changes = transaction.changes
    if changes is None:
        raise NotMinedError(f"transaction {transaction.project}/{transaction.id} has not been mined")
    if not changes:
        raise EmptyShapeError(f"transaction {transaction.project}/{transaction.id} has no changes")
    return RepairShape.of(project_to_feature(c, space) for c in changes)


def multinomial_probability(multiplicities: Sequence[int], probabilities: Sequence[float]) -> float:
    """``n!/prod(e_j!) * prod(p_j ** e_j)``; log-space above ``EXACT_FACTORIAL_LIMIT``."""
    if any(p == 0.0 for p in probabilities):
        return 0.0
    n = sum(multiplicities)
    if n <= EXACT_FACTORIAL_LIMIT:
        coef = math.factorial(n)
        for e in multiplicities:
            coef //= math.factorial(e)
        prob = float(coef)
        for e, p in zip(multiplicities, probabilities):
            prob *= p ** e
    else:
        log_p = math.lgamma(n + 1)
        for e, p in zip(multiplicities, probabilities):
            log_p += e * math.log(p) - math.lgamma(e + 1)
        prob = math.exp(log_p)
    return min(prob, 1.0)


def shape_probability(shape: RepairShape, model: RepairModel) -> float:
    probs = [model.probability(a) for a, _ in shape.actions]
    return multinomial_probability(shape.multiplicities, probs)


def median_attempts(p: float, floor: float = PROBABILITY_FLOOR):
    """Median of the geometric number of attempts; ``INFINITE`` below ``floor``."""
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"probability {p!r} is outside [0, 1]")
    if p >= 0.5:
        return 1
    if p < floor or p == 0.0:
        return INFINITE
    log_q = math.log1p(-p)
    k = max(1, math.ceil(math.log(0.5) / log_q))
    # Snap to the exact boundary (1-p)^k <= 0.5 < (1-p)^(k-1).
    while math.exp(k * log_q) > 0.5:
        k += 1
    while k > 1 and math.exp((k - 1) * log_q) <= 0.5:
        k -= 1
    return k


@dataclass(frozen=True)
class Repairability:
    p: float
    attempts: float  # positive int, or INFINITE

    @property
    def infinite(self) -> bool:
        return self.attempts == INFINITE


def repairability(shape: RepairShape, model: RepairModel, floor: float = PROBABILITY_FLOOR) -> Repairability:
    p = shape_probability(shape, model)
    return Repairability(p, median_attempts(p, floor))


@dataclass(frozen=True)
class MonteCarloResult:
    median: int
    trials: int
    capped: int
    cap: int
    attempts: int  # total simulated attempts


def lower_median(values: Sequence):
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def monte_carlo_median(shape: RepairShape, model: RepairModel, trials: int = 100_000, seed: int = 0,
                       cap: int = 10_000_000, block: int = 1 << 17) -> MonteCarloResult:
    """Empirical median attempts: draw ``n`` actions i.i.d. per attempt until the
    drawn multiset equals ``shape``.

    Attempts are simulated as one i.i.d. stream split into fixed-size blocks,
    each block using its own generator spawned from ``seed``; the gaps between
    consecutive successes are the per-trial attempt counts. A trial reaching
    ``cap`` attempts without success is recorded as ``cap``.
    """
    if trials < 1:
        raise InputError("trials must be >= 1")
    index = {a: i for i, a in enumerate(model.space.features)}
    probs = np.array([model.distribution[a] for a in model.space.features])
    for a, _ in shape.actions:
        if a not in index:
            raise UnknownActionError(f"action {a!r} is not in the {model.space.model} space")
        if probs[index[a]] == 0.0:
            raise NonterminatingOracleError(f"action {a!r} has probability 0; the shape is never drawn")
    # Inversion sampling: a uniform u selects action i when cum[i-1] <= u < cum[i].
    # Only the intervals of the shape's actions matter for the success test.
    cum = np.cumsum(probs)
    cum /= cum[-1]
    lower = np.concatenate(([0.0], cum[:-1]))
    wanted = [(lower[index[a]], cum[index[a]], e) for a, e in shape.actions]
    wanted.sort(key=lambda w: w[1] - w[0])  # rarest first narrows candidates fastest
    n = shape.n

    root = np.random.SeedSequence(seed)
    gaps: list[np.ndarray] = []
    collected = 0
    pending = 0  # attempts already spent on the trial in progress
    total = 0
    while collected < trials:
        rng = np.random.Generator(np.random.PCG64(root.spawn(1)[0]))
        u = rng.random((block, n))
        hits = np.arange(block)
        for lo, hi, e in wanted:
            rows = u[hits]
            hits = hits[((rows >= lo) & (rows < hi)).sum(axis=1) == e]
        total += block
        if hits.size == 0:
            pending += block
        else:
            g = np.diff(hits, prepend=-1)
            g[0] += pending
            pending = block - 1 - int(hits[-1])
            over = g > cap
            if over.any():
                # A trial stops at the cap and the next trial starts afresh.
                extra = (g[over] - 1) // cap
                g[over] -= extra * cap
                gaps.append(np.full(int(extra.sum()), cap))
                collected += int(extra.sum())
            gaps.append(g)
            collected += g.size
        while pending >= cap:
            gaps.append(np.array([cap]))
            collected += 1
            pending -= cap
    sample = np.concatenate(gaps)[:trials]
    median = int(np.partition(sample, (trials - 1) // 2)[(trials - 1) // 2])
    return MonteCarloResult(median, trials, int((sample >= cap).sum()), cap, total)
