"""Frequency measures, Spearman rank correlation and inter-rater agreement."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from repair_miner.changes import FeatureSpace, project_to_feature
from repair_miner.errors import DimensionError, InputError, NotMinedError, UnsupportedSizeError

# Critical values of Spearman's rho at alpha = 0.01, keyed by feature-vector
# size. Sizes at or beyond the last key reuse its value (tables stop at 60 and
# critical values decrease with N).
SPEARMAN_CRITICAL = {0.01: {41: 0.364, 60: 0.301}}


@dataclass(frozen=True)
class FrequencyTable:
    space: FeatureSpace
    alpha: Mapping[str, int]
    total: int

    @property
    def defined(self) -> bool:
        return self.total > 0

    @property
    def chi(self) -> Optional[dict[str, float]]:
        """Relative frequencies, or None when the table is empty."""
        if not self.total:
            return None
        return {f: a / self.total for f, a in self.alpha.items()}

    def vector(self) -> np.ndarray:
        chi = self.chi
        if chi is None:
            return np.zeros(len(self.space.features))
        return np.array([chi[f] for f in self.space.features])

    def top(self, k: int = 20) -> list[tuple[str, int, float]]:
        chi = self.chi or {}
        order = sorted(self.alpha.items(), key=lambda kv: (-kv[1], kv[0]))
        return [(f, a, chi.get(f, 0.0)) for f, a in order[:k] if a > 0]

    def rows(self) -> list[dict]:
        chi = self.chi
        return [
            {"feature": f, "alpha": a, "chi": None if chi is None else chi[f]}
            for f, a in self.alpha.items()
        ]


def frequencies(bag: Iterable, space: FeatureSpace) -> FrequencyTable:
    """Count every change of every (mined) transaction projected into ``space``."""
    alpha = {f: 0 for f in space.features}
    total = 0
    for t in bag:
        if t.changes is None:
            raise NotMinedError(f"transaction {t.project}/{t.id} has not been mined")
        for change in t.changes:
            label = project_to_feature(change, space)
            alpha[label] = alpha.get(label, 0) + 1
            total += 1
    return FrequencyTable(space, alpha, total)


def frequencies_from_counts(counts: Mapping[str, int], space: FeatureSpace) -> FrequencyTable:
    alpha = {f: 0 for f in space.features}
    alpha.update(counts)
    return FrequencyTable(space, alpha, sum(alpha.values()))


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks; tied values share the mean of the ranks they span."""
    x = np.asarray(values, dtype=float)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sorted_x = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of average ranks; NaN when either side has no rank variance."""
    if len(x) != len(y):
        raise DimensionError(f"vectors have different lengths ({len(x)} vs {len(y)})")
    if len(x) < 2:
        raise DimensionError("need at least two aligned values")
    rx, ry = average_ranks(x), average_ranks(y)
    dx, dy = rx - rx.mean(), ry - ry.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0.0:
        return math.nan
    return max(-1.0, min(1.0, float(dx @ dy) / denom))


def spearman_critical_value(size: int, alpha_level: float = 0.01, table: Optional[Mapping] = None) -> float:
    table = table or SPEARMAN_CRITICAL
    if alpha_level not in table:
        raise UnsupportedSizeError(f"no critical values for alpha={alpha_level}")
    rows = table[alpha_level]
    if size in rows:
        return rows[size]
    largest = max(rows)
    if size >= largest:
        return rows[largest]
    raise UnsupportedSizeError(
        f"no critical value for vectors of size {size} at alpha={alpha_level}; "
        f"add a row to SPEARMAN_CRITICAL or pass table="
    )


def spearman_significant(rho: float, space, alpha_level: float = 0.01, table: Optional[Mapping] = None) -> bool:
    size = space if isinstance(space, int) else len(space)
    return rho > spearman_critical_value(size, alpha_level, table)


@dataclass(frozen=True)
class Agreement:
    per_item: tuple[float, ...]
    p_bar: float
    p_e: float
    kappa: Optional[float]  # None when chance agreement is 1


def agreement(ratings: Sequence[Sequence[int]]) -> Agreement:
    """Fleiss' overall agreement and kappa for an items x categories count matrix."""
    rows = [list(map(int, r)) for r in ratings]
    if len(rows) < 2:
        raise InputError("agreement needs at least two items")
    width = len(rows[0])
    if width < 1 or any(len(r) != width for r in rows):
        raise DimensionError("every item must have the same number of categories")
    if any(v < 0 for r in rows for v in r):
        raise InputError("counts must be non-negative")
    n = sum(rows[0])
    if n < 2 or any(sum(r) != n for r in rows):
        raise InputError("every item must be rated by the same number (>= 2) of raters")
    per_item = [Fraction(sum(v * v for v in r) - n, n * (n - 1)) for r in rows]
    p_bar = sum(per_item) / len(rows)
    total = n * len(rows)
    p_e = sum(Fraction(sum(r[j] for r in rows), total) ** 2 for j in range(width))
    kappa = None if p_e == 1 else (p_bar - p_e) / (1 - p_e)
    return Agreement(
        tuple(float(p) for p in per_item),
        float(p_bar),
        float(p_e),
        None if kappa is None else float(kappa),
    )


def read_ratings_csv(text: str) -> tuple[list[str], list[str], list[list[int]]]:
    """Parse ``item,<category>,...`` CSV; returns (items, categories, counts)."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise InputError("empty ratings file") from None
    items, counts = [], []
    for lineno, row in enumerate(reader, 2):
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise InputError(f"ratings line {lineno}: expected {len(header)} columns")
        try:
            counts.append([int(c) for c in row[1:]])
        except ValueError:
            raise InputError(f"ratings line {lineno}: counts must be integers") from None
        items.append(row[0])
    return items, header[1:], counts


def correlation_matrix(vectors: Mapping[str, Sequence[float]]) -> dict[tuple[str, str], float]:
    names = sorted(vectors)
    out = {}
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            out[(a, b)] = spearman_rho(vectors[a], vectors[b])
    return out
