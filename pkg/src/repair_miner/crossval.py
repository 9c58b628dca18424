"""Leave-one-project-out evaluation of repair models.

For each held-out project the model is trained on every other project (after
the training heuristic filters the transactions), then every held-out
transaction with exactly ``s`` changes is turned into a repair shape and its
median number of attempts is computed. A cell reports the median of those
medians together with how many transactions it covers.
"""

from __future__ import annotations

import csv
import io
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from repair_miner.changes import FeatureSpace, project_to_feature
from repair_miner.corpus import Transaction, TransactionBag, is_bfp, projects, slice_bag
from repair_miner.errors import (
    InputError,
    NotMinedError,
    SplitError,
    TrainingError,
    UnknownFeatureError,
)
from repair_miner.repair_model import (
    INFINITE,
    RepairModel,
    RepairShape,
    lower_median,
    repairability,
    uniform_model,
)
from repair_miner.stats import frequencies_from_counts

DEFAULT_SIZES = tuple(range(1, 9))
_NSC = re.compile(r"^(?:nsc:|n-sc:)?(\d+)(?:-?sc)?$")


def normalize_heuristic(name: str) -> str:
    """Canonical heuristic name: ``ALL``, ``BFP``, ``EQP`` or ``<n>-SC``."""
    key = name.strip().lower()
    if key in ("all", "bfp", "eqp"):
        return key.upper()
    m = _NSC.match(key)
    if m and ("sc" in key) and int(m.group(1)) >= 1:
        return f"{int(m.group(1))}-SC"
    raise InputError(f"unknown training heuristic {name!r} (use ALL, BFP, EQP or N-SC such as 5-SC)")


def _bag_selector(heuristic: str) -> str:
    if heuristic.endswith("-SC"):
        return f"nsc:{heuristic[:-3]}"
    return heuristic.lower()


def split(transactions: Sequence[Transaction], held_out: str) -> tuple[list[Transaction], list[Transaction]]:
    names = projects(transactions)
    if len(names) < 2:
        raise SplitError("leave-one-project-out needs at least two projects")
    if held_out not in names:
        raise SplitError(f"project {held_out!r} is not in the corpus")
    training = [t for t in transactions if t.project != held_out]
    evaluation = [t for t in transactions if t.project == held_out]
    return training, evaluation


@dataclass(frozen=True)
class CrossValSpec:
    transactions: tuple[Transaction, ...]
    space: FeatureSpace
    heuristic: str = "ALL"
    sizes: tuple[int, ...] = DEFAULT_SIZES
    evaluation: str = "all"  # which held-out transactions are evaluated: "all" or "bfp"

    def __post_init__(self):
        object.__setattr__(self, "transactions", tuple(self.transactions))
        object.__setattr__(self, "heuristic", normalize_heuristic(self.heuristic))
        object.__setattr__(self, "sizes", tuple(self.sizes))
        if not self.sizes or any(s < 1 for s in self.sizes):
            raise InputError("shape sizes must be positive integers")
        if self.evaluation not in ("all", "bfp"):
            raise InputError("evaluation filter must be 'all' or 'bfp'")
        if len(projects(self.transactions)) < 2:
            raise SplitError("cross-validation needs at least two projects")
        for t in self.transactions:
            if t.changes is None:
                raise NotMinedError(f"transaction {t.project}/{t.id} has not been mined")


@dataclass(frozen=True)
class Cell:
    median: Optional[float]  # positive int, INFINITE, or None when nothing was evaluated
    count: int
    skipped: int = 0  # size-s transactions whose actions fall outside the space

    @property
    def empty(self) -> bool:
        return self.count == 0


@dataclass
class RepairabilityTable:
    heuristic: str
    model: str
    sizes: tuple[int, ...]
    cells: dict[str, dict[int, Cell]] = field(default_factory=dict)
    notes: dict[str, str] = field(default_factory=dict)  # project -> reason its row is empty

    @property
    def projects(self) -> list[str]:
        return sorted(self.cells)

    def cell(self, project: str, size: int) -> Cell:
        return self.cells[project][size]

    def records(self) -> list[dict]:
        out = []
        for p in self.projects:
            for s in self.sizes:
                c = self.cells[p][s]
                out.append({
                    "heuristic": self.heuristic,
                    "model": self.model,
                    "project": p,
                    "size": s,
                    "median": _json_median(c.median),
                    "count": c.count,
                    "skipped": c.skipped,
                })
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["heuristic", "model", "project", "size", "median", "count", "skipped"])
        for r in self.records():
            w.writerow([r[k] if r[k] is not None else "" for k in
                        ("heuristic", "model", "project", "size", "median", "count", "skipped")])
        return buf.getvalue()

    def to_markdown(self) -> str:
        head = ["Project / size"] + [str(s) for s in self.sizes]
        lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
        for p in self.projects:
            row = [p] + [format_cell(self.cells[p][s]) for s in self.sizes]
            lines.append("| " + " | ".join(row) + " |")
        caption = (f"Median attempts (bold) and evaluated transactions (in brackets); "
                   f"model {self.model}, trained on {self.heuristic}.")
        return "\n".join(lines) + "\n\n" + caption + "\n"


def _json_median(m):
    if m is None:
        return None
    return "inf" if m == INFINITE else int(m)


def format_cell(c: Cell) -> str:
    if c.median is None:
        return f"- ({c.count})"
    value = "∞" if c.median == INFINITE else f"**{int(c.median)}**"
    return f"{value} ({c.count})"


def _train_lenient(members: Iterable[Transaction], space: FeatureSpace, name: str) -> RepairModel:
    """Train on every change that projects into ``space``; other changes are ignored."""
    counts: dict[str, int] = {}
    for t in members:
        for change in t.changes:
            try:
                label = project_to_feature(change, space)
            except UnknownFeatureError:
                continue
            if label in space:
                counts[label] = counts.get(label, 0) + 1
    table = frequencies_from_counts(counts, space)
    if not table.defined:
        raise TrainingError(f"training bag {name} has no changes")
    return RepairModel(space, table.chi, name, dict(table.alpha))


def training_model(training: Sequence[Transaction], space: FeatureSpace, heuristic: str) -> RepairModel:
    if heuristic == "EQP":
        return uniform_model(space)
    bag: TransactionBag = slice_bag(training, _bag_selector(heuristic))
    return _train_lenient(bag, space, heuristic)


def _shape(t: Transaction, space: FeatureSpace) -> Optional[RepairShape]:
    try:
        labels = [project_to_feature(c, space) for c in t.changes]
    except UnknownFeatureError:
        return None
    if any(label not in space for label in labels):
        return None
    return RepairShape.of(labels)


def evaluate_project(spec: CrossValSpec, held_out: str) -> tuple[dict[int, Cell], Optional[str]]:
    training, evaluation = split(spec.transactions, held_out)
    try:
        model = training_model(training, spec.space, spec.heuristic)
    except TrainingError as exc:
        return {s: Cell(None, 0) for s in spec.sizes}, str(exc)
    if spec.evaluation == "bfp":
        evaluation = [t for t in evaluation if is_bfp(t.message)]
    row = {}
    for s in spec.sizes:
        medians, skipped = [], 0
        for t in evaluation:
            if len(t.changes) != s:
                continue
            shape = _shape(t, spec.space)
            if shape is None:
                skipped += 1
                continue
            medians.append(repairability(shape, model).attempts)
        row[s] = Cell(lower_median(medians) if medians else None, len(medians), skipped)
    return row, None


def _evaluate(args):
    spec, project = args
    return project, evaluate_project(spec, project)


def run_crossval(spec: CrossValSpec, workers: int = 1) -> RepairabilityTable:
    names = projects(spec.transactions)
    jobs = [(spec, p) for p in names]
    if workers > 1 and len(names) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(names))) as pool:
            results = list(pool.map(_evaluate, jobs))
    else:
        results = [_evaluate(j) for j in jobs]
    table = RepairabilityTable(spec.heuristic, spec.space.model, spec.sizes)
    for project, (row, note) in sorted(results):
        table.cells[project] = row
        if note:
            table.notes[project] = note
    return table


@dataclass(frozen=True)
class HeuristicComparison:
    sizes: tuple[int, ...]
    medians: dict[str, dict[int, Optional[float]]]  # heuristic -> size -> median of medians

    def to_csv(self) -> str:
        """One series per heuristic: x = shape size, y = median attempts."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["heuristic", "size", "median"])
        for h in self.medians:
            for s in self.sizes:
                m = _json_median(self.medians[h][s])
                w.writerow([h, s, "" if m is None else m])
        return buf.getvalue()


def median_of_medians(table: RepairabilityTable) -> dict[int, Optional[float]]:
    out = {}
    for s in table.sizes:
        values = [table.cells[p][s].median for p in table.projects if table.cells[p][s].median is not None]
        out[s] = lower_median(values) if values else None
    return out


def compare_heuristics(transactions: Sequence[Transaction], space: FeatureSpace, heuristics: Sequence[str],
                       sizes: Sequence[int] = DEFAULT_SIZES, evaluation: str = "all",
                       workers: int = 1) -> HeuristicComparison:
    if not heuristics:
        raise InputError("at least one heuristic is required")
    medians = {}
    for h in heuristics:
        spec = CrossValSpec(tuple(transactions), space, h, tuple(sizes), evaluation)
        medians[spec.heuristic] = median_of_medians(run_crossval(spec, workers))
    return HeuristicComparison(tuple(sizes), medians)
