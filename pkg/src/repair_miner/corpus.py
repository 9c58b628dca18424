"""Versioning transactions: ingestion from git, mining, persistence and bags.

Offline corpus files hold one JSON record per line::

    {"id": "a1b2", "project": "demo", "message": "fix NPE", "timestamp": 1700000000,
     "format": "source" | "interchange",
     "files": [{"path": "A.java", "before": <text|tree|null>, "after": <text|tree|null>}],
     "changes": [{"ct": ..., "et": ..., "path": ..., "line": ...}] | null}

``before``/``after`` hold raw source when ``format`` is ``source`` and
interchange tree records when it is ``interchange``; ``null`` marks an added
or deleted file. Records are appended; a later record with the same
``(project, id)`` supersedes an earlier one.
"""

from __future__ import annotations

import json
import logging
import os
import subprocess
import tempfile
import threading
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

from repair_miner.changes import ChangeTaxonomy, SourceCodeChange, classify_with_drops, default_change_taxonomy
from repair_miner.differ import edit_script, match_trees
from repair_miner.errors import EnvironmentToolError, InputError, NotMinedError
from repair_miner.syntax import SourceTree, empty_tree, parse_mini_java, tree_from_record

log = logging.getLogger(__name__)

BFP_KEYWORDS = ("bug", "fix", "patch")


@dataclass(frozen=True)
class FilePair:
    path: str
    before: Any = None
    after: Any = None


@dataclass(frozen=True)
class Transaction:
    id: str
    project: str
    message: str = ""
    timestamp: int = 0
    files: tuple[FilePair, ...] = ()
    format: str = "source"
    changes: Optional[tuple[SourceCodeChange, ...]] = None

    @property
    def mined(self) -> bool:
        return self.changes is not None

    @property
    def change_count(self) -> int:
        if self.changes is None:
            raise NotMinedError(f"transaction {self.project}/{self.id} has not been mined")
        return len(self.changes)

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "project": self.project,
            "message": self.message,
            "timestamp": self.timestamp,
            "format": self.format,
            "files": [{"path": f.path, "before": f.before, "after": f.after} for f in self.files],
            "changes": None if self.changes is None else [c.to_record() for c in self.changes],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Transaction":
        try:
            changes = rec.get("changes")
            return cls(
                id=str(rec["id"]),
                project=str(rec["project"]),
                message=rec.get("message", ""),
                timestamp=int(rec.get("timestamp", 0)),
                files=tuple(FilePair(f["path"], f.get("before"), f.get("after")) for f in rec.get("files", ())),
                format=rec.get("format", "source"),
                changes=None if changes is None else tuple(SourceCodeChange.from_record(c) for c in changes),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed transaction record: {exc}") from exc


@dataclass(frozen=True)
class TransactionBag:
    name: str
    members: tuple[Transaction, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def ids(self) -> list[tuple[str, str]]:
        return [(t.project, t.id) for t in self.members]


def _order(transactions: Iterable[Transaction]) -> tuple[Transaction, ...]:
    return tuple(sorted(transactions, key=lambda t: (t.project, t.timestamp, t.id)))


# -- persistence --------------------------------------------------------------

class CorpusStore:
    """Append-only line-record store; each record is written with one call."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, transaction: Transaction) -> None:
        line = json.dumps(transaction.to_record(), ensure_ascii=False, sort_keys=True) + "\n"
        data = line.encode("utf-8")
        with self._lock:
            fd = os.open(self.path, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)
            try:
                os.write(fd, data)
            finally:
                os.close(fd)

    def extend(self, transactions: Iterable[Transaction]) -> None:
        for t in transactions:
            self.append(t)

    def load(self) -> list[Transaction]:
        return load_corpus(self.path)


def load_corpus(path: str | Path) -> list[Transaction]:
    latest: dict[tuple[str, str], Transaction] = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read corpus {path}: {exc.strerror}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            if not line.endswith("\n"):
                log.warning("%s:%d: ignoring incomplete trailing record", path, lineno)
                break
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: malformed record: {exc.msg}") from exc
            t = Transaction.from_record(rec)
            latest.pop((t.project, t.id), None)
            latest[(t.project, t.id)] = t
    return list(latest.values())


def save_corpus(path: str | Path, transactions: Iterable[Transaction]) -> None:
    """Atomically replace ``path`` with the given transactions."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=path.name, dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            for t in transactions:
                fh.write(json.dumps(t.to_record(), ensure_ascii=False, sort_keys=True) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- version control ------------------------------------------------------------

GIT_COMMANDS = {
    "log": ["git", "-C", "{repo}", "log", "--no-renames", "--format=%H%x1f%ct%x1f%B%x1e"],
    "files": ["git", "-C", "{repo}", "diff-tree", "--root", "--no-commit-id", "--no-renames", "-r",
              "--name-status", "{commit}"],
    "show": ["git", "-C", "{repo}", "show", "{commit}:{path}"],
    "parent": ["git", "-C", "{repo}", "rev-parse", "--verify", "--quiet", "{commit}^"],
}


def _run(template: list[str], **values) -> str:
    cmd = [part.format(**values) for part in template]
    try:
        proc = subprocess.run(cmd, capture_output=True, check=False)
    except FileNotFoundError as exc:
        raise EnvironmentToolError(f"version-control tool unavailable: {cmd[0]}") from exc
    if proc.returncode != 0:
        raise subprocess.CalledProcessError(proc.returncode, cmd, proc.stdout, proc.stderr)
    return proc.stdout.decode("utf-8", errors="replace")


def ingest_vcs(repo_path: str | Path, project: Optional[str] = None, extension: str = ".java",
               commands: Optional[dict] = None) -> list[Transaction]:
    """Read every commit touching a ``extension`` file as a Transaction."""
    cmds = {**GIT_COMMANDS, **(commands or {})}
    repo = str(repo_path)
    if not Path(repo).is_dir():
        raise InputError(f"not a directory: {repo}")
    project = project or Path(repo).resolve().name
    try:
        raw_log = _run(cmds["log"], repo=repo)
    except subprocess.CalledProcessError as exc:
        stderr = exc.stderr.decode("utf-8", "replace") if exc.stderr else ""
        if "does not have any commits" in stderr:
            return []
        raise InputError(f"cannot read history of {repo}: {stderr.strip()}") from exc

    out = []
    for entry in raw_log.split("\x1e"):
        entry = entry.strip("\n")
        if not entry:
            continue
        sha, ts, message = entry.split("\x1f", 2)
        try:
            _run(cmds["parent"], repo=repo, commit=sha)
            parent = f"{sha}^"
        except subprocess.CalledProcessError:
            parent = None
        files = []
        for line in _run(cmds["files"], repo=repo, commit=sha).splitlines():
            status, _, path = line.partition("\t")
            if not path.endswith(extension):
                continue
            before = after = None
            try:
                if status[0] != "A" and parent is not None:
                    before = _run(cmds["show"], repo=repo, commit=parent, path=path)
                if status[0] != "D":
                    after = _run(cmds["show"], repo=repo, commit=sha, path=path)
            except subprocess.CalledProcessError as exc:
                log.warning("%s@%s: cannot read %s (%s); file skipped", project, sha[:10], path, exc)
                continue
            files.append(FilePair(path, before, after))
        if files:
            out.append(Transaction(sha, project, message.strip(), int(ts), tuple(files)))
    return sorted(out, key=lambda t: (t.timestamp, t.id))


# -- mining ---------------------------------------------------------------------

def _parse_side(data: Any, fmt: str, path: str, revision: str, taxonomy: ChangeTaxonomy) -> SourceTree:
    if data is None:
        return empty_tree(path, revision)
    if fmt == "interchange":
        return tree_from_record(data, taxonomy.entities)
    return parse_mini_java(data, path, revision)


@dataclass
class MiningReport:
    transactions: int = 0
    changes: int = 0
    dropped: int = 0
    failed_pairs: list[tuple[str, str, str, str]] = field(default_factory=list)  # project, id, path, reason


def mine_transaction(t: Transaction, taxonomy: Optional[ChangeTaxonomy] = None):
    """Parse, diff and classify each file pair; returns (mined transaction, dropped count, failures)."""
    tax = taxonomy or default_change_taxonomy()
    changes: list[SourceCodeChange] = []
    dropped = 0
    failures = []
    for pair in t.files:
        try:
            left = _parse_side(pair.before, t.format, pair.path, "before", tax)
            right = _parse_side(pair.after, t.format, pair.path, "after", tax)
        except InputError as exc:
            log.warning("%s/%s: skipping %s: %s", t.project, t.id, pair.path, exc)
            failures.append((t.project, t.id, pair.path, str(exc)))
            continue
        ops = edit_script(left, right, match_trees(left, right, tax.entities), tax.entities)
        found, drops = classify_with_drops(ops, tax, pair.path)
        changes.extend(found)
        dropped += len(drops)
    return replace(t, changes=tuple(changes)), dropped, failures


def _mine_one(args):
    t, taxonomy = args
    return mine_transaction(t, taxonomy)


def mine(transactions: Sequence[Transaction], taxonomy: Optional[ChangeTaxonomy] = None,
         workers: int = 1) -> tuple[list[Transaction], MiningReport]:
    tax = taxonomy or default_change_taxonomy()
    if workers > 1 and len(transactions) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_mine_one, [(t, tax) for t in transactions], chunksize=16))
    else:
        results = [mine_transaction(t, tax) for t in transactions]
    report = MiningReport(transactions=len(transactions))
    mined = []
    for t, dropped, failures in results:
        mined.append(t)
        report.changes += len(t.changes)
        report.dropped += dropped
        report.failed_pairs.extend(failures)
    return mined, report


# -- slicing --------------------------------------------------------------------

def slice_all(transactions: Iterable[Transaction]) -> TransactionBag:
    return TransactionBag("ALL", _order(transactions))


def is_bfp(message: str, keywords: Sequence[str] = BFP_KEYWORDS) -> bool:
    text = (message or "").lower()
    return any(k.lower() in text for k in keywords)


def slice_bfp(transactions: Iterable[Transaction], keywords: Sequence[str] = BFP_KEYWORDS) -> TransactionBag:
    return TransactionBag("BFP", _order(t for t in transactions if is_bfp(t.message, keywords)))


def slice_nsc(transactions: Iterable[Transaction], n: int) -> TransactionBag:
    if n < 1:
        raise InputError("N-SC size must be a positive integer")
    members = [t for t in transactions if t.change_count == n]
    return TransactionBag(f"{n}-SC", _order(members))


def slice_bag(transactions: Iterable[Transaction], selector: str) -> TransactionBag:
    """Slice by a bag selector: ``all``, ``bfp`` or ``nsc:<n>``."""
    sel = selector.strip().lower()
    if sel == "all":
        return slice_all(transactions)
    if sel == "bfp":
        return slice_bfp(transactions)
    if sel.startswith("nsc:"):
        try:
            n = int(sel[4:])
        except ValueError:
            raise InputError(f"invalid bag selector {selector!r}") from None
        return slice_nsc(transactions, n)
    raise InputError(f"invalid bag selector {selector!r}")


def projects(transactions: Iterable[Transaction]) -> list[str]:
    return sorted({t.project for t in transactions})

