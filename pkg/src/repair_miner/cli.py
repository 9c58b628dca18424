"""``repair-miner`` command line.

Every subcommand prints one report to standard output (or ``--out``) in the
format chosen with ``--format``: ``json`` structured records (default),
``csv`` or ``md``. Exit status is 0 on success, 2 for usage or input errors
and 3 for internal failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from repair_miner import __version__
from repair_miner.changes import ChangeTaxonomy, default_change_taxonomy, feature_space
from repair_miner.concrete import load_scenario, sweep_csv, sweep_markdown
from repair_miner.corpus import ingest_vcs, load_corpus, mine, projects, save_corpus, slice_bag
from repair_miner.crossval import CrossValSpec, compare_heuristics, run_crossval
from repair_miner.errors import InputError, RepairMinerError
from repair_miner.repair_model import (
    INFINITE,
    RepairShape,
    median_attempts,
    monte_carlo_median,
    repairability,
    train,
    uniform_model,
)
from repair_miner.stats import (
    agreement,
    frequencies,
    read_ratings_csv,
    spearman_critical_value,
    spearman_rho,
)

log = logging.getLogger("repair_miner")

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 2, 3
FORMATS = ("json", "csv", "md")


# -- rendering --------------------------------------------------------------------

def _jsonable(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def render_records(command: str, records: list[dict], fmt: str, columns: Optional[Sequence[str]] = None,
                   extra: Optional[dict] = None) -> str:
    columns = list(columns or (records[0].keys() if records else []))
    rows = [{k: _jsonable(r.get(k)) for k in columns} for r in records]
    if fmt == "json":
        doc = {"command": command, **(extra or {}), "records": rows}
        return json.dumps(doc, indent=1, sort_keys=True, ensure_ascii=False) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow(["" if r[k] is None else r[k] for k in columns])
        return buf.getvalue()
    lines = ["| " + " | ".join(columns) + " |", "|" + "---|" * len(columns)]
    for r in rows:
        lines.append("| " + " | ".join(_md_value(r[k]) for k in columns) + " |")
    return "\n".join(lines) + "\n"


def _md_value(v) -> str:
    if v is None:
        return ""
    if v == "inf":
        return "∞"
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def _emit(args, text: str) -> None:
    if args.out and args.command != "mine":
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _report(args, command: str, records: list[dict], fmt: str, columns: Sequence[str],
            extra: Optional[dict] = None) -> None:
    """Emit the report; under --verbose also show a human table on standard error."""
    _emit(args, render_records(command, records, fmt, columns, extra))
    if args.verbose and fmt != "md":
        sys.stderr.write(render_records(command, records, "md", columns))


# -- helpers ------------------------------------------------------------------------

def _workers(args) -> int:
    env = os.environ.get("REPAIR_MINER_WORKERS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise InputError(f"REPAIR_MINER_WORKERS must be an integer, got {env!r}") from None
    else:
        value = args.workers if args.workers is not None else (os.cpu_count() or 1)
    if value < 1:
        raise InputError("worker count must be >= 1")
    return value


def _taxonomy(args) -> ChangeTaxonomy:
    return ChangeTaxonomy.load(args.taxonomy) if args.taxonomy else default_change_taxonomy()


def _space(args):
    return feature_space(args.model, _taxonomy(args))


def _mined_corpus(path: str):
    corpus = load_corpus(path)
    unmined = [t for t in corpus if t.changes is None]
    if unmined:
        raise InputError(f"{path}: {len(unmined)} transaction(s) are not mined; run 'repair-miner mine' first")
    return corpus


def _scenario_path(name: str) -> Path:
    path = Path(name)
    if path.exists():
        return path
    shipped = resources.files("repair_miner.data").joinpath("scenarios", name if name.endswith(".scenario")
                                                            else f"{name}.scenario")
    if shipped.is_file():
        return Path(str(shipped))
    raise InputError(f"scenario not found: {name}")


# -- subcommands --------------------------------------------------------------------

def cmd_mine(args) -> int:
    source = Path(args.input)
    if source.is_dir():
        transactions = ingest_vcs(source, project=args.project)
    elif source.is_file():
        transactions = load_corpus(source)
    else:
        raise InputError(f"no such repository or corpus file: {source}")
    tax = _taxonomy(args)
    mined, report = mine(transactions, tax, _workers(args))
    mined.sort(key=lambda t: (t.project, t.timestamp, t.id))
    save_corpus(args.out, mined)
    if report.failed_pairs:
        log.warning("%d file pair(s) could not be parsed and were skipped", len(report.failed_pairs))
    table = frequencies(mined, feature_space(args.model, tax))
    records = [{"rank": i, "feature": f, "alpha": a, "chi": chi}
               for i, (f, a, chi) in enumerate(table.top(20), 1)]
    extra = {
        "corpus": str(args.out),
        "transactions": report.transactions,
        "changes": report.changes,
        "dropped_operations": report.dropped,
        "failed_file_pairs": len(report.failed_pairs),
    }
    text = render_records("mine", records, args.format, ["rank", "feature", "alpha", "chi"], extra)
    summary = " ".join(f"{k}={v}" for k, v in extra.items())
    if args.format == "md":
        text = summary + "\n\n" + text
    elif args.format == "csv":
        print(summary, file=sys.stderr)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_slice(args) -> int:
    corpus = load_corpus(args.corpus)
    bag = slice_bag(corpus, args.bag)
    if args.out:
        save_corpus(args.out, bag.members)
    records = [{"project": t.project, "id": t.id, "timestamp": t.timestamp,
                "changes": None if t.changes is None else len(t.changes)} for t in bag.members]
    sys.stdout.write(render_records("slice", records, args.format, ["project", "id", "timestamp", "changes"],
                                    {"bag": bag.name, "size": len(bag)}))
    return EXIT_OK


def cmd_stats_freq(args) -> int:
    corpus = _mined_corpus(args.corpus)
    bag = slice_bag(corpus, args.bag)
    table = frequencies(bag, _space(args))
    if args.top:
        rows = [{"rank": i, "feature": f, "alpha": a, "chi": chi} for i, (f, a, chi) in enumerate(table.top(args.top), 1)]
    else:
        rows = [{"rank": i, **r} for i, r in enumerate(table.rows(), 1)]
    if not table.defined:
        log.warning("bag %s has no changes; relative frequencies are undefined", bag.name)
    _report(args, "stats freq", rows, args.format, ["rank", "feature", "alpha", "chi"],
                               {"bag": bag.name, "model": args.model.upper(), "total": table.total,
                                "zero_total": not table.defined})
    return EXIT_OK


def cmd_stats_spearman(args) -> int:
    corpus = _mined_corpus(args.corpus)
    space = _space(args)
    bag = slice_bag(corpus, args.bag)
    vectors = {}
    for p in projects(bag.members):
        table = frequencies([t for t in bag.members if t.project == p], space)
        if table.defined:
            vectors[p] = table.vector()
        else:
            log.warning("project %s has no changes in bag %s; left out", p, bag.name)
    critical = spearman_critical_value(len(space), args.alpha)
    names = sorted(vectors)
    rows = []
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            rho = spearman_rho(vectors[a], vectors[b])
            rows.append({"project_a": a, "project_b": b, "rho": rho,
                         "significant": (not math.isnan(rho)) and rho > critical})
    _report(args, "stats spearman", rows, args.format,
                               ["project_a", "project_b", "rho", "significant"],
                               {"bag": bag.name, "model": args.model.upper(), "alpha": args.alpha,
                                "critical_value": critical, "features": len(space)})
    return EXIT_OK


def cmd_stats_agreement(args) -> int:
    try:
        text = Path(args.ratings).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read ratings {args.ratings}: {exc.strerror}") from None
    items, _, counts = read_ratings_csv(text)
    result = agreement(counts)
    rows = [{"item": item, "p_i": p} for item, p in zip(items, result.per_item)]
    _report(args, "stats agreement", rows, args.format, ["item", "p_i"],
                               {"p_bar": result.p_bar, "p_e": result.p_e, "kappa": result.kappa})
    return EXIT_OK


def cmd_repair_median(args) -> int:
    if args.p is not None:
        p = args.p
        attempts = median_attempts(p)
        rows = [{"p": p, "median_attempts": attempts}]
        _report(args, "repair median", rows, args.format, ["p", "median_attempts"])
        return EXIT_OK
    if not args.corpus or not args.shape:
        raise InputError("give either --p, or a corpus together with --shape")
    corpus = _mined_corpus(args.corpus)
    space = _space(args)
    if args.bag.lower() == "eqp":
        model = uniform_model(space)
    else:
        model = train(slice_bag(corpus, args.bag), space)
    shape = RepairShape.of(label.strip() for label in args.shape.split(","))
    result = repairability(shape, model)
    row = {"shape": ", ".join(shape.labels()), "n": shape.n, "p": result.p, "median_attempts": result.attempts}
    columns = ["shape", "n", "p", "median_attempts"]
    if args.monte_carlo:
        mc = monte_carlo_median(shape, model, trials=args.monte_carlo, seed=args.seed)
        row.update({"monte_carlo_median": mc.median, "trials": mc.trials, "capped_trials": mc.capped})
        columns += ["monte_carlo_median", "trials", "capped_trials"]
    _report(args, "repair median", [row], args.format, columns,
                               {"model": args.model.upper(), "training": model.provenance, "seed": args.seed})
    return EXIT_OK


def cmd_crossval(args) -> int:
    corpus = _mined_corpus(args.corpus)
    space = _space(args)
    sizes = _parse_sizes(args.sizes)
    heuristics = args.heuristic or ["ALL"]
    workers = _workers(args)
    if args.series:
        comparison = compare_heuristics(corpus, space, heuristics, sizes, args.evaluate, workers)
        rows = [{"heuristic": h, "size": s, "median": comparison.medians[h][s]}
                for h in comparison.medians for s in comparison.sizes]
        _report(args, "crossval series", rows, args.format, ["heuristic", "size", "median"],
                                   {"model": space.model})
        return EXIT_OK
    out = []
    for h in heuristics:
        table = run_crossval(CrossValSpec(tuple(corpus), space, h, sizes, args.evaluate), workers)
        for project, note in sorted(table.notes.items()):
            log.warning("%s, held out %s: %s", table.heuristic, project, note)
        if args.verbose and args.format != "md":
            sys.stderr.write(f"### {table.heuristic}\n\n" + table.to_markdown())
        if args.format == "md":
            out.append(f"### {table.heuristic}\n\n" + table.to_markdown())
        elif args.format == "csv":
            text = table.to_csv()
            out.append(text if not out else text.split("\n", 1)[1])
        else:
            out.append(table.records())
    if args.format == "json":
        text = render_records("crossval", [r for recs in out for r in recs], "json",
                              ["heuristic", "model", "project", "size", "median", "count", "skipped"])
    else:
        text = ("\n" if args.format == "md" else "").join(out)
    _emit(args, text)
    return EXIT_OK


def _parse_sizes(text: str) -> tuple[int, ...]:
    sizes = []
    try:
        for part in text.split(","):
            lo, _, hi = part.strip().partition("-")
            sizes.extend(range(int(lo), int(hi or lo) + 1))
    except ValueError:
        raise InputError(f"invalid size list {text!r} (use e.g. 1-8 or 1,2,5)") from None
    if not sizes or min(sizes) < 1:
        raise InputError("shape sizes must be positive")
    return tuple(sorted(set(sizes)))


def cmd_simulate(args) -> int:
    scenario = load_scenario(_scenario_path(args.scenario))
    rows = scenario.run()
    space = scenario.space
    n_place = scenario.surviving_places or space.n_place
    if args.format == "csv":
        text = sweep_csv(rows)
    elif args.format == "md":
        text = sweep_markdown(rows)
    else:
        records = [{"p_insert": d[0], "p_delete": d[1], "p_swap": d[2],
                    "logical_time": "inf" if t == INFINITE else int(t)} for d, t in rows]
        text = render_records("simulate", records, "json", ["p_insert", "p_delete", "p_swap", "logical_time"], {
            "scenario": scenario.name, "n_place": n_place, "n_ast": space.n_ast,
            "fix": [str(a) for a in scenario.fix.actions],
        })
    _emit(args, text)
    if args.verbose and args.format != "md":
        sys.stderr.write(sweep_markdown(rows))
    return EXIT_OK


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", choices=("ct", "ctet", "CT", "CTET"), default="ct",
                        help="change model used as feature space (default: ct)")
    common.add_argument("--bag", default="all", help="transaction bag: all, bfp, nsc:<n> (default: all)")
    common.add_argument("--format", choices=FORMATS, default="json", help="report format (default: json)")
    common.add_argument("--seed", type=int, default=0, help="random seed for simulations (default: 0)")
    common.add_argument("--workers", type=int, default=None,
                        help="worker processes (default: CPU count; REPAIR_MINER_WORKERS overrides)")
    common.add_argument("--taxonomy", help="change taxonomy JSON file (default: the shipped one)")
    common.add_argument("--out", help="write the report (or, for mine, the corpus) to this file")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")

    parser = argparse.ArgumentParser(prog="repair-miner", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mine", parents=[common], help="ingest a git repository or corpus file and mine changes")
    p.add_argument("input", help="git working copy or JSON-lines corpus file")
    p.add_argument("--project", help="project name for a repository (default: directory name)")
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("slice", parents=[common], help="select a transaction bag")
    p.add_argument("corpus")
    p.set_defaults(func=cmd_slice)

    stats = sub.add_parser("stats", help="frequency, correlation and agreement statistics")
    stats_sub = stats.add_subparsers(dest="stats_command", required=True)
    p = stats_sub.add_parser("freq", parents=[common], help="absolute and relative change frequencies")
    p.add_argument("corpus")
    p.add_argument("--top", type=int, default=0, help="only the k most frequent features")
    p.set_defaults(func=cmd_stats_freq)
    p = stats_sub.add_parser("spearman", parents=[common], help="pairwise project rank correlation")
    p.add_argument("corpus")
    p.add_argument("--alpha", type=float, default=0.01)
    p.set_defaults(func=cmd_stats_spearman)
    p = stats_sub.add_parser("agreement", parents=[common], help="Fleiss agreement of a ratings CSV")
    p.add_argument("ratings")
    p.set_defaults(func=cmd_stats_agreement)

    repair = sub.add_parser("repair", help="repair shape analysis")
    repair_sub = repair.add_subparsers(dest="repair_command", required=True)
    p = repair_sub.add_parser("median", parents=[common], help="median attempts to draw a repair shape")
    p.add_argument("corpus", nargs="?")
    p.add_argument("--shape", help="comma-separated feature labels, e.g. 'statement insert,statement delete'")
    p.add_argument("--p", type=float, help="use this shape probability directly")
    p.add_argument("--monte-carlo", type=int, default=0, metavar="TRIALS",
                   help="also estimate the median by simulation")
    p.set_defaults(func=cmd_repair_median)

    p = sub.add_parser("crossval", parents=[common], help="leave-one-project-out repairability tables")
    p.add_argument("corpus")
    p.add_argument("--heuristic", action="append",
                   help="training heuristic ALL, BFP, EQP or N-SC (repeatable; default ALL)")
    p.add_argument("--sizes", default="1-8", help="shape sizes, e.g. 1-8 or 1,3 (default: 1-8)")
    p.add_argument("--evaluate", choices=("all", "bfp"), default="all",
                   help="held-out transactions to evaluate (default: all)")
    p.add_argument("--series", action="store_true", help="emit median-of-medians series per heuristic")
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("simulate", parents=[common], help="concrete repair space scenarios")
    p.add_argument("scenario", help="scenario file or shipped name (gcd, gcd-faultloc, two-action)")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    if args.command == "mine" and not args.out:
        parser.error("mine requires --out for the mined corpus")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"repair-miner: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RepairMinerError as exc:
        print(f"repair-miner: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - last-resort guard for the exit-code contract
        log.debug("unhandled exception", exc_info=True)
        print(f"repair-miner: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
