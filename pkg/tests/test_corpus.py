import json
import os
import subprocess

import pytest

from repair_miner.changes import SourceCodeChange
from repair_miner.corpus import (
    CorpusStore,
    FilePair,
    Transaction,
    ingest_vcs,
    is_bfp,
    load_corpus,
    mine,
    mine_transaction,
    projects,
    save_corpus,
    slice_bag,
    slice_bfp,
    slice_nsc,
)
from repair_miner.errors import InputError, NotMinedError
from tests.conftest import method

V1 = method("int x = a;\nreturn x;")
V2 = method("int x = a;\nlog(x);\nreturn x;")
V2_REFORMATTED = "class C {\n public int f(int a,int b){ int x=a; log( x );\n return x; }\n}\n"


def _git(repo, *args, env=None):
    subprocess.run(["git", "-C", str(repo), *args], check=True, capture_output=True, env=env)


def _commit(repo, text, message, when):
    (repo / "C.java").write_text(text)
    (repo / "notes.txt").write_text(message)
    _git(repo, "add", "-A")
    env = {**os.environ, "GIT_AUTHOR_DATE": f"{when} +0000", "GIT_COMMITTER_DATE": f"{when} +0000"}
    _git(repo, "commit", "-q", "-m", message, env=env)


@pytest.fixture
def fixture_repo(tmp_path):
    repo = tmp_path / "demo"
    repo.mkdir()
    _git(repo, "init", "-q")
    _git(repo, "config", "user.email", "dev@example.org")
    _git(repo, "config", "user.name", "Dev")
    _commit(repo, V1, "initial import", 1_700_000_000)
    _commit(repo, V2, "fix missing log call", 1_700_000_100)
    _commit(repo, V2_REFORMATTED, "reformat", 1_700_000_200)
    return repo


def test_ingest_and_mine_fixture_repo(fixture_repo):
    transactions = ingest_vcs(fixture_repo)
    assert [t.message for t in transactions] == ["initial import", "fix missing log call", "reformat"]
    assert all(t.project == "demo" for t in transactions)
    mined, report = mine(transactions)
    counts = [t.change_count for t in mined]
    # the import adds the whole class; only the class counts (its members are inside it)
    assert counts == [1, 1, 0]
    assert mined[0].changes[0].ct == "additional_class"
    assert (mined[1].changes[0].ct, mined[1].changes[0].et) == ("statement_insert", "method_invocation")
    assert report.changes == 2 and not report.failed_pairs


def test_empty_repository_yields_no_transactions(tmp_path):
    repo = tmp_path / "empty"
    repo.mkdir()
    _git(repo, "init", "-q")
    assert ingest_vcs(repo) == []


def test_missing_repository_is_input_error(tmp_path):
    with pytest.raises(InputError):
        ingest_vcs(tmp_path / "nope")


def test_parallel_mining_matches_serial(fixture_repo):
    transactions = ingest_vcs(fixture_repo)
    serial, _ = mine(transactions, workers=1)
    parallel, _ = mine(transactions, workers=2)
    assert [t.to_record() for t in serial] == [t.to_record() for t in parallel]


def test_unparseable_file_is_skipped_not_fatal():
    t = Transaction("t1", "p", "fix", 1, (FilePair("A.java", V1, "class A {"), FilePair("B.java", V1, V2)))
    mined, dropped, failures = mine_transaction(t)
    assert mined.change_count == 1
    assert [f[2] for f in failures] == ["A.java"]


def test_store_round_trip_and_supersede(tmp_path):
    path = tmp_path / "corpus.jsonl"
    store = CorpusStore(path)
    t = Transaction("a1", "p", "fix it", 5, (FilePair("A.java", V1, V2),))
    store.append(t)
    store.append(Transaction("a1", "p", "fix it", 5, (), changes=(SourceCodeChange("statement_insert",
                                                                                    "method_invocation"),)))
    loaded = load_corpus(path)
    assert len(loaded) == 1 and loaded[0].change_count == 1


def test_incomplete_trailing_record_is_ignored(tmp_path):
    path = tmp_path / "corpus.jsonl"
    save_corpus(path, [Transaction("a1", "p", "", 1, changes=())])
    with open(path, "a") as fh:
        fh.write('{"id": "a2", "project": "p"')
    assert [t.id for t in load_corpus(path)] == ["a1"]


def test_malformed_record_reports_line(tmp_path):
    path = tmp_path / "corpus.jsonl"
    path.write_text(json.dumps(Transaction("a1", "p").to_record()) + "\n{oops\n")
    with pytest.raises(InputError, match=":2:"):
        load_corpus(path)


def _mined(tid, project, message, n):
    return Transaction(tid, project, message, int(tid[1:]), changes=tuple(
        SourceCodeChange("statement_update", "assignment") for _ in range(n)))


def test_bfp_keywords_case_insensitive():
    assert is_bfp("Fixes NPE") and is_bfp("BUGFIX") and is_bfp("applied patch")
    assert not is_bfp("add feature")


def test_slicing():
    corpus = [_mined("t3", "q", "Fix crash", 1), _mined("t1", "p", "feature", 3), _mined("t2", "p", "patch", 1)]
    assert [t.id for t in slice_bfp(corpus)] == ["t2", "t3"]
    assert [t.id for t in slice_nsc(corpus, 1)] == ["t2", "t3"]
    assert [t.id for t in slice_bag(corpus, "all")] == ["t1", "t2", "t3"]
    assert slice_bag(corpus, "nsc:3").name == "3-SC"
    assert projects(corpus) == ["p", "q"]
    with pytest.raises(InputError):
        slice_nsc(corpus, 0)
    with pytest.raises(InputError):
        slice_bag(corpus, "random")


def test_nsc_needs_mined_corpus():
    with pytest.raises(NotMinedError):
        slice_nsc([Transaction("t1", "p")], 1)
