from __future__ import annotations

import sqlite3

import pytest

from ncrough.db.db import connect, init_schema
from ncrough.db.repos.run_repo import STATUS_FAILED, STATUS_OK, STATUS_RUNNING, RunRepository


@pytest.fixture
def repo(tmp_path):
    conn = connect(tmp_path / "registre" / "ncrough.db")
    init_schema(conn)
    yield RunRepository(conn)
    conn.close()


def test_start_and_finish(repo):
    run_id = repo.start(command="solve", seed=3, config={"params": {"dimension": 4}}, output_dir="/tmp/x")
    item = repo.get_by_id(run_id)
    assert item.status == STATUS_RUNNING
    assert item.exit_code is None
    assert item.config == {"params": {"dimension": 4}}

    repo.finish(run_id, exit_code=0, csv_path="/tmp/x/solve.csv")
    item = repo.get_by_id(run_id)
    assert item.status == STATUS_OK
    assert item.csv_path.endswith("solve.csv")
    assert item.finished_at


def test_failed_run_keeps_message(repo):
    run_id = repo.start(command="study:bg", seed=1, config={}, output_dir="")
    repo.finish(run_id, exit_code=3, message="bg violée")
    item = repo.get_by_id(run_id)
    assert item.status == STATUS_FAILED
    assert item.message == "bg violée"


def test_list_recent_and_filter(repo):
    ids = [repo.start(command=c, seed=k, config={}, output_dir="") for k, c in enumerate(["moments", "solve", "solve"])]
    recent = repo.list_recent(10)
    assert [item.id for item in recent] == sorted(ids, reverse=True)
    assert [item.seed for item in repo.list_recent(10, "solve")] == [2, 1]
    assert len(repo.list_recent(1)) == 1

    repo.delete(ids[0])
    assert repo.get_by_id(ids[0]) is None


def test_schema_is_idempotent_and_checked(repo):
    init_schema(repo.conn)
    with pytest.raises(sqlite3.IntegrityError):
        repo.conn.execute(
            "INSERT INTO run (command, seed, status, started_at) VALUES ('x', 0, 'PERDU', '2024-01-01')"
        )


def test_legacy_registry_is_migrated(tmp_path):
    conn = connect(tmp_path / "ancien.db")
    conn.execute(
        "CREATE TABLE run (id INTEGER PRIMARY KEY AUTOINCREMENT, command TEXT NOT NULL, seed INTEGER NOT NULL,"
        " config_json TEXT NOT NULL DEFAULT '{}', csv_path TEXT NOT NULL DEFAULT '', status TEXT NOT NULL DEFAULT 'RUNNING',"
        " exit_code INTEGER, started_at TEXT NOT NULL, finished_at TEXT)"
    )
    init_schema(conn)
    run_id = RunRepository(conn).start(command="moments", seed=0, config={}, output_dir="out")
    assert RunRepository(conn).get_by_id(run_id).output_dir == "out"
    conn.close()
