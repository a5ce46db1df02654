from __future__ import annotations

import json
import sqlite3
from dataclasses import dataclass
from datetime import datetime
from typing import Any, List, Optional

STATUS_RUNNING = "RUNNING"
STATUS_OK = "OK"
STATUS_FAILED = "FAILED"


@dataclass(frozen=True)
class RunItem:
    id: int
    command: str
    seed: int
    config: dict[str, Any]
    output_dir: str
    csv_path: str
    status: str
    exit_code: Optional[int]
    message: str
    started_at: str
    finished_at: str


def _now() -> str:
    return datetime.now().isoformat(timespec="seconds")


class RunRepository:
    def __init__(self, conn: sqlite3.Connection) -> None:
        self.conn = conn

    @staticmethod
    def _item(r: sqlite3.Row) -> RunItem:
        return RunItem(
            id=r["id"],
            command=r["command"],
            seed=r["seed"],
            config=json.loads(r["config_json"] or "{}"),
            output_dir=r["output_dir"] or "",
            csv_path=r["csv_path"] or "",
            status=r["status"],
            exit_code=r["exit_code"],
            message=r["message"] or "",
            started_at=r["started_at"],
            finished_at=r["finished_at"] or "",
        )

    def start(self, *, command: str, seed: int, config: dict[str, Any], output_dir: str) -> int:
        cur = self.conn.execute(
            """
            INSERT INTO run (command, seed, config_json, output_dir, status, started_at)
            VALUES (?, ?, ?, ?, ?, ?)
            """,
            (command, seed, json.dumps(config, sort_keys=True), output_dir, STATUS_RUNNING, _now()),
        )
        self.conn.commit()
        return int(cur.lastrowid)

    def finish(self, run_id: int, *, exit_code: int, csv_path: str = "", message: str = "") -> None:
        status = STATUS_OK if exit_code == 0 else STATUS_FAILED
        self.conn.execute(
            """
            UPDATE run
            SET status = ?, exit_code = ?, csv_path = ?, message = ?, finished_at = ?
            WHERE id = ?
            """,
            (status, exit_code, csv_path, message, _now(), run_id),
        )
        self.conn.commit()

    def get_by_id(self, run_id: int) -> Optional[RunItem]:
        r = self.conn.execute("SELECT * FROM run WHERE id = ?", (run_id,)).fetchone()
        return self._item(r) if r else None

    def list_recent(self, limit: int = 20, command: str | None = None) -> List[RunItem]:
        if command:
            cur = self.conn.execute(
                "SELECT * FROM run WHERE command = ? ORDER BY started_at DESC, id DESC LIMIT ?",
                (command, limit),
            )
        else:
            cur = self.conn.execute("SELECT * FROM run ORDER BY started_at DESC, id DESC LIMIT ?", (limit,))
        return [self._item(r) for r in cur.fetchall()]

    def delete(self, run_id: int) -> None:
        self.conn.execute("DELETE FROM run WHERE id = ?", (run_id,))
        self.conn.commit()
