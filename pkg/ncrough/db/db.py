from __future__ import annotations

import sqlite3
from pathlib import Path

SCHEMA_PATH = Path(__file__).with_name("schema.sql")

_PRAGMAS = (
    "PRAGMA journal_mode = WAL;",
    "PRAGMA synchronous = NORMAL;",
    # plusieurs exécutions parallèles peuvent écrire dans le registre
    "PRAGMA busy_timeout = 3000;",
)

# Colonnes ajoutées après la première version du registre : (colonne, définition)
_ADDED_COLUMNS = (
    ("output_dir", "TEXT NOT NULL DEFAULT ''"),
    ("message", "TEXT NOT NULL DEFAULT ''"),
)


def connect(db_path: Path) -> sqlite3.Connection:
    """Ouvre le registre (dossier parent créé), lignes accessibles par nom de colonne."""
    db_path = Path(db_path)
    db_path.parent.mkdir(parents=True, exist_ok=True)
    conn = sqlite3.connect(str(db_path))
    conn.row_factory = sqlite3.Row
    for pragma in _PRAGMAS:
        conn.execute(pragma)
    return conn


def init_schema(conn: sqlite3.Connection) -> None:
    conn.executescript(SCHEMA_PATH.read_text(encoding="utf-8"))
    _migrate(conn)
    conn.commit()


def _columns(conn: sqlite3.Connection, table: str) -> set[str]:
    return {r["name"] for r in conn.execute(f"PRAGMA table_info({table})").fetchall()}


def _migrate(conn: sqlite3.Connection) -> None:
    existing = _columns(conn, "run")
    for column, definition in _ADDED_COLUMNS:
        if column not in existing:
            conn.execute(f"ALTER TABLE run ADD COLUMN {column} {definition}")
