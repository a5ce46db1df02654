from __future__ import annotations

import csv
import json
import logging
import math
import subprocess
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable, Sequence

from ncrough.domain.errors import AcceptanceError, UsageError
from ncrough.domain.rough import loglog_fit
from ncrough.utils.paths import project_root

logger = logging.getLogger(__name__)

MANIFEST_SCHEMA_VERSION = 1


def format_cell(value: Any) -> str:
    """Flottants en 17 chiffres significatifs, point décimal, sans locale."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".17g")
    if isinstance(value, complex):
        return f"{format(value.real, '.17g')}{format(value.imag, '+.17g')}j"
    return str(value)


@dataclass
class StudyTable:
    """
    Table de résultats d'une étude : colonnes fixes, lignes dict.

    Les échecs d'assertion sont accumulés dans `failures` ; `check()` lève
    AcceptanceError sur le premier, une fois la table écrite.
    """

    name: str
    columns: tuple[str, ...]
    rows: list[dict[str, Any]] = field(default_factory=list)
    failures: list[tuple[str, dict[str, Any]]] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)

    def add(self, **row: Any) -> dict[str, Any]:
        unknown = set(row) - set(self.columns)
        if unknown:
            raise UsageError(f"Colonnes inconnues : {sorted(unknown)}")
        self.rows.append(row)
        return row

    def extend(self, rows: Iterable[dict[str, Any]]) -> None:
        for row in rows:
            self.add(**row)

    def expect(self, condition: bool, message: str, row: dict[str, Any]) -> bool:
        if not condition:
            logger.warning("%s : %s", self.name, message)
            self.failures.append((message, row))
        return bool(condition)

    @property
    def passed(self) -> bool:
        return not self.failures

    def check(self) -> None:
        if self.failures:
            message, row = self.failures[0]
            raise AcceptanceError(f"{self.name} : {message}", row=row)

    def column(self, name: str) -> list[Any]:
        return [row.get(name) for row in self.rows]

    def write_csv(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\r\n")
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow([format_cell(row.get(c, "")) for c in self.columns])
        return path


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, [])
        return header, [row for row in reader]


def rate_fit(meshes: Sequence[float], distances: Sequence[float]) -> tuple[float, float]:
    """Taux de convergence (pente log-log distance/pas) et R² ; nan si une distance est nulle."""
    if any(d <= 0 for d in distances):
        return math.nan, math.nan
    return loglog_fit(meshes, distances)


def git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=project_root(),
            capture_output=True,
            text=True,
            timeout=5,
            check=False,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def write_manifest(
    out_dir: Path,
    *,
    command: str,
    config: dict[str, Any],
    seed: int | None,
    started_at: datetime,
    duration_s: float,
    outputs: Sequence[Path] = (),
    status: str = "ok",
) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "command": command,
        "config": config,
        "seed": seed,
        "git_describe": git_describe(),
        "started_at": started_at.isoformat(timespec="seconds"),
        "duration_s": round(duration_s, 3),
        "outputs": [Path(p).name for p in outputs],
        "status": status,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=False), encoding="utf-8")
    return path


def read_manifest(path: Path) -> dict[str, Any]:
    return json.loads(Path(path).read_text(encoding="utf-8"))
