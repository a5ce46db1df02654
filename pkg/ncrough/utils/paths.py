from __future__ import annotations

import os
from pathlib import Path

DATA_DIR_ENV = "NCROUGH_DATA_DIR"


def project_root() -> Path:
    """Racine du dépôt (ce fichier est <repo>/ncrough/utils/paths.py)."""
    return Path(__file__).resolve().parents[2]


def app_data_dir() -> Path:
    """
    Dossier data, créé au besoin :
    - NCROUGH_DATA_DIR si défini
    - sinon <repo>/data
    """
    override = os.environ.get(DATA_DIR_ENV, "").strip()
    data = Path(override) if override else project_root() / "data"
    data.mkdir(parents=True, exist_ok=True)
    return data


def runs_dir() -> Path:
    runs = app_data_dir() / "runs"
    runs.mkdir(parents=True, exist_ok=True)
    return runs


def registry_path() -> Path:
    return app_data_dir() / "ncrough.db"
