from __future__ import annotations

import numpy as np
import pytest

from ncrough.domain.matrix_model import Space, dyadic_grid, simulate_free_bm


@pytest.fixture(autouse=True)
def _isolated_data_dir(tmp_path, monkeypatch):
    # registre et sorties dans un dossier jetable
    monkeypatch.setenv("NCROUGH_DATA_DIR", str(tmp_path / "data"))
    monkeypatch.setenv("NCROUGH_THREADS", "1")


@pytest.fixture
def space() -> Space:
    return Space(6)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def small_path(space):
    """Brownien libre N=6 sur 32 pas dyadiques de [0, 1]."""
    return simulate_free_bm(space, dyadic_grid(1.0, 32), seed=7)
