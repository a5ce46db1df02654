from __future__ import annotations

import logging

import pytest

from ncrough.domain.errors import ConfigError
from ncrough.utils.logging import resolve_level, setup_logging
from ncrough.utils.parallel import parallel_map, thread_count
from ncrough.utils.paths import app_data_dir, registry_path, runs_dir


def test_resolve_level(monkeypatch):
    monkeypatch.delenv("NCROUGH_LOG_LEVEL", raising=False)
    assert resolve_level() == logging.WARNING
    assert resolve_level("debug") == logging.DEBUG
    monkeypatch.setenv("NCROUGH_LOG_LEVEL", "ERROR")
    assert resolve_level() == logging.ERROR
    with pytest.raises(ConfigError):
        resolve_level("BAVARD")


def test_setup_logging_replaces_handlers(tmp_path):
    setup_logging("INFO", log_file=tmp_path / "run.log")
    logger = setup_logging("INFO")
    assert len(logger.handlers) == 1
    logger = setup_logging("INFO", log_file=tmp_path / "run.log")
    logging.getLogger("ncrough.test").info("bonjour")
    for handler in logger.handlers:
        handler.flush()
    assert "bonjour" in (tmp_path / "run.log").read_text(encoding="utf-8")
    setup_logging("WARNING")


def test_thread_count(monkeypatch):
    monkeypatch.setenv("NCROUGH_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("NCROUGH_THREADS", "beaucoup")
    assert thread_count() >= 1
    monkeypatch.setenv("NCROUGH_THREADS", "0")
    assert thread_count() >= 1


def test_parallel_map_keeps_order():
    def work(k: int) -> int:
        return k * k

    assert parallel_map(work, range(20), threads=4) == [k * k for k in range(20)]
    assert parallel_map(work, [], threads=4) == []


def test_data_dir_override(tmp_path, monkeypatch):
    monkeypatch.setenv("NCROUGH_DATA_DIR", str(tmp_path / "ailleurs"))
    assert app_data_dir() == tmp_path / "ailleurs"
    assert runs_dir().is_dir()
    assert registry_path().parent == tmp_path / "ailleurs"
