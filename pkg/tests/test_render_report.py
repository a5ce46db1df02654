from __future__ import annotations

from datetime import datetime

import pytest

from ncrough.domain.errors import UsageError
from ncrough.experiments.tables import StudyTable, write_manifest
from ncrough.pdf.render_report import render_report_pdf


def _table(rows: int) -> StudyTable:
    table = StudyTable("bg", ("seed", "check", "integrand", "lhs", "rhs", "passed"))
    for k in range(rows):
        table.add(seed=k, check="bg", integrand="adapted", lhs=0.1 * k, rhs=1.0 / 3.0, passed=True)
    return table


def test_single_page_report_with_manifest(tmp_path):
    csv = _table(3).write_csv(tmp_path / "bg.csv")
    write_manifest(
        tmp_path, command="study:bg", config={}, seed=42, started_at=datetime(2024, 6, 11), duration_s=1.0, outputs=[csv]
    )
    result = render_report_pdf(csv_path=csv, out_path=tmp_path / "bg.pdf")
    assert result.pages == 1
    assert result.pdf_path.read_bytes().startswith(b"%PDF")


def test_long_table_is_paginated(tmp_path):
    csv = _table(120).write_csv(tmp_path / "bg.csv")
    result = render_report_pdf(csv_path=csv, out_path=tmp_path / "rapport" / "bg.pdf")
    assert result.pages > 1
    assert result.pdf_path.is_file()


def test_missing_or_empty_csv(tmp_path):
    with pytest.raises(UsageError):
        render_report_pdf(csv_path=tmp_path / "absent.csv", out_path=tmp_path / "x.pdf")
    empty = tmp_path / "vide.csv"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(UsageError):
        render_report_pdf(csv_path=empty, out_path=tmp_path / "x.pdf")
