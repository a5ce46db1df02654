from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, List

from reportlab.lib.pagesizes import A4, landscape
from reportlab.lib.units import mm
from reportlab.pdfgen import canvas

from ncrough.domain.errors import UsageError
from ncrough.experiments.tables import read_csv, read_manifest


@dataclass(frozen=True)
class PdfResult:
    pdf_path: Path
    pages: int


def _t(v: Any) -> str:
    """Force une valeur en texte (None -> vide)."""
    if v is None:
        return ""
    return str(v)


def _short(cell: str) -> str:
    """Les flottants du CSV (17 chiffres) sont abrégés à 6 chiffres pour l'affichage."""
    try:
        value = float(cell)
    except ValueError:
        return cell
    if cell.strip().lstrip("-").isdigit():
        return cell
    return format(value, ".6g")


def _wrap_n_chars(text: str, n: int) -> List[str]:
    text = _t(text).strip()
    if not text:
        return [""]
    if len(text) <= n:
        return [text]
    return [text[i : i + n] for i in range(0, len(text), n)]


def render_report_pdf(*, csv_path: Path, out_path: Path, manifest_path: Path | None = None) -> PdfResult:
    """
    Rapport PDF d'une table d'étude : en-tête, encadré du manifeste (si présent
    à côté du CSV), puis tableau paginé. Pas de figure.
    """
    csv_path = Path(csv_path)
    if not csv_path.is_file():
        raise UsageError(f"CSV introuvable : {csv_path}")
    header, rows = read_csv(csv_path)
    if not header:
        raise UsageError(f"CSV vide : {csv_path}")

    manifest_path = Path(manifest_path) if manifest_path else csv_path.parent / "manifest.json"
    manifest = read_manifest(manifest_path) if manifest_path.is_file() else {}

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)

    pagesize = landscape(A4) if len(header) > 6 else A4
    c = canvas.Canvas(str(out_path), pagesize=pagesize)
    page_w, page_h = pagesize

    # Marges
    left = 15 * mm
    right = page_w - 15 * mm
    top = page_h - 15 * mm
    bottom = 15 * mm
    c.setLineWidth(1.0)

    pages = 1

    # =========================
    # EN-TÊTE
    # =========================
    def draw_title(y_top: float) -> float:
        c.setFont("Helvetica-Bold", 16)
        title = "RAPPORT D'ÉTUDE"
        c.drawString((page_w - c.stringWidth(title, "Helvetica-Bold", 16)) / 2, y_top - 4 * mm, title)
        c.setFont("Helvetica", 9)
        c.drawRightString(right, y_top - 4 * mm, csv_path.name)
        c.setLineWidth(1.5)
        c.line(left, y_top - 8 * mm, right, y_top - 8 * mm)
        c.setLineWidth(1.0)
        return y_top - 14 * mm

    y = draw_title(top)

    # =========================
    # MANIFESTE (encadré)
    # =========================
    if manifest:
        items = [
            ("Commande", manifest.get("command")),
            ("Graine", manifest.get("seed")),
            ("Version", manifest.get("git_describe")),
            ("Début", manifest.get("started_at")),
            ("Durée (s)", manifest.get("duration_s")),
            ("Statut", manifest.get("status")),
        ]
        box_h = (len(items) * 5 + 4) * mm
        c.rect(left, y - box_h, 90 * mm, box_h, stroke=1, fill=0)
        ty = y - 6 * mm
        for label, value in items:
            c.setFont("Helvetica-Bold", 9)
            c.drawString(left + 3 * mm, ty, f"{label} :")
            c.setFont("Helvetica", 9)
            c.drawString(left + 28 * mm, ty, _t(value)[:50])
            ty -= 5 * mm
        y -= box_h + 8 * mm

    # =========================
    # TABLEAU paginé
    # =========================
    table_w = right - left
    col_w = table_w / len(header)
    chars = max(int(col_w / (1.9 * mm)), 4)
    row_h = 6 * mm

    def draw_header(y_top: float) -> float:
        c.rect(left, y_top - row_h, table_w, row_h, stroke=1, fill=0)
        c.setFont("Helvetica-Bold", 8)
        for k, name in enumerate(header):
            x = left + k * col_w
            if k:
                c.line(x, y_top - row_h, x, y_top)
            c.drawString(x + 1.5 * mm, y_top - 4.2 * mm, _wrap_n_chars(name, chars)[0])
        return y_top - row_h

    def draw_row(y_top: float, cells: List[str]) -> float:
        wrapped = [_wrap_n_chars(_short(cell), chars) for cell in cells]
        nb = max((len(w) for w in wrapped), default=1)
        h = max(row_h, nb * 3.8 * mm + 2 * mm)
        c.rect(left, y_top - h, table_w, h, stroke=1, fill=0)
        c.setFont("Helvetica", 8)
        for k in range(len(header)):
            x = left + k * col_w
            if k:
                c.line(x, y_top - h, x, y_top)
            ty = y_top - 4.2 * mm
            for part in wrapped[k] if k < len(wrapped) else [""]:
                c.drawString(x + 1.5 * mm, ty, part)
                ty -= 3.8 * mm
        return y_top - h

    y = draw_header(y)
    for row in rows:
        if y - row_h < bottom + 8 * mm:
            c.setFont("Helvetica", 8)
            c.drawRightString(right, bottom, f"Page {pages}")
            c.showPage()
            c.setLineWidth(1.0)
            pages += 1
            y = draw_header(draw_title(top))
        y = draw_row(y, row)

    c.setFont("Helvetica", 8)
    c.drawString(left, bottom, f"{len(rows)} ligne(s)")
    c.drawRightString(right, bottom, f"Page {pages}")
    c.save()
    return PdfResult(pdf_path=out_path, pages=pages)
