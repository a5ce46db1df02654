from __future__ import annotations

import json

import numpy as np

from ncrough.db.db import connect, init_schema
from ncrough.db.repos.run_repo import RunRepository
from ncrough.domain.matrix_model import Space
from ncrough.domain.path_io import load_path, save_element
from ncrough.experiments.tables import read_csv
from ncrough.main import main
from ncrough.utils.paths import registry_path

SMALL = ["--dimension", "4", "--fine-exp", "4", "--coarse-exp", "2"]


def test_moments_prints_catalan_number(tmp_path, capsys):
    code = main(["moments", "--q", "0", "--order", "8", "--density", "false", "--output-dir", str(tmp_path)])
    assert code == 0
    assert "appariements = 14" in capsys.readouterr().out
    assert (tmp_path / "moments.csv").is_file()
    manifest = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["status"] == "ok"
    assert manifest["outputs"] == ["moments.csv"]


def test_invalid_parameter_exits_with_usage_code(tmp_path, capsys):
    assert main(["moments", "--q", "1.5", "--output-dir", str(tmp_path)]) == 2
    assert "Erreur" in capsys.readouterr().err
    assert main(["moments", "--bogus", "1", "--output-dir", str(tmp_path)]) == 2


def test_solve_is_reproducible(tmp_path):
    args = ["solve", "--seed", "3", *SMALL]
    assert main([*args, "--output-dir", str(tmp_path / "a")]) == 0
    assert main([*args, "--output-dir", str(tmp_path / "b")]) == 0
    first = (tmp_path / "a" / "solve.csv").read_bytes()
    assert first == (tmp_path / "b" / "solve.csv").read_bytes()
    assert (tmp_path / "a" / "solution.ncrp").read_bytes() == (tmp_path / "b" / "solution.ncrp").read_bytes()


def test_simulate_then_integrate_from_file(tmp_path):
    assert main(["simulate", "--dimension", "4", "--fine-exp", "4", "--output-dir", str(tmp_path / "sim")]) == 0
    binary = tmp_path / "sim" / "path.ncrp"
    assert binary.is_file()
    code = main(
        ["integrate", "--path-file", str(binary), "--coarse-exp", "2", "--output-dir", str(tmp_path / "int")]
    )
    assert code == 0
    assert (tmp_path / "int" / "integrate.csv").is_file()


def test_study_is_registered_and_reported(tmp_path, capsys):
    out = tmp_path / "bg"
    code = main(["study", "bg", *SMALL, "--n-seeds", "2", "--slack", "100", "--output-dir", str(out)])
    assert code == 0
    assert (out / "config.json").is_file()
    assert (out / "run.log").is_file()

    assert main(["runs", "--filter", "study:bg"]) == 0
    assert "study:bg" in capsys.readouterr().out

    assert main(["report", str(out / "bg.csv")]) == 0
    assert (out / "bg.pdf").is_file()


def test_failed_study_exits_with_acceptance_code(tmp_path, capsys):
    args = ["study", "ito-strato", "--dimension", "8", "--fine-exp", "6", "--coarse-exp", "2", "--threshold", "1e-300"]
    assert main([*args, "--output-dir", str(tmp_path)]) == 3
    assert "ÉCHEC" in capsys.readouterr().err
    manifest = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["status"] == "failed"

    conn = connect(registry_path())
    init_schema(conn)
    try:
        item = RunRepository(conn).list_recent(1)[0]
    finally:
        conn.close()
    assert item.command == "study:ito-strato"
    assert item.exit_code == 3
    assert item.status == "FAILED"


def test_runs_show_and_delete(tmp_path, capsys):
    assert main(["moments", "--q", "0", "--order", "4", "--output-dir", str(tmp_path)]) == 0
    conn = connect(registry_path())
    init_schema(conn)
    try:
        run_id = RunRepository(conn).list_recent(1)[0].id
    finally:
        conn.close()
    capsys.readouterr()

    assert main(["runs", "--show", str(run_id)]) == 0
    shown = json.loads(capsys.readouterr().out)
    assert shown["id"] == run_id
    assert shown["command"] == "moments"
    assert shown["config"]["params"]["q"] == 0.0

    assert main(["runs", "--delete", str(run_id)]) == 0
    assert "supprimée" in capsys.readouterr().out
    assert main(["runs", "--show", str(run_id)]) == 2
    assert "introuvable" in capsys.readouterr().err


def test_report_of_missing_csv(tmp_path):
    assert main(["report", str(tmp_path / "absent.csv")]) == 2


def _solve_table(out) -> np.ndarray:
    _header, rows = read_csv(out / "solve.csv")
    return np.array([[float(cell) for cell in row] for row in rows])


def test_solve_from_initial_matrix_file(tmp_path):
    a = Space(4).identity() * 0.2
    matrix = save_element(a, tmp_path / "a.ncrp")
    out = tmp_path / "run"
    assert main(["solve", "--seed", "3", *SMALL, "--initial-file", str(matrix), "--output-dir", str(out)]) == 0
    solution = load_path(out / "solution.ncrp")
    assert np.allclose(solution.values[0], a.entries, atol=1e-15)

    wrong = save_element(Space(3).identity(), tmp_path / "b.ncrp")
    assert main(["solve", *SMALL, "--initial-file", str(wrong), "--output-dir", str(tmp_path / "bad")]) == 2


def test_pairing_modes_derive_g_from_f(tmp_path):
    x = {"kind": "poly", "coeffs": [0.0, 1.0]}
    one = {"kind": "poly", "coeffs": [1.0]}
    base = ["solve", "--seed", "5", *SMALL, "--f", json.dumps([x, one])]
    assert main([*base, "--g", json.dumps([one, x]), "--output-dir", str(tmp_path / "explicit")]) == 0
    assert main([*base, "--pairing", "reverse-star", "--output-dir", str(tmp_path / "reverse")]) == 0
    assert main([*base, "--pairing", "same-star", "--output-dir", str(tmp_path / "same")]) == 0

    explicit = _solve_table(tmp_path / "explicit")
    assert np.allclose(_solve_table(tmp_path / "reverse"), explicit, atol=1e-12)
    config = json.loads((tmp_path / "same" / "config.json").read_text(encoding="utf-8"))
    assert config["params"]["pairing"] == "same-star"
    assert main([*base, "--pairing", "mirror", "--output-dir", str(tmp_path / "bad")]) == 2
