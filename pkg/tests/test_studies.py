from __future__ import annotations

import math

import numpy as np
import pytest

from ncrough.config import STUDY_NAMES
from ncrough.domain.errors import AcceptanceError, UsageError
from ncrough.domain.functional import FunctionSpec
from ncrough.domain.sde import ControlledProcess
from ncrough.experiments.interpolation import dyadic_partition
from ncrough.experiments.studies import (
    STUDIES,
    area_convergence_study,
    bg_study,
    bounds_study,
    default_gap_pairs,
    fine_path,
    ito_formula_check,
    ito_formula_study,
    ito_strato_gap_check,
    ito_strato_study,
    nonextension_demo,
    sample_tensors,
    solution_convergence_study,
)

X = FunctionSpec.identity()


def test_registry_matches_config():
    assert set(STUDIES) == set(STUDY_NAMES)


def test_fine_path_and_sample_tensors_are_seeded():
    a = fine_path(4, 4, seed=9)
    b = fine_path(4, 4, seed=9)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, fine_path(4, 4, seed=9, path_id=1).values)
    first = sample_tensors(a.space, 9, 2)
    again = sample_tensors(a.space, 9, 2)
    assert [u.fingerprint() for u in first] == [u.fingerprint() for u in again]


def test_ito_formula_for_square_is_quadratic_variation_defect():
    path = fine_path(6, 5, seed=4)
    report = ito_formula_check(FunctionSpec.monomial(2), path, dyadic_partition(32, 4))
    assert report.residual_strat == pytest.approx(report.qv_defect, rel=1e-6, abs=1e-12)
    assert report.residual_ito == pytest.approx(report.qv_defect, rel=1e-6, abs=1e-12)
    assert report.gap <= 1e-9


def test_ito_formula_study_rows():
    table = ito_formula_study(
        dimension=6,
        fine_exp=5,
        coarse_exp=2,
        seeds=[1, 2],
        functions=[("x", X), ("x^2", FunctionSpec.monomial(2))],
        qv_threshold=10.0,
    )
    assert table.columns == ("seed", "function", "residual_strat", "residual_ito", "qv_defect", "scale")
    assert len(table.rows) == 4
    assert table.passed
    linear = [r for r in table.rows if r["function"] == "x"]
    assert all(r["residual_strat"] <= 1e-10 * r["scale"] for r in linear)


def test_ito_strato_gap_is_small_on_fine_grid():
    y = ControlledProcess.from_path(fine_path(6, 5, seed=3))
    label, fs, gs = default_gap_pairs()[0]
    assert label == "x^2|1"
    residual = ito_strato_gap_check(fs, gs, y, dyadic_partition(32, 2))
    assert 0.0 <= residual < 0.1


def test_ito_strato_study_threshold():
    table = ito_strato_study(dimension=6, fine_exp=5, coarse_exp=1, seeds=[0], threshold=1.0)
    assert [r["pair"] for r in table.rows] == ["x^2|1", "poly"]
    assert table.passed
    strict = ito_strato_study(dimension=6, fine_exp=5, coarse_exp=1, seeds=[0], threshold=0.0)
    assert not strict.passed


def test_bg_study_rows():
    table = bg_study(dimension=8, fine_exp=5, coarse_exp=3, seeds=[0])
    kinds = [(r["check"], r["integrand"]) for r in table.rows]
    assert kinds == [("bg", "zero"), ("bg", "unit"), ("bg", "adapted"), ("biane-speicher", "adapted")]
    zero, unit = table.rows[0], table.rows[1]
    assert zero["lhs"] == 0.0 and zero["passed"]
    # V = 1 : ‖1⊗X_T‖ = ‖X_T‖, borne 2√T
    path = fine_path(8, 5, seed=0)
    assert unit["lhs"] == pytest.approx(np.max(np.abs(np.linalg.eigvalsh(path.values[-1]))), rel=1e-10)
    assert unit["rhs"] == pytest.approx(2.0)


def test_nonextension_ratio_grows():
    table = nonextension_demo(n_list=[16, 1, 4], dimension=32, seed=0)
    assert [r["n"] for r in table.rows] == [1, 4, 16]
    a = [r["a_n"] for r in table.rows]
    assert a[0] < a[1] < a[2]
    assert all(r["a_n"] >= 0.9 * r["n"] for r in table.rows)
    assert all(r["ratio"] >= 0.2 * math.sqrt(r["n"]) for r in table.rows)
    assert table.summary["growth_range"] == "4-16"
    assert table.summary["growth"] == pytest.approx(table.rows[2]["ratio"] / table.rows[1]["ratio"])
    assert table.summary["growth"] >= 1.6
    with pytest.raises(UsageError):
        nonextension_demo(n_list=[0], dimension=4, seed=0)


def test_nonextension_growth_falls_back_to_extreme_n():
    table = nonextension_demo(n_list=[1, 2], dimension=8, seed=0)
    assert table.summary["growth_range"] == "1-2"


def test_area_convergence_study_layout():
    table = area_convergence_study(
        dimension=4, fine_exp=6, coarse_exps=[3, 1, 2], seeds=[0], tensor_samples=1, geometric_dimension=4,
        final_ratio=None, noise=None, min_rate=-math.inf,
    )
    seeded = [r for r in table.rows if r["seed"] == 0]
    assert [r["mesh"] for r in seeded] == [0.5, 0.25, 0.125]
    assert all(r["distance"] > 0 and math.isfinite(r["distance"]) for r in seeded)
    assert table.rows[-1]["seed"] == "mean" and "rate" in table.rows[-1]
    assert "area_rate" in table.summary
    with pytest.raises(UsageError):
        area_convergence_study(dimension=4, fine_exp=3, coarse_exps=[4], seeds=[0])


def test_solution_convergence_study_layout():
    table = solution_convergence_study(
        dimension=4, fine_exp=6, coarse_exps=[1, 2, 3], solve_exp=4, seeds=[0], fs=[X], gs=[X],
        min_rate=-math.inf, noise=None,
    )
    seeded = [r for r in table.rows if r["seed"] == 0]
    assert len(seeded) == 3
    assert all(math.isfinite(r["distance"]) for r in seeded)
    with pytest.raises(UsageError):
        solution_convergence_study(dimension=4, fine_exp=6, coarse_exps=[2, 3], solve_exp=1, seeds=[0], fs=[X], gs=[X])


def test_bounds_study_checks():
    table = bounds_study(
        dimension=4, fine_exp=5, coarse_exp=2, seed=1, mesh_exps=(1, 3, 5), dimensions=(2, 4),
        lipschitz_dimension=4, lipschitz_samples=2,
    )
    checks = {r["check"] for r in table.rows}
    assert checks >= {
        "moment-bound", "free-sum", "conjugation-defect", "conjugation-defect-N",
        "conjugation-trace-N", "lipschitz", "sewing-exponent", "sewing-bound", "picard-seminorm", "picard-trend",
    }
    assert len([r for r in table.rows if r["check"] == "moment-bound"]) == 18
    assert all(r["passed"] for r in table.rows if r["check"] == "lipschitz")
    assert len([r for r in table.rows if r["check"] == "picard-seminorm"]) == 3


def test_trace_conjugation_defect_decreases_with_dimension():
    table = bounds_study(
        dimension=4, fine_exp=5, coarse_exp=2, seed=3, mesh_exps=(1, 3, 5), dimensions=(8, 64),
        lipschitz_dimension=4, lipschitz_samples=1,
    )
    by_n = [r for r in table.rows if r["check"] == "conjugation-trace-N"]
    assert [r["param"] for r in by_n] == [8, 64]
    assert by_n[1]["value"] < by_n[0]["value"]
    assert not any("en N" in message for message, _ in table.failures)


def test_trace_conjugation_defect_growth_in_dimension_fails_acceptance():
    table = bounds_study(
        dimension=4, fine_exp=5, coarse_exp=2, seed=3, mesh_exps=(1, 3, 5), dimensions=(64, 8),
        lipschitz_dimension=4, lipschitz_samples=1,
    )
    assert any("en N" in message for message, _ in table.failures)
    with pytest.raises(AcceptanceError):
        table.check()
