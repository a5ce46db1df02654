from __future__ import annotations

import math

import numpy as np
import pytest

from ncrough.domain.errors import BudgetError, UsageError
from ncrough.domain.matrix_model import (
    AlgebraElement,
    GridPath,
    Space,
    conjugation_defect,
    dyadic_grid,
    holder_norm,
    linear_path,
    lp_norm,
    quadratic_variation_defect,
    random_hermitian,
    sample_gue_increment,
    simulate_free_bm,
    substream,
    trace_conjugation_defect,
)


def test_identity_and_trace(space):
    one = space.identity()
    assert one.trace() == pytest.approx(1.0)
    assert one.norm() == pytest.approx(1.0)
    assert space.zero().norm(2) == 0.0


def test_elements_are_immutable(space):
    x = space.identity()
    with pytest.raises(ValueError):
        x.entries[0, 0] = 2.0


def test_dimension_mismatch(space):
    with pytest.raises(UsageError):
        space.identity() + Space(3).identity()
    with pytest.raises(UsageError):
        AlgebraElement(np.zeros((2, 3)))


def test_hermitian_projection(space, rng):
    h = random_hermitian(space, rng)
    assert h.is_self_adjoint()
    noisy = AlgebraElement(h.entries + 1e-14j * np.eye(space.dimension), space)
    assert noisy.hermitian().self_adjoint_defect() == 0.0
    with pytest.raises(UsageError):
        (h + AlgebraElement(1j * np.eye(space.dimension), space)).hermitian()


def test_lp_norms_are_ordered(space, rng):
    x = random_hermitian(space, rng)
    assert lp_norm(x, 1) <= lp_norm(x, 2) + 1e-12 <= lp_norm(x, math.inf) + 2e-12
    with pytest.raises(UsageError):
        lp_norm(x, 0.5)


def test_gue_increment_normalization():
    # E φ(H²) = dt, moyenne sur quelques tirages
    space = Space(8)
    values = [
        sample_gue_increment(space, 0.5, substream(3, k)).entries for k in range(200)
    ]
    second = np.mean([np.trace(h @ h).real / 8 for h in values])
    assert second == pytest.approx(0.5, rel=0.1)
    assert all(np.allclose(h, h.conj().T) for h in values)


def test_substreams_are_reproducible():
    a = substream(5, 1, 2).standard_normal(4)
    b = substream(5, 1, 2).standard_normal(4)
    c = substream(5, 2, 1).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_simulation_is_deterministic_and_self_adjoint(space):
    grid = dyadic_grid(1.0, 16)
    a = simulate_free_bm(space, grid, seed=3)
    b = simulate_free_bm(space, grid, seed=3)
    assert np.array_equal(a.values, b.values)
    assert np.all(a.values[0] == 0)
    assert max(a.value(k).self_adjoint_defect() for k in range(a.grid.size)) <= 1e-12


def test_dyadic_refinement_keeps_coarse_values(space):
    coarse = simulate_free_bm(space, dyadic_grid(1.0, 8), seed=11)
    fine = simulate_free_bm(space, dyadic_grid(1.0, 64), seed=11)
    assert np.allclose(fine.values[::8], coarse.values, atol=1e-14)


def test_non_dyadic_grid(space):
    grid = np.array([0.0, 0.1, 0.35, 0.6, 1.0])
    path = simulate_free_bm(space, grid, seed=1)
    assert path.steps == 4
    with pytest.raises(UsageError):
        simulate_free_bm(space, [0.1, 0.5], seed=1)


def test_simulation_budget(space):
    with pytest.raises(BudgetError):
        simulate_free_bm(space, dyadic_grid(1.0, 64), seed=0, max_bytes=1024)


def test_grid_path_validation(space):
    with pytest.raises(UsageError):
        GridPath(np.array([0.0, 0.0]), np.zeros((2, 2, 2)))
    with pytest.raises(UsageError):
        GridPath(np.array([0.0, 1.0]), np.zeros((3, 2, 2)))


def test_index_of_and_restrict(small_path):
    k = small_path.index_of(0.25)
    assert k == 8
    with pytest.raises(UsageError):
        small_path.index_of(0.3)
    sub = small_path.restrict([0, 8, 32])
    assert sub.steps == 2
    assert np.array_equal(sub.values[1], small_path.values[8])


def test_interpolation_is_exact_at_partition(small_path):
    idx = [0, 8, 16, 32]
    interp = small_path.interpolate(idx)
    assert np.array_equal(interp.values[idx], small_path.values[idx])
    mid = 0.5 * (small_path.values[16] + small_path.values[32])
    assert np.allclose(interp.values[24], mid)
    with pytest.raises(UsageError):
        small_path.interpolate([0, 16])


def test_holder_norm_of_linear_path(space):
    a = space.identity() * 2.0
    path = linear_path(dyadic_grid(1.0, 8), a)
    assert holder_norm(path, 1.0) == pytest.approx(2.0)
    # (t-s)^{1/2} <= 1 sur [0, 1], le rapport maximal est atteint sur [0, 1]
    assert holder_norm(path, 0.5) == pytest.approx(2.0)


def test_quadratic_variation_shrinks_with_mesh():
    path = simulate_free_bm(Space(8), dyadic_grid(1.0, 256), seed=2)
    coarse = quadratic_variation_defect(path.restrict(list(range(0, 257, 64))))
    fine = quadratic_variation_defect(path)
    assert fine < 0.5 * coarse


def test_conjugation_defect_vanishes_for_scalar_z(small_path):
    z = small_path.space.identity() * 3.0
    assert conjugation_defect(small_path.increments(), z) == pytest.approx(0.0, abs=1e-12)


def test_trace_conjugation_defect_is_trace_of_defect(small_path, rng):
    z = random_hermitian(small_path.space, rng)
    ys = small_path.increments()
    phi_z = np.trace(z.entries) / 6
    defect = np.einsum("kab,bc,kcd->ad", ys, z.entries, ys) - phi_z * np.einsum("kab,kbc->ac", ys, ys)
    assert trace_conjugation_defect(ys, z) == pytest.approx(abs(np.trace(defect)) / 6, abs=1e-12)
    assert trace_conjugation_defect(ys, small_path.space.identity() * 2.0) == pytest.approx(0.0, abs=1e-12)
