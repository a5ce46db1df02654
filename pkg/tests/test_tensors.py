from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ncrough.domain.errors import BudgetError, UsageError
from ncrough.domain.matrix_model import AlgebraElement, Space, operator_norm, random_hermitian
from ncrough.domain.tensors import (
    Config,
    TensorElement2,
    TensorElement3,
    append_factor,
    compress,
    difference_norm,
    double_sharp,
    flatten,
    partial_trace,
    partial_trace_mid,
    prepend_factor,
    proj_ub,
    psi_map,
    sharp_apply,
    spatial_norm,
    tensor_adjoint,
    tensor_square_sum_bound,
    tri_sharp,
)


def _element(space: Space, rng: np.random.Generator) -> AlgebraElement:
    n = space.dimension
    return AlgebraElement(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)), space)


def _tensor(space: Space, rng: np.random.Generator, terms: int, config: Config = Config.CONFIG2) -> TensorElement2:
    return TensorElement2.from_terms([(_element(space, rng), _element(space, rng)) for _ in range(terms)], config)


def _vec(x: AlgebraElement) -> np.ndarray:
    return x.entries.ravel()


@pytest.mark.parametrize("config", list(Config))
def test_flatten_is_multiplicative(space, rng, config):
    a = _tensor(space, rng, 2, config)
    b = _tensor(space, rng, 3, config)
    assert np.allclose(flatten(a @ b), flatten(a) @ flatten(b), atol=1e-10)


def test_flatten_matches_sharp_action(space, rng):
    u = _tensor(space, rng, 3)
    x = _element(space, rng)
    assert np.allclose(flatten(u) @ _vec(x), _vec(sharp_apply(u, x)), atol=1e-10)


def test_product_composes_sharp_actions(space, rng):
    u = _tensor(space, rng, 2)
    v = _tensor(space, rng, 2)
    x = _element(space, rng)
    lhs = sharp_apply(u @ v, x).entries
    rhs = sharp_apply(u, sharp_apply(v, x)).entries
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_unit_acts_as_identity(space, rng):
    x = _element(space, rng)
    for config in Config:
        one = TensorElement2.unit(space, config)
        assert np.allclose(sharp_apply(one, x).entries, x.entries)
        u = _tensor(space, rng, 2, config)
        assert np.allclose(flatten(one @ u), flatten(u))


def test_config1_adjoint_is_conjugate_transpose(space, rng):
    u = _tensor(space, rng, 3, Config.CONFIG1)
    assert np.allclose(flatten(tensor_adjoint(u)), flatten(u).conj().T)


def test_config2_adjoint_swaps_factors(space, rng):
    a, b = _element(space, rng), _element(space, rng)
    adj = TensorElement2.simple(a, b).adjoint()
    (u, v), = adj.terms
    assert np.array_equal(u.entries, b.adjoint().entries)
    assert np.array_equal(v.entries, a.adjoint().entries)
    # (U♯X)* = U*♯X*
    x = _element(space, rng)
    lhs = sharp_apply(TensorElement2.simple(a, b), x).adjoint().entries
    assert np.allclose(lhs, sharp_apply(adj, x.adjoint()).entries)


def test_mixed_configs_rejected(space, rng):
    with pytest.raises(UsageError):
        _tensor(space, rng, 1, Config.CONFIG1) + _tensor(space, rng, 1, Config.CONFIG2)


def test_partial_traces(space, rng):
    a = _element(space, rng)
    one = space.identity()
    assert np.allclose(partial_trace(TensorElement2.simple(a, one), "right").entries, a.entries)
    assert np.allclose(partial_trace(TensorElement2.simple(one, a), "left").entries, a.entries)
    assert partial_trace(TensorElement2.zero(space)).norm() == 0.0
    with pytest.raises(UsageError):
        partial_trace(TensorElement2.simple(a, one), "middle")


def test_rank_three_contractions(space, rng):
    u = _tensor(space, rng, 2)
    w = _element(space, rng)
    y1, y2 = _element(space, rng), _element(space, rng)
    t = append_factor(u, w)
    via_left = sharp_apply(tri_sharp(y1, t, "left"), y2).entries
    via_right = sharp_apply(tri_sharp(y2, t, "right"), y1).entries
    direct = double_sharp(t, y1, y2).entries
    assert np.allclose(via_left, direct, atol=1e-10)
    # (u⊗v⊗w)♯Y2 = u⊗(vY2w), puis ♯Y1 donne uY1vY2w
    assert np.allclose(via_right, direct, atol=1e-10)


def test_partial_trace_mid(space, rng):
    a, b = _element(space, rng), _element(space, rng)
    t = prepend_factor(a, TensorElement2.simple(space.identity(), b))
    assert np.allclose(partial_trace_mid(t).entries, (a @ b).entries)
    assert partial_trace_mid(TensorElement3.zero(space)).norm() == 0.0


def test_psi_map_acts_on_left_factors(space, rng):
    u = _tensor(space, rng, 2)
    y = _tensor(space, rng, 2)
    x = _element(space, rng)
    expected = sum(
        (sharp_apply(u, left) @ x @ right for left, right in y.terms),
        start=space.zero(),
    )
    assert np.allclose(sharp_apply(psi_map(u, y), x).entries, expected.entries, atol=1e-10)


def test_spatial_norm_dense_and_iterative_agree():
    space = Space(17)
    rng = np.random.default_rng(3)
    u = _tensor(space, rng, 3)
    dense = operator_norm(flatten(u))
    assert spatial_norm(u) == pytest.approx(dense, rel=1e-8)


def test_spatial_norm_of_simple_tensor(space, rng):
    a, b = _element(space, rng), _element(space, rng)
    expected = operator_norm(a.entries) * operator_norm(b.entries)
    assert spatial_norm(TensorElement2.simple(a, b)) == pytest.approx(expected, rel=1e-10)


def test_norm_budgets():
    big = TensorElement2.unit(Space(70))
    with pytest.raises(BudgetError):
        flatten(big)
    with pytest.raises(BudgetError):
        spatial_norm(big, max_dimension=64)


@given(terms=st.integers(min_value=1, max_value=5), seed=st.integers(min_value=0, max_value=2**16))
@settings(max_examples=25, deadline=None)
def test_projective_bound_dominates_spatial_norm(terms, seed):
    space = Space(4)
    u = _tensor(space, np.random.default_rng(seed), terms)
    assert spatial_norm(u) <= proj_ub(u) * (1 + 1e-10)


def test_compress_preserves_action_and_reduces_terms(space, rng):
    base = _tensor(space, rng, 2)
    # 8 termes, rang 2
    u = base + base * 2.0 + base * (-0.5) + base
    reduced = compress(u)
    assert reduced.num_terms < u.num_terms
    x = _element(space, rng)
    assert np.allclose(sharp_apply(reduced, x).entries, sharp_apply(u, x).entries, atol=1e-8)
    assert np.allclose(flatten(reduced), flatten(u), atol=1e-8)


def test_difference_norm_of_equal_tensors(space, rng):
    u = _tensor(space, rng, 3)
    assert difference_norm(u, u) == pytest.approx(0.0, abs=1e-12)
    assert compress(u - u).num_terms == 0


def test_fingerprint_tracks_content(space, rng):
    u = _tensor(space, rng, 2)
    assert u.fingerprint() == TensorElement2(u.left, u.right, u.config, space).fingerprint()
    assert u.fingerprint() != (u * 2.0).fingerprint()
    assert u.fingerprint() != u.with_config(Config.CONFIG1).fingerprint()


def test_tensor_square_sum_bound():
    assert tensor_square_sum_bound(4) == pytest.approx(8.0)
    assert tensor_square_sum_bound(4, q=0.5) == pytest.approx(16.0)


def test_hermitian_tensor_in_config2_is_self_adjoint_as_map(space, rng):
    # Σ Y⊗Y avec Y hermitien : U* = U en CONFIG2
    ys = [random_hermitian(space, rng) for _ in range(3)]
    u = TensorElement2.from_terms([(y, y) for y in ys])
    assert np.allclose(flatten(u.adjoint()), flatten(u))
