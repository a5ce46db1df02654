from __future__ import annotations

import numpy as np
import pytest

from ncrough.domain.errors import UsageError
from ncrough.domain.matrix_model import random_hermitian
from ncrough.domain.rough import LevyArea
from ncrough.domain.tensors import Config, TensorElement2
from ncrough.experiments.interpolation import dyadic_partition, interp_area, linear_interpolation


def test_dyadic_partition():
    assert dyadic_partition(32, 4).tolist() == [0, 8, 16, 24, 32]
    with pytest.raises(UsageError):
        dyadic_partition(32, 3)


@pytest.mark.parametrize("s,t", [(0.0, 1.0), (0.125, 0.8125), (0.3125, 0.375)])
def test_closed_form_matches_midpoint_area(small_path, space, rng, s, t):
    partition = dyadic_partition(32, 4)
    interpolated = linear_interpolation(small_path, partition)
    a, b = random_hermitian(space, rng), random_hermitian(space, rng)
    u = TensorElement2.from_terms([(a, b), (space.identity(), a)])
    closed = interp_area(interpolated, partition, u, s, t)
    summed = LevyArea.interpolated(small_path, partition).evaluate(u, s, t)
    assert np.allclose(closed.entries, summed.entries, atol=1e-12)


def test_interpolated_area_of_single_segment_is_symmetric(small_path, space):
    # un seul segment affine : 𝐗[1⊗1] = ½ δX²
    partition = [0, 32]
    interpolated = linear_interpolation(small_path, partition)
    value = interp_area(interpolated, partition, TensorElement2.unit(space), 0.0, 1.0)
    x_t = small_path.values[32]
    assert np.allclose(value.entries, 0.5 * x_t @ x_t, atol=1e-12)


def test_interp_area_validation(small_path, space):
    interpolated = linear_interpolation(small_path, [0, 16, 32])
    with pytest.raises(UsageError):
        interp_area(interpolated, [0, 16, 32], TensorElement2.unit(space, Config.CONFIG1), 0.0, 1.0)
    with pytest.raises(UsageError):
        interp_area(interpolated, [0, 16, 32], TensorElement2.unit(space), 0.5, 0.25)
    assert interp_area(interpolated, [0, 16, 32], TensorElement2.unit(space), 0.5, 0.5).norm() == 0.0
