from __future__ import annotations

from typing import Sequence

import numpy as np

from ncrough.domain.errors import UsageError
from ncrough.domain.matrix_model import AlgebraElement, GridPath
from ncrough.domain.rough import breakpoint_area
from ncrough.domain.tensors import Config, TensorElement2


def dyadic_partition(fine_steps: int, coarse_steps: int) -> np.ndarray:
    """Indices fins de la sous-partition dyadique à `coarse_steps` pas."""
    if coarse_steps < 1 or fine_steps % coarse_steps:
        raise UsageError(f"{coarse_steps} pas grossiers ne divisent pas {fine_steps} pas fins.")
    return np.arange(coarse_steps + 1, dtype=np.int64) * (fine_steps // coarse_steps)


def linear_interpolation(path: GridPath, partition: Sequence[int]) -> GridPath:
    """Xⁿ : interpolation affine de X le long de la partition, sur la grille fine."""
    return path.interpolate(partition)


def interp_area(
    interpolated: GridPath,
    partition: Sequence[int],
    u: TensorElement2,
    s: float,
    t: float,
) -> AlgebraElement:
    """
    Aire de Lebesgue de Xⁿ en forme close.

    Entre deux points de rupture consécutifs p < p', Xⁿ est affine et la
    contribution vaut U♯(Xⁿ_p - Xⁿ_s)·δ + ½ U♯δ·δ ; on somme sur les ruptures
    de la partition strictement comprises entre s et t.
    """
    if u.config is not Config.CONFIG2:
        raise UsageError("Les aires produit s'appliquent aux tenseurs CONFIG2.")
    i, j = interpolated.index_of(s), interpolated.index_of(t)
    if i > j:
        raise UsageError("s doit précéder t.")
    if i == j:
        return interpolated.space.zero()
    idx = np.asarray(partition, dtype=np.int64)
    inner = idx[(idx > i) & (idx < j)]
    points = np.concatenate([[i], inner, [j]])
    areas = breakpoint_area(interpolated.values[points], u.left, u.right)
    return AlgebraElement._wrap(areas.sum(axis=0), interpolated.space)
