from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from ncrough.domain.errors import BudgetError, UsageError

logger = logging.getLogger(__name__)

SELF_ADJOINT_TOL = 1e-12
MAX_PATH_BYTES = 2 * 1024**3

# clés de sous-flux : 0 = incréments d'une grille quelconque, 1 = ponts dyadiques
_INCREMENT_STREAM = 0
_BRIDGE_STREAM = 1


# =========================
# Espace et éléments
# =========================
@dataclass(frozen=True)
class Space:
    """Algèbre M_N(C) munie de la trace normalisée φ = (1/N) Tr."""

    dimension: int

    def __post_init__(self) -> None:
        if int(self.dimension) < 1:
            raise UsageError(f"Dimension invalide : {self.dimension}")
        object.__setattr__(self, "dimension", int(self.dimension))

    def identity(self) -> AlgebraElement:
        return AlgebraElement._wrap(np.eye(self.dimension, dtype=np.complex128), self)

    def zero(self) -> AlgebraElement:
        return AlgebraElement._wrap(np.zeros((self.dimension, self.dimension), dtype=np.complex128), self)

    def element(self, entries: np.ndarray) -> AlgebraElement:
        return AlgebraElement(entries, self)


class AlgebraElement:
    """
    Matrice N×N complexe, immuable après construction.

    `@` est le produit de l'algèbre, `*` la multiplication par un scalaire.
    """

    __slots__ = ("_entries", "space")

    def __init__(self, entries: np.ndarray | Sequence, space: Space | None = None) -> None:
        arr = np.array(entries, dtype=np.complex128)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise UsageError(f"Matrice carrée attendue, reçu {arr.shape}")
        if space is None:
            space = Space(arr.shape[0])
        elif space.dimension != arr.shape[0]:
            raise UsageError(f"Dimension {arr.shape[0]} incompatible avec l'espace {space.dimension}")
        arr.setflags(write=False)
        self._entries = arr
        self.space = space

    @classmethod
    def _wrap(cls, arr: np.ndarray, space: Space) -> AlgebraElement:
        obj = cls.__new__(cls)
        arr = np.asarray(arr, dtype=np.complex128)
        if arr.flags.writeable:
            arr = arr.copy()
            arr.setflags(write=False)
        obj._entries = arr
        obj.space = space
        return obj

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def dimension(self) -> int:
        return self.space.dimension

    def _check(self, other: AlgebraElement) -> None:
        if other.space != self.space:
            raise UsageError("Éléments d'espaces différents.")

    def __add__(self, other: AlgebraElement) -> AlgebraElement:
        self._check(other)
        return AlgebraElement._wrap(self._entries + other._entries, self.space)

    def __sub__(self, other: AlgebraElement) -> AlgebraElement:
        self._check(other)
        return AlgebraElement._wrap(self._entries - other._entries, self.space)

    def __neg__(self) -> AlgebraElement:
        return AlgebraElement._wrap(-self._entries, self.space)

    def __mul__(self, scalar: complex) -> AlgebraElement:
        return AlgebraElement._wrap(self._entries * scalar, self.space)

    __rmul__ = __mul__

    def __matmul__(self, other: AlgebraElement) -> AlgebraElement:
        self._check(other)
        return AlgebraElement._wrap(self._entries @ other._entries, self.space)

    def __repr__(self) -> str:
        return f"AlgebraElement(N={self.dimension})"

    def adjoint(self) -> AlgebraElement:
        return AlgebraElement._wrap(self._entries.conj().T, self.space)

    def self_adjoint_defect(self) -> float:
        return float(np.max(np.abs(self._entries - self._entries.conj().T), initial=0.0))

    def is_self_adjoint(self, tol: float = SELF_ADJOINT_TOL) -> bool:
        return self.self_adjoint_defect() <= tol

    def hermitian(self, tol: float = SELF_ADJOINT_TOL) -> AlgebraElement:
        """Symétrise sous la tolérance, erreur au-dessus."""
        defect = self.self_adjoint_defect()
        if defect > tol:
            raise UsageError(f"Élément non auto-adjoint (écart {defect:.3g} > {tol:.1g})")
        if defect == 0.0:
            return self
        return AlgebraElement._wrap(0.5 * (self._entries + self._entries.conj().T), self.space)

    def trace(self) -> complex:
        return normalized_trace(self)

    def norm(self, p: float = math.inf) -> float:
        return lp_norm(self, p)


def normalized_trace(x: AlgebraElement) -> complex:
    return complex(np.trace(x.entries) / x.dimension)


def operator_norms(stack: np.ndarray) -> np.ndarray:
    """Normes d'opérateur d'une pile (..., N, N) de matrices."""
    stack = np.asarray(stack)
    if stack.size == 0:
        return np.zeros(stack.shape[:-2])
    if np.array_equal(stack, np.swapaxes(stack, -1, -2).conj()):
        return np.max(np.abs(np.linalg.eigvalsh(stack)), axis=-1)
    return np.linalg.norm(stack, ord=2, axis=(-2, -1))


def operator_norm(arr: np.ndarray) -> float:
    return float(operator_norms(np.asarray(arr)[None])[0])


def lp_norm(x: AlgebraElement, p: float | str = math.inf) -> float:
    """‖X‖_{L^p(φ)} via les valeurs singulières ; p = ∞ donne la norme d'opérateur."""
    p = float(p)
    if p < 1:
        raise UsageError(f"p doit être >= 1 (reçu {p})")
    if math.isinf(p):
        return operator_norm(x.entries)
    s = np.linalg.svd(x.entries, compute_uv=False)
    return float(np.mean(s**p) ** (1.0 / p))


# =========================
# Flux aléatoires
# =========================
def substream(seed: int, *keys: int) -> np.random.Generator:
    """Sous-flux à compteur (Philox) indexé par (graine, clés...)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


def sample_gue_increment(space: Space, dt: float, rng: np.random.Generator) -> AlgebraElement:
    """
    Incrément GUE : H hermitien, E|H_jk|² = dt/N, donc E φ(H²) = dt.
    """
    if dt < 0:
        raise UsageError(f"Pas de temps négatif : {dt}")
    n = space.dimension
    g = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2.0)
    h = (g + g.conj().T) / math.sqrt(2.0)
    return AlgebraElement._wrap(h * math.sqrt(dt / n), space)


def random_hermitian(space: Space, rng: np.random.Generator, scale: float = 1.0) -> AlgebraElement:
    """Hermitien GUE normalisé (‖·‖ ≈ 2·scale pour N grand)."""
    return sample_gue_increment(space, 1.0, rng) * scale


# =========================
# Chemins sur grille
# =========================
@dataclass(frozen=True, eq=False)
class GridPath:
    """
    Chemin échantillonné sur une grille strictement croissante t_0 < ... < t_M.

    values : tableau (M+1, N, N), en lecture seule.
    """

    grid: np.ndarray
    values: np.ndarray
    seed: int | None = None

    def __post_init__(self) -> None:
        grid = np.array(self.grid, dtype=np.float64)
        values = np.array(self.values, dtype=np.complex128)
        if grid.ndim != 1 or grid.size < 1:
            raise UsageError("Grille vide ou mal formée.")
        if np.any(np.diff(grid) <= 0):
            raise UsageError("La grille doit être strictement croissante.")
        if values.ndim != 3 or values.shape[0] != grid.size or values.shape[1] != values.shape[2]:
            raise UsageError(f"Valeurs de forme {values.shape} incompatibles avec {grid.size} temps")
        grid.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_elements(cls, grid: Sequence[float], elements: Sequence[AlgebraElement], seed: int | None = None) -> GridPath:
        if not elements:
            raise UsageError("Chemin sans valeur.")
        space = elements[0].space
        if any(e.space != space for e in elements):
            raise UsageError("Toutes les valeurs doivent partager le même espace.")
        return cls(np.asarray(grid), np.stack([e.entries for e in elements]), seed)

    @classmethod
    def from_function(cls, grid: Sequence[float], fn: Callable[[float], np.ndarray]) -> GridPath:
        grid = np.asarray(grid, dtype=np.float64)
        return cls(grid, np.stack([np.asarray(fn(float(t)), dtype=np.complex128) for t in grid]))

    @property
    def space(self) -> Space:
        return Space(self.values.shape[1])

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    @property
    def steps(self) -> int:
        return self.grid.size - 1

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    def value(self, k: int) -> AlgebraElement:
        return AlgebraElement._wrap(self.values[k], self.space)

    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)

    def index_of(self, t: float) -> int:
        """Indice de grille du temps t ; un temps hors grille est une erreur d'usage."""
        k = int(np.searchsorted(self.grid, t))
        tol = 1e-12 * max(1.0, abs(self.horizon))
        for cand in (k - 1, k):
            if 0 <= cand < self.grid.size and abs(self.grid[cand] - t) <= tol:
                return cand
        raise UsageError(f"Temps {t} hors de la grille.")

    def indices_of(self, times: Iterable[float]) -> np.ndarray:
        return np.array([self.index_of(t) for t in times], dtype=np.int64)

    def restrict(self, indices: Sequence[int]) -> GridPath:
        idx = np.asarray(indices, dtype=np.int64)
        return GridPath(self.grid[idx], self.values[idx], self.seed)

    def scaled(self, factor: float) -> GridPath:
        return GridPath(self.grid, self.values * factor, self.seed)

    def interpolate(self, indices: Sequence[int]) -> GridPath:
        """
        Interpolation affine de X le long des indices donnés, évaluée sur toute la grille.

        Les indices doivent être croissants et contenir 0 et M.
        """
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size < 2 or idx[0] != 0 or idx[-1] != self.steps or np.any(np.diff(idx) <= 0):
            raise UsageError("La partition doit être croissante et contenir les extrémités.")
        k = np.arange(self.grid.size)
        seg = np.clip(np.searchsorted(idx, k, side="right") - 1, 0, idx.size - 2)
        lo, hi = idx[seg], idx[seg + 1]
        lam = (self.grid[k] - self.grid[lo]) / (self.grid[hi] - self.grid[lo])
        values = (1.0 - lam)[:, None, None] * self.values[lo] + lam[:, None, None] * self.values[hi]
        # valeurs exactes aux points de la partition
        values[idx] = self.values[idx]
        return GridPath(self.grid, values, self.seed)


def dyadic_grid(horizon: float, steps: int) -> np.ndarray:
    return horizon * np.arange(steps + 1, dtype=np.float64) / steps


def _is_dyadic(grid: np.ndarray) -> bool:
    m = grid.size - 1
    if m < 1 or m & (m - 1):
        return False
    return bool(np.allclose(grid, dyadic_grid(float(grid[-1]), m), rtol=0.0, atol=1e-12 * grid[-1]))


def simulate_free_bm(
    space: Space,
    grid: Sequence[float],
    seed: int,
    *,
    path_id: int = 0,
    max_bytes: int = MAX_PATH_BYTES,
) -> GridPath:
    """
    Mouvement brownien libre (modèle GUE) sur la grille, X_0 = 0.

    Grilles dyadiques : construction par ponts indexés par (niveau, indice),
    si bien que raffiner la grille ne modifie pas les valeurs aux points
    grossiers. Autres grilles : un incrément GUE par pas, sous-flux (graine,
    chemin, pas).
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size < 1 or grid[0] != 0.0:
        raise UsageError("La grille doit commencer en 0.")
    if np.any(np.diff(grid) <= 0):
        raise UsageError("La grille doit être strictement croissante.")
    n = space.dimension
    if grid.size * n * n * 16 > max_bytes:
        raise BudgetError(f"Chemin trop volumineux : {grid.size} temps × N={n}")

    values = np.zeros((grid.size, n, n), dtype=np.complex128)
    m = grid.size - 1
    if m >= 1 and _is_dyadic(grid):
        horizon = float(grid[-1])
        values[m] = sample_gue_increment(space, horizon, substream(seed, path_id, _BRIDGE_STREAM, 0, 0)).entries
        levels = m.bit_length() - 1
        for level in range(1, levels + 1):
            step = m >> level
            span = 2 * step * horizon / m
            for odd in range(1, 1 << level, 2):
                idx = odd * step
                noise = sample_gue_increment(
                    space, span / 4.0, substream(seed, path_id, _BRIDGE_STREAM, level, odd)
                ).entries
                values[idx] = 0.5 * (values[idx - step] + values[idx + step]) + noise
    else:
        for k in range(m):
            dt = float(grid[k + 1] - grid[k])
            inc = sample_gue_increment(space, dt, substream(seed, path_id, _INCREMENT_STREAM, k)).entries
            values[k + 1] = values[k] + inc

    logger.debug("simulate_free_bm N=%s M=%s seed=%s path=%s", n, m, seed, path_id)
    return GridPath(grid, values, seed)


def trigonometric_path(grid: Sequence[float], a: AlgebraElement, b: AlgebraElement) -> GridPath:
    """Chemin lisse X_u = sin(u) A + cos(u) B."""
    return GridPath.from_function(grid, lambda u: math.sin(u) * a.entries + math.cos(u) * b.entries)


def linear_path(grid: Sequence[float], a: AlgebraElement) -> GridPath:
    """X_u = u A."""
    return GridPath.from_function(grid, lambda u: u * a.entries)


def holder_norm(path: GridPath, gamma: float) -> float:
    """max_{s<t} ‖X_t - X_s‖ / (t-s)^γ sur toutes les paires de la grille."""
    if path.grid.size < 2:
        raise UsageError("Il faut au moins deux points de grille.")
    if not 0 < gamma <= 1:
        raise UsageError(f"γ doit appartenir à ]0, 1] (reçu {gamma})")
    best = 0.0
    for s in range(path.steps):
        diffs = path.values[s + 1 :] - path.values[s]
        ratios = operator_norms(diffs) / (path.grid[s + 1 :] - path.grid[s]) ** gamma
        best = max(best, float(ratios.max()))
    return best


# =========================
# Défauts libres (proxys)
# =========================
def quadratic_variation_defect(path: GridPath, i: int = 0, j: int | None = None) -> float:
    """‖(t-s)·1 - Σ (δX_k)²‖ sur les pas fins de [t_i, t_j]."""
    j = path.steps if j is None else j
    d = path.increments()[i:j]
    n = path.dimension
    acc = (path.grid[j] - path.grid[i]) * np.eye(n) - np.einsum("kab,kbc->ac", d, d)
    return operator_norm(acc)


def conjugation_defect(increments: Sequence[AlgebraElement] | np.ndarray, z: AlgebraElement) -> float:
    """‖Σ Y_i Z Y_i - φ(Z) Σ Y_i²‖ pour des incréments disjoints Y_i."""
    ys = np.stack([y.entries for y in increments]) if not isinstance(increments, np.ndarray) else increments
    phi_z = normalized_trace(z)
    acc = np.einsum("kab,bc,kcd->ad", ys, z.entries, ys) - phi_z * np.einsum("kab,kbc->ac", ys, ys)
    return operator_norm(acc)


def trace_conjugation_defect(increments: Sequence[AlgebraElement] | np.ndarray, z: AlgebraElement) -> float:
    """
    |φ(Σ Y_i Z Y_i) - φ(Z) φ(Σ Y_i²)| = |φ(Σ Y_i² (Z - φ(Z)))|.

    Pour des incréments GUE indépendants de Z, d'ordre 1/N ; la norme
    d'opérateur du même défaut garde, elle, une limite non nulle en N.
    """
    ys = np.stack([y.entries for y in increments]) if not isinstance(increments, np.ndarray) else increments
    n = ys.shape[-1]
    centered = z.entries - normalized_trace(z) * np.eye(n)
    return float(abs(np.einsum("kab,kbc,ca->", ys, ys, centered)) / n)


def free_sum_bound(increments: Sequence[AlgebraElement] | np.ndarray) -> tuple[float, float]:
    """
    Borne de somme libre pour des variables centrées :
    ‖Σ Y_i‖ <= sup ‖Y_i‖ + (Σ ‖Y_i‖²_{L²})^{1/2}. Renvoie (gauche, droite).
    """
    ys = np.stack([y.entries for y in increments]) if not isinstance(increments, np.ndarray) else np.asarray(increments)
    n = ys.shape[-1]
    traces = np.trace(ys, axis1=1, axis2=2) / n
    centered = ys - traces[:, None, None] * np.eye(n)
    lhs = operator_norm(centered.sum(axis=0))
    l2_squared = np.sum(np.abs(centered) ** 2, axis=(1, 2)) / n
    rhs = float(operator_norms(centered).max() + math.sqrt(float(l2_squared.sum())))
    return lhs, rhs
