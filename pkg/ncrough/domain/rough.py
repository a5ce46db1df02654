from __future__ import annotations

import logging
import math
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy import special

from ncrough.domain.errors import UsageError
from ncrough.domain.functional import QUADRATURE_NODES, FunctionSpec, second_tensor_derivative, tensor_derivative
from ncrough.domain.matrix_model import AlgebraElement, GridPath, Space, operator_norm
from ncrough.domain.tensors import (
    Config,
    TensorElement2,
    TensorElement3,
    compress,
    partial_trace,
    proj_ub,
    sharp_apply,
    tri_sharp,
)

logger = logging.getLogger(__name__)

REFINEMENT_TOL = 1e-9
SEWING_SLACK = 1.10
DEFAULT_SPLITS = (0.25, 0.5, 0.75, 1.0, 1.25)
AREA_CACHE_SIZE = 4096
# blocs de pas pour les contractions Σ_m B_m b D_m (mémoire bornée)
_CHUNK = 256


# =========================
# Processus à deux paramètres
# =========================
class TwoParamGrid:
    """
    g_{st} sur les couples (a, b), a < b, d'une grille de temps.

    Les entrées sont soit fournies, soit calculées à la demande par `entry`
    puis conservées. La diagonale est nulle.
    """

    def __init__(
        self,
        grid: Sequence[float],
        space: Space,
        entries: dict[tuple[int, int], AlgebraElement] | None = None,
        entry: Callable[[int, int], AlgebraElement] | None = None,
    ) -> None:
        self.grid = np.asarray(grid, dtype=np.float64)
        self.space = space
        self._entries: dict[tuple[int, int], AlgebraElement] = dict(entries or {})
        self._entry = entry

    @property
    def size(self) -> int:
        return self.grid.size

    def value(self, a: int, b: int) -> AlgebraElement:
        if a == b:
            return self.space.zero()
        if a > b:
            raise UsageError(f"Couple ({a}, {b}) non ordonné.")
        key = (a, b)
        if key not in self._entries:
            if self._entry is None:
                raise UsageError(f"Entrée ({a}, {b}) absente.")
            self._entries[key] = self._entry(a, b)
        return self._entries[key]

    def pairs(self) -> Iterator[tuple[int, int]]:
        for a in range(self.size):
            for b in range(a + 1, self.size):
                yield a, b

    def rows(self) -> list[tuple[float, float, float, float, float]]:
        """Lignes (s, t, norme d'opérateur, Re φ, Im φ) pour l'export CSV."""
        out = []
        for a, b in self.pairs():
            v = self.value(a, b)
            tr = v.trace()
            out.append((float(self.grid[a]), float(self.grid[b]), v.norm(), tr.real, tr.imag))
        return out

    def __sub__(self, other: TwoParamGrid) -> TwoParamGrid:
        if other.size != self.size:
            raise UsageError("Grilles de tailles différentes.")
        return TwoParamGrid(self.grid, self.space, entry=lambda a, b: self.value(a, b) - other.value(a, b))


@dataclass(frozen=True)
class ThreeParam:
    """h_{sut} sur les triplets a < b < c ; évaluée à la demande."""

    grid: np.ndarray
    space: Space
    fn: Callable[[int, int, int], AlgebraElement]

    def __call__(self, a: int, b: int, c: int) -> AlgebraElement:
        return self.fn(a, b, c)


def delta1(path: GridPath) -> TwoParamGrid:
    """(δX)_{st} = X_t - X_s."""
    return TwoParamGrid(
        path.grid,
        path.space,
        entry=lambda a, b: AlgebraElement._wrap(path.values[b] - path.values[a], path.space),
    )


def delta2(g: TwoParamGrid) -> ThreeParam:
    """(δg)_{sut} = g_{st} - g_{su} - g_{ut}."""
    return ThreeParam(g.grid, g.space, lambda a, b, c: g.value(a, c) - g.value(a, b) - g.value(b, c))


def holder2_norm(g: TwoParamGrid, alpha: float) -> float:
    if alpha < 0:
        raise UsageError(f"α doit être >= 0 (reçu {alpha})")
    best = 0.0
    for a, b in g.pairs():
        best = max(best, g.value(a, b).norm() / (g.grid[b] - g.grid[a]) ** alpha)
    return best


def holder3_norm(h: ThreeParam, alpha: float, beta: float) -> float:
    """sup ‖h_{sut}‖ / ((t-u)^α (u-s)^β) sur les triplets de la grille."""
    if alpha < 0 or beta < 0:
        raise UsageError("α et β doivent être >= 0.")
    t = h.grid
    best = 0.0
    for a in range(t.size):
        for b in range(a + 1, t.size):
            for c in range(b + 1, t.size):
                scale = (t[c] - t[b]) ** alpha * (t[b] - t[a]) ** beta
                best = max(best, h(a, b, c).norm() / scale)
    return best


def loglog_fit(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Pente des moindres carrés de log y contre log x, et R²."""
    lx = np.log(np.asarray(x, dtype=np.float64))
    ly = np.log(np.asarray(y, dtype=np.float64))
    if lx.size < 2:
        raise UsageError("Au moins deux points pour un ajustement.")
    slope, intercept = np.polyfit(lx, ly, 1)
    residual = ly - (slope * lx + intercept)
    total = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(residual**2)) / total if total > 0 else 1.0
    return float(slope), r2


def fit_holder_exponent(g: TwoParamGrid) -> tuple[float, float]:
    """
    Exposant de Hölder empirique : pente log-log du maximum de ‖g_{st}‖
    par longueur t-s. Renvoie (exposant, R²).
    """
    by_length: dict[float, float] = {}
    for a, b in g.pairs():
        length = round(float(g.grid[b] - g.grid[a]), 12)
        by_length[length] = max(by_length.get(length, 0.0), g.value(a, b).norm())
    lengths = sorted(k for k, v in by_length.items() if v > 0)
    if len(lengths) < 2:
        raise UsageError("Pas assez de longueurs distinctes pour ajuster un exposant.")
    return loglog_fit(lengths, [by_length[k] for k in lengths])


# =========================
# Aires de Lévy produit
# =========================
class AreaKind(str, Enum):
    ITO = "ito"
    STRATONOVICH = "stratonovich"
    SMOOTH_LEBESGUE = "lebesgue"
    INTERPOLATED = "interpolated"


def _sum_bmd(base: np.ndarray, b: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Σ_m B_m b D_m, par blocs."""
    n = b.shape[-1]
    acc = np.zeros((n, n), dtype=np.complex128)
    for start in range(0, base.shape[0], _CHUNK):
        bb = base[start : start + _CHUNK] @ b
        dd = d[start : start + _CHUNK]
        acc += np.einsum("mac,mcd->ad", bb, dd, optimize=True)
    return acc


def breakpoint_area(values: np.ndarray, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """
    Aire exacte d'un chemin affine entre points de rupture successifs :
    Σ_p U♯(milieu_p - X_s)·δ_p, pour chaque terme u_k⊗v_k. Renvoie (K, N, N).
    """
    if left.shape[0] == 0:
        n = values.shape[-1]
        return np.zeros((0, n, n), dtype=np.complex128)
    d = np.diff(values, axis=0)
    base = 0.5 * (values[:-1] + values[1:]) - values[0]
    return np.stack([left[k] @ _sum_bmd(base, right[k], d) for k in range(left.shape[0])])


class LevyArea:
    """
    Aire de Lévy produit 𝐗_{st}[U] au-dessus d'un chemin fin.

    - ITO           : somme au point gauche Σ U♯(X_m - X_s)·δX_m
    - STRATONOVICH  : Itô + ½(t-s)(Id×φ)[U]
    - SMOOTH_LEBESGUE : règle du point milieu (intégrale de Lebesgue exacte
      pour le chemin affine par morceaux)
    - INTERPOLATED  : aire de Lebesgue de l'interpolation affine du chemin
      le long d'une partition ; `path` est alors le chemin interpolé

    Les évaluations sont mises en cache par (s, t, empreinte de U) ; le cache
    est protégé par un verrou et peut être partagé entre fils.
    """

    def __init__(
        self,
        path: GridPath,
        kind: AreaKind = AreaKind.ITO,
        *,
        partition: Sequence[int] | None = None,
        shift: Callable[[TensorElement2], AlgebraElement] | None = None,
    ) -> None:
        self.kind = AreaKind(kind)
        self.source = path
        self.partition = None if partition is None else np.asarray(partition, dtype=np.int64)
        if self.kind is AreaKind.INTERPOLATED:
            if self.partition is None:
                raise UsageError("L'aire interpolée demande une partition.")
            self.path = path.interpolate(self.partition)
        else:
            self.path = path
        self.shift = shift
        self._cache: OrderedDict[tuple, AlgebraElement] = OrderedDict()
        self._lock = threading.Lock()
        self._increments = self.path.increments()
        self._midpoints = 0.5 * (self.path.values[:-1] + self.path.values[1:])
        self._ito: LevyArea | None = None

    # ---- constructeurs
    @classmethod
    def ito(cls, path: GridPath) -> LevyArea:
        return cls(path, AreaKind.ITO)

    @classmethod
    def stratonovich(cls, path: GridPath) -> LevyArea:
        return cls(path, AreaKind.STRATONOVICH)

    @classmethod
    def lebesgue(cls, path: GridPath) -> LevyArea:
        return cls(path, AreaKind.SMOOTH_LEBESGUE)

    @classmethod
    def interpolated(cls, path: GridPath, partition: Sequence[int]) -> LevyArea:
        return cls(path, AreaKind.INTERPOLATED, partition=partition)

    def shifted(self, phi: Callable[[TensorElement2], AlgebraElement]) -> LevyArea:
        """
        Aire 𝐗_{st}[U] + (t-s)Φ(U) pour Φ linéaire : encore une aire au-dessus de X
        (l'identité de Chen est préservée).
        """
        base = self.shift

        def combined(u: TensorElement2) -> AlgebraElement:
            extra = phi(u)
            return extra if base is None else base(u) + extra

        return LevyArea(self.source, self.kind, partition=self.partition, shift=combined)

    def ito_companion(self) -> LevyArea:
        """
        Aire d'Itô sur le même chemin, construite une seule fois.

        Pour INTERPOLATED, ce chemin est l'interpolé affine, pas le chemin source.
        """
        if self.kind is AreaKind.ITO and self.shift is None:
            return self
        with self._lock:
            if self._ito is None:
                self._ito = LevyArea(self.path, AreaKind.ITO)
            return self._ito

    @property
    def space(self) -> Space:
        return self.path.space

    def __repr__(self) -> str:
        return f"LevyArea({self.kind.value}, N={self.path.dimension}, M={self.path.steps})"

    # ---- évaluation
    def _check(self, u: TensorElement2, i: int, j: int) -> None:
        if u.config is not Config.CONFIG2:
            raise UsageError("Les aires produit s'appliquent aux tenseurs CONFIG2.")
        if u.space != self.space:
            raise UsageError("Tenseur et chemin d'espaces différents.")
        if not 0 <= i <= j <= self.path.steps:
            raise UsageError(f"Indices ({i}, {j}) hors de la grille ou non ordonnés.")

    def _base(self, i: int, j: int) -> np.ndarray:
        if self.kind in (AreaKind.ITO, AreaKind.STRATONOVICH):
            return self.path.values[i:j] - self.path.values[i]
        return self._midpoints[i:j] - self.path.values[i]

    def term_areas(self, left: np.ndarray, right: np.ndarray, i: int, j: int) -> np.ndarray:
        """𝐗_{st}[u_k⊗v_k] pour chaque terme ; pile (K, N, N)."""
        n = self.path.dimension
        k_terms = left.shape[0]
        if i == j or k_terms == 0:
            return np.zeros((k_terms, n, n), dtype=np.complex128)
        base = self._base(i, j)
        d = self._increments[i:j]
        out = np.stack([left[k] @ _sum_bmd(base, right[k], d) for k in range(k_terms)])
        dt = float(self.path.grid[j] - self.path.grid[i])
        if self.kind is AreaKind.STRATONOVICH:
            phi_right = np.trace(right, axis1=1, axis2=2) / n
            out = out + 0.5 * dt * phi_right[:, None, None] * left
        if self.shift is not None:
            space = self.space
            out = out + dt * np.stack(
                [self.shift(TensorElement2(left[k : k + 1], right[k : k + 1], Config.CONFIG2, space)).entries
                 for k in range(k_terms)]
            )
        return out

    def evaluate_indices(self, u: TensorElement2, i: int, j: int) -> AlgebraElement:
        self._check(u, i, j)
        if i == j:
            return self.space.zero()
        key = (i, j, u.fingerprint())
        with self._lock:
            hit = self._cache.get(key)
            if hit is not None:
                self._cache.move_to_end(key)
                return hit
        value = AlgebraElement._wrap(self.term_areas(u.left, u.right, i, j).sum(axis=0), self.space)
        with self._lock:
            self._cache[key] = value
            if len(self._cache) > AREA_CACHE_SIZE:
                self._cache.popitem(last=False)
        return value

    def evaluate(self, u: TensorElement2, s: float, t: float) -> AlgebraElement:
        return self.evaluate_indices(u, self.path.index_of(s), self.path.index_of(t))

    def star_indices(self, u: TensorElement2, i: int, j: int) -> AlgebraElement:
        """𝐗*_{st}[U] = 𝐗_{st}[U*]*."""
        return self.evaluate_indices(u.adjoint(), i, j).adjoint()

    def star(self, u: TensorElement2, s: float, t: float) -> AlgebraElement:
        return self.star_indices(u, self.path.index_of(s), self.path.index_of(t))

    def increment(self, i: int, j: int) -> AlgebraElement:
        return AlgebraElement._wrap(self.path.values[j] - self.path.values[i], self.space)

    # ---- corrections du germe
    def left_correction(self, t: TensorElement3, i: int, j: int) -> AlgebraElement:
        """[𝐗_{st}×Id](Σ a⊗b⊗c) = Σ 𝐗_{st}[a⊗b]·c."""
        if t.num_terms == 0 or i == j:
            return self.space.zero()
        areas = self.term_areas(t.first, t.middle, i, j)
        return AlgebraElement._wrap((areas @ t.last).sum(axis=0), self.space)

    def right_correction(self, t: TensorElement3, i: int, j: int) -> AlgebraElement:
        """[Id×𝐗*_{st}](Σ a⊗b⊗c) = Σ a·𝐗*_{st}[b⊗c]."""
        if t.num_terms == 0 or i == j:
            return self.space.zero()
        # (b⊗c)* = c*⊗b* en CONFIG2
        b_h = np.conj(np.swapaxes(t.middle, 1, 2))
        c_h = np.conj(np.swapaxes(t.last, 1, 2))
        areas = self.term_areas(c_h, b_h, i, j)
        star = np.conj(np.swapaxes(areas, 1, 2))
        return AlgebraElement._wrap((t.first @ star).sum(axis=0), self.space)

    def chen_defect(self, u: TensorElement2, i: int, k: int, j: int) -> float:
        """‖(δ𝐗)_{sut}[U] - (U♯(δX)_{su})·(δX)_{ut}‖."""
        lhs = self.evaluate_indices(u, i, j) - self.evaluate_indices(u, i, k) - self.evaluate_indices(u, k, j)
        rhs = sharp_apply(u, self.increment(i, k)) @ self.increment(k, j)
        return (lhs - rhs).norm()


def ito_area(area: LevyArea, u: TensorElement2, s: float, t: float) -> AlgebraElement:
    """
    Somme au point gauche sur `area.path`, quelle que soit la variante de `area`
    (chemin interpolé pour une aire INTERPOLATED).
    """
    return area.ito_companion().evaluate(u, s, t)


def strat_area(area: LevyArea, u: TensorElement2, s: float, t: float) -> AlgebraElement:
    return ito_area(area, u, s, t) + partial_trace(u, "right") * (0.5 * (t - s))


def star_area(area: LevyArea, u: TensorElement2, s: float, t: float) -> AlgebraElement:
    """𝐗*_{st}[U] = 𝐗_{st}[U*]* ; pour Itô, Σ δX_m·U♯(X_m - X_s)."""
    return area.star(u, s, t)


def tensor_area(path: GridPath, s: float, t: float, *, geometric: bool = False) -> TensorElement2:
    """
    Aire tensorielle spatiale 𝐗_{st} = Σ (X_m - X_s)⊗δX_m (CONFIG1).

    `geometric=True` prend le point milieu : aire du chemin affine par morceaux.
    """
    return tensor_area_indices(path, path.index_of(s), path.index_of(t), geometric=geometric)


def tensor_area_indices(path: GridPath, i: int, j: int, *, geometric: bool = False) -> TensorElement2:
    if i > j:
        raise UsageError(f"Indices ({i}, {j}) non ordonnés.")
    if i == j:
        return TensorElement2.zero(path.space, Config.CONFIG1)
    values = path.values
    if geometric:
        base = 0.5 * (values[i:j] + values[i + 1 : j + 1]) - values[i]
    else:
        base = values[i:j] - values[i]
    return TensorElement2(base, np.diff(values[i : j + 1], axis=0), Config.CONFIG1, path.space)


# =========================
# Biprocessus contrôlés
# =========================
@dataclass(frozen=True)
class BiprocessValue:
    """(U_s, 𝕌¹_s, 𝕌²_s) en un temps de grille."""

    u: TensorElement2
    first: TensorElement3
    second: TensorElement3


class ControlledBiprocess:
    """
    Biprocessus contrôlé adapté, évalué à la demande sur les indices de la grille fine.

    `provider(k)` ne doit utiliser que les valeurs du chemin jusqu'à l'indice k.
    """

    def __init__(self, path: GridPath, provider: Callable[[int], BiprocessValue]) -> None:
        self.path = path
        self._provider = provider
        self._values: dict[int, BiprocessValue] = {}
        self._lock = threading.Lock()

    @classmethod
    def constant(cls, path: GridPath, u: TensorElement2) -> ControlledBiprocess:
        zero = TensorElement3.zero(path.space, u.config)
        value = BiprocessValue(u, zero, zero)
        return cls(path, lambda _k: value)

    @classmethod
    def derivative_of(cls, f: FunctionSpec, path: GridPath, *, nodes: int = QUADRATURE_NODES) -> ControlledBiprocess:
        """U = ∂f(X), de dérivées 𝕌¹ = 𝕌² = ∂²f(X)."""

        def provider(k: int) -> BiprocessValue:
            x = path.value(k)
            d2 = second_tensor_derivative(f, x, nodes=nodes)
            return BiprocessValue(tensor_derivative(f, x, nodes=nodes), d2, d2)

        return cls(path, provider)

    def value(self, k: int) -> BiprocessValue:
        with self._lock:
            hit = self._values.get(k)
        if hit is None:
            hit = self._provider(k)
            with self._lock:
                self._values[k] = hit
        return hit

    def residual(self, i: int, j: int) -> TensorElement2:
        """U^♭_{st} = (δU)_{st} - (δX)_{st}♯𝕌¹_s - 𝕌²_s♯(δX)_{st}."""
        vi, vj = self.value(i), self.value(j)
        dx = AlgebraElement._wrap(self.path.values[j] - self.path.values[i], self.path.space)
        return vj.u - vi.u - tri_sharp(dx, vi.first, "left") - tri_sharp(dx, vi.second, "right")

    def residual_norm(self, i: int, j: int) -> float:
        return proj_ub(compress(self.residual(i, j)))


def germ(biprocess: ControlledBiprocess, area: LevyArea, i: int, j: int) -> AlgebraElement:
    """M_{st} = U_s♯(δX)_{st} + [𝐗_{st}×Id](𝕌¹_s) + [Id×𝐗*_{st}](𝕌²_s)."""
    v = biprocess.value(i)
    return (
        sharp_apply(v.u, area.increment(i, j))
        + area.left_correction(v.first, i, j)
        + area.right_correction(v.second, i, j)
    )


# =========================
# Intégrale rugueuse
# =========================
@dataclass(frozen=True)
class RoughIntegral:
    """J sur la partition grossière, avec l'écart de Cauchy atteint par cellule."""

    values: TwoParamGrid
    gaps: tuple[float, ...]
    levels: tuple[int, ...]
    converged: bool
    indices: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def gap(self) -> float:
        return max(self.gaps, default=0.0)


def _cell_integral(
    biprocess: ControlledBiprocess, area: LevyArea, lo: int, hi: int, tol: float
) -> tuple[np.ndarray, float, int, bool]:
    span = hi - lo
    previous = germ(biprocess, area, lo, hi).entries
    if span == 1:
        return previous, 0.0, 0, True
    gap = math.inf
    level = 0
    parts = 1
    while parts < span:
        # découpe dyadique ; sinon dernier niveau sur tous les pas fins
        nxt = 2 * parts
        if nxt > span or span % nxt:
            nxt = span
        cuts = [lo + r * span // nxt for r in range(nxt + 1)]
        current = sum(germ(biprocess, area, a, b).entries for a, b in zip(cuts[:-1], cuts[1:]))
        gap = operator_norm(current - previous)
        level += 1
        parts = nxt
        previous = current
        logger.debug("rough_integral cellule [%s,%s] niveau %s écart %.3g", lo, hi, level, gap)
        if gap < tol:
            return previous, gap, level, True
    return previous, gap, level, False



def rough_integral(
    biprocess: ControlledBiprocess,
    area: LevyArea,
    coarse: Sequence[int],
    *,
    tol: float = REFINEMENT_TOL,
) -> RoughIntegral:
    """
    J_{st} = limite des sommes de Riemann corrigées Σ M_{t_i t_{i+1}}.

    Chaque cellule grossière est raffinée dyadiquement dans la grille fine
    jusqu'à un écart < tol ou l'épuisement de la grille ; J est ensuite
    assemblé par additivité, donc δ₂J = 0 à l'arrondi près.
    """
    idx = np.asarray(coarse, dtype=np.int64)
    if idx.size < 2 or np.any(np.diff(idx) <= 0) or idx[0] < 0 or idx[-1] > area.path.steps:
        raise UsageError("Partition grossière invalide.")
    if biprocess.path.steps != area.path.steps:
        raise UsageError("Biprocessus et aire sur des grilles différentes.")

    cells, gaps, levels, ok = [], [], [], True
    for lo, hi in zip(idx[:-1], idx[1:]):
        value, gap, level, converged = _cell_integral(biprocess, area, int(lo), int(hi), tol)
        cells.append(value)
        gaps.append(gap)
        levels.append(level)
        ok = ok and converged

    prefix = np.concatenate([np.zeros((1,) + cells[0].shape, dtype=np.complex128), np.cumsum(cells, axis=0)])
    space = area.space
    grid = area.path.grid[idx]
    values = TwoParamGrid(grid, space, entry=lambda a, b: AlgebraElement._wrap(prefix[b] - prefix[a], space))
    if not ok:
        logger.warning("rough_integral : raffinement non convergé (écart max %.3g > %.1g)", max(gaps), tol)
    return RoughIntegral(values, tuple(gaps), tuple(levels), ok, idx)


# =========================
# Couture
# =========================
def sewing_constant(mu: float) -> float:
    """c_μ = 2 + 2^μ ζ(μ)."""
    if mu <= 1:
        raise UsageError(f"μ doit être > 1 (reçu {mu})")
    return 2.0 + 2.0**mu * float(special.zeta(mu))


@dataclass(frozen=True)
class SewingReport:
    residual: TwoParamGrid
    residual_norm: float
    delta_norm: float
    alpha: float
    constant: float
    passed: bool


def sewing_residual(
    m: TwoParamGrid,
    mu: float,
    *,
    splits: Sequence[float] = DEFAULT_SPLITS,
    slack: float = SEWING_SLACK,
) -> SewingReport:
    """
    ΛδM = M - J où J est la somme de M sur la partition la plus fine de la grille.

    Vérifie ‖(ΛδM)_{st}‖ <= c_μ N[δM; μ] (t-s)^μ, la norme de δM prise sur la
    meilleure coupure (α, μ-α) parmi `splits`.
    """
    constant = sewing_constant(mu)
    steps = [m.value(k, k + 1).entries for k in range(m.size - 1)]
    prefix = np.concatenate([np.zeros((1,) + steps[0].shape, dtype=np.complex128), np.cumsum(steps, axis=0)])
    space = m.space
    residual = TwoParamGrid(
        m.grid, space, entry=lambda a, b: m.value(a, b) - AlgebraElement._wrap(prefix[b] - prefix[a], space)
    )
    residual_norm = holder2_norm(residual, mu)
    h = delta2(m)
    candidates = [(holder3_norm(h, a, mu - a), a) for a in splits if 0 <= a <= mu]
    if not candidates:
        raise UsageError("Aucune coupure admissible pour μ.")
    delta_norm, alpha = min(candidates)
    passed = residual_norm <= slack * constant * delta_norm + 1e-14
    logger.debug("sewing μ=%s résidu %.3g borne %.3g", mu, residual_norm, constant * delta_norm)
    return SewingReport(residual, residual_norm, delta_norm, alpha, constant, passed)

