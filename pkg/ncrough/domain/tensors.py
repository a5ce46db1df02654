from __future__ import annotations

import hashlib
import logging
import math
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator, svds

from ncrough.domain.errors import BudgetError, UsageError
from ncrough.domain.matrix_model import AlgebraElement, Space, operator_norm, operator_norms

logger = logging.getLogger(__name__)

MAX_SPATIAL_DIMENSION = 128
DENSE_SPATIAL_DIMENSION = 16
MAX_FLATTEN_DIMENSION = 64
COMPRESS_TOL = 1e-10


class Config(str, Enum):
    """
    Convention de multiplication sur A⊗A :
    - CONFIG1 : (a⊗b)(c⊗d) = (ac)⊗(bd)
    - CONFIG2 : (a⊗b)(c⊗d) = (ac)⊗(db)
    """

    CONFIG1 = "config1"
    CONFIG2 = "config2"


def _empty(space: Space) -> np.ndarray:
    n = space.dimension
    return np.zeros((0, n, n), dtype=np.complex128)


def _stack(elements: Sequence[AlgebraElement], space: Space) -> np.ndarray:
    if not elements:
        return _empty(space)
    if any(e.space != space for e in elements):
        raise UsageError("Facteurs d'espaces différents.")
    return np.stack([e.entries for e in elements])


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.complex128)
    if arr.flags.writeable:
        arr = arr.copy()
        arr.setflags(write=False)
    return arr


# =========================
# Tenseurs de rang 2
# =========================
class TensorElement2:
    """Somme formelle Σ u_i ⊗ v_i, stockée en deux piles (K, N, N)."""

    __slots__ = ("left", "right", "config", "space")

    def __init__(self, left: np.ndarray, right: np.ndarray, config: Config, space: Space) -> None:
        left = _frozen(left)
        right = _frozen(right)
        n = space.dimension
        if left.shape != right.shape or left.ndim != 3 or left.shape[1:] != (n, n):
            raise UsageError(f"Piles de facteurs incompatibles : {left.shape} / {right.shape}")
        self.left = left
        self.right = right
        self.config = Config(config)
        self.space = space

    @classmethod
    def from_terms(
        cls,
        terms: Iterable[tuple[AlgebraElement, AlgebraElement]],
        config: Config = Config.CONFIG2,
        space: Space | None = None,
    ) -> TensorElement2:
        terms = list(terms)
        if space is None:
            if not terms:
                raise UsageError("Espace requis pour un tenseur vide.")
            space = terms[0][0].space
        return cls(_stack([u for u, _ in terms], space), _stack([v for _, v in terms], space), config, space)

    @classmethod
    def zero(cls, space: Space, config: Config = Config.CONFIG2) -> TensorElement2:
        return cls(_empty(space), _empty(space), config, space)

    @classmethod
    def unit(cls, space: Space, config: Config = Config.CONFIG2) -> TensorElement2:
        eye = np.eye(space.dimension, dtype=np.complex128)[None]
        return cls(eye, eye, config, space)

    @classmethod
    def simple(cls, u: AlgebraElement, v: AlgebraElement, config: Config = Config.CONFIG2) -> TensorElement2:
        return cls.from_terms([(u, v)], config)

    @property
    def num_terms(self) -> int:
        return self.left.shape[0]

    @property
    def terms(self) -> list[tuple[AlgebraElement, AlgebraElement]]:
        return [
            (AlgebraElement._wrap(self.left[k], self.space), AlgebraElement._wrap(self.right[k], self.space))
            for k in range(self.num_terms)
        ]

    def _check(self, other: TensorElement2) -> None:
        if other.config != self.config:
            raise UsageError(f"Configurations incompatibles : {self.config.value} / {other.config.value}")
        if other.space != self.space:
            raise UsageError("Tenseurs d'espaces différents.")

    def __add__(self, other: TensorElement2) -> TensorElement2:
        self._check(other)
        return TensorElement2(
            np.concatenate([self.left, other.left]),
            np.concatenate([self.right, other.right]),
            self.config,
            self.space,
        )

    def __neg__(self) -> TensorElement2:
        return TensorElement2(-self.left, self.right, self.config, self.space)

    def __sub__(self, other: TensorElement2) -> TensorElement2:
        return self + (-other)

    def __mul__(self, scalar: complex) -> TensorElement2:
        return TensorElement2(self.left * scalar, self.right, self.config, self.space)

    __rmul__ = __mul__

    def __matmul__(self, other: TensorElement2) -> TensorElement2:
        return tensor_mul(self, other)

    def __repr__(self) -> str:
        return f"TensorElement2(K={self.num_terms}, N={self.space.dimension}, {self.config.value})"

    def adjoint(self) -> TensorElement2:
        return tensor_adjoint(self)

    def with_config(self, config: Config) -> TensorElement2:
        return TensorElement2(self.left, self.right, config, self.space)

    def fingerprint(self) -> str:
        h = hashlib.sha1()
        h.update(self.config.value.encode("ascii"))
        h.update(self.left.tobytes())
        h.update(self.right.tobytes())
        return h.hexdigest()


# =========================
# Tenseurs de rang 3
# =========================
class TensorElement3:
    """Somme formelle Σ u_i ⊗ v_i ⊗ w_i."""

    __slots__ = ("first", "middle", "last", "config", "space")

    def __init__(self, first: np.ndarray, middle: np.ndarray, last: np.ndarray, config: Config, space: Space) -> None:
        first, middle, last = _frozen(first), _frozen(middle), _frozen(last)
        n = space.dimension
        if not (first.shape == middle.shape == last.shape) or first.ndim != 3 or first.shape[1:] != (n, n):
            raise UsageError("Piles de facteurs incompatibles (rang 3).")
        self.first = first
        self.middle = middle
        self.last = last
        self.config = Config(config)
        self.space = space

    @classmethod
    def from_terms(
        cls,
        terms: Iterable[tuple[AlgebraElement, AlgebraElement, AlgebraElement]],
        config: Config = Config.CONFIG2,
        space: Space | None = None,
    ) -> TensorElement3:
        terms = list(terms)
        if space is None:
            if not terms:
                raise UsageError("Espace requis pour un tenseur vide.")
            space = terms[0][0].space
        return cls(
            _stack([t[0] for t in terms], space),
            _stack([t[1] for t in terms], space),
            _stack([t[2] for t in terms], space),
            config,
            space,
        )

    @classmethod
    def zero(cls, space: Space, config: Config = Config.CONFIG2) -> TensorElement3:
        e = _empty(space)
        return cls(e, e, e, config, space)

    @classmethod
    def unit(cls, space: Space, config: Config = Config.CONFIG2) -> TensorElement3:
        eye = np.eye(space.dimension, dtype=np.complex128)[None]
        return cls(eye, eye, eye, config, space)

    @property
    def num_terms(self) -> int:
        return self.first.shape[0]

    def __add__(self, other: TensorElement3) -> TensorElement3:
        if other.config != self.config or other.space != self.space:
            raise UsageError("Tenseurs de rang 3 incompatibles.")
        return TensorElement3(
            np.concatenate([self.first, other.first]),
            np.concatenate([self.middle, other.middle]),
            np.concatenate([self.last, other.last]),
            self.config,
            self.space,
        )

    def __mul__(self, scalar: complex) -> TensorElement3:
        return TensorElement3(self.first * scalar, self.middle, self.last, self.config, self.space)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"TensorElement3(K={self.num_terms}, N={self.space.dimension}, {self.config.value})"


def append_factor(u: TensorElement2, w: AlgebraElement) -> TensorElement3:
    """U ⊗ w."""
    last = np.broadcast_to(w.entries, u.left.shape)
    return TensorElement3(u.left, u.right, last, u.config, u.space)


def prepend_factor(w: AlgebraElement, u: TensorElement2) -> TensorElement3:
    """w ⊗ U."""
    first = np.broadcast_to(w.entries, u.left.shape)
    return TensorElement3(first, u.left, u.right, u.config, u.space)


# =========================
# Opérations
# =========================
def tensor_mul(a: TensorElement2, b: TensorElement2) -> TensorElement2:
    a._check(b)
    n = a.space.dimension
    left = (a.left[:, None] @ b.left[None, :]).reshape(-1, n, n)
    if a.config is Config.CONFIG1:
        right = (a.right[:, None] @ b.right[None, :]).reshape(-1, n, n)
    else:
        right = (b.right[None, :] @ a.right[:, None]).reshape(-1, n, n)
    return TensorElement2(left, right, a.config, a.space)


def tensor_adjoint(a: TensorElement2) -> TensorElement2:
    left_h = np.conj(np.swapaxes(a.left, 1, 2))
    right_h = np.conj(np.swapaxes(a.right, 1, 2))
    if a.config is Config.CONFIG1:
        return TensorElement2(left_h, right_h, a.config, a.space)
    return TensorElement2(right_h, left_h, a.config, a.space)


def sharp_stack(u: TensorElement2, xs: np.ndarray) -> np.ndarray:
    """U♯X appliqué à une pile (n, N, N) ou à une matrice (N, N)."""
    xs = np.asarray(xs)
    acc = np.zeros(np.broadcast_shapes(xs.shape, u.left.shape[1:]), dtype=np.complex128)
    for k in range(u.num_terms):
        acc += u.left[k] @ xs @ u.right[k]
    return acc


def sharp_apply(u: TensorElement2, x: AlgebraElement) -> AlgebraElement:
    """(Σ u_i ⊗ v_i)♯X = Σ u_i X v_i."""
    if x.space != u.space:
        raise UsageError("sharp_apply : espaces différents.")
    return AlgebraElement._wrap(sharp_stack(u, x.entries), u.space)


def tri_sharp(x: AlgebraElement, t: TensorElement3, side: str = "left") -> TensorElement2:
    """
    left  : X♯(u⊗v⊗w) = (uXv)⊗w
    right : (u⊗v⊗w)♯X = u⊗(vXw)
    """
    if x.space != t.space:
        raise UsageError("tri_sharp : espaces différents.")
    if side == "left":
        return TensorElement2(t.first @ x.entries @ t.middle, t.last, t.config, t.space)
    if side == "right":
        return TensorElement2(t.first, t.middle @ x.entries @ t.last, t.config, t.space)
    raise UsageError(f"Côté inconnu : {side}")


def double_sharp(t: TensorElement3, y1: AlgebraElement, y2: AlgebraElement) -> AlgebraElement:
    """Y1♯𝕌♯Y2 = Σ u Y1 v Y2 w."""
    acc = (t.first @ y1.entries @ t.middle @ y2.entries @ t.last).sum(axis=0)
    return AlgebraElement._wrap(acc, t.space)


def _traces(stack: np.ndarray) -> np.ndarray:
    return np.trace(stack, axis1=1, axis2=2) / stack.shape[-1]


def partial_trace(u: TensorElement2, side: str = "right") -> AlgebraElement:
    """
    left  : (φ×Id)(U) = Σ φ(u_i) v_i
    right : (Id×φ)(U) = Σ φ(v_i) u_i
    """
    if side == "left":
        acc = np.einsum("k,kij->ij", _traces(u.left), u.right) if u.num_terms else None
    elif side == "right":
        acc = np.einsum("k,kij->ij", _traces(u.right), u.left) if u.num_terms else None
    else:
        raise UsageError(f"Côté inconnu : {side}")
    if acc is None:
        return u.space.zero()
    return AlgebraElement._wrap(acc, u.space)


def partial_trace_mid(t: TensorElement3) -> AlgebraElement:
    """(Id×φ×Id)(𝕌) = Σ φ(v_i) u_i w_i."""
    if t.num_terms == 0:
        return t.space.zero()
    acc = np.einsum("k,kij->ij", _traces(t.middle), t.first @ t.last)
    return AlgebraElement._wrap(acc, t.space)


def psi_map(u: TensorElement2, y: TensorElement2) -> TensorElement2:
    """Ψ_U(Σ y_j⊗z_j) = Σ (U♯y_j)⊗z_j."""
    if u.space != y.space:
        raise UsageError("psi_map : espaces différents.")
    return TensorElement2(sharp_stack(u, y.left), y.right, y.config, y.space)


# =========================
# Normes
# =========================
def flatten(u: TensorElement2, max_dimension: int = MAX_FLATTEN_DIMENSION) -> np.ndarray:
    """
    Représentation N²×N² : CONFIG1 → Σ kron(u, v), CONFIG2 → Σ kron(u, vᵀ).

    Avec la vectorisation ligne par ligne, kron(u, vᵀ) vec(X) = vec(uXv).
    """
    n = u.space.dimension
    if n > max_dimension:
        raise BudgetError(f"Aplatissement N²×N² hors budget (N={n} > {max_dimension})")
    out = np.zeros((n * n, n * n), dtype=np.complex128)
    for k in range(u.num_terms):
        right = u.right[k] if u.config is Config.CONFIG1 else u.right[k].T
        out += np.kron(u.left[k], right)
    return out


def _flattened_operator(u: TensorElement2) -> LinearOperator:
    n = u.space.dimension
    left, right = u.left, u.right
    if u.config is Config.CONFIG1:
        right = np.swapaxes(right, 1, 2)
    left_h = np.conj(np.swapaxes(left, 1, 2))
    right_h = np.conj(np.swapaxes(right, 1, 2))

    def matvec(x: np.ndarray) -> np.ndarray:
        xm = np.asarray(x).reshape(n, n)
        return (left @ xm @ right).sum(axis=0).ravel()

    def rmatvec(y: np.ndarray) -> np.ndarray:
        ym = np.asarray(y).reshape(n, n)
        return (left_h @ ym @ right_h).sum(axis=0).ravel()

    return LinearOperator((n * n, n * n), matvec=matvec, rmatvec=rmatvec, dtype=np.complex128)


def spatial_norm(u: TensorElement2, max_dimension: int = MAX_SPATIAL_DIMENSION) -> float:
    """
    Norme L∞(φ⊗φ) : plus grande valeur singulière de la représentation aplatie.

    Dense pour les petites dimensions, sinon svds sans former la matrice N²×N².
    """
    n = u.space.dimension
    if n > max_dimension:
        raise BudgetError(f"spatial_norm hors budget (N={n} > {max_dimension})")
    if u.num_terms == 0:
        return 0.0
    if n <= DENSE_SPATIAL_DIMENSION:
        return operator_norm(flatten(u))
    op = _flattened_operator(u)
    rng = np.random.default_rng(0)
    v0 = (rng.standard_normal(n * n) + 1j * rng.standard_normal(n * n)).astype(np.complex128)
    s = svds(op, k=1, v0=v0, return_singular_vectors=False)
    return float(np.max(s))


def proj_ub(u: TensorElement2) -> float:
    """Σ ‖u_i‖‖v_i‖ sur la représentation courante (majorant de la norme projective)."""
    if u.num_terms == 0:
        return 0.0
    return float(np.sum(operator_norms(u.left) * operator_norms(u.right)))


# =========================
# Compression
# =========================
def _collect(u: TensorElement2) -> TensorElement2:
    """Regroupe les termes de facteur gauche (puis droit) identique ; retire les termes nuls."""

    def merge(keys: np.ndarray, values: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
        index: dict[bytes, int] = {}
        ks: list[np.ndarray] = []
        vs: list[np.ndarray] = []
        for k in range(keys.shape[0]):
            key = keys[k].tobytes()
            if key in index:
                vs[index[key]] = vs[index[key]] + values[k]
            else:
                index[key] = len(ks)
                ks.append(keys[k])
                vs.append(values[k].copy())
        return ks, vs

    if u.num_terms <= 1:
        lefts, rights = list(u.left), list(u.right)
    else:
        lefts, rights = merge(u.left, u.right)
        rights, lefts = merge(np.array(rights), np.array(lefts))
    kept = [(a, b) for a, b in zip(lefts, rights) if np.any(a) and np.any(b)]
    if not kept:
        return TensorElement2.zero(u.space, u.config)
    return TensorElement2(np.array([a for a, _ in kept]), np.array([b for _, b in kept]), u.config, u.space)


def compress(u: TensorElement2, tol: float = COMPRESS_TOL) -> TensorElement2:
    """
    Représentation réduite de U agissant comme X ↦ U♯X à tol près.

    - regroupement linéaire exact
    - QR des piles vectorisées puis SVD du petit cœur
    - troncature tant que la somme des valeurs singulières retirées reste <= tol
    Si le majorant projectif double, on garde la représentation regroupée.
    """
    collected = _collect(u)
    k = collected.num_terms
    if k <= 1:
        return collected
    n = u.space.dimension
    n2 = n * n
    q1, r1 = np.linalg.qr(collected.left.reshape(k, n2).T)
    q2, r2 = np.linalg.qr(collected.right.reshape(k, n2).T)
    w, s, zh = np.linalg.svd(r1 @ r2.T)
    tail = np.cumsum(s[::-1])[::-1]
    rank = int(np.count_nonzero(tail > tol))
    if rank == 0:
        return TensorElement2.zero(u.space, u.config)
    root = np.sqrt(s[:rank])
    a = (q1 @ w[:, :rank]) * root
    b = (q2 @ zh[:rank].T) * root
    reduced = TensorElement2(a.T.reshape(rank, n, n), b.T.reshape(rank, n, n), u.config, u.space)
    if proj_ub(reduced) > 2.0 * proj_ub(collected):
        logger.debug("compress : repli sur la représentation regroupée (K=%s)", k)
        return collected
    return reduced


def difference_norm(a: TensorElement2, b: TensorElement2, tol: float = COMPRESS_TOL) -> float:
    """proj_ub de la forme compressée de A - B."""
    return proj_ub(compress(a - b, tol))


def tensor_square_sum_bound(n: int, q: float = 0.0) -> float:
    """Borne (4/(1-|q|))√n de ‖Σ_{i<=n} Y_i⊗Y_i‖."""
    return 4.0 / (1.0 - abs(q)) * math.sqrt(n)
