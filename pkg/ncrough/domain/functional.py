from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Iterable, Sequence

import numpy as np
from numpy.polynomial import legendre
from scipy import linalg

from ncrough.domain.errors import ConfigError, UsageError
from ncrough.domain.matrix_model import SELF_ADJOINT_TOL, AlgebraElement
from ncrough.domain.tensors import Config, TensorElement2, TensorElement3, double_sharp

logger = logging.getLogger(__name__)

QUADRATURE_NODES = 32
DIVIDED_DIFFERENCE_TOL = 1e-8

POLY = "poly"
FOURIER = "fourier"


@lru_cache(maxsize=16)
def gauss_legendre(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Nœuds et poids de Gauss-Legendre sur [0, 1]."""
    x, w = legendre.leggauss(nodes)
    return 0.5 * (x + 1.0), 0.5 * w


# =========================
# Description des fonctions
# =========================
@dataclass(frozen=True)
class FunctionSpec:
    """
    Fonction admissible :
    - poly    : Σ a_k x^k (coefficients complexes)
    - fourier : Σ w e^{iξx} (mesure atomique finie)

    La représentation est canonique (coefficients nuls de tête retirés,
    atomes regroupés et triés), l'égalité compare donc des fonctions.
    """

    kind: str
    coeffs: tuple[complex, ...] = ()
    atoms: tuple[tuple[float, complex], ...] = ()

    def __post_init__(self) -> None:
        if self.kind == POLY:
            coeffs = [complex(c) for c in self.coeffs] or [0j]
            while len(coeffs) > 1 and coeffs[-1] == 0:
                coeffs.pop()
            object.__setattr__(self, "coeffs", tuple(coeffs))
            object.__setattr__(self, "atoms", ())
        elif self.kind == FOURIER:
            merged: dict[float, complex] = {}
            for xi, w in self.atoms:
                xi = float(xi)
                merged[xi] = merged.get(xi, 0j) + complex(w)
            atoms = tuple(sorted((xi, w) for xi, w in merged.items() if w != 0))
            object.__setattr__(self, "atoms", atoms)
            object.__setattr__(self, "coeffs", ())
        else:
            raise UsageError(f"Type de fonction inconnu : {self.kind}")

    # ---- constructeurs
    @classmethod
    def polynomial(cls, coeffs: Iterable[complex]) -> FunctionSpec:
        return cls(POLY, coeffs=tuple(coeffs))

    @classmethod
    def fourier(cls, atoms: Iterable[tuple[float, complex]]) -> FunctionSpec:
        return cls(FOURIER, atoms=tuple(atoms))

    @classmethod
    def constant(cls, c: complex = 1.0) -> FunctionSpec:
        return cls.polynomial([c])

    @classmethod
    def identity(cls) -> FunctionSpec:
        return cls.polynomial([0.0, 1.0])

    @classmethod
    def monomial(cls, k: int, c: complex = 1.0) -> FunctionSpec:
        return cls.polynomial([0.0] * k + [c])

    @classmethod
    def exponential_taylor(cls, xi: float, degree: int, w: complex = 1.0) -> FunctionSpec:
        """Développement de Taylor de w e^{iξx} à l'ordre donné."""
        return cls.polynomial([w * (1j * xi) ** k / math.factorial(k) for k in range(degree + 1)])

    # ---- JSON
    def to_json(self) -> dict[str, Any]:
        if self.kind == POLY:
            return {"kind": POLY, "coeffs": [_complex_to_json(c) for c in self.coeffs]}
        return {"kind": FOURIER, "atoms": [[xi, w.real, w.imag] for xi, w in self.atoms]}

    @classmethod
    def from_json(cls, data: Any) -> FunctionSpec:
        if not isinstance(data, dict) or data.get("kind") not in (POLY, FOURIER):
            raise ConfigError(f"Fonction invalide : {data!r}")
        try:
            if data["kind"] == POLY:
                return cls.polynomial(_complex_from_json(c) for c in data["coeffs"])
            return cls.fourier((float(a[0]), complex(float(a[1]), float(a[2]))) for a in data["atoms"])
        except (KeyError, TypeError, ValueError, IndexError) as e:
            raise ConfigError(f"Fonction invalide : {data!r}") from e

    # ---- propriétés scalaires
    @property
    def is_constant(self) -> bool:
        if self.kind == POLY:
            return len(self.coeffs) == 1
        return all(xi == 0.0 for xi, _ in self.atoms)

    @property
    def degree(self) -> int:
        if self.kind != POLY:
            raise UsageError("Le degré n'est défini que pour les polynômes.")
        return len(self.coeffs) - 1

    def evaluate(self, x: np.ndarray | complex) -> np.ndarray:
        x = np.asarray(x, dtype=np.complex128)
        if self.kind == POLY:
            acc = np.zeros_like(x)
            for c in reversed(self.coeffs):
                acc = acc * x + c
            return acc
        acc = np.zeros_like(x)
        for xi, w in self.atoms:
            acc = acc + w * np.exp(1j * xi * x)
        return acc

    def derivative(self) -> FunctionSpec:
        if self.kind == POLY:
            return FunctionSpec.polynomial([k * c for k, c in enumerate(self.coeffs)][1:])
        return FunctionSpec.fourier((xi, 1j * xi * w) for xi, w in self.atoms)

    def conjugate(self) -> FunctionSpec:
        """f* avec f*(X) = f(X)* pour X auto-adjoint."""
        if self.kind == POLY:
            return FunctionSpec.polynomial(c.conjugate() for c in self.coeffs)
        return FunctionSpec.fourier((-xi, w.conjugate()) for xi, w in self.atoms)

    def is_real(self) -> bool:
        """f réelle sur R (f = f*), donc φ(f(Y)) réel pour Y auto-adjoint."""
        return self == self.conjugate()

    def norm(self, k: int) -> float:
        """‖f‖_k = Σ_{i<=k} Σ |w| |ξ|^i."""
        if self.kind != FOURIER:
            raise UsageError("‖f‖_k n'est défini que pour les mesures atomiques.")
        return float(sum(abs(w) * abs(xi) ** i for i in range(k + 1) for xi, w in self.atoms))


def _complex_to_json(c: complex) -> Any:
    return c.real if c.imag == 0 else [c.real, c.imag]


def _complex_from_json(v: Any) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    return complex(float(v))


# =========================
# Calcul fonctionnel
# =========================
def _spectral(x: AlgebraElement, tol: float) -> tuple[np.ndarray, np.ndarray]:
    h = x.hermitian(tol)
    lam, vec = np.linalg.eigh(h.entries)
    return lam, vec


def _exp_stack(lam: np.ndarray, vec: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Pile des e^{i c X} = V diag(e^{i c λ}) V* pour chaque c."""
    phases = np.exp(1j * np.outer(coeffs, lam))
    return (vec[None] * phases[:, None, :]) @ vec.conj().T


def _powers(x: AlgebraElement, degree: int) -> np.ndarray:
    n = x.dimension
    out = np.empty((max(degree, 0) + 1, n, n), dtype=np.complex128)
    out[0] = np.eye(n)
    for k in range(1, degree + 1):
        out[k] = out[k - 1] @ x.entries
    return out


def apply_function(f: FunctionSpec, x: AlgebraElement, tol: float = SELF_ADJOINT_TOL) -> AlgebraElement:
    """f(X) : Horner pour un polynôme, calcul spectral pour une mesure atomique."""
    n = x.dimension
    if f.kind == POLY:
        acc = np.zeros((n, n), dtype=np.complex128)
        for c in reversed(f.coeffs):
            acc = acc @ x.entries
            acc[np.diag_indices(n)] += c
        return AlgebraElement._wrap(acc, x.space)
    if not x.is_self_adjoint(tol):
        raise UsageError("Calcul fonctionnel de Fourier sur un élément non auto-adjoint.")
    lam, vec = _spectral(x, tol)
    vals = f.evaluate(lam)
    return AlgebraElement._wrap((vec * vals) @ vec.conj().T, x.space)


def tensor_derivative(
    f: FunctionSpec,
    x: AlgebraElement,
    *,
    nodes: int = QUADRATURE_NODES,
    config: Config = Config.CONFIG2,
    tol: float = SELF_ADJOINT_TOL,
) -> TensorElement2:
    """
    ∂f(X).

    - polynôme : Σ_k a_k Σ_i X^i ⊗ X^{k-1-i}, exact
    - Fourier  : Gauss-Legendre en α, termes iξw e^{iαξX} ⊗ e^{i(1-α)ξX}
    """
    space = x.space
    if f.kind == POLY:
        pw = _powers(x, f.degree)
        lefts, rights = [], []
        for k, a in enumerate(f.coeffs):
            if k == 0 or a == 0:
                continue
            for i in range(k):
                lefts.append(a * pw[i])
                rights.append(pw[k - 1 - i])
        if not lefts:
            return TensorElement2.zero(space, config)
        return TensorElement2(np.array(lefts), np.array(rights), config, space)

    if not x.is_self_adjoint(tol):
        raise UsageError("Dérivée tensorielle de Fourier sur un élément non auto-adjoint.")
    lam, vec = _spectral(x, tol)
    alpha, weight = gauss_legendre(nodes)
    lefts, rights = [], []
    for xi, w in f.atoms:
        if xi == 0.0:
            continue
        lefts.append(_exp_stack(lam, vec, alpha * xi) * (1j * xi * w * weight)[:, None, None])
        rights.append(_exp_stack(lam, vec, (1.0 - alpha) * xi))
    if not lefts:
        return TensorElement2.zero(space, config)
    return TensorElement2(np.concatenate(lefts), np.concatenate(rights), config, space)


def second_tensor_derivative(
    f: FunctionSpec,
    x: AlgebraElement,
    *,
    nodes: int = QUADRATURE_NODES,
    config: Config = Config.CONFIG2,
    tol: float = SELF_ADJOINT_TOL,
) -> TensorElement3:
    """
    ∂²f(X).

    Pour une mesure atomique, le simplexe {a+b <= 1} est paramétré par
    a = 1-α, b = αβ (jacobien α), ce qui réutilise les nœuds 1-D :
    -ξ²w ∫dα α ∫dβ e^{i(1-α)ξX} ⊗ e^{iαβξX} ⊗ e^{iα(1-β)ξX}.
    """
    space = x.space
    if f.kind == POLY:
        pw = _powers(x, f.degree)
        firsts, middles, lasts = [], [], []
        for k, a in enumerate(f.coeffs):
            if k < 2 or a == 0:
                continue
            for i in range(k - 1):
                for j in range(k - 1 - i):
                    firsts.append(a * pw[i])
                    middles.append(pw[j])
                    lasts.append(pw[k - 2 - i - j])
        if not firsts:
            return TensorElement3.zero(space, config)
        return TensorElement3(np.array(firsts), np.array(middles), np.array(lasts), config, space)

    if not x.is_self_adjoint(tol):
        raise UsageError("Dérivée seconde de Fourier sur un élément non auto-adjoint.")
    lam, vec = _spectral(x, tol)
    nodes_1d, weights_1d = gauss_legendre(nodes)
    alpha = np.repeat(nodes_1d, nodes)
    beta = np.tile(nodes_1d, nodes)
    weight = np.repeat(weights_1d, nodes) * np.tile(weights_1d, nodes) * alpha
    firsts, middles, lasts = [], [], []
    for xi, w in f.atoms:
        if xi == 0.0:
            continue
        firsts.append(_exp_stack(lam, vec, (1.0 - alpha) * xi) * (-(xi**2) * w * weight)[:, None, None])
        middles.append(_exp_stack(lam, vec, alpha * beta * xi))
        lasts.append(_exp_stack(lam, vec, alpha * (1.0 - beta) * xi))
    if not firsts:
        return TensorElement3.zero(space, config)
    return TensorElement3(np.concatenate(firsts), np.concatenate(middles), np.concatenate(lasts), config, space)


def frechet_sharp(f: FunctionSpec, x: AlgebraElement, y: AlgebraElement, tol: float = SELF_ADJOINT_TOL) -> AlgebraElement:
    """
    df(X)(Y) par différences divisées dans la base propre de X
    (repli sur f' quand deux valeurs propres sont à moins de 1e-8).
    """
    lam, vec = _spectral(x, tol)
    f_lam = f.evaluate(lam)
    df_lam = f.derivative().evaluate(lam)
    gap = lam[:, None] - lam[None, :]
    close = np.abs(gap) < DIVIDED_DIFFERENCE_TOL
    quotient = np.divide(
        f_lam[:, None] - f_lam[None, :],
        np.where(close, 1.0, gap),
    )
    kernel = np.where(close, 0.5 * (df_lam[:, None] + df_lam[None, :]), quotient)
    rotated = vec.conj().T @ y.entries @ vec
    return AlgebraElement._wrap(vec @ (kernel * rotated) @ vec.conj().T, x.space)


def second_frechet(
    f: FunctionSpec,
    x: AlgebraElement,
    y1: AlgebraElement,
    y2: AlgebraElement,
    *,
    nodes: int = QUADRATURE_NODES,
) -> AlgebraElement:
    """d²f(X)(Y1, Y2) = Y1♯∂²f(X)♯Y2 + Y2♯∂²f(X)♯Y1."""
    d2 = second_tensor_derivative(f, x, nodes=nodes)
    return double_sharp(d2, y1, y2) + double_sharp(d2, y2, y1)


def duhamel_diff(x: AlgebraElement, y: AlgebraElement, nodes: int = QUADRATURE_NODES) -> AlgebraElement:
    """∫_0^1 e^{αX}(X-Y)e^{(1-α)Y} dα par Gauss-Legendre."""
    alpha, weight = gauss_legendre(nodes)
    diff = x.entries - y.entries
    acc = np.zeros_like(diff)
    for a, w in zip(alpha, weight):
        acc += w * (linalg.expm(a * x.entries) @ diff @ linalg.expm((1.0 - a) * y.entries))
    return AlgebraElement._wrap(acc, x.space)


def derivative_difference(
    f: FunctionSpec,
    x: AlgebraElement,
    y: AlgebraElement,
    *,
    nodes: int = QUADRATURE_NODES,
    tol: float = SELF_ADJOINT_TOL,
) -> TensorElement2:
    """
    ∂f(X) - ∂f(Y) sous forme appariée nœud à nœud :
    (A_X - A_Y)⊗B_X + A_Y⊗(B_X - B_Y), de sorte que
    proj_ub <= ‖f‖_2 ‖X - Y‖ pour une mesure atomique.
    """
    space = x.space
    if f.kind == POLY:
        px, py = _powers(x, f.degree), _powers(y, f.degree)
        lefts, rights = [], []
        for k, a in enumerate(f.coeffs):
            if k == 0 or a == 0:
                continue
            for i in range(k):
                j = k - 1 - i
                lefts += [a * (px[i] - py[i]), a * py[i]]
                rights += [px[j], px[j] - py[j]]
        if not lefts:
            return TensorElement2.zero(space)
        return TensorElement2(np.array(lefts), np.array(rights), Config.CONFIG2, space)

    lam_x, vec_x = _spectral(x, tol)
    lam_y, vec_y = _spectral(y, tol)
    alpha, weight = gauss_legendre(nodes)
    lefts, rights = [], []
    for xi, w in f.atoms:
        if xi == 0.0:
            continue
        scale = (1j * xi * w * weight)[:, None, None]
        ax, ay = _exp_stack(lam_x, vec_x, alpha * xi), _exp_stack(lam_y, vec_y, alpha * xi)
        bx, by = _exp_stack(lam_x, vec_x, (1 - alpha) * xi), _exp_stack(lam_y, vec_y, (1 - alpha) * xi)
        lefts += [scale * (ax - ay), scale * ay]
        rights += [bx, bx - by]
    if not lefts:
        return TensorElement2.zero(space)
    return TensorElement2(np.concatenate(lefts), np.concatenate(rights), Config.CONFIG2, space)


def functions_from_json(items: Sequence[Any]) -> list[FunctionSpec]:
    if not isinstance(items, (list, tuple)):
        raise ConfigError("Liste de fonctions attendue.")
    return [FunctionSpec.from_json(item) for item in items]
