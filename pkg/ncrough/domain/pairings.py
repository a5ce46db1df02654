from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Sequence, Union

import numpy as np
from scipy import integrate

from ncrough.domain.errors import AcceptanceError, BudgetError, NumericError, UsageError

logger = logging.getLogger(__name__)

Scalar = Union[int, float, Fraction]

MAX_PAIRING_SIZE = 20
MAX_DENSITY_ORDER = 12
PRODUCT_TOL = 1e-14


# =========================
# Appariements
# =========================
@dataclass(frozen=True)
class Pairing:
    """
    Partition de {1, ..., 2p} en blocs de deux éléments.

    Les blocs sont stockés ordonnés : (x, y) avec x < y, triés par x.
    """

    blocks: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        normalized = tuple(sorted((min(a, b), max(a, b)) for a, b in self.blocks))
        seen = [i for block in normalized for i in block]
        if sorted(seen) != list(range(1, len(seen) + 1)) or any(a == b for a, b in normalized):
            raise UsageError(f"Appariement invalide : {self.blocks!r}")
        object.__setattr__(self, "blocks", normalized)

    @property
    def size(self) -> int:
        return 2 * len(self.blocks)

    def reversed(self) -> Pairing:
        n = self.size + 1
        return Pairing(tuple((n - b, n - a) for a, b in self.blocks))


def _pairings(free: tuple[int, ...]) -> Iterator[list[tuple[int, int]]]:
    # on apparie toujours le plus petit indice libre
    if not free:
        yield []
        return
    first = free[0]
    for k in range(1, len(free)):
        rest = free[1:k] + free[k + 1 :]
        for tail in _pairings(rest):
            yield [(first, free[k]), *tail]


def _check_size(r: int) -> None:
    if r < 0:
        raise UsageError(f"Taille négative : {r}")
    if r > MAX_PAIRING_SIZE:
        raise BudgetError(f"Budget combinatoire dépassé : r={r} > {MAX_PAIRING_SIZE}")


def enumerate_pairings(r: int) -> list[Pairing]:
    """Tous les (r-1)!! appariements de {1..r} ; liste vide si r est impair."""
    _check_size(r)
    if r % 2:
        return []
    return [Pairing(tuple(blocks)) for blocks in _pairings(tuple(range(1, r + 1)))]


def crossing_number(pairing: Pairing) -> int:
    blocks = pairing.blocks
    count = 0
    for i, (x1, y1) in enumerate(blocks):
        for x2, y2 in blocks[i + 1 :]:
            if x1 < x2 < y1 < y2:
                count += 1
    return count


def double_factorial(n: int) -> int:
    return math.prod(range(n, 0, -2)) if n > 0 else 1


@lru_cache(maxsize=None)
def crossing_polynomial(r: int) -> tuple[int, ...]:
    """
    Coefficients entiers de q ↦ Σ_π q^{Cr(π)} sur les appariements de {1..r}.

    Parcours gauche-droite des positions : on ouvre un arc ou on ferme l'un
    des h arcs ouverts. Fermer l'arc qui a i arcs ouverts plus récents que lui
    crée exactement i croisements, d'où le facteur 1 + q + ... + q^{h-1}.
    """
    _check_size(r)
    if r % 2:
        return (0,)
    p = r // 2
    degree = p * (p - 1) // 2
    # states[h] = polynôme (liste de coefficients) pour h arcs ouverts
    states: dict[int, list[int]] = {0: [1] + [0] * degree}
    for position in range(r):
        remaining = r - position
        nxt: dict[int, list[int]] = {}
        for h, poly in states.items():
            if h + 1 <= remaining - 1:
                acc = nxt.setdefault(h + 1, [0] * (degree + 1))
                for k, c in enumerate(poly):
                    acc[k] += c
            if h > 0:
                acc = nxt.setdefault(h - 1, [0] * (degree + 1))
                for k, c in enumerate(poly):
                    if c:
                        for i in range(h):
                            acc[k + i] += c
        states = nxt
    return tuple(states[0])


def _horner(coeffs: Sequence[int], q: Scalar) -> Scalar:
    acc: Scalar = 0
    for c in reversed(coeffs):
        acc = acc * q + c
    return acc


# =========================
# Moments q-gaussiens
# =========================
def _exact(x: object) -> Fraction | None:
    if isinstance(x, bool):
        return None
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    return None


@dataclass(frozen=True)
class MomentQuery:
    """
    Moment joint φ(X(f_1)...X(f_r)) d'un processus q-gaussien.

    Forme temporelle : `times` (G(i,j) = t_i ∧ t_j) ; forme générale : `gram`
    (matrice de Gram symétrique des ⟨f_i, f_j⟩).
    """

    q: Scalar
    times: tuple[Scalar, ...] | None = None
    gram: tuple[tuple[Scalar, ...], ...] | None = None

    def __post_init__(self) -> None:
        if (self.times is None) == (self.gram is None):
            raise UsageError("Fournir exactement un de `times` ou `gram`.")
        if not -1 < float(self.q) < 1:
            raise UsageError(f"q doit appartenir à ]-1, 1[ (reçu {self.q})")
        if self.times is not None:
            object.__setattr__(self, "times", tuple(self.times))
            if any(float(t) < 0 for t in self.times):
                raise UsageError("Les temps doivent être positifs.")
        else:
            gram = tuple(tuple(row) for row in self.gram)  # type: ignore[union-attr]
            n = len(gram)
            if any(len(row) != n for row in gram):
                raise UsageError("La matrice de Gram doit être carrée.")
            if any(gram[i][j] != gram[j][i] for i in range(n) for j in range(i)):
                raise UsageError("La matrice de Gram doit être symétrique.")
            object.__setattr__(self, "gram", gram)
        _check_size(self.order)

    @property
    def order(self) -> int:
        return len(self.times) if self.times is not None else len(self.gram)  # type: ignore[arg-type]

    def covariance(self, i: int, j: int) -> Scalar:
        """Entrée G(i,j), indices 1-based comme dans les appariements."""
        if self.times is not None:
            return min(self.times[i - 1], self.times[j - 1])
        return self.gram[i - 1][j - 1]  # type: ignore[index]

    def entries(self) -> list[Scalar]:
        if self.times is not None:
            return list(self.times)
        return [x for row in self.gram for x in row]  # type: ignore[union-attr]

    def is_exact(self) -> bool:
        return _exact(self.q) is not None and all(_exact(x) is not None for x in self.entries())


def q_joint_moment(query: MomentQuery) -> Scalar:
    """
    Σ_π q^{Cr(π)} Π G(i,j). Arithmétique rationnelle exacte si q et les
    entrées sont des entiers ou des Fraction ; les moments impairs valent 0.
    """
    r = query.order
    if r % 2:
        return Fraction(0) if query.is_exact() else 0.0

    exact = query.is_exact()
    q: Scalar = Fraction(query.q) if exact else float(query.q)
    values = [Fraction(x) if exact else float(x) for x in query.entries()]

    if values and all(v == values[0] for v in values):
        # covariance constante : voie rapide par le polynôme de croisement
        return values[0] ** (r // 2) * _horner(crossing_polynomial(r), q)
    if r == 0:
        return Fraction(1) if exact else 1.0

    total: Scalar = Fraction(0) if exact else 0.0
    for pairing in enumerate_pairings(r):
        term: Scalar = q ** crossing_number(pairing)
        for i, j in pairing.blocks:
            g = query.covariance(i, j)
            term = term * (Fraction(g) if exact else float(g))
        total += term
    return total


def q_gaussian_moment(order: int, q: Scalar, variance: Scalar = 1) -> Scalar:
    """Moment d'ordre `order` d'une q-gaussienne de variance donnée."""
    return q_joint_moment(MomentQuery(q=q, times=(variance,) * order))


def support_edge(q: float) -> float:
    """Bord du support de ν_q : 2/√(1-q)."""
    return 2.0 / math.sqrt(1.0 - q)


# =========================
# Densité ν_q
# =========================
def _product_powers(q: float) -> np.ndarray:
    if q == 0.0:
        return np.zeros(0)
    n_max = 1
    while 4.0 * abs(q) ** n_max >= PRODUCT_TOL:
        n_max += 1
    return q ** np.arange(1, n_max + 1)


def density_moment(q: float, order: int) -> float:
    """
    ∫ x^order ν_q(dx) par quadrature adaptative en θ.

    - x = 2cos θ / √(1-q), θ ∈ [0, π]
    - ν_q(dθ) = (2/π) sin²θ Π_n (1-q^n)|1-q^n e^{2iθ}|² dθ
    - produit tronqué dès que les facteurs restent à moins de 1e-14 de 1
    """
    q = float(q)
    if not -1 < q < 1:
        raise UsageError(f"q doit appartenir à ]-1, 1[ (reçu {q})")
    if order < 0:
        raise UsageError(f"Ordre négatif : {order}")
    if order > MAX_DENSITY_ORDER:
        raise BudgetError(f"Ordre {order} > {MAX_DENSITY_ORDER}")

    powers = _product_powers(q)
    scale = 2.0 / math.sqrt(1.0 - q)

    def integrand(theta: float) -> float:
        weight = (2.0 / math.pi) * math.sin(theta) ** 2
        if powers.size:
            c2 = math.cos(2.0 * theta)
            weight *= float(np.prod((1.0 - powers) * (1.0 - 2.0 * powers * c2 + powers * powers)))
        return (scale * math.cos(theta)) ** order * weight

    out = integrate.quad(integrand, 0.0, math.pi, epsabs=1e-13, epsrel=1e-12, limit=200, full_output=1)
    value, err = out[0], out[1]
    if len(out) > 3 or err > 1e-9:
        raise NumericError(
            f"Quadrature non convergée (q={q}, ordre={order}, erreur={err:.3g})",
            achieved=err,
        )
    logger.debug("density_moment q=%s ordre=%s -> %.17g (err %.2g)", q, order, value, err)
    return value


def moment_bound_check(n: int, p: int, q: float) -> tuple[float, float]:
    """
    Somme indexée sur les appariements = φ(X_n^{2p}) = n^p m_{2p}(q),
    comparée à la borne n^p (2/√(1-q))^{2p}.
    """
    if n < 1 or p < 1:
        raise UsageError("n et p doivent être >= 1.")
    if 2 * p > 16 or n > 64:
        raise BudgetError(f"Budget dépassé : n={n}, 2p={2 * p}")
    value = float(q_gaussian_moment(2 * p, q, variance=n))
    bound = float(n**p * support_edge(float(q)) ** (2 * p))
    if not 0.0 <= value <= bound:
        raise AcceptanceError(
            f"Borne des moments violée : {value} > {bound}",
            row={"n": n, "p": p, "q": q, "sum": value, "bound": bound},
        )
    return value, bound
