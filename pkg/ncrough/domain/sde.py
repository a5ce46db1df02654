from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ncrough.domain.errors import DivergenceError, UsageError
from ncrough.domain.functional import FOURIER, FunctionSpec, apply_function, tensor_derivative
from ncrough.domain.matrix_model import AlgebraElement, GridPath, holder_norm
from ncrough.domain.rough import (
    AreaKind,
    BiprocessValue,
    ControlledBiprocess,
    LevyArea,
    tensor_area_indices,
)
from ncrough.domain.tensors import (
    COMPRESS_TOL,
    Config,
    TensorElement2,
    append_factor,
    compress,
    prepend_factor,
    proj_ub,
    sharp_apply,
)

logger = logging.getLogger(__name__)

SOLVER_SELF_ADJOINT_TOL = 1e-10
PICARD_TOL = 1e-8
DIVERGENCE_STREAK = 3

SAME_STAR = "same-star"
REVERSE_STAR = "reverse-star"
PAIRINGS = (SAME_STAR, REVERSE_STAR)

ONE_STEP = "one-step"
PICARD = "picard"


# =========================
# Processus contrôlés
# =========================
@dataclass(frozen=True, eq=False)
class ControlledProcess:
    """
    Y contrôlé par X : δY_{st} = 𝐘^X_s♯(δX)_{st} + Y^♭_{st}.

    `path` et `driver` partagent la même grille ; `derivatives[k]` est 𝐘^X
    au k-ième temps (CONFIG2).
    """

    path: GridPath
    derivatives: tuple[TensorElement2, ...]
    driver: GridPath

    def __post_init__(self) -> None:
        if len(self.derivatives) != self.path.grid.size:
            raise UsageError("Une dérivée de Gubinelli par temps de grille.")
        if self.driver.grid.shape != self.path.grid.shape or not np.array_equal(self.driver.grid, self.path.grid):
            raise UsageError("Processus et chemin directeur sur des grilles différentes.")
        object.__setattr__(self, "derivatives", tuple(self.derivatives))

    @classmethod
    def from_path(cls, path: GridPath) -> ControlledProcess:
        """Y = X, 𝐘^X ≡ 1⊗1."""
        unit = TensorElement2.unit(path.space)
        return cls(path, (unit,) * path.grid.size, path)

    @property
    def steps(self) -> int:
        return self.path.steps

    def value(self, k: int) -> AlgebraElement:
        return self.path.value(k)

    def residual(self, i: int, j: int) -> AlgebraElement:
        """Y^♭_{st} = (δY)_{st} - 𝐘^X_s♯(δX)_{st}."""
        dy = AlgebraElement._wrap(self.path.values[j] - self.path.values[i], self.path.space)
        dx = AlgebraElement._wrap(self.driver.values[j] - self.driver.values[i], self.path.space)
        return dy - sharp_apply(self.derivatives[i], dx)

    def self_adjoint_defect(self) -> float:
        """max_k ‖Y_k - Y_k*‖, et même écart pour 𝐘^X (classe Q∗)."""
        values = self.path.values
        defect = float(np.max(np.abs(values - np.conj(np.swapaxes(values, 1, 2)))))
        for d in self.derivatives:
            defect = max(defect, proj_ub(compress(d - d.adjoint())))
        return defect


def _evaluate(f: FunctionSpec, y: AlgebraElement, tol: float) -> AlgebraElement:
    if f.kind == FOURIER:
        y = y.hermitian(tol)
    return apply_function(f, y, tol)


def _derivative(f: FunctionSpec, y: AlgebraElement, tol: float) -> TensorElement2:
    if f.kind == FOURIER:
        y = y.hermitian(tol)
    return tensor_derivative(f, y, tol=tol)


def paired_functions(fs: Sequence[FunctionSpec], mode: str) -> list[FunctionSpec]:
    """g = (f₁*, ..., f_m*) ou (f_m*, ..., f₁*)."""
    if mode == SAME_STAR:
        return [f.conjugate() for f in fs]
    if mode == REVERSE_STAR:
        return [f.conjugate() for f in reversed(fs)]
    raise UsageError(f"Appariement inconnu : {mode}")


def _check_lists(fs: Sequence[FunctionSpec], gs: Sequence[FunctionSpec]) -> None:
    if len(fs) != len(gs):
        raise UsageError(f"Listes f et g de longueurs différentes ({len(fs)} / {len(gs)}).")
    if not fs:
        raise UsageError("Au moins un couple (f, g).")


def coefficient(fs: Sequence[FunctionSpec], gs: Sequence[FunctionSpec], y: AlgebraElement,
                tol: float = SOLVER_SELF_ADJOINT_TOL) -> TensorElement2:
    """Σ f_i(Y)⊗g_i(Y)."""
    return TensorElement2.from_terms(
        [(_evaluate(f, y, tol), _evaluate(g, y, tol)) for f, g in zip(fs, gs)], Config.CONFIG2, y.space
    )


def lift_integrand(
    fs: Sequence[FunctionSpec],
    gs: Sequence[FunctionSpec],
    y: AlgebraElement,
    derivative: TensorElement2,
    *,
    compress_tol: float = COMPRESS_TOL,
    tol: float = SOLVER_SELF_ADJOINT_TOL,
) -> BiprocessValue:
    """
    Relevé de U = Σ f_i(Y)⊗g_i(Y) en un temps :
    - 𝕌¹ = Σ [∂f_i(Y)·𝐘^X]⊗g_i(Y)
    - 𝕌² = Σ f_i(Y)⊗[∂g_i(Y)·𝐘^X]
    """
    _check_lists(fs, gs)
    space = y.space
    u = TensorElement2.zero(space)
    first = second = None
    for f, g in zip(fs, gs):
        fy, gy = _evaluate(f, y, tol), _evaluate(g, y, tol)
        u = u + TensorElement2.simple(fy, gy)
        df = compress(_derivative(f, y, tol) @ derivative, compress_tol)
        dg = compress(_derivative(g, y, tol) @ derivative, compress_tol)
        t1, t2 = append_factor(df, gy), prepend_factor(fy, dg)
        first = t1 if first is None else first + t1
        second = t2 if second is None else second + t2
    return BiprocessValue(u, first, second)


def lift_biprocess(
    fs: Sequence[FunctionSpec],
    gs: Sequence[FunctionSpec],
    y: ControlledProcess,
    *,
    compress_tol: float = COMPRESS_TOL,
) -> ControlledBiprocess:
    """Biprocessus contrôlé U = f(Y)⊗g(Y) sur la grille de Y."""
    _check_lists(fs, gs)
    return ControlledBiprocess(
        y.driver,
        lambda k: lift_integrand(fs, gs, y.value(k), y.derivatives[k], compress_tol=compress_tol),
    )


# =========================
# Solveur rugueux
# =========================
@dataclass(frozen=True)
class SdeSolution:
    process: ControlledProcess
    scheme: str
    iterations: int = 0
    gap: float = 0.0
    history: tuple[float, ...] = field(default=())

    @property
    def self_adjoint_defect(self) -> float:
        return self.process.self_adjoint_defect()


def _check_solver_inputs(
    a: AlgebraElement, fs: Sequence[FunctionSpec], gs: Sequence[FunctionSpec], self_adjoint: bool
) -> None:
    _check_lists(fs, gs)
    if not self_adjoint:
        if any(f.kind == FOURIER for f in [*fs, *gs]):
            raise UsageError("Les fonctions de Fourier demandent une solution auto-adjointe.")
        return
    if not a.is_self_adjoint(SOLVER_SELF_ADJOINT_TOL):
        raise UsageError("Condition initiale non auto-adjointe.")
    gs = list(gs)
    if gs != paired_functions(fs, SAME_STAR) and gs != paired_functions(fs, REVERSE_STAR):
        raise UsageError("g doit valoir (f₁*, ..., f_m*) ou (f_m*, ..., f₁*).")


def _step(
    fs: Sequence[FunctionSpec],
    gs: Sequence[FunctionSpec],
    y: AlgebraElement,
    area: LevyArea,
    i: int,
    j: int,
    compress_tol: float,
) -> tuple[AlgebraElement, TensorElement2]:
    """M_{st} du schéma et coefficient 𝐘^X_s = Σ f(Y_s)⊗g(Y_s)."""
    derivative = coefficient(fs, gs, y)
    lifted = lift_integrand(fs, gs, y, derivative, compress_tol=compress_tol)
    m = (
        sharp_apply(lifted.u, area.increment(i, j))
        + area.left_correction(lifted.first, i, j)
        + area.right_correction(lifted.second, i, j)
    )
    return m, derivative


def _assemble(area: LevyArea, idx: np.ndarray, values: list[np.ndarray], derivatives: list[TensorElement2]) -> ControlledProcess:
    driver = area.path.restrict(idx)
    path = GridPath(driver.grid, np.stack(values), driver.seed)
    return ControlledProcess(path, tuple(derivatives), driver)


def solve_rough_sde(
    a: AlgebraElement,
    fs: Sequence[FunctionSpec],
    gs: Sequence[FunctionSpec],
    area: LevyArea,
    coarse: Sequence[int],
    *,
    scheme: str = ONE_STEP,
    iterations: int = 50,
    picard_tol: float = PICARD_TOL,
    self_adjoint: bool = True,
    compress_tol: float = COMPRESS_TOL,
) -> SdeSolution:
    """
    dY = Σ f_i(Y)·dX·g_i(Y), Y_0 = A, sur la partition grossière `coarse`
    (indices de la grille fine de `area`).

    - one-step : Y_{k+1} = Y_k + M_{t_k t_{k+1}}
    - picard   : itérations de l'application Γ sur toute la grille, arrêt dès
      que l'écart de point fixe passe sous `picard_tol`
    """
    _check_solver_inputs(a, fs, gs, self_adjoint)
    idx = np.asarray(coarse, dtype=np.int64)
    if idx.size < 2 or np.any(np.diff(idx) <= 0) or idx[0] != 0 or idx[-1] > area.path.steps:
        raise UsageError("Partition grossière invalide (doit commencer en 0).")
    if a.space != area.space:
        raise UsageError("Condition initiale et chemin d'espaces différents.")

    if scheme == ONE_STEP:
        y = a
        values, derivatives = [a.entries], []
        for i, j in zip(idx[:-1], idx[1:]):
            m, derivative = _step(fs, gs, y, area, int(i), int(j), compress_tol)
            derivatives.append(derivative)
            y = y + m
            values.append(y.entries)
        derivatives.append(coefficient(fs, gs, y))
        logger.debug("solve_rough_sde one-step : %s pas", idx.size - 1)
        return SdeSolution(_assemble(area, idx, values, derivatives), ONE_STEP)

    if scheme != PICARD:
        raise UsageError(f"Schéma inconnu : {scheme}")
    if iterations < 1:
        raise UsageError("Au moins une itération de Picard.")

    current = [a.entries] * idx.size
    history: list[float] = []
    streak = 0
    for it in range(1, iterations + 1):
        nxt = [a.entries]
        acc = a
        for k, (i, j) in enumerate(zip(idx[:-1], idx[1:])):
            yk = AlgebraElement._wrap(current[k], a.space)
            m, _ = _step(fs, gs, yk, area, int(i), int(j), compress_tol)
            acc = acc + m
            nxt.append(acc.entries)
        gap = float(max(np.max(np.abs(x - y)) for x, y in zip(nxt, current)))
        history.append(gap)
        current = nxt
        logger.debug("Picard itération %s : écart %.3g", it, gap)
        streak = streak + 1 if len(history) > 1 and gap > history[-2] else 0
        if streak >= DIVERGENCE_STREAK:
            raise DivergenceError(f"Picard diverge après {it} itérations.", history)
        if gap < picard_tol:
            break
    else:
        logger.warning("Picard : écart %.3g après %s itérations", history[-1], iterations)

    # 𝐘^X cohérent avec la dernière itérée
    final = [coefficient(fs, gs, AlgebraElement._wrap(v, a.space)) for v in current]
    return SdeSolution(_assemble(area, idx, current, final), PICARD, len(history), history[-1], tuple(history))


# =========================
# Équation à coefficient tracé
# =========================
def solve_trace_sde(a: AlgebraElement, f: FunctionSpec, area: LevyArea, coarse: Sequence[int]) -> GridPath:
    """
    dY = φ(f(Y)) dX.

    Y_{k+1} = Y_k + c_k (δX)_k + c_k s_k avec c_k = Re φ(f(Y_k)),
    s_k = (φ×Id)[(W⊗1)·𝐓_k], W = Σ b_i a_i pour ∂f(Y_k) = Σ a_i⊗b_i
    et 𝐓_k l'aire tensorielle du pas (point milieu hors Itô).
    """
    if not f.is_real():
        raise UsageError("f doit être réelle (mesure symétrique) pour φ(f(Y)) réel.")
    if not a.is_self_adjoint(SOLVER_SELF_ADJOINT_TOL):
        raise UsageError("Condition initiale non auto-adjointe.")
    idx = np.asarray(coarse, dtype=np.int64)
    if idx.size < 2 or np.any(np.diff(idx) <= 0) or idx[0] != 0 or idx[-1] > area.path.steps:
        raise UsageError("Partition grossière invalide (doit commencer en 0).")
    path = area.path
    geometric = area.kind is not AreaKind.ITO
    n = path.dimension
    y = a
    values = [a.entries]
    for i, j in zip(idx[:-1], idx[1:]):
        yh = y.hermitian(SOLVER_SELF_ADJOINT_TOL)
        c = float(apply_function(f, yh).trace().real)
        d = tensor_derivative(f, yh)
        w = np.einsum("kab,kbc->ac", d.right, d.left) if d.num_terms else np.zeros((n, n), dtype=np.complex128)
        t = tensor_area_indices(path, int(i), int(j), geometric=geometric)
        weights = (np.einsum("ab,kba->k", w, t.left) / n).real
        s = np.einsum("k,kab->ab", weights, t.right)
        y = y + AlgebraElement._wrap(c * (path.values[j] - path.values[i] + s), a.space)
        values.append(y.entries)
    return GridPath(path.grid[idx], np.stack(values), path.seed)


# =========================
# Intégrateurs de référence
# =========================
def euler_trace_reference(a: AlgebraElement, f: FunctionSpec, path: GridPath) -> GridPath:
    """Euler sur tous les pas fins : Y_{m+1} = Y_m + φ(f(Y_m)) δX_m."""
    d = path.increments()
    values = [a.entries]
    y = a.entries
    for m in range(path.steps):
        yh = AlgebraElement._wrap(y, a.space).hermitian(SOLVER_SELF_ADJOINT_TOL)
        c = float(apply_function(f, yh).trace().real)
        y = y + c * d[m]
        values.append(y)
    return GridPath(path.grid, np.stack(values), path.seed)


def rk4_reference(
    a: AlgebraElement,
    fs: Sequence[FunctionSpec],
    gs: Sequence[FunctionSpec],
    path: GridPath,
    *,
    substeps: int = 4,
) -> GridPath:
    """
    RK4 classique pour dY/du = Σ f_i(Y) X'_u g_i(Y), X affine par morceaux
    sur la grille fine (X' constant par pas).
    """
    _check_lists(fs, gs)
    if substeps < 1:
        raise UsageError("Au moins un sous-pas.")
    space = a.space

    def rhs(y: np.ndarray, slope: np.ndarray) -> np.ndarray:
        ye = AlgebraElement._wrap(y, space)
        acc = np.zeros_like(y)
        for f, g in zip(fs, gs):
            acc += _evaluate(f, ye, 1e-8).entries @ slope @ _evaluate(g, ye, 1e-8).entries
        return acc

    d = path.increments()
    dt = np.diff(path.grid)
    y = a.entries.copy()
    values = [y.copy()]
    for m in range(path.steps):
        slope = d[m] / dt[m]
        h = dt[m] / substeps
        for _ in range(substeps):
            k1 = rhs(y, slope)
            k2 = rhs(y + 0.5 * h * k1, slope)
            k3 = rhs(y + 0.5 * h * k2, slope)
            k4 = rhs(y + h * k3, slope)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        values.append(y.copy())
    return GridPath(path.grid, np.stack(values), path.seed)


# =========================
# Semi-norme de contrôle
# =========================
@dataclass(frozen=True)
class QSeminorm:
    holder: float
    sup_derivative: float
    holder_derivative: float
    remainder: float

    @property
    def total(self) -> float:
        return self.holder + self.sup_derivative + self.holder_derivative + self.remainder


def picard_bound_report(y: ControlledProcess, gamma: float = 0.4) -> QSeminorm:
    """N[Y; Q(X)] = ‖Y‖_γ + sup‖𝐘^X‖ + ‖𝐘^X‖_γ + ‖Y^♭‖_{2γ}, normes tensorielles par proj_ub."""
    grid = y.path.grid
    holder_derivative = 0.0
    remainder = 0.0
    for i in range(y.steps + 1):
        for j in range(i + 1, y.steps + 1):
            dt = grid[j] - grid[i]
            diff = proj_ub(compress(y.derivatives[j] - y.derivatives[i]))
            holder_derivative = max(holder_derivative, diff / dt**gamma)
            remainder = max(remainder, y.residual(i, j).norm() / dt ** (2 * gamma))
    report = QSeminorm(
        holder=holder_norm(y.path, gamma) if y.steps else 0.0,
        sup_derivative=max(proj_ub(d) for d in y.derivatives),
        holder_derivative=holder_derivative,
        remainder=remainder,
    )
    logger.info("N[Y;Q(X)] = %.6g (γ=%s)", report.total, gamma)
    return report
