from __future__ import annotations

from typing import Any, Sequence


class NcRoughError(RuntimeError):
    """
    Racine des erreurs du domaine.

    Chaque sous-classe porte le code de sortie que la CLI renvoie :
    - 2 : usage / configuration / budget
    - 3 : assertion d'étude non satisfaite
    - 4 : échec numérique (quadrature, divergence)
    """

    exit_code = 1


class UsageError(NcRoughError):
    exit_code = 2


class ConfigError(UsageError):
    pass


class BudgetError(UsageError):
    pass


class AcceptanceError(NcRoughError):
    exit_code = 3

    def __init__(self, message: str, row: dict[str, Any] | None = None) -> None:
        super().__init__(message)
        self.row = row


class NumericError(NcRoughError):
    exit_code = 4

    def __init__(self, message: str, achieved: float | None = None) -> None:
        super().__init__(message)
        self.achieved = achieved


class DivergenceError(NumericError):
    def __init__(self, message: str, history: Sequence[float]) -> None:
        super().__init__(message, achieved=history[-1] if history else None)
        self.history = list(history)
