from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

from ncrough.domain.errors import ConfigError
from ncrough.domain.functional import QUADRATURE_NODES, FunctionSpec
from ncrough.domain.matrix_model import MAX_PATH_BYTES, SELF_ADJOINT_TOL
from ncrough.domain.rough import REFINEMENT_TOL, SEWING_SLACK
from ncrough.domain.tensors import COMPRESS_TOL, MAX_SPATIAL_DIMENSION

logger = logging.getLogger(__name__)

DEFAULT_SEED = 42
CONFIG_SCHEMA_VERSION = 1

# Constantes numériques partagées (rappelées dans le manifeste de chaque exécution)
NUMERICS: dict[str, Any] = {
    "slack": SEWING_SLACK,
    "self_adjoint_tol": SELF_ADJOINT_TOL,
    "refinement_tol": REFINEMENT_TOL,
    "quadrature_nodes": QUADRATURE_NODES,
    "compress_tol": COMPRESS_TOL,
    "max_spatial_dimension": MAX_SPATIAL_DIMENSION,
    "max_path_bytes": MAX_PATH_BYTES,
}

_X = {"kind": "poly", "coeffs": [0.0, 1.0]}
_X2 = {"kind": "poly", "coeffs": [0.0, 0.0, 1.0]}

# =========================
# Valeurs par défaut (une entrée par commande / étude)
# =========================
DEFAULTS: dict[str, dict[str, Any]] = {
    "moments": {"q": 0.0, "order": 4, "times": None, "density": True},
    "simulate": {"dimension": 16, "fine_exp": 10, "horizon": 1.0, "path_id": 0},
    "integrate": {
        "dimension": 16,
        "fine_exp": 8,
        "coarse_exp": 3,
        "horizon": 1.0,
        "f": _X2,
        "area": "stratonovich",
        "path_file": None,
        "tol": REFINEMENT_TOL,
    },
    "solve": {
        "dimension": 16,
        "fine_exp": 8,
        "coarse_exp": 4,
        "horizon": 1.0,
        "f": [_X],
        "g": [_X],
        "initial": "random",
        "initial_file": None,
        "pairing": "explicit",
        "initial_scale": 0.1,
        "area": "stratonovich",
        "scheme": "one-step",
        "iterations": 50,
        "picard_tol": 1e-8,
        "self_adjoint": True,
        "trace": False,
        "path_file": None,
    },
    "study:area-convergence": {
        "dimension": 128,
        "fine_exp": 10,
        "coarse_exps": [2, 3, 4, 5, 6],
        "n_seeds": 10,
        "gamma": 0.4,
        "tensor_samples": 2,
        "geometric_dimension": 16,
        "min_rate": 0.2,
        "final_ratio": 0.3,
        "noise": 1.2,
    },
    "study:solution-convergence": {
        "dimension": 128,
        "fine_exp": 10,
        "coarse_exps": [2, 3, 4, 5, 6],
        "solve_exp": 6,
        "n_seeds": 10,
        "f": [_X],
        "g": [_X],
        "initial_scale": 0.1,
        "gamma": 0.4,
        "min_rate": 0.2,
        "noise": 1.2,
    },
    "study:ito-formula": {
        "dimension": 256,
        "fine_exp": 10,
        "coarse_exp": 3,
        "n_seeds": 10,
        "functions": None,
        "qv_threshold": 0.1,
        "cubic_threshold": 0.05,
    },
    "study:ito-strato": {
        "dimension": 128,
        "fine_exp": 10,
        "coarse_exp": 3,
        "n_seeds": 1,
        "pairs": None,
        "threshold": 5e-3,
    },
    "study:bg": {"dimension": 64, "fine_exp": 8, "coarse_exp": 5, "n_seeds": 20, "slack": SEWING_SLACK},
    "study:nonextension": {
        "dimension": 256,
        "n_list": [1, 2, 4, 8, 16],
        "slack": SEWING_SLACK,
        "growth_slack": 0.8,
        "max_dimension": 256,
    },
    "study:bounds": {
        "dimension": 64,
        "fine_exp": 10,
        "coarse_exp": 4,
        "mesh_exps": [2, 4, 6, 8],
        "dimensions": [64, 128, 256],
        "amplitudes": [0.25, 0.5, 1.0],
        "lipschitz_dimension": 8,
        "lipschitz_samples": 4,
        "trace_samples": 8,
        "gamma": 0.4,
        "slack": SEWING_SLACK,
    },
}

STUDY_NAMES = tuple(k.split(":", 1)[1] for k in DEFAULTS if k.startswith("study:"))

# clés dont la valeur est une fonction (ou une liste de fonctions) au format JSON
_FUNCTION_KEYS = {"f", "g"}
_CHOICES = {
    "area": ("ito", "stratonovich", "lebesgue"),
    "scheme": ("one-step", "picard"),
    "initial": ("random", "zero", "identity"),
    "pairing": ("explicit", "same-star", "reverse-star"),
}
_INT_RANGES = {
    "dimension": (1, 512),
    "geometric_dimension": (1, 128),
    "lipschitz_dimension": (1, 64),
    "max_dimension": (1, 512),
    "fine_exp": (0, 16),
    "coarse_exp": (0, 16),
    "solve_exp": (0, 16),
    "order": (0, 24),
    "n_seeds": (1, 1000),
    "tensor_samples": (1, 64),
    "iterations": (1, 10_000),
    "lipschitz_samples": (1, 1000),
    "trace_samples": (1, 1000),
    "path_id": (0, 2**31 - 1),
}
_POSITIVE = {
    "horizon", "tol", "picard_tol", "min_rate", "noise", "final_ratio", "threshold",
    "qv_threshold", "cubic_threshold", "slack", "growth_slack",
}


# =========================
# RunConfig
# =========================
@dataclass
class RunConfig:
    """
    Configuration complète d'une exécution : commande, paramètres (fusionnés
    et validés), graine maîtresse, dossier de sortie.
    """

    command: str
    params: dict[str, Any]
    seed: int = DEFAULT_SEED
    output_dir: Path | None = None

    @property
    def study(self) -> str | None:
        return self.command.split(":", 1)[1] if self.command.startswith("study:") else None

    def seeds(self) -> list[int]:
        """Graines dérivées de la graine maîtresse : seed, seed+1, ..."""
        return [self.seed + k for k in range(int(self.params.get("n_seeds", 1)))]

    def to_json(self) -> dict[str, Any]:
        return {
            "schema_version": CONFIG_SCHEMA_VERSION,
            "command": self.command,
            "params": copy.deepcopy(self.params),
            "seed": self.seed,
            "output_dir": None if self.output_dir is None else str(self.output_dir),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_json(cls, data: Any) -> RunConfig:
        if not isinstance(data, dict) or "command" not in data:
            raise ConfigError("Configuration sans commande.")
        command = data["command"]
        if command not in DEFAULTS:
            raise ConfigError(f"Commande inconnue : {command}")
        params = default_params(command)
        _merge(params, data.get("params") or {}, command)
        seed = data.get("seed", DEFAULT_SEED)
        out = data.get("output_dir")
        cfg = cls(command, params, _check_seed(seed), None if out is None else Path(out))
        validate(cfg)
        return cfg


def default_params(command: str) -> dict[str, Any]:
    """Copie indépendante des défauts : f et g ne partagent aucun sous-objet."""
    return json.loads(json.dumps(DEFAULTS[command]))


def _check_seed(seed: Any) -> int:
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"Graine invalide : {seed!r}")
    return seed


# =========================
# Fusion et surcharges
# =========================
def _merge(params: dict[str, Any], incoming: Any, command: str) -> None:
    if not isinstance(incoming, dict):
        raise ConfigError("Les paramètres doivent former un objet JSON.")
    for key, value in incoming.items():
        if key not in params:
            raise ConfigError(f"Clé inconnue pour {command} : {key}")
        params[key] = copy.deepcopy(value)


def parse_value(raw: str) -> Any:
    """Valeur de surcharge : JSON si possible, sinon chaîne brute."""
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_overrides(tokens: Sequence[str]) -> list[tuple[str, Any]]:
    """
    `--cle valeur`, `--cle=valeur` et chemins pointés `--f.coeffs [0,1]`.
    """
    out: list[tuple[str, Any]] = []
    it = iter(tokens)
    for token in it:
        if not token.startswith("--") or len(token) == 2:
            raise ConfigError(f"Surcharge inattendue : {token}")
        body = token[2:]
        if "=" in body:
            key, raw = body.split("=", 1)
        else:
            key = body
            try:
                raw = next(it)
            except StopIteration:
                raise ConfigError(f"Valeur manquante pour --{key}") from None
        out.append((key.replace("-", "_"), parse_value(raw)))
    return out


def apply_override(params: dict[str, Any], dotted: str, value: Any, command: str) -> None:
    head, *rest = dotted.split(".")
    if head not in params:
        raise ConfigError(f"Clé inconnue pour {command} : {head}")
    if not rest:
        params[head] = value
        return
    node = params[head]
    for part in rest[:-1]:
        node = _child(node, part, dotted)
    last = rest[-1]
    if isinstance(node, list):
        node[_list_index(node, last, dotted)] = value
    elif isinstance(node, dict):
        node[last] = value
    else:
        raise ConfigError(f"Chemin invalide : {dotted}")


def _child(node: Any, part: str, dotted: str) -> Any:
    if isinstance(node, dict) and part in node:
        return node[part]
    if isinstance(node, list):
        return node[_list_index(node, part, dotted)]
    raise ConfigError(f"Chemin invalide : {dotted}")


def _list_index(node: list, part: str, dotted: str) -> int:
    if not part.isdigit() or int(part) >= len(node):
        raise ConfigError(f"Indice invalide dans {dotted}")
    return int(part)


def load_config(
    command: str,
    *,
    config_file: Path | None = None,
    overrides: Sequence[tuple[str, Any]] = (),
    seed: int | None = None,
    output_dir: Path | None = None,
) -> RunConfig:
    """
    Défauts de la commande <- fichier JSON <- surcharges de la ligne de commande.
    Le fichier peut contenir soit les seuls paramètres, soit un RunConfig complet.
    """
    if command not in DEFAULTS:
        raise ConfigError(f"Commande inconnue : {command}")
    params = default_params(command)
    file_seed: Any = None
    if config_file is not None:
        path = Path(config_file)
        if not path.is_file():
            raise ConfigError(f"Fichier de configuration introuvable : {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Configuration illisible : {path} ({e})") from e
        if isinstance(data, dict) and "params" in data:
            if data.get("command", command) != command:
                raise ConfigError(f"Le fichier décrit la commande {data['command']}, pas {command}.")
            file_seed = data.get("seed")
            data = data["params"]
        _merge(params, data, command)
    for dotted, value in overrides:
        apply_override(params, dotted, value, command)

    chosen = seed if seed is not None else file_seed if file_seed is not None else DEFAULT_SEED
    cfg = RunConfig(command, params, _check_seed(chosen), output_dir)
    validate(cfg)
    logger.debug("configuration %s : %s", command, params)
    return cfg


# =========================
# Validation
# =========================
def _type_ok(default: Any, value: Any) -> bool:
    if default is None:
        return True
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    return isinstance(value, type(default))


def _check_functions(key: str, value: Any) -> None:
    items = value if isinstance(value, list) else [value]
    for item in items:
        FunctionSpec.from_json(item)


def validate(cfg: RunConfig) -> None:
    """Schéma complet, avant tout calcul."""
    defaults = DEFAULTS[cfg.command]
    params = cfg.params
    for key, value in params.items():
        default = defaults[key]
        if value is None and default is None:
            continue
        if value is None and key in {"final_ratio", "noise"}:
            continue
        if not _type_ok(default, value):
            raise ConfigError(f"Type invalide pour {key} : {value!r}")
        if isinstance(default, float) and not isinstance(value, bool):
            params[key] = value = float(value)
        if key in _INT_RANGES:
            lo, hi = _INT_RANGES[key]
            if not lo <= value <= hi:
                raise ConfigError(f"{key} hors bornes [{lo}, {hi}] : {value}")
        if key in _POSITIVE and value is not None:
            if isinstance(value, bool) or not isinstance(value, (int, float)) or value <= 0:
                raise ConfigError(f"{key} doit être > 0 (reçu {value!r})")
        if key in _CHOICES and value not in _CHOICES[key]:
            raise ConfigError(f"{key} doit valoir l'un de {_CHOICES[key]} (reçu {value!r})")
        if key in _FUNCTION_KEYS:
            _check_functions(key, value)

    if "q" in params and not -1.0 < params["q"] < 1.0:
        raise ConfigError(f"q doit appartenir à ]-1, 1[ (reçu {params['q']})")
    if "gamma" in params and not 0.0 < params["gamma"] < 0.5:
        raise ConfigError(f"γ doit appartenir à ]0, 1/2[ (reçu {params['gamma']})")
    if params.get("slack", 1.0) < 1.0:
        raise ConfigError("slack doit être >= 1.")
    if "initial_scale" in params and params["initial_scale"] < 0:
        raise ConfigError("initial_scale doit être >= 0.")
    if cfg.command == "moments" and params["times"] is not None:
        times = params["times"]
        if not isinstance(times, list) or not all(isinstance(t, (int, float)) and t >= 0 for t in times):
            raise ConfigError("times doit être une liste de temps >= 0.")
        if len(times) % 2:
            raise ConfigError("Un nombre pair de temps est requis.")
    for key in ("path_file", "initial_file"):
        if params.get(key) is not None and not isinstance(params[key], str):
            raise ConfigError(f"{key} doit être un chemin de fichier.")
    _check_exponents(params)
    _check_lists(cfg.command, params)


def _int_list(key: str, value: Any, lo: int, hi: int) -> None:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{key} doit être une liste non vide.")
    for v in value:
        if isinstance(v, bool) or not isinstance(v, int) or not lo <= v <= hi:
            raise ConfigError(f"{key} : valeur invalide {v!r}")


def _check_exponents(params: dict[str, Any]) -> None:
    fine = params.get("fine_exp")
    if fine is None:
        return
    if params.get("coarse_exp", 0) > fine:
        raise ConfigError("coarse_exp doit être <= fine_exp.")
    if "coarse_exps" in params:
        _int_list("coarse_exps", params["coarse_exps"], 0, fine)
        if len(params["coarse_exps"]) < 2:
            raise ConfigError("Au moins deux pas grossiers pour ajuster un taux.")
    if "mesh_exps" in params:
        _int_list("mesh_exps", params["mesh_exps"], 0, fine)
    if "solve_exp" in params and not min(params["coarse_exps"]) <= params["solve_exp"] <= fine:
        raise ConfigError("solve_exp doit être compris entre min(coarse_exps) et fine_exp.")


def _check_lists(command: str, params: dict[str, Any]) -> None:
    if "n_list" in params:
        _int_list("n_list", params["n_list"], 1, 4096)
    if "dimensions" in params:
        _int_list("dimensions", params["dimensions"], 1, 512)
    if "amplitudes" in params:
        amps = params["amplitudes"]
        if not isinstance(amps, list) or not amps or not all(
            isinstance(a, (int, float)) and not isinstance(a, bool) and a > 0 for a in amps
        ):
            raise ConfigError("amplitudes doit être une liste de réels > 0.")
    if command == "solve" and params["pairing"] != "explicit":
        # g déduit de f : seule f compte
        if not isinstance(params["f"], list) or not params["f"]:
            raise ConfigError("f doit être une liste non vide.")
    elif command in ("solve", "study:solution-convergence"):
        if not isinstance(params["f"], list) or len(params["f"]) != len(params["g"]) or not params["f"]:
            raise ConfigError("f et g doivent être deux listes de même longueur.")
    if params.get("functions") is not None:
        items = params["functions"]
        if not isinstance(items, list) or not items:
            raise ConfigError("functions doit être une liste non vide.")
        for item in items:
            if not isinstance(item, dict) or "label" not in item or "f" not in item:
                raise ConfigError("Chaque fonction : {\"label\": ..., \"f\": ...}.")
            FunctionSpec.from_json(item["f"])
    if params.get("pairs") is not None:
        items = params["pairs"]
        if not isinstance(items, list) or not items:
            raise ConfigError("pairs doit être une liste non vide.")
        for item in items:
            if not isinstance(item, dict) or not {"label", "f", "g"} <= set(item):
                raise ConfigError("Chaque paire : {\"label\": ..., \"f\": [...], \"g\": [...]}.")
            if not isinstance(item["f"], list) or len(item["f"]) != len(item["g"]):
                raise ConfigError("f et g d'une paire doivent avoir la même longueur.")
            _check_functions("f", item["f"])
            _check_functions("g", item["g"])
