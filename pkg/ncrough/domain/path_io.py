from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ncrough.domain.errors import UsageError
from ncrough.domain.matrix_model import AlgebraElement, GridPath

# Format binaire (little-endian, doubles IEEE 8 octets) :
#   en-tête  : magic b"NCRP", version u32, N u32, M u32, T f64, seed i64 (-1 si absent)
#   grille   : (M+1) × f64
#   valeurs  : (M+1) × N × N × complex128, ligne par ligne
MAGIC = b"NCRP"
VERSION = 1
_HEADER = struct.Struct("<4sIIIdq")


def save_path(path: GridPath, out_path: Path) -> Path:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    seed = -1 if path.seed is None else int(path.seed)
    header = _HEADER.pack(MAGIC, VERSION, path.dimension, path.steps, path.horizon, seed)
    with out_path.open("wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(path.grid, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(path.values, dtype="<c16").tobytes())
    return out_path


def load_path(in_path: Path) -> GridPath:
    data = Path(in_path).read_bytes()
    if len(data) < _HEADER.size:
        raise UsageError(f"Fichier de chemin tronqué : {in_path}")
    magic, version, n, m, _horizon, seed = _HEADER.unpack_from(data, 0)
    if magic != MAGIC or version != VERSION:
        raise UsageError(f"Format de chemin inconnu : {in_path}")
    offset = _HEADER.size
    count = (m + 1) * n * n
    # taille totale vérifiée avant toute lecture de la grille
    if len(data) != offset + 8 * (m + 1) + 16 * count:
        raise UsageError(f"Taille de fichier incohérente : {in_path}")
    grid = np.frombuffer(data, dtype="<f8", count=m + 1, offset=offset)
    offset += grid.nbytes
    values = np.frombuffer(data, dtype="<c16", count=count, offset=offset).reshape(m + 1, n, n)
    return GridPath(grid.astype(np.float64), values.astype(np.complex128), None if seed < 0 else seed)


def save_element(x: AlgebraElement, out_path: Path) -> Path:
    """Une matrice seule : chemin à un point (M = 0, t_0 = 0)."""
    return save_path(GridPath(np.zeros(1), x.entries[None, :, :]), out_path)


def load_element(in_path: Path) -> AlgebraElement:
    """Dernière valeur d'un fichier de chemin : matrice seule, chemin simulé ou solution."""
    path = load_path(in_path)
    return path.value(path.steps)
