from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def thread_count() -> int:
    """NCROUGH_THREADS, sinon le nombre de cœurs."""
    raw = os.environ.get("NCROUGH_THREADS", "").strip()
    if raw:
        try:
            value = int(raw)
        except ValueError:
            logger.warning("NCROUGH_THREADS invalide (%r), valeur par défaut utilisée", raw)
        else:
            if value >= 1:
                return value
    return os.cpu_count() or 1


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    """
    Applique fn à chaque élément indépendant (graine, pas, ...).
    L'ordre des résultats suit celui des entrées, quel que soit le nombre de fils.
    """
    items = list(items)
    workers = min(threads or thread_count(), max(len(items), 1))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
