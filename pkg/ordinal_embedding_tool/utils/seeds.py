"""
Semillas derivadas para trabajo paralelo reproducible.

Cada tarea (ensayo, reinicio o ubicación de la etapa 2) recibe su propio generador,
indexado por la semilla maestra y una tupla de etiquetas. El resultado no depende
del orden de ejecución.
"""

from __future__ import annotations

import hashlib
from typing import Union

import numpy as np

SeedKey = Union[int, str]

_U64 = (1 << 64) - 1


def derive_seed(master_seed: int, *keys: SeedKey) -> int:
    """sha256(maestra, claves...) truncado a un entero sin signo de 64 bits."""
    payload = ":".join([str(int(master_seed))] + [str(k) for k in keys])
    digest = hashlib.sha256(payload.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & _U64


def rng_for(master_seed: int, *keys: SeedKey) -> np.random.Generator:
    if not keys:
        return np.random.default_rng(int(master_seed) & _U64)
    return np.random.default_rng(derive_seed(master_seed, *keys))
