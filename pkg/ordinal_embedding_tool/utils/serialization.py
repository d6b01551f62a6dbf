"""
Formatos de intercambio: nubes y dominios en JSON, embeddings en JSON/CSV y
comparaciones en CSV. Los índices en disco son 1-based.
"""

import csv
import json
import os
from typing import Any, Dict

import numpy as np

from ..core.embedders import Embedding
from ..core.geometry import PointCloud
from ..exceptions import ConfigException


def _read_json(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigException(f"Cannot read {path}: {e}") from e


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def json_dumps(data: Any) -> str:
    return json.dumps(data, indent=2, ensure_ascii=False)


def write_json(data: Any, path: str) -> str:
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as f:
        f.write(json_dumps(data))
        f.write("\n")
    return path


def write_cloud(cloud: PointCloud, path: str) -> str:
    return write_json(cloud.to_dict(), path)


def read_cloud(path: str) -> PointCloud:
    try:
        return PointCloud.from_dict(_read_json(path))
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigException(f"Malformed cloud document {path}: {e}") from e


def embedding_to_dict(embedding: Embedding) -> Dict[str, Any]:
    return {
        "dim": embedding.dim,
        "points": {str(i + 1): row.tolist() for i, row in enumerate(embedding.points)},
        "provenance": embedding.provenance,
    }


def embedding_from_dict(data: Dict[str, Any]) -> Embedding:
    try:
        dim = int(data["dim"])
        entries = {int(k): v for k, v in data["points"].items()}
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigException(f"Malformed embedding document: {e}") from e
    n = len(entries)
    if sorted(entries) != list(range(1, n + 1)):
        raise ConfigException("Embedding indices must be exactly 1..n")
    points = np.asarray([entries[i] for i in range(1, n + 1)], dtype=float).reshape(n, dim)
    return Embedding(points, data.get("provenance", {}))


def write_embedding(embedding: Embedding, path: str, fmt: str = "json") -> str:
    if fmt == "json":
        return write_json(embedding_to_dict(embedding), path)
    if fmt != "csv":
        raise ConfigException(f"Unknown format: {fmt}")
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["index"] + [f"x{k + 1}" for k in range(embedding.dim)])
        for i, row in enumerate(embedding.points):
            writer.writerow([i + 1] + [repr(float(v)) for v in row])
    return path


def read_embedding(path: str) -> Embedding:
    if not path.endswith(".csv"):
        return embedding_from_dict(_read_json(path))
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise ConfigException(f"Cannot read {path}: {e}") from e
    if not rows or rows[0][0] != "index":
        raise ConfigException(f"{path} lacks an index,x1,... header")
    try:
        entries = {int(r[0]): [float(v) for v in r[1:]] for r in rows[1:] if r}
    except ValueError as e:
        raise ConfigException(f"Malformed embedding row in {path}: {e}") from e
    return embedding_from_dict(
        {"dim": len(rows[0]) - 1, "points": {str(k): v for k, v in entries.items()}}
    )


def write_comparisons(tuples: np.ndarray, path: str) -> str:
    """CSV i,j,k,l: cada fila afirma δ_ij < δ_kl."""
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["i", "j", "k", "l"])
        for row in np.asarray(tuples, dtype=int):
            writer.writerow((row + 1).tolist())
    return path
