"""
Diseños de comparaciones C_n construidos a partir de un oráculo de disimilitudes.

Cada diseño es un oráculo de pertenencia perezoso: (i, j, k, l) está en el
diseño cuando afirma δ_ij < δ_kl. Los empates nunca se afirman. Los índices son
0-based dentro de la biblioteca.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path
from scipy.spatial.distance import cdist, pdist, squareform
from scipy.stats import rankdata

from ..config.settings import settings
from ..exceptions import DesignException, DesignSizeException
from .geometry import DomainSpec, PointCloud

logger = logging.getLogger(__name__)

EMPTY_TUPLES = np.empty((0, 4), dtype=np.int64)


class Verdict(str, Enum):
    ASSERTED = "asserted"
    REVERSED = "reversed"
    ABSENT = "absent"


class MonotoneTransform:
    """Función g estrictamente creciente tabulada con un spline PCHIP."""

    name = "spline"

    def __init__(self, knots: Sequence[float], values: Sequence[float]):
        x = np.asarray(knots, dtype=float)
        y = np.asarray(values, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or len(x) < 2:
            raise DesignException("Spline needs matching 1-D knots and values")
        if np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
            raise DesignException("Spline knots and values must be strictly increasing")
        self.knots, self.values = x, y
        self._spline = PchipInterpolator(x, y, extrapolate=False)

    def __call__(self, t: np.ndarray) -> np.ndarray:
        out = self._spline(np.asarray(t, dtype=float))
        if np.any(np.isnan(out)):
            raise DesignException("Distances fall outside the tabulated spline range")
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {"knots": self.knots.tolist(), "values": self.values.tolist()}


BUILTIN_TRANSFORMS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "identity": lambda t: np.asarray(t, dtype=float),
    "square": np.square,
    "log1p": np.log1p,
}

Transform = Union[str, MonotoneTransform, Callable[[np.ndarray], np.ndarray]]


class DissimilarityOracle:
    """δ_ij = g(‖x_i − x_j‖) − g(0) para una g estrictamente creciente."""

    def __init__(
        self,
        cloud: PointCloud,
        transform: Transform = "identity",
        jitter: bool = False,
        jitter_seed: int = 0,
    ):
        if isinstance(transform, str):
            if transform not in BUILTIN_TRANSFORMS:
                raise DesignException(f"Unknown transform: {transform}")
            g = BUILTIN_TRANSFORMS[transform]
            self.transform_name = transform
        else:
            g = transform
            self.transform_name = getattr(transform, "name", "custom")

        n = cloud.n
        distances = squareform(pdist(cloud.points)) if n > 1 else np.zeros((n, n))
        matrix = np.asarray(g(distances), dtype=float) - float(np.asarray(g(np.zeros(1)))[0])
        np.fill_diagonal(matrix, 0.0)
        if jitter and n > 1:
            rng = np.random.default_rng(jitter_seed)
            noise = np.triu(rng.uniform(-1.0, 1.0, size=(n, n)) * settings.tie_jitter, 1)
            matrix = np.maximum(matrix + noise + noise.T, 0.0)
            np.fill_diagonal(matrix, 0.0)
        self._init_from(cloud, matrix)

    def _init_from(self, cloud: PointCloud, matrix: np.ndarray) -> None:
        matrix = np.array(matrix, dtype=float, copy=True)
        matrix.setflags(write=False)
        self.cloud = cloud
        self._matrix = matrix

    @property
    def n(self) -> int:
        return self.cloud.n

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    def delta(self, i: int, j: int) -> float:
        return float(self._matrix[i, j])

    def compare(self, i: int, j: int, k: int, l: int) -> int:
        """Signo de δ_ij − δ_kl."""
        return int(np.sign(self._matrix[i, j] - self._matrix[k, l]))

    def subset(self, indices: Sequence[int]) -> "DissimilarityOracle":
        idx = np.asarray(indices, dtype=int)
        sub = object.__new__(DissimilarityOracle)
        sub.transform_name = self.transform_name
        sub._init_from(self.cloud.subset(idx), self._matrix[np.ix_(idx, idx)])
        return sub


def image_distances(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        return np.zeros((len(pts), len(pts)))
    return squareform(pdist(pts))


class FenwickTree:
    """Árbol de Fenwick sobre rangos 1..size."""

    def __init__(self, size: int):
        self.size = size
        self.tree = [0] * (size + 1)

    def add(self, index: int, value: int = 1) -> None:
        while index <= self.size:
            self.tree[index] += value
            index += index & -index

    def prefix(self, index: int) -> int:
        total = 0
        while index > 0:
            total += self.tree[index]
            index -= index & -index
        return total


def count_discordant(keys: np.ndarray, values: np.ndarray) -> int:
    """#{(a, b): keys[a] < keys[b] y values[a] > values[b]}."""
    keys = np.asarray(keys, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(keys) < 2:
        return 0
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    ranks = (np.searchsorted(np.unique(values), values[order]) + 1).tolist()
    bounds = (np.flatnonzero(np.diff(sorted_keys) > 0) + 1).tolist()
    starts = [0] + bounds
    ends = bounds + [len(ranks)]

    tree = FenwickTree(max(ranks))
    inserted = total = 0
    for start, end in zip(starts, ends):
        group = ranks[start:end]
        for rank in group:
            total += inserted - tree.prefix(rank)
        for rank in group:
            tree.add(rank)
        inserted += end - start
    return total


def _chain_tuples(
    first: np.ndarray, second: np.ndarray, keys: np.ndarray
) -> np.ndarray:
    """Cadena de pares consecutivos en orden creciente estricto de `keys`.

    Satisfacer débilmente la cadena equivale a satisfacer todas las
    comparaciones afirmadas entre los pares dados.
    """
    if len(keys) < 2:
        return EMPTY_TUPLES
    order = np.argsort(keys, kind="stable")
    f, s, k = first[order], second[order], keys[order]
    steps = np.diff(k)
    if np.all(steps > 0):
        return np.stack([f[:-1], s[:-1], f[1:], s[1:]], axis=1).astype(np.int64)
    groups = np.split(np.arange(len(k)), np.flatnonzero(steps > 0) + 1)
    parts = []
    for low, high in zip(groups[:-1], groups[1:]):
        a, b = (g.ravel() for g in np.meshgrid(low, high, indexing="ij"))
        parts.append(np.stack([f[a], s[a], f[b], s[b]], axis=1))
    return np.concatenate(parts).astype(np.int64) if parts else EMPTY_TUPLES


def _tie_count(left: np.ndarray, right: np.ndarray) -> int:
    """Σ_v c_left(v)·c_right(v)."""
    lv, lc = np.unique(left, return_counts=True)
    rv, rc = np.unique(right, return_counts=True)
    _, li, ri = np.intersect1d(lv, rv, assume_unique=True, return_indices=True)
    return int(np.sum(lc[li].astype(np.int64) * rc[ri].astype(np.int64)))


def _hop_surrogate(adjacency: np.ndarray) -> np.ndarray:
    graph = csr_matrix(adjacency | adjacency.T)
    hops = shortest_path(graph, directed=False, unweighted=True)
    finite = np.isfinite(hops)
    if not np.all(finite):
        hops[~finite] = hops[finite].max() + 1.0
    return hops


class ComparisonSet(ABC):
    """Diseño de comparaciones con oráculo de pertenencia perezoso."""

    kind = "abstract"
    certificate_is_static = True

    def __init__(self, oracle: DissimilarityOracle):
        if oracle.n < 2:
            raise DesignException("A design needs at least 2 items")
        self.oracle = oracle
        self.n = oracle.n
        self._delta = oracle.matrix
        self._materialized: Optional[np.ndarray] = None
        self._static_certificate: Optional[np.ndarray] = None

    @abstractmethod
    def contains(self, i: Any, j: Any, k: Any, l: Any) -> np.ndarray:
        """Máscara vectorizada de pertenencia de (i, j, k, l)."""

    @abstractmethod
    def count_violations(self, points: np.ndarray) -> int:
        """Comparaciones afirmadas con ‖p_i − p_j‖ > ‖p_k − p_l‖, conteo exacto."""

    @abstractmethod
    def query_budget(self) -> int:
        """Consultas ordenadas informativas (sin empate) del diseño."""

    @abstractmethod
    def _build_certificate(self, images: Optional[np.ndarray]) -> np.ndarray:
        ...

    def certificate(self, points: Optional[np.ndarray] = None) -> np.ndarray:
        """Tuplas afirmadas cuya satisfacción débil equivale a cero violaciones."""
        if self.certificate_is_static:
            if self._static_certificate is None:
                self._static_certificate = self._build_certificate(None)
            return self._static_certificate
        if points is None:
            raise DesignException(f"{self.kind} certificate depends on the embedding")
        return self._build_certificate(image_distances(points))

    def verdict(self, i: int, j: int, k: int, l: int) -> Verdict:
        if bool(self.contains(i, j, k, l)):
            return Verdict.ASSERTED
        if bool(self.contains(k, l, i, j)):
            return Verdict.REVERSED
        return Verdict.ABSENT

    def materialize(self) -> np.ndarray:
        if self.n > settings.materialize_limit:
            raise DesignSizeException(
                f"Materializing n={self.n} exceeds the guard n <= {settings.materialize_limit}"
            )
        if self._materialized is None:
            n = self.n
            j, k, l = (a.ravel() for a in np.indices((n, n, n)))
            rows = []
            for i in range(n):
                mask = self.contains(i, j, k, l)
                if np.any(mask):
                    rows.append(
                        np.stack([np.full(mask.sum(), i), j[mask], k[mask], l[mask]], axis=1)
                    )
            self._materialized = (
                np.concatenate(rows).astype(np.int64) if rows else EMPTY_TUPLES
            )
        return self._materialized

    def count_violations_exhaustive(self, points: np.ndarray) -> int:
        tuples = self.materialize()
        images = image_distances(points)
        return int(
            np.sum(images[tuples[:, 0], tuples[:, 1]] > images[tuples[:, 2], tuples[:, 3]])
        )

    def _orient(self, proposals: np.ndarray) -> np.ndarray:
        d = self._delta
        swap = d[proposals[:, 0], proposals[:, 1]] > d[proposals[:, 2], proposals[:, 3]]
        oriented = proposals.copy()
        oriented[swap] = proposals[swap][:, [2, 3, 0, 1]]
        return oriented

    def _propose(self, size: int, rng: np.random.Generator) -> np.ndarray:
        return self._orient(rng.integers(0, self.n, size=(size, 4)))

    def sample_asserted(self, k: int, rng: np.random.Generator) -> np.ndarray:
        found: List[np.ndarray] = []
        count = 0
        for _ in range(64):
            if count >= k:
                break
            proposals = self._propose(max(2 * (k - count), 64), rng)
            keep = proposals[self.contains(*proposals.T)]
            found.append(keep)
            count += len(keep)
        if not found:
            return EMPTY_TUPLES
        return np.concatenate(found)[:k].astype(np.int64)

    def rank_surrogate(self) -> np.ndarray:
        raise DesignException(f"{self.kind} design has no rank surrogate")

    def descriptor(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "n": self.n,
            "transform": self.oracle.transform_name,
        }


class QuadrupleDesign(ComparisonSet):
    """C = [n]^4: todas las comparaciones de cuádruplas."""

    kind = "quadruple"

    def __init__(self, oracle: DissimilarityOracle):
        super().__init__(oracle)
        self._pairs = np.triu_indices(self.n, 1)
        self._pair_delta = self._delta[self._pairs]

    def contains(self, i: Any, j: Any, k: Any, l: Any) -> np.ndarray:
        d = self._delta
        return d[i, j] < d[k, l]

    def count_violations(self, points: np.ndarray) -> int:
        images = image_distances(points)
        return 4 * count_discordant(self._pair_delta, images[self._pairs])

    def query_budget(self) -> int:
        _, counts = np.unique(self._delta, return_counts=True)
        return self.n**4 - int(np.sum(counts.astype(np.int64) ** 2))

    def _build_certificate(self, images: Optional[np.ndarray]) -> np.ndarray:
        first, second = self._pairs
        return _chain_tuples(first, second, self._pair_delta)

    def rank_surrogate(self) -> np.ndarray:
        surrogate = np.zeros((self.n, self.n))
        surrogate[self._pairs] = rankdata(self._pair_delta) / len(self._pair_delta)
        return surrogate + surrogate.T


class TripleDesign(ComparisonSet):
    """C = {(i, j, i, k)}: comparaciones con ápice compartido."""

    kind = "triple"

    def contains(self, i: Any, j: Any, k: Any, l: Any) -> np.ndarray:
        d = self._delta
        return (np.asarray(i) == np.asarray(k)) & (d[i, j] < d[k, l])

    def count_violations(self, points: np.ndarray) -> int:
        images = image_distances(points)
        return sum(count_discordant(self._delta[i], images[i]) for i in range(self.n))

    def query_budget(self) -> int:
        total = 0
        for i in range(self.n):
            _, counts = np.unique(self._delta[i], return_counts=True)
            total += self.n**2 - int(np.sum(counts.astype(np.int64) ** 2))
        return total

    def _build_certificate(self, images: Optional[np.ndarray]) -> np.ndarray:
        parts = []
        everyone = np.arange(self.n)
        for i in range(self.n):
            others = everyone[everyone != i]
            parts.append(_chain_tuples(np.full(len(others), i), others, self._delta[i, others]))
        return np.concatenate(parts) if parts else EMPTY_TUPLES

    def _propose(self, size: int, rng: np.random.Generator) -> np.ndarray:
        raw = rng.integers(0, self.n, size=(size, 3))
        return self._orient(np.stack([raw[:, 0], raw[:, 1], raw[:, 0], raw[:, 2]], axis=1))

    def rank_surrogate(self) -> np.ndarray:
        ranks = np.zeros((self.n, self.n))
        for i in range(self.n):
            ranks[i] = (rankdata(self._delta[i]) - 1.0) / (self.n - 1)
        surrogate = (ranks + ranks.T) / 2.0
        np.fill_diagonal(surrogate, 0.0)
        return surrogate


def _knn_mask(delta: np.ndarray, neighbors: int) -> np.ndarray:
    """N_K(i) con empates en la K-ésima distancia resueltos por índice."""
    n = len(delta)
    mask = np.zeros((n, n), dtype=bool)
    for i in range(n):
        order = np.argsort(delta[i], kind="stable")
        order = order[order != i][:neighbors]
        mask[i, order] = True
    return mask


class LocalDesign(ComparisonSet):
    """Comparaciones locales: (i, j, k, l) con δ_ij < δ_kl y {j, k, l} en la
    ventana de i (todas las δ desde i < r, o dentro de N_K(i)).

    La ventana incluye al propio i (δ_ii = 0).
    """

    kind = "local"
    certificate_is_static = False

    def __init__(
        self,
        oracle: DissimilarityOracle,
        radius: Optional[float] = None,
        neighbors: Optional[int] = None,
    ):
        super().__init__(oracle)
        if (radius is None) == (neighbors is None):
            raise DesignException("Local design needs exactly one of radius or neighbors")
        if radius is not None:
            if radius <= 0:
                raise DesignException("Locality radius must be positive")
            window = self._delta < radius
        else:
            if neighbors < 1 or neighbors >= self.n:
                raise DesignException(f"Need 1 <= K < n, got K={neighbors}, n={self.n}")
            window = _knn_mask(self._delta, int(neighbors))
            np.fill_diagonal(window, True)
        window.setflags(write=False)
        self.radius = None if radius is None else float(radius)
        self.neighbors = None if neighbors is None else int(neighbors)
        self.window = window

    def contains(self, i: Any, j: Any, k: Any, l: Any) -> np.ndarray:
        d, w = self._delta, self.window
        return (d[i, j] < d[k, l]) & w[i, j] & w[i, k] & w[i, l]

    def _window_pairs(self, i: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        members = np.flatnonzero(self.window[i])
        rows, cols = np.triu_indices(len(members), 1)
        return members, members[rows], members[cols]

    def count_violations(self, points: np.ndarray) -> int:
        images = image_distances(points)
        total = 0
        for i in range(self.n):
            members, rk, rl = self._window_pairs(i)
            if len(rk) == 0:
                continue
            left_d, left_e = self._delta[i, members], images[i, members]
            right_d, right_e = self._delta[rk, rl], images[rk, rl]
            chunk = max(1, 4_000_000 // len(rk))
            for start in range(0, len(members), chunk):
                ld = left_d[start : start + chunk, None]
                le = left_e[start : start + chunk, None]
                total += 2 * int(np.count_nonzero((ld < right_d) & (le > right_e)))
        return total

    def query_budget(self) -> int:
        total = 0
        for i in range(self.n):
            members = np.flatnonzero(self.window[i])
            left = self._delta[i, members]
            right = self._delta[np.ix_(members, members)].ravel()
            total += len(left) * len(right) - _tie_count(left, right)
        return total

    def _build_certificate(self, images: Optional[np.ndarray]) -> np.ndarray:
        parts = []
        for i in range(self.n):
            members, rk, rl = self._window_pairs(i)
            if len(rk) == 0:
                continue
            order = np.argsort(self._delta[rk, rl], kind="stable")
            rk, rl = rk[order], rl[order]
            right_d = self._delta[rk, rl]
            right_e = images[rk, rl]
            # argmin del sufijo: el par a la derecha más corto en la imagen
            reverse = right_e[::-1]
            running = np.minimum.accumulate(reverse)
            steps = np.arange(len(reverse))
            last = np.maximum.accumulate(np.where(reverse <= running, steps, 0))
            arg = (len(reverse) - 1 - last)[::-1]
            start = np.searchsorted(right_d, self._delta[i, members], side="right")
            valid = start < len(right_d)
            if not np.any(valid):
                continue
            js = members[valid]
            picks = arg[start[valid]]
            parts.append(
                np.stack([np.full(len(js), i), js, rk[picks], rl[picks]], axis=1)
            )
        return np.concatenate(parts).astype(np.int64) if parts else EMPTY_TUPLES

    def below_threshold_mask(self) -> np.ndarray:
        mask = self.window | self.window.T
        mask = mask.copy()
        np.fill_diagonal(mask, False)
        return mask

    def outside_certificate(self, points: np.ndarray) -> np.ndarray:
        """Restricción global: pares bajo el umbral no más largos que los de fuera."""
        images = image_distances(points)
        rows, cols = np.triu_indices(self.n, 1)
        below = self.below_threshold_mask()[rows, cols]
        if np.all(below) or not np.any(below):
            return EMPTY_TUPLES
        e = images[rows, cols]
        b_idx, a_idx = np.flatnonzero(below), np.flatnonzero(~below)
        longest = b_idx[np.argmax(e[b_idx])]
        shortest = a_idx[np.argmin(e[a_idx])]
        hi = b_idx[e[b_idx] >= e[shortest]]
        lo = a_idx[e[a_idx] <= e[longest]]
        first = np.concatenate([rows[hi], np.full(len(lo), rows[longest])])
        second = np.concatenate([cols[hi], np.full(len(lo), cols[longest])])
        third = np.concatenate([np.full(len(hi), rows[shortest]), rows[lo]])
        fourth = np.concatenate([np.full(len(hi), cols[shortest]), cols[lo]])
        return np.stack([first, second, third, fourth], axis=1).astype(np.int64)

    def count_outside_violations(self, points: np.ndarray) -> int:
        images = image_distances(points)
        rows, cols = np.triu_indices(self.n, 1)
        below = self.below_threshold_mask()[rows, cols]
        e = images[rows, cols]
        above_sorted = np.sort(e[~below])
        return int(np.sum(np.searchsorted(above_sorted, e[below], side="left")))

    def _propose(self, size: int, rng: np.random.Generator) -> np.ndarray:
        apex = rng.integers(0, self.n, size=size)
        out = np.empty((size, 4), dtype=np.int64)
        out[:, 0] = apex
        for t, i in enumerate(apex):
            members = np.flatnonzero(self.window[i])
            out[t, 1:] = rng.choice(members, size=3)
        return self._orient(out)

    def rank_surrogate(self) -> np.ndarray:
        return _hop_surrogate(self.below_threshold_mask())

    def descriptor(self) -> Dict[str, Any]:
        data = super().descriptor()
        data.update({"radius": self.radius, "neighbors": self.neighbors})
        return data


@dataclass(frozen=True, eq=False)
class LandmarkIndex:
    indices: np.ndarray
    n: int

    def __post_init__(self) -> None:
        idx = np.unique(np.asarray(self.indices, dtype=int))
        if len(idx) == 0:
            raise DesignException("Landmark set must be nonempty")
        if idx[0] < 0 or idx[-1] >= self.n:
            raise DesignException("Landmark indices out of range")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    @property
    def ell(self) -> int:
        return int(len(self.indices))

    @classmethod
    def first(cls, ell: int, n: int) -> "LandmarkIndex":
        if not 1 <= ell <= n:
            raise DesignException(f"Need 1 <= ell <= n, got ell={ell}, n={n}")
        return cls(np.arange(ell), n)


def landmark_budget_closed_form(n: int, ell: int, flavor: str) -> int:
    triple = n * ell * (ell - 1)
    if flavor == "triple":
        return triple
    quadruple = ell**4 - ell**2 - 2 * ell * (ell - 1)
    overlap = ell * ell * (ell - 1)
    return triple + quadruple - overlap


class LandmarkDesign(ComparisonSet):
    """Comparaciones de cada ítem con los landmarks y, en la variante de
    cuádruplas, todas las comparaciones entre landmarks."""

    def __init__(self, oracle: DissimilarityOracle, landmarks: LandmarkIndex, flavor: str = "triple"):
        super().__init__(oracle)
        if flavor not in ("triple", "quadruple"):
            raise DesignException(f"Unknown landmark flavor: {flavor}")
        if landmarks.n != self.n:
            raise DesignException("Landmark index built for a different item count")
        self.landmarks = landmarks
        self.flavor = flavor
        self.kind = f"landmark_{flavor}"
        is_landmark = np.zeros(self.n, dtype=bool)
        is_landmark[landmarks.indices] = True
        is_landmark.setflags(write=False)
        self.is_landmark = is_landmark
        self._L = landmarks.indices

    def contains(self, i: Any, j: Any, k: Any, l: Any) -> np.ndarray:
        d, mark = self._delta, self.is_landmark
        triple = (np.asarray(i) == np.asarray(k)) & mark[j] & mark[l] & (d[i, j] < d[k, l])
        if self.flavor == "triple":
            return triple
        return triple | (mark[i] & mark[j] & mark[k] & mark[l] & (d[i, j] < d[k, l]))

    def _triple_counts(self, images: np.ndarray) -> np.ndarray:
        dl = self._delta[:, self._L]
        el = images[:, self._L]
        return np.sum(
            (dl[:, :, None] < dl[:, None, :]) & (el[:, :, None] > el[:, None, :]),
            axis=(1, 2),
        )

    def count_violations(self, points: np.ndarray) -> int:
        images = image_distances(points)
        per_item = self._triple_counts(images)
        total = int(per_item.sum())
        if self.flavor == "quadruple":
            sub_d = self._delta[np.ix_(self._L, self._L)]
            sub_e = images[np.ix_(self._L, self._L)]
            rows, cols = np.triu_indices(len(self._L), 1)
            total += 4 * count_discordant(sub_d[rows, cols], sub_e[rows, cols])
            total -= int(per_item[self._L].sum())
        return total

    def _informative_rows(self) -> np.ndarray:
        ell = len(self._L)
        counts = np.empty(self.n, dtype=np.int64)
        for i in range(self.n):
            _, c = np.unique(self._delta[i, self._L], return_counts=True)
            counts[i] = ell * ell - int(np.sum(c.astype(np.int64) ** 2))
        return counts

    def query_budget(self) -> int:
        rows = self._informative_rows()
        total = int(rows.sum())
        if self.flavor == "quadruple":
            ell = len(self._L)
            sub = self._delta[np.ix_(self._L, self._L)].ravel()
            _, c = np.unique(sub, return_counts=True)
            total += ell**4 - int(np.sum(c.astype(np.int64) ** 2))
            total -= int(rows[self._L].sum())
        return total

    def _build_certificate(self, images: Optional[np.ndarray]) -> np.ndarray:
        parts = []
        for i in range(self.n):
            parts.append(
                _chain_tuples(np.full(len(self._L), i), self._L, self._delta[i, self._L])
            )
        if self.flavor == "quadruple":
            rows, cols = np.triu_indices(len(self._L), 1)
            first, second = self._L[rows], self._L[cols]
            parts.append(_chain_tuples(first, second, self._delta[first, second]))
        return np.concatenate(parts)

    def item_chain(self, i: int) -> np.ndarray:
        """Pares (a, b) de landmarks con δ_ia < δ_ib, del más cercano al más lejano."""
        tuples = _chain_tuples(np.full(len(self._L), i), self._L, self._delta[i, self._L])
        return tuples[:, [1, 3]]

    def subdesign(self) -> ComparisonSet:
        """Diseño entre landmarks usado en la primera etapa."""
        sub = self.oracle.subset(self._L)
        return TripleDesign(sub) if self.flavor == "triple" else QuadrupleDesign(sub)

    def _propose(self, size: int, rng: np.random.Generator) -> np.ndarray:
        apex = rng.integers(0, self.n, size=size)
        picks = rng.choice(self._L, size=(size, 2))
        out = np.stack([apex, picks[:, 0], apex, picks[:, 1]], axis=1)
        if self.flavor == "quadruple":
            mixed = rng.random(size) < 0.5
            out[mixed] = rng.choice(self._L, size=(int(mixed.sum()), 4))
        return self._orient(out)

    def descriptor(self) -> Dict[str, Any]:
        data = super().descriptor()
        data.update({"landmarks": self._L.tolist(), "flavor": self.flavor})
        return data


class KnnGraphDesign(ComparisonSet):
    """Información ordinal de un grafo K-NN: (i, j, i, k) con j ∈ N_K(i) ∪ {i},
    k ∉ N_K(i) ∪ {i} y δ_ij < δ_ik."""

    kind = "knn"
    certificate_is_static = False

    def __init__(self, oracle: DissimilarityOracle, neighbors: int):
        super().__init__(oracle)
        if neighbors < 1 or neighbors >= self.n:
            raise DesignException(f"Need 1 <= K < n, got K={neighbors}, n={self.n}")
        inside = _knn_mask(self._delta, int(neighbors))
        np.fill_diagonal(inside, True)
        inside.setflags(write=False)
        self.neighbors = int(neighbors)
        self.inside = inside

    def contains(self, i: Any, j: Any, k: Any, l: Any) -> np.ndarray:
        d, w = self._delta, self.inside
        return (np.asarray(i) == np.asarray(k)) & w[i, j] & ~w[i, l] & (d[i, j] < d[i, l])

    def count_violations(self, points: np.ndarray) -> int:
        images = image_distances(points)
        total = 0
        for i in range(self.n):
            inner, outer = self.inside[i], ~self.inside[i]
            di, do = self._delta[i, inner], self._delta[i, outer]
            ei, eo = images[i, inner], images[i, outer]
            total += int(
                np.count_nonzero((di[:, None] < do[None, :]) & (ei[:, None] > eo[None, :]))
            )
        return total

    def query_budget(self) -> int:
        total = 0
        for i in range(self.n):
            di = self._delta[i, self.inside[i]]
            do = self._delta[i, ~self.inside[i]]
            total += 2 * (len(di) * len(do) - _tie_count(di, do))
        return total

    def _build_certificate(self, images: Optional[np.ndarray]) -> np.ndarray:
        parts = []
        for i in range(self.n):
            inner = np.flatnonzero(self.inside[i])
            outer = np.flatnonzero(~self.inside[i])
            if len(outer) == 0:
                continue
            ei, eo = images[i, inner], images[i, outer]
            far_in = inner[np.argmax(ei)]
            near_out = outer[np.argmin(eo)]
            hi = inner[ei >= eo.min()]
            lo = outer[eo <= ei.max()]
            js = np.concatenate([hi, np.full(len(lo), far_in)])
            ks = np.concatenate([np.full(len(hi), near_out), lo])
            parts.append(np.stack([np.full(len(js), i), js, np.full(len(js), i), ks], axis=1))
        if not parts:
            return EMPTY_TUPLES
        tuples = np.concatenate(parts).astype(np.int64)
        return tuples[self.contains(*tuples.T)]

    def _propose(self, size: int, rng: np.random.Generator) -> np.ndarray:
        raw = rng.integers(0, self.n, size=(size, 3))
        return self._orient(np.stack([raw[:, 0], raw[:, 1], raw[:, 0], raw[:, 2]], axis=1))

    def rank_surrogate(self) -> np.ndarray:
        mask = self.inside.copy()
        np.fill_diagonal(mask, False)
        return _hop_surrogate(mask)

    def descriptor(self) -> Dict[str, Any]:
        data = super().descriptor()
        data["neighbors"] = self.neighbors
        return data


def design_quadruple(oracle: DissimilarityOracle) -> QuadrupleDesign:
    return QuadrupleDesign(oracle)


def design_triple(oracle: DissimilarityOracle) -> TripleDesign:
    return TripleDesign(oracle)


def design_local(
    oracle: DissimilarityOracle,
    radius: Optional[float] = None,
    neighbors: Optional[int] = None,
) -> LocalDesign:
    return LocalDesign(oracle, radius=radius, neighbors=neighbors)


def design_landmark(
    oracle: DissimilarityOracle, landmarks: LandmarkIndex, flavor: str = "triple"
) -> LandmarkDesign:
    return LandmarkDesign(oracle, landmarks, flavor)


def design_knn_graph(oracle: DissimilarityOracle, neighbors: int) -> KnnGraphDesign:
    return KnnGraphDesign(oracle, neighbors)


DESIGN_KINDS = ("quadruple", "triple", "local", "landmark_triple", "landmark_quadruple", "knn")


def build_design(
    oracle: DissimilarityOracle,
    kind: str,
    radius: Optional[float] = None,
    neighbors: Optional[int] = None,
    landmarks: Optional[int] = None,
) -> ComparisonSet:
    """Fábrica usada por la CLI y los experimentos."""
    if kind == "quadruple":
        return design_quadruple(oracle)
    if kind == "triple":
        return design_triple(oracle)
    if kind == "local":
        return design_local(oracle, radius=radius, neighbors=neighbors)
    if kind in ("landmark_triple", "landmark_quadruple"):
        if landmarks is None:
            raise DesignException("Landmark designs need a landmark count")
        index = LandmarkIndex.first(int(landmarks), oracle.n)
        return design_landmark(oracle, index, kind.split("_", 1)[1])
    if kind == "knn":
        if neighbors is None:
            raise DesignException("K-NN graph design needs a neighbor count")
        return design_knn_graph(oracle, int(neighbors))
    raise DesignException(f"Unknown design kind: {kind}")


def threshold_condition(radius: float, eps: float, c0: Optional[float] = None) -> bool:
    """r ≥ C₀·ε, condición de la regla de ítems distintos."""
    c0 = settings.threshold_c0 if c0 is None else c0
    return radius >= c0 * eps


def infer_below_threshold(
    cset: ComparisonSet,
    rule: str = "direct",
    eps: Optional[float] = None,
    c0: Optional[float] = None,
) -> FrozenSet[Tuple[int, int]]:
    """Pares {k, l} (k < l) con δ_kl bajo el umbral, deducidos sólo de C.

    - direct: (k, k, k, l) ∈ C o (l, l, l, k) ∈ C.
    - fallback: existe un tercer ítem i con (k, i, k, l), (k, l, k, i),
      (l, i, l, k) o (l, k, l, i) en C.
    """
    if not isinstance(cset, LocalDesign):
        raise DesignException("Threshold inference needs a local design")
    if rule not in ("direct", "fallback"):
        raise DesignException(f"Unknown inference rule: {rule}")
    if eps is not None and cset.radius is not None:
        if not threshold_condition(cset.radius, eps, c0):
            logger.warning(
                "r=%.4g below C0*eps=%.4g; fallback inference may miss pairs",
                cset.radius,
                (settings.threshold_c0 if c0 is None else c0) * eps,
            )

    n = cset.n
    rows, cols = np.triu_indices(n, 1)
    if rule == "direct":
        hit = cset.contains(rows, rows, rows, cols) | cset.contains(cols, cols, cols, rows)
        return frozenset(zip(rows[hit].tolist(), cols[hit].tolist()))

    pairs = set()
    everyone = np.arange(n)
    for k in range(n):
        ls = everyone[k + 1 :]
        if len(ls) == 0:
            continue
        lv = ls[:, None]
        iv = everyone[None, :]
        third = (iv != k) & (iv != lv)
        witness = (
            cset.contains(k, iv, k, lv)
            | cset.contains(k, lv, k, iv)
            | cset.contains(lv, iv, lv, k)
            | cset.contains(lv, k, lv, iv)
        )
        found = np.any(witness & third, axis=1)
        pairs.update((k, int(l)) for l in ls[found])
    return frozenset(pairs)


@dataclass
class SandwichReport:
    neighbors: int
    radius: float
    holds_for_all_i: bool
    violating_indices: List[int] = field(default_factory=list)
    left_violations: int = 0
    right_violations: int = 0
    checked: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "neighbors": self.neighbors,
            "radius": self.radius,
            "holds_for_all_i": self.holds_for_all_i,
            "violating_indices": self.violating_indices,
            "left_violations": self.left_violations,
            "right_violations": self.right_violations,
            "checked": self.checked,
        }


def knn_rball_sandwich(
    cloud: PointCloud,
    radius: float,
    neighbors: Optional[int] = None,
    domain: Optional[DomainSpec] = None,
) -> SandwichReport:
    """Comprueba Neigh_{K/2}(x_i) ⊂ {x_j : ‖x_j − x_i‖ ≤ r} ⊂ Neigh_{2K}(x_i).

    x_i queda fuera de ambos conjuntos. Con `domain`, sólo se comprueban los
    puntos cuya r-bola cabe en U.
    """
    n, d = cloud.n, cloud.dim
    k = int(round(n * radius**d)) if neighbors is None else int(neighbors)
    if k < 1:
        raise DesignException(f"K = {k} must be at least 1")
    dist = cdist(cloud.points, cloud.points)
    np.fill_diagonal(dist, np.inf)
    ordered = np.sort(dist, axis=1)
    half = k // 2
    left_ok = (
        np.ones(n, dtype=bool) if half == 0 else ordered[:, half - 1] <= radius
    )
    right_ok = np.sum(dist <= radius, axis=1) <= 2 * k
    checked = (
        np.ones(n, dtype=bool) if domain is None else domain.deep_interior_mask(cloud.points, radius)
    )
    bad = checked & ~(left_ok & right_ok)
    report = SandwichReport(
        neighbors=k,
        radius=float(radius),
        holds_for_all_i=not bool(np.any(bad)),
        violating_indices=np.flatnonzero(bad).tolist(),
        left_violations=int(np.sum(checked & ~left_ok)),
        right_violations=int(np.sum(checked & ~right_ok)),
        checked=int(checked.sum()),
    )
    logger.debug("sandwich K=%d r=%.4g: %d violators", k, radius, len(report.violating_indices))
    return report
