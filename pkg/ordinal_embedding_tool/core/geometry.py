"""
Primitivas geométricas deterministas: dominios como uniones de bolas abiertas,
nubes de puntos, empaquetamientos voraces y densidad de Hausdorff.

Soporta:
- Dominios acotados, conexos y abiertos dados como unión finita de bolas.
- Muestreo uniforme por rechazo desde la caja envolvente (anidado por semilla).
- Densidad de Hausdorff sobre una rejilla del dominio (subestimación acotada).

Limitaciones:
- Sólo uniones de bolas; no hay dominios convexos generales.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from ..exceptions import DegenerateInputException, DimensionException, DomainException

logger = logging.getLogger(__name__)

SAMPLE_BATCH = 4096
MIN_ACCEPTANCE = 1e-6
ACCEPTANCE_WINDOW = 1_000_000
GRID_CHUNK = 1 << 18
MAX_GRID_POINTS = 500_000_000
MAX_PACKING_CANDIDATES = 4_000_000
PACKING_GUARD = 1e-9

ArrayLike = Union[np.ndarray, Sequence[float], Sequence[Sequence[float]]]


def _frozen(values: Any) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Ball:
    """Bola abierta B(center, radius)."""

    center: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        center = np.atleast_1d(np.asarray(self.center, dtype=float)).ravel()
        radius = float(self.radius)
        if not np.all(np.isfinite(center)):
            raise DomainException("Ball center must be finite")
        if not np.isfinite(radius) or radius <= 0.0:
            raise DomainException(f"Ball radius must be positive, got {radius}")
        object.__setattr__(self, "center", _frozen(center))
        object.__setattr__(self, "radius", radius)

    @property
    def dim(self) -> int:
        return int(self.center.shape[0])

    def contains(self, points: ArrayLike) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.linalg.norm(pts - self.center, axis=1) < self.radius

    def to_dict(self) -> Dict[str, Any]:
        return {"center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """Dominio U como unión conexa de bolas abiertas; h es el radio mínimo."""

    balls: Tuple[Ball, ...]

    def __post_init__(self) -> None:
        balls = tuple(
            b if isinstance(b, Ball) else Ball(np.asarray(b[0]), float(b[1]))
            for b in self.balls
        )
        if not balls:
            raise DomainException("A domain needs at least one ball")
        if len({b.dim for b in balls}) != 1:
            raise DimensionException("All balls of a domain must share a dimension")
        object.__setattr__(self, "balls", balls)
        if not self._is_connected():
            raise DomainException("Ball intersection graph is not connected")

    @classmethod
    def unit_ball(cls, dim: int, radius: float = 1.0) -> "DomainSpec":
        return cls((Ball(np.zeros(dim), radius),))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DomainSpec":
        try:
            balls = tuple(Ball(b["center"], b["radius"]) for b in data["balls"])
        except (KeyError, TypeError) as e:
            raise DomainException(f"Malformed domain document: {e}") from e
        domain = cls(balls)
        if "dim" in data and int(data["dim"]) != domain.dim:
            raise DimensionException("Declared dim does not match ball centers")
        return domain

    def to_dict(self) -> Dict[str, Any]:
        return {"dim": self.dim, "balls": [b.to_dict() for b in self.balls]}

    @property
    def dim(self) -> int:
        return self.balls[0].dim

    @property
    def centers(self) -> np.ndarray:
        return np.stack([b.center for b in self.balls])

    @property
    def radii(self) -> np.ndarray:
        return np.array([b.radius for b in self.balls])

    @property
    def h(self) -> float:
        return float(self.radii.min())

    def _is_connected(self) -> bool:
        if len(self.balls) == 1:
            return True
        radii = self.radii
        gaps = cdist(self.centers, self.centers)
        adjacency = gaps < radii[:, None] + radii[None, :]
        n_components, _ = connected_components(csr_matrix(adjacency), directed=False)
        return n_components == 1

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        centers, radii = self.centers, self.radii[:, None]
        return (centers - radii).min(axis=0), (centers + radii).max(axis=0)

    def diameter(self) -> float:
        """diam(U), exacto para uniones de bolas."""
        radii = self.radii
        spans = cdist(self.centers, self.centers) + radii[:, None] + radii[None, :]
        return float(spans.max())

    def rho(self) -> float:
        """Diámetro de la mayor bola constituyente (cota inferior de ρ(U))."""
        return float(2.0 * self.radii.max())

    def _offsets(self, points: ArrayLike) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dim:
            raise DimensionException(
                f"Expected points of dimension {self.dim}, got {pts.shape[1]}"
            )
        return cdist(pts, self.centers)

    def contains(self, points: ArrayLike) -> np.ndarray:
        return np.any(self._offsets(points) < self.radii[None, :], axis=1)

    def interior_mask(self, points: ArrayLike, h: Optional[float] = None) -> np.ndarray:
        """Pertenencia a U^h: el punto está en alguna bola constituyente de radio ≥ h."""
        h = self.h if h is None else float(h)
        radii = self.radii
        eligible = radii >= h
        inside = self._offsets(points) < radii[None, :]
        return np.any(inside & eligible[None, :], axis=1)

    def deep_interior_mask(self, points: ArrayLike, r: float) -> np.ndarray:
        """Puntos cuya bola cerrada de radio r cabe en una bola constituyente."""
        return np.any(self._offsets(points) + r <= self.radii[None, :], axis=1)

    def inscribed_ball(self, x: ArrayLike, r: float) -> Tuple[np.ndarray, float]:
        """Bola de radio min(r, h)/2 contenida en B(x, r) ∩ U.

        Se toma una bola B(y, h) ⊂ U que contiene x y se avanza desde x hacia y.
        """
        point = np.asarray(x, dtype=float).ravel()
        if r <= 0:
            raise ValueError("r must be positive")
        offsets = self._offsets(point)[0]
        radii = self.radii
        if not np.any(offsets < radii):
            raise DomainException("Query point lies outside the domain")
        h = self.h
        radius = min(float(r), h) / 2.0

        idx = int(np.argmin(offsets - radii))
        center, big = self.centers[idx], radii[idx]
        offset = offsets[idx]
        if offset <= big - h:
            anchor = point.copy()
        else:
            anchor = center + (big - h) * (point - center) / offset

        gap = float(np.linalg.norm(point - anchor))
        if gap <= radius:
            return point.copy(), radius
        t = radius / gap
        return (1.0 - t) * point + t * anchor, radius


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Configuración Ω_n = {x_1, …, x_n}; el índice de fila es el identificador."""

    points: np.ndarray
    seed: Optional[int] = None
    domain: Optional[DomainSpec] = None

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise DimensionException("Point cloud must be an (n, d) array")
        if pts.shape[1] < 1:
            raise DimensionException("Point cloud dimension must be at least 1")
        if not np.all(np.isfinite(pts)):
            raise DegenerateInputException("Point coordinates must be finite")
        if self.domain is not None:
            if self.domain.dim != pts.shape[1]:
                raise DimensionException("Cloud and domain dimensions differ")
            if len(pts) and not np.all(self.domain.contains(pts)):
                raise DomainException("Cloud has points outside its domain")
        object.__setattr__(self, "points", _frozen(pts))

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def n(self) -> int:
        return int(self.points.shape[0])

    def __len__(self) -> int:
        return self.n

    def prefix(self, m: int) -> "PointCloud":
        if not 0 <= m <= self.n:
            raise ValueError(f"prefix size {m} outside [0, {self.n}]")
        return PointCloud(self.points[:m], seed=self.seed, domain=self.domain)

    def subset(self, indices: Iterable[int]) -> "PointCloud":
        idx = np.asarray(list(indices), dtype=int)
        return PointCloud(self.points[idx], seed=self.seed, domain=self.domain)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"dim": self.dim}
        if self.domain is not None:
            data["balls"] = [b.to_dict() for b in self.domain.balls]
        data["points"] = self.points.tolist()
        data["seed"] = self.seed
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PointCloud":
        domain = DomainSpec.from_dict(data) if data.get("balls") else None
        dim = int(data.get("dim", domain.dim if domain else 0))
        points = np.asarray(data.get("points", []), dtype=float).reshape(-1, dim)
        seed = data.get("seed")
        return cls(points, seed=None if seed is None else int(seed), domain=domain)


def sample_domain(domain: DomainSpec, n: int, seed: int) -> PointCloud:
    """n puntos i.i.d. uniformes en U por rechazo desde la caja envolvente.

    El flujo de lotes no depende de n, así que los prefijos de una muestra
    mayor coinciden con muestras menores de la misma semilla.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    lo, hi = domain.bounding_box()
    accepted = []
    count = drawn = 0
    while count < n:
        batch = rng.uniform(lo, hi, size=(SAMPLE_BATCH, domain.dim))
        drawn += SAMPLE_BATCH
        keep = batch[domain.contains(batch)]
        accepted.append(keep)
        count += len(keep)
        if drawn >= ACCEPTANCE_WINDOW and count / drawn < MIN_ACCEPTANCE:
            raise DomainException(
                f"Rejection acceptance {count / drawn:.2e} below {MIN_ACCEPTANCE:g}"
            )
    points = np.concatenate(accepted)[:n]
    logger.debug("sampled %d points from %d draws", n, drawn)
    return PointCloud(points, seed=seed, domain=domain)


def _grid_axes(lo: np.ndarray, hi: np.ndarray, resolution: float) -> Tuple[np.ndarray, np.ndarray]:
    counts = np.ceil((hi - lo) / resolution).astype(int) + 1
    counts = np.maximum(counts, 2)
    steps = (hi - lo) / (counts - 1)
    return counts, steps


def hausdorff_density(
    cloud: PointCloud, domain: DomainSpec, grid_resolution: float
) -> float:
    """ε_n ≈ sup_{x∈U} min_i ‖x − x_i‖ evaluado en una rejilla del dominio.

    Subestima el valor continuo como mucho en grid_resolution·√d. Los centros
    de las bolas siempre se evalúan.
    """
    if cloud.n == 0:
        raise DegenerateInputException("Hausdorff density of an empty cloud")
    if grid_resolution <= 0:
        raise ValueError("grid_resolution must be positive")
    if cloud.dim != domain.dim:
        raise DimensionException("Cloud and domain dimensions differ")

    tree = cKDTree(cloud.points)
    lo, hi = domain.bounding_box()
    counts, steps = _grid_axes(lo, hi, grid_resolution)
    total = int(np.prod(counts))
    if total > MAX_GRID_POINTS:
        raise DomainException(f"Grid of {total} points is too fine")

    centers_dist, _ = tree.query(domain.centers)
    eps = float(np.max(centers_dist))
    shape = tuple(int(c) for c in counts)
    for start in range(0, total, GRID_CHUNK):
        flat = np.arange(start, min(total, start + GRID_CHUNK))
        idx = np.stack(np.unravel_index(flat, shape), axis=1)
        grid = lo + idx * steps
        grid = grid[domain.contains(grid)]
        if len(grid):
            dist, _ = tree.query(grid)
            eps = max(eps, float(dist.max()))
    return eps


def greedy_packing(
    center: ArrayLike,
    radius: float,
    eta: float,
    seed: int,
    grid_resolution: Optional[float] = None,
) -> np.ndarray:
    """η-empaquetamiento maximal de B(center, radius) por barrido voraz.

    Los candidatos forman una rejilla de paso η/4 desplazada por la semilla y
    se recorren en orden lexicográfico.
    """
    c = np.atleast_1d(np.asarray(center, dtype=float)).ravel()
    if eta <= 0:
        raise ValueError("eta must be positive")
    if radius <= 0:
        raise ValueError("radius must be positive")
    if eta > 2.0 * radius:
        return c[None, :].copy()

    candidates = packing_candidates(c, radius, eta, seed, grid_resolution)
    if len(candidates) == 0:
        return c[None, :].copy()

    threshold = eta * (1.0 + PACKING_GUARD)
    chosen = np.empty_like(candidates)
    count = 0
    for candidate in candidates:
        if count == 0 or np.min(
            np.linalg.norm(chosen[:count] - candidate, axis=1)
        ) >= threshold:
            chosen[count] = candidate
            count += 1
    logger.debug("packing: %d points from %d candidates", count, len(candidates))
    return chosen[:count].copy()


def packing_candidates(
    center: np.ndarray,
    radius: float,
    eta: float,
    seed: int,
    grid_resolution: Optional[float] = None,
) -> np.ndarray:
    """Rejilla de candidatos dentro de la bola abierta, en orden lexicográfico."""
    spacing = float(grid_resolution) if grid_resolution else eta / 4.0
    d = center.shape[0]
    rng = np.random.default_rng(seed)
    offset = rng.uniform(0.0, spacing, size=d)
    per_axis = np.floor((2.0 * radius - offset) / spacing).astype(int) + 1
    if float(np.prod(per_axis.astype(float))) > MAX_PACKING_CANDIDATES:
        raise DomainException("Packing candidate grid too large; raise grid_resolution")
    axes = [
        center[k] - radius + offset[k] + spacing * np.arange(per_axis[k])
        for k in range(d)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    grid = np.stack([m.ravel() for m in mesh], axis=1)
    inside = np.linalg.norm(grid - center, axis=1) < radius
    return grid[inside]
