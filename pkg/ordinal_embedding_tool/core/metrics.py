"""
Métricas: error de alineación con la verdad, módulo de continuidad,
defectos de ε-isometría y de midlinealidad, y certificados de los lemas de
casi-semejanza y de cota inferior por diámetro.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import ConvexHull, Delaunay, QhullError, cKDTree
from scipy.spatial.distance import pdist

from ..config.settings import calibration_constant, settings
from ..exceptions import DegenerateInputException, DimensionException, InapplicableException
from .alignment import SimilarityTransform, fit_similarity
from .designs import count_discordant
from .embedders import Embedding, one_nn_interpolate
from .geometry import DomainSpec, PointCloud

logger = logging.getLogger(__name__)

PointMap = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class AlignmentResult:
    transform: SimilarityTransform
    sup_error: float
    rms_error: float
    scale_estimate: float
    size: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sup_error": self.sup_error,
            "rms_error": self.rms_error,
            "scale_estimate": self.scale_estimate,
            "size": self.size,
        }


def interior_indices(cloud: PointCloud, domain: DomainSpec, h: Optional[float] = None) -> np.ndarray:
    """Índices de Ω_n ∩ U^h."""
    return np.flatnonzero(domain.interior_mask(cloud.points, h))


def alignment_error(
    embedding: Embedding,
    truth: PointCloud,
    restrict: Optional[Sequence[int]] = None,
    refine: bool = True,
) -> AlignmentResult:
    """max_x ‖φ_n(x) − S_n(x)‖ para la semejanza ajustada S_n (cota superior del ínfimo)."""
    if embedding.n != truth.n:
        raise DimensionException("Embedding and truth have different item counts")
    idx = np.arange(truth.n) if restrict is None else np.asarray(restrict, dtype=int)
    if len(idx) < truth.dim + 1:
        raise DegenerateInputException(
            f"Need at least {truth.dim + 1} items to align, got {len(idx)}"
        )
    source, target = truth.points[idx], embedding.points[idx]
    transform, sup_error = fit_similarity(source, target, refine=refine)
    residuals = np.linalg.norm(transform.apply(source) - target, axis=1)
    return AlignmentResult(
        transform=transform,
        sup_error=float(sup_error),
        rms_error=float(np.sqrt(np.mean(residuals**2))),
        scale_estimate=transform.scale,
        size=len(idx),
    )


@dataclass
class ModulusProfile:
    eta_grid: np.ndarray
    omega_values: np.ndarray

    def rows(self) -> List[Tuple[float, float]]:
        return list(zip(self.eta_grid.tolist(), self.omega_values.tolist()))


def _paired_distances(source: np.ndarray, image: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    src = np.asarray(source, dtype=float)
    img = np.asarray(image, dtype=float)
    if src.ndim != 2 or img.ndim != 2 or len(src) != len(img):
        raise DimensionException("source and image must be paired (n, d) arrays")
    if len(src) < 2:
        raise DegenerateInputException("Need at least 2 points")
    return pdist(src), pdist(img)


def modulus_of_continuity(
    source: np.ndarray, image: np.ndarray, eta_grid: Sequence[float]
) -> ModulusProfile:
    """ω(η) = max{‖ψ(x) − ψ(x′)‖ : ‖x − x′‖ ≤ η}, exacto sobre todos los pares."""
    src_d, img_d = _paired_distances(source, image)
    order = np.argsort(src_d, kind="stable")
    sorted_src = src_d[order]
    running = np.maximum.accumulate(img_d[order])
    grid = np.asarray(eta_grid, dtype=float)
    counts = np.searchsorted(sorted_src, grid, side="right")
    omega = np.where(counts > 0, running[np.maximum(counts - 1, 0)], 0.0)
    return ModulusProfile(eta_grid=grid, omega_values=omega)


@dataclass
class EnvelopeFit:
    kind: str
    constant: float
    envelope: np.ndarray
    residuals: np.ndarray

    @property
    def holds(self) -> bool:
        return bool(np.all(self.residuals >= -1e-12 * max(1.0, self.constant)))

    def rows(self, profile: ModulusProfile) -> List[Tuple[float, float, float]]:
        return list(
            zip(
                profile.eta_grid.tolist(),
                profile.omega_values.tolist(),
                (self.constant * self.envelope).tolist(),
            )
        )


def _fit_envelope(kind: str, profile: ModulusProfile, shape: np.ndarray) -> EnvelopeFit:
    positive = shape > 0
    if not np.any(positive):
        raise DegenerateInputException("Envelope shape vanishes on the whole grid")
    constant = float(np.max(profile.omega_values[positive] / shape[positive]))
    residuals = constant * shape - profile.omega_values
    return EnvelopeFit(kind=kind, constant=constant, envelope=shape, residuals=residuals)


def fit_linear_envelope(profile: ModulusProfile, eps: float) -> EnvelopeFit:
    """Menor C con ω(η) ≤ C(η + ε) en la rejilla."""
    return _fit_envelope("linear", profile, profile.eta_grid + eps)


def fit_weak_envelope(profile: ModulusProfile, eps: float, h: float, dim: int) -> EnvelopeFit:
    """Menor C con ω(η) ≤ C(η/h + √(ε/h))^{1/d} en la rejilla."""
    if h <= 0:
        raise ValueError("h must be positive")
    shape = (profile.eta_grid / h + math.sqrt(eps / h)) ** (1.0 / dim)
    return _fit_envelope("weak", profile, shape)


def eps_isometry_defect(source: np.ndarray, image: np.ndarray) -> float:
    """max |‖f(x) − f(y)‖ − ‖x − y‖| sobre todos los pares."""
    src_d, img_d = _paired_distances(source, image)
    return float(np.max(np.abs(img_d - src_d)))


def thickness(points: np.ndarray, directions: int = 1000, seed: int = 0) -> float:
    """θ(V) = min_u diam(uᵀV), evaluado en normales de facetas de la envolvente
    convexa y en direcciones aleatorias. Exacto para d ≤ 2; en otro caso, cota
    superior."""
    pts = np.asarray(points, dtype=float)
    n, d = pts.shape
    if n < 2:
        raise DegenerateInputException("Need at least 2 points")
    if d == 1:
        return float(np.ptp(pts[:, 0]))
    rng = np.random.default_rng(seed)
    units = rng.standard_normal((directions, d))
    units /= np.linalg.norm(units, axis=1, keepdims=True)
    if n > d:
        try:
            hull = ConvexHull(pts)
            units = np.vstack([units, hull.equations[:, :d]])
        except QhullError:
            return 0.0
    projections = pts @ units.T
    return float(np.min(projections.max(axis=0) - projections.min(axis=0)))


def nn_map(embedding: Embedding, cloud: PointCloud) -> PointMap:
    """Interpolación 1-NN de una configuración discreta como función en U."""
    return lambda queries: one_nn_interpolate(embedding, cloud, queries)


def midlinearity_defect(
    func: PointMap, points: np.ndarray, pair_samples: int = 1000, seed: int = 0
) -> float:
    """max sobre pares muestreados de ‖f((x+y)/2) − (f(x)+f(y))/2‖."""
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        raise DegenerateInputException("Need at least 2 points")
    rng = np.random.default_rng(seed)
    first = rng.integers(0, len(pts), size=pair_samples)
    second = rng.integers(0, len(pts), size=pair_samples)
    x, y = pts[first], pts[second]
    gap = np.asarray(func((x + y) / 2.0)) - (np.asarray(func(x)) + np.asarray(func(y))) / 2.0
    return float(np.max(np.linalg.norm(gap, axis=1)))


@dataclass(frozen=True, eq=False)
class AffineFit:
    matrix: np.ndarray
    offset: np.ndarray
    deviation: float


def affine_fit_deviation(func: PointMap, points: np.ndarray) -> AffineFit:
    """Ajuste afín por mínimos cuadrados de f sobre `points` y su desviación sup."""
    pts = np.asarray(points, dtype=float)
    values = np.asarray(func(pts), dtype=float)
    design = np.hstack([pts, np.ones((len(pts), 1))])
    coef, *_ = np.linalg.lstsq(design, values, rcond=None)
    fitted = design @ coef
    return AffineFit(
        matrix=coef[:-1].T,
        offset=coef[-1],
        deviation=float(np.max(np.linalg.norm(values - fitted, axis=1))),
    )


class _RangeExtrema:
    """Tabla dispersa para máximos y mínimos en ventanas [lo, hi)."""

    def __init__(self, values: np.ndarray):
        self.maxima = [values]
        self.minima = [values]
        width = 1
        while 2 * width <= len(values):
            self.maxima.append(np.maximum(self.maxima[-1][:-width], self.maxima[-1][width:]))
            self.minima.append(np.minimum(self.minima[-1][:-width], self.minima[-1][width:]))
            width *= 2

    def query(self, lo: np.ndarray, hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        level = np.floor(np.log2(np.maximum(hi - lo, 1))).astype(int)
        upper = np.empty(len(lo))
        lower = np.empty(len(lo))
        for j in np.unique(level):
            sel = level == j
            a, b = lo[sel], hi[sel] - (1 << j)
            upper[sel] = np.maximum(self.maxima[j][a], self.maxima[j][b])
            lower[sel] = np.minimum(self.minima[j][a], self.minima[j][b])
        return upper, lower


@dataclass
class NearSimReport:
    eta_grid: np.ndarray
    discrepancy: np.ndarray
    eps: float
    constant: float
    budget: float
    slope: float
    pairs_tested: int
    fits: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eta_grid": self.eta_grid.tolist(),
            "discrepancy": self.discrepancy.tolist(),
            "eps": self.eps,
            "constant": self.constant,
            "budget": self.budget,
            "slope": self.slope,
            "pairs_tested": self.pairs_tested,
            "fits": self.fits,
        }


def near_sim_check(
    source: np.ndarray,
    image: np.ndarray,
    center: np.ndarray,
    radius: float,
    eps: float,
    eta_grid: Sequence[float],
    tolerance_budget: Optional[float] = None,
    pair_samples: int = 2000,
    seed: int = 0,
) -> NearSimReport:
    """Discrepancia max |‖ψ(x) − ψ(x′)‖ − ‖ψ(x†) − ψ(x‡)‖| entre pares de
    longitudes a distancia ≤ η, con x, x′ ∈ B(v, 3r/4).

    Requiere que ψ sea isotónica en la bola; si no, InapplicableException.
    """
    src = np.asarray(source, dtype=float)
    img = np.asarray(image, dtype=float)
    src_d, img_d = _paired_distances(src, img)
    if count_discordant(src_d, img_d) > 0:
        raise InapplicableException("Map is not isotonic on the tested ball")

    n = len(src)
    rows, cols = np.triu_indices(n, 1)
    offsets = np.linalg.norm(src - np.asarray(center, dtype=float), axis=1)
    inner = np.flatnonzero((offsets[rows] < 0.75 * radius) & (offsets[cols] < 0.75 * radius))
    if len(inner) == 0:
        raise InapplicableException("No pairs inside B(v, 3r/4)")
    rng = np.random.default_rng(seed)
    picks = inner if len(inner) <= pair_samples else rng.choice(inner, pair_samples, replace=False)

    order = np.argsort(src_d, kind="stable")
    sorted_src, sorted_img = src_d[order], img_d[order]
    table = _RangeExtrema(sorted_img)
    grid = np.asarray(eta_grid, dtype=float)
    discrepancy = np.empty(len(grid))
    for t, eta in enumerate(grid):
        lo = np.searchsorted(sorted_src, src_d[picks] - eta, side="left")
        hi = np.searchsorted(sorted_src, src_d[picks] + eta, side="right")
        upper, lower = table.query(lo, hi)
        own = img_d[picks]
        discrepancy[t] = float(np.max(np.maximum(upper - own, own - lower)))

    shape = grid + eps
    positive = shape > 0
    constant = float(np.max(discrepancy[positive] / shape[positive])) if np.any(positive) else 0.0
    if tolerance_budget is None:
        tolerance_budget = calibration_constant("near_sim", default=1.0) * float(img_d.max()) / radius
    scale = float(img_d.max() / src_d.max()) if src_d.max() > 0 else 1.0
    slope = float(np.dot(shape, discrepancy) / np.dot(shape, shape)) / scale if np.any(positive) else 0.0
    report = NearSimReport(
        eta_grid=grid,
        discrepancy=discrepancy,
        eps=float(eps),
        constant=constant,
        budget=float(tolerance_budget),
        slope=slope,
        pairs_tested=int(len(picks)),
        fits=bool(constant <= tolerance_budget),
    )
    logger.debug("near_sim C=%.4g budget=%.4g", constant, tolerance_budget)
    return report


def hull_density(points: np.ndarray, resolution: Optional[float] = None) -> float:
    """δ_H(Λ, conv Λ) evaluado en una rejilla de la envolvente convexa."""
    pts = np.asarray(points, dtype=float)
    n, d = pts.shape
    if n < 2:
        return 0.0
    res = settings.hausdorff_resolution if resolution is None else float(resolution)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = max(float(np.max(hi - lo)), 1e-12)
    step = res * span
    axes = [np.arange(lo[k], hi[k] + step / 2, step) for k in range(d)]
    grid = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    if d > 1:
        try:
            grid = grid[Delaunay(pts).find_simplex(grid) >= 0]
        except QhullError as e:
            raise DegenerateInputException("Points do not span their ambient space") from e
    if len(grid) == 0:
        return 0.0
    dist, _ = cKDTree(pts).query(grid)
    return float(dist.max())


@dataclass
class DiamBoundReport:
    c: float
    eps: float
    checked_pairs: int
    min_ratio: float
    violators: List[Tuple[int, int]] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return not self.violators

    def to_dict(self) -> Dict[str, Any]:
        return {
            "c": self.c,
            "eps": self.eps,
            "checked_pairs": self.checked_pairs,
            "min_ratio": self.min_ratio,
            "violators": [list(p) for p in self.violators],
            "holds": self.holds,
        }


def diam_lower_bound_check(
    source: np.ndarray,
    image: np.ndarray,
    eps: Optional[float] = None,
    resolution: Optional[float] = None,
) -> DiamBoundReport:
    """‖ψ(x) − ψ(x′)‖ ≥ c‖x − x′‖ con c = diam(ψ(Λ))/(5 diam(Λ)) para todo
    par con ‖x − x′‖ ≥ 4ε."""
    src_d, img_d = _paired_distances(source, image)
    eps = hull_density(source, resolution) if eps is None else float(eps)
    c = float(img_d.max() / (5.0 * src_d.max())) if src_d.max() > 0 else 0.0
    checked = src_d >= 4.0 * eps
    ratios = np.where(src_d > 0, img_d / np.where(src_d > 0, src_d, 1.0), np.inf)
    bad = np.flatnonzero(checked & (img_d < c * src_d * (1.0 - 1e-12)))
    rows, cols = np.triu_indices(len(np.asarray(source)), 1)
    return DiamBoundReport(
        c=c,
        eps=eps,
        checked_pairs=int(checked.sum()),
        min_ratio=float(ratios[checked].min()) if np.any(checked) else math.inf,
        violators=[(int(rows[t]), int(cols[t])) for t in bad],
    )
