"""
Simplex regulares, simplex aproximados y trilateración.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.spatial.distance import pdist, squareform

from ..exceptions import (
    DegenerateInputException,
    DimensionException,
    IllConditionedException,
    InapplicableException,
)

logger = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-10
RANK_TOL = 1e-8
SIGMA_MIN = 1e-10


def barycenter_radius(m: int, edge: float = 1.0) -> float:
    """Distancia baricentro-vértice de un m-simplex regular."""
    return edge * math.sqrt((m - 1) / (2.0 * m))


def apex_height(m: int, edge: float = 1.0) -> float:
    """Distancia del vértice que completa un (m+1)-simplex al baricentro de la base."""
    return edge * math.sqrt((m + 1) / (2.0 * m))


def _as_points(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise DimensionException("Expected an (m, d) array of points")
    return pts


@dataclass(frozen=True, eq=False)
class RegularSimplex:
    vertices: np.ndarray
    edge: float

    def __post_init__(self) -> None:
        vertices = _as_points(self.vertices)
        m, d = vertices.shape
        if m < 2:
            raise DimensionException("A simplex needs at least 2 vertices")
        if m > d + 1:
            raise DimensionException(f"{m} vertices do not fit a regular simplex in R^{d}")
        edge = float(self.edge)
        tol = SIMPLEX_TOL * max(1.0, edge)
        if np.any(np.abs(pdist(vertices) - edge) > tol):
            raise DegenerateInputException("Vertices are not equidistant")
        vertices = vertices.copy()
        vertices.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "edge", edge)

    @property
    def m(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def dim(self) -> int:
        return int(self.vertices.shape[1])

    @property
    def barycenter(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def apex(self, sign: int = 1) -> np.ndarray:
        """Vértice que completa un (m+1)-simplex regular, del lado indicado."""
        if self.dim < self.m:
            raise DimensionException("No room for an apex in this dimension")
        mu = self.barycenter
        _, _, vt = np.linalg.svd(self.vertices - mu, full_matrices=True)
        normal = vt[self.m - 1]
        return mu + float(np.sign(sign) or 1.0) * apex_height(self.m, self.edge) * normal


def regular_simplex(
    m: int,
    edge: float,
    dim: int,
    center: Optional[np.ndarray] = None,
    rotation: Optional[np.ndarray] = None,
) -> RegularSimplex:
    """m-simplex regular de arista `edge` en R^dim con baricentro en `center`."""
    if m < 2 or m > dim + 1:
        raise DimensionException(f"m={m} requires 2 <= m <= dim+1 (dim={dim})")
    if edge <= 0:
        raise ValueError("edge must be positive")
    centered = np.eye(m) - 1.0 / m
    basis, _ = np.linalg.qr(centered[:, : m - 1])
    coords = centered @ basis * (edge / math.sqrt(2.0))

    vertices = np.zeros((m, dim))
    vertices[:, : m - 1] = coords
    if rotation is not None:
        rot = np.asarray(rotation, dtype=float)
        if rot.shape != (dim, dim) or not np.allclose(
            rot @ rot.T, np.eye(dim), atol=SIMPLEX_TOL
        ):
            raise DimensionException("rotation must be a dim x dim orthogonal matrix")
        vertices = vertices @ rot.T
    if center is not None:
        vertices = vertices + np.asarray(center, dtype=float)
    return RegularSimplex(vertices, edge)


def approx_simplex_defect(points: np.ndarray) -> float:
    """η = 1 − min/max de las distancias entre pares."""
    pts = _as_points(points)
    if len(pts) < 2:
        raise DimensionException("Need at least 2 points")
    dist = pdist(pts)
    if dist.min() <= 0.0:
        raise DegenerateInputException("Coincident points")
    return float(1.0 - dist.min() / dist.max())


def smallest_relevant_singular_value(points: np.ndarray) -> float:
    """σ_{m−1} de la matriz de puntos tras trasladar el último al origen."""
    pts = _as_points(points)
    m = len(pts)
    if m < 2:
        raise DimensionException("Need at least 2 points")
    singular = np.linalg.svd((pts - pts[-1]).T, compute_uv=False)
    if len(singular) < m - 1:
        return 0.0
    return float(singular[m - 2])


def _max_edge_pair(dist: np.ndarray) -> Tuple[int, int]:
    # argmax sobre el triángulo superior en orden de filas: el par de menor índice gana
    rows, cols = np.triu_indices(len(dist), 1)
    best = int(np.argmax(dist[rows, cols]))
    return int(rows[best]), int(cols[best])


def fit_regular_simplex(points: np.ndarray) -> Tuple[RegularSimplex, float]:
    """Simplex regular en la misma envolvente afín, construido por inducción.

    Conserva el par de arista máxima y añade cada vértice restante sobre la
    normal a la envolvente de los ya construidos, a la altura del ápice regular.
    """
    pts = _as_points(points)
    m, d = pts.shape
    if m < 2:
        raise DimensionException("Need at least 2 points")
    if m > d + 1:
        raise DimensionException(f"{m} points cannot be affinely independent in R^{d}")
    dist = squareform(pdist(pts))
    scale = float(dist.max())
    if scale <= 0.0 or smallest_relevant_singular_value(pts) <= RANK_TOL * scale:
        raise DegenerateInputException("Points do not span an (m-1)-dimensional hull")

    a, b = _max_edge_pair(dist)
    lam = float(dist[a, b])
    fitted = np.empty_like(pts)
    fitted[a], fitted[b] = pts[a], pts[b]
    placed = [a, b]
    for k in (i for i in range(m) if i not in (a, b)):
        base = fitted[placed]
        mu = base.mean(axis=0)
        basis, _ = np.linalg.qr((base[1:] - base[0]).T)
        foot = base[0] + basis @ (basis.T @ (pts[k] - base[0]))
        normal = pts[k] - foot
        height = float(np.linalg.norm(normal))
        if height <= RANK_TOL * lam:
            raise DegenerateInputException("Point lies in the hull of the previous ones")
        fitted[k] = mu + apex_height(len(placed), lam) * normal / height
        placed.append(k)

    deviation = float(np.max(np.linalg.norm(fitted - pts, axis=1)))
    logger.debug("fit_regular_simplex m=%d edge=%.6g deviation=%.3g", m, lam, deviation)
    return RegularSimplex(fitted, lam), deviation


def trilaterate(anchors: np.ndarray, sq_distances: np.ndarray) -> np.ndarray:
    """Punto a partir de distancias cuadradas a d+1 anclas.

    Con el ancla d+1 en el origen, z_iᵀp = u_i/2 con
    u_i = a²_{d+1} − a²_i + ‖z_i‖²; se resuelve por mínimos cuadrados.
    """
    pts = _as_points(anchors)
    d = pts.shape[1]
    a2 = np.asarray(sq_distances, dtype=float).ravel()
    if pts.shape[0] != d + 1 or a2.shape[0] != d + 1:
        raise DimensionException(f"Need {d + 1} anchors and squared distances in R^{d}")
    if np.any(a2 < 0):
        raise ValueError("Squared distances must be nonnegative")
    sigma = smallest_relevant_singular_value(pts)
    if sigma < SIGMA_MIN:
        raise IllConditionedException(f"σ_d = {sigma:.3e} below {SIGMA_MIN:g}")
    base = pts[-1]
    rows = pts[:-1] - base
    u = a2[-1] - a2[:-1] + np.sum(rows**2, axis=1)
    solution, *_ = np.linalg.lstsq(rows, u / 2.0, rcond=None)
    return base + solution


def trilateration_bound(
    anchors: np.ndarray, sq_distances: np.ndarray, other_sq_distances: np.ndarray
) -> float:
    """√d·σ_d⁻¹·max_i |a_i² − b_i²|."""
    pts = _as_points(anchors)
    d = pts.shape[1]
    sigma = smallest_relevant_singular_value(pts)
    if sigma < SIGMA_MIN:
        raise IllConditionedException(f"σ_d = {sigma:.3e} below {SIGMA_MIN:g}")
    gap = np.max(np.abs(np.asarray(sq_distances) - np.asarray(other_sq_distances)))
    return float(math.sqrt(d) * gap / sigma)


@dataclass(frozen=True)
class BarycenterCertificate:
    distance: float
    bound: float
    gamma: float
    sigma: float
    edge: float

    @property
    def holds(self) -> bool:
        return self.distance <= self.bound + SIMPLEX_TOL * max(1.0, self.edge)


def barycenter_bound(points: np.ndarray, p: np.ndarray) -> BarycenterCertificate:
    """Distancia de p ∈ Aff(z) al baricentro frente a la cota por trilateración.

    γ = max‖p − z_i‖² − min‖p − z_i‖². La cota usa también las distancias del
    baricentro a los vértices, de modo que vale para simplex aproximados.
    """
    pts = _as_points(points)
    m = len(pts)
    point = np.asarray(p, dtype=float).ravel()
    scale = float(pdist(pts).max()) if m > 1 else 0.0
    sigma = smallest_relevant_singular_value(pts)
    if scale <= 0.0 or sigma <= RANK_TOL * scale:
        raise DegenerateInputException("Degenerate simplex")

    basis, _ = np.linalg.qr((pts[:-1] - pts[-1]).T)
    rel = point - pts[-1]
    off_hull = float(np.linalg.norm(rel - basis @ (basis.T @ rel)))
    if off_hull > RANK_TOL * max(1.0, scale):
        raise InapplicableException("Point is not in the affine hull of the simplex")

    mu = pts.mean(axis=0)
    a2 = np.sum((point - pts) ** 2, axis=1)
    b2 = np.sum((mu - pts) ** 2, axis=1)
    terms = np.abs((a2[-1] - a2) - (b2[-1] - b2))
    bound = 0.5 * math.sqrt(m - 1) * float(terms.max()) / sigma
    return BarycenterCertificate(
        distance=float(np.linalg.norm(point - mu)),
        bound=bound,
        gamma=float(a2.max() - a2.min()),
        sigma=sigma,
        edge=scale,
    )
