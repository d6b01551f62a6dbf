"""
Ajuste de semejanzas e isometrías entre nubes emparejadas y cotas de
extrapolación para aplicaciones afines.

El ajuste parte de Procrustes por mínimos cuadrados (Umeyama) y refina
localmente la desviación en norma del supremo; el resultado es una cota
superior del ínfimo sobre semejanzas.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy.linalg import expm, polar
from scipy.optimize import minimize

from ..config.settings import calibration_constant
from ..exceptions import (
    DegenerateInputException,
    DimensionException,
    InapplicableException,
)
from .simplex import approx_simplex_defect, fit_regular_simplex, regular_simplex

logger = logging.getLogger(__name__)

ORTHOGONALITY_TOL = 1e-10
VARIANCE_TOL = 1e-24


@dataclass(frozen=True, eq=False)
class SimilarityTransform:
    """S(x) = λR(x) + b con R ortogonal (se permiten reflexiones)."""

    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        rot = np.atleast_2d(np.asarray(self.rotation, dtype=float))
        shift = np.atleast_1d(np.asarray(self.translation, dtype=float)).ravel()
        scale = float(self.scale)
        d = rot.shape[0]
        if rot.shape != (d, d) or shift.shape != (d,):
            raise DimensionException("rotation must be d x d and translation length d")
        if not np.isfinite(scale) or scale < 0:
            raise ValueError(f"scale must be a finite nonnegative number, got {scale}")
        if np.max(np.abs(rot @ rot.T - np.eye(d))) > ORTHOGONALITY_TOL:
            raise DegenerateInputException("rotation is not orthogonal")
        rot, shift = rot.copy(), shift.copy()
        rot.setflags(write=False)
        shift.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", shift)
        object.__setattr__(self, "scale", scale)

    @classmethod
    def identity(cls, dim: int) -> "SimilarityTransform":
        return cls(1.0, np.eye(dim), np.zeros(dim))

    @property
    def dim(self) -> int:
        return int(self.rotation.shape[0])

    @property
    def is_reflection(self) -> bool:
        return bool(np.linalg.det(self.rotation) < 0)

    def as_affine(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.scale * self.rotation, self.translation

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ (self.scale * self.rotation).T + self.translation

    def then(self, other: "SimilarityTransform") -> "SimilarityTransform":
        """Composición x ↦ other(self(x))."""
        return SimilarityTransform(
            other.scale * self.scale,
            other.rotation @ self.rotation,
            other.scale * other.rotation @ self.translation + other.translation,
        )

    def inverse(self) -> "SimilarityTransform":
        if self.scale == 0:
            raise DegenerateInputException("A zero-scale similarity is not invertible")
        rt = self.rotation.T
        return SimilarityTransform(1.0 / self.scale, rt, -rt @ self.translation / self.scale)


def sup_deviation(transform: SimilarityTransform, source: np.ndarray, target: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(transform.apply(source) - target, axis=1)))


def _paired(source: np.ndarray, target: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    src = np.asarray(source, dtype=float)
    tgt = np.asarray(target, dtype=float)
    if src.ndim != 2 or src.shape != tgt.shape:
        raise DimensionException("source and target must be (n, d) arrays of equal shape")
    if len(src) < 2:
        raise DegenerateInputException("Need at least 2 paired points")
    return src, tgt


def _procrustes(
    src: np.ndarray, tgt: np.ndarray, allow_reflection: bool, fit_scale: bool
) -> SimilarityTransform:
    mean_src, mean_tgt = src.mean(axis=0), tgt.mean(axis=0)
    src_c, tgt_c = src - mean_src, tgt - mean_tgt
    var_src = float(np.sum(src_c**2)) / len(src)
    if var_src <= VARIANCE_TOL * (1.0 + float(np.max(np.abs(src))) ** 2):
        raise DegenerateInputException("Source configuration has zero variance")

    cov = tgt_c.T @ src_c / len(src)
    u, singular, vt = np.linalg.svd(cov)
    signs = np.ones(len(singular))
    if not allow_reflection and np.linalg.det(u) * np.linalg.det(vt) < 0:
        signs[-1] = -1.0
    rotation = u @ np.diag(signs) @ vt
    scale = float(np.sum(singular * signs)) / var_src if fit_scale else 1.0
    translation = mean_tgt - scale * rotation @ mean_src
    return SimilarityTransform(max(scale, 0.0), rotation, translation)


def _refine_sup(
    transform: SimilarityTransform,
    src: np.ndarray,
    tgt: np.ndarray,
    fit_scale: bool,
) -> Tuple[SimilarityTransform, float]:
    """Refinamiento local de max_i ‖T(S(x_i)) − y_i‖ con T cercana a la identidad.

    T actúa en el marco del destino, así que el resultado sólo depende de las
    imágenes S(x_i) y no de la parametrización de la fuente.
    """
    images = transform.apply(src)
    pivot = tgt.mean(axis=0)
    d = src.shape[1]
    rows, cols = np.triu_indices(d, 1)
    n_rot = len(rows)
    offset = 1 if fit_scale else 0

    def unpack(theta: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
        log_scale = float(theta[0]) if fit_scale else 0.0
        skew = np.zeros((d, d))
        skew[rows, cols] = theta[offset : offset + n_rot]
        rot = expm(skew - skew.T)
        return log_scale, rot, theta[offset + n_rot :]

    def moved(theta: np.ndarray) -> np.ndarray:
        log_scale, rot, beta = unpack(theta)
        return math.exp(log_scale) * (images - pivot) @ rot.T + pivot + beta

    def sup(theta: np.ndarray) -> float:
        return float(np.max(np.linalg.norm(moved(theta) - tgt, axis=1)))

    start = np.zeros(offset + n_rot + d)
    best_theta, best = start, sup(start)

    with warnings.catch_warnings(), np.errstate(all="ignore"):
        warnings.simplefilter("ignore")
        epigraph = minimize(
            lambda z: z[-1],
            np.append(start, best),
            method="SLSQP",
            bounds=[(None, None)] * len(start) + [(0.0, None)],
            constraints=[
                {
                    "type": "ineq",
                    "fun": lambda z: z[-1] ** 2
                    - np.sum((moved(z[:-1]) - tgt) ** 2, axis=1),
                }
            ],
            options={"maxiter": 200, "ftol": 1e-15},
        )
        if np.all(np.isfinite(epigraph.x)):
            value = sup(epigraph.x[:-1])
            if value < best:
                best_theta, best = epigraph.x[:-1], value
        polish = minimize(
            sup,
            best_theta,
            method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 400 * len(start)},
        )
        if np.all(np.isfinite(polish.x)) and polish.fun < best:
            best_theta = polish.x

    log_scale, rot, beta = unpack(best_theta)
    factor = math.exp(log_scale)
    refinement = SimilarityTransform(
        factor, rot, pivot + beta - factor * rot @ pivot
    )
    refined = transform.then(refinement)
    return refined, sup_deviation(refined, src, tgt)


def _fit(
    source: np.ndarray,
    target: np.ndarray,
    allow_reflection: bool,
    fit_scale: bool,
    refine: bool,
) -> Tuple[SimilarityTransform, float]:
    src, tgt = _paired(source, target)
    transform = _procrustes(src, tgt, allow_reflection, fit_scale)
    error = sup_deviation(transform, src, tgt)
    if refine and error > 0.0:
        refined, refined_error = _refine_sup(transform, src, tgt, fit_scale)
        if refined_error < error:
            logger.debug("sup refinement %.6g -> %.6g", error, refined_error)
            transform, error = refined, refined_error
    return transform, error


def fit_similarity(
    source: np.ndarray,
    target: np.ndarray,
    allow_reflection: bool = True,
    refine: bool = True,
) -> Tuple[SimilarityTransform, float]:
    """Semejanza S con S(source_i) ≈ target_i y su error sup (cota superior)."""
    return _fit(source, target, allow_reflection, fit_scale=True, refine=refine)


def fit_isometry(
    source: np.ndarray,
    target: np.ndarray,
    allow_reflection: bool = True,
    refine: bool = True,
) -> Tuple[SimilarityTransform, float]:
    """Como fit_similarity con la escala fijada a 1."""
    return _fit(source, target, allow_reflection, fit_scale=False, refine=refine)


AffineLike = Union[SimilarityTransform, Tuple[np.ndarray, np.ndarray]]


def _affine_parts(mapping: AffineLike) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(mapping, SimilarityTransform):
        return mapping.as_affine()
    matrix, offset = mapping
    return np.atleast_2d(np.asarray(matrix, dtype=float)), np.asarray(offset, dtype=float)


def _affine_apply(mapping: AffineLike, x: np.ndarray) -> np.ndarray:
    matrix, offset = _affine_parts(mapping)
    return matrix @ x + offset


@dataclass(frozen=True)
class BallWitness:
    center: np.ndarray
    radius: float


@dataclass(frozen=True)
class SimplexWitness:
    points: np.ndarray


@dataclass(frozen=True)
class ExtrapolationBound:
    bound: float
    actual: float

    @property
    def holds(self) -> bool:
        return self.actual <= self.bound * (1.0 + 1e-12) + 1e-15


def affine_deviation_extrapolate(
    first: AffineLike,
    second: AffineLike,
    witness: Union[BallWitness, SimplexWitness],
    bound_on_witness: float,
    query: np.ndarray,
    defect_threshold: Optional[float] = None,
) -> ExtrapolationBound:
    """Cota de ‖S1(x) − S2(x)‖ a partir de su cercanía ε sobre un testigo.

    - Bola B(y, r): 2ε‖x − y‖/r + ε.
    - Simplex z_0..z_d: 2√d·ε‖x − z_0‖/σ_min(Z) + ε con Z = [z_i − z_0].
    """
    x = np.asarray(query, dtype=float).ravel()
    eps = float(bound_on_witness)
    actual = float(np.linalg.norm(_affine_apply(first, x) - _affine_apply(second, x)))

    if isinstance(witness, BallWitness):
        if witness.radius <= 0:
            raise InapplicableException("Ball witness needs a positive radius")
        distance = float(np.linalg.norm(x - np.asarray(witness.center, dtype=float)))
        return ExtrapolationBound(2.0 * eps * distance / witness.radius + eps, actual)

    pts = np.asarray(witness.points, dtype=float)
    d = pts.shape[1]
    if pts.shape[0] != d + 1:
        raise DimensionException(f"Simplex witness needs {d + 1} points in R^{d}")
    threshold = (
        calibration_constant("simplex_defect_threshold", default=0.25)
        if defect_threshold is None
        else defect_threshold
    )
    defect = approx_simplex_defect(pts)
    if defect > threshold:
        raise InapplicableException(
            f"Simplex witness defect {defect:.3f} exceeds threshold {threshold:.3f}"
        )
    sigma = float(np.linalg.svd(pts[1:] - pts[0], compute_uv=False).min())
    if sigma <= 0:
        raise DegenerateInputException("Simplex witness is flat")
    distance = float(np.linalg.norm(x - pts[0]))
    return ExtrapolationBound(2.0 * math.sqrt(d) * eps * distance / sigma + eps, actual)


@dataclass(frozen=True, eq=False)
class SimilarityGap:
    scale: float
    rotation: np.ndarray
    gap: float
    defect: float


def affine_similarity_gap(matrix: np.ndarray) -> SimilarityGap:
    """Distancia de una aplicación lineal A a la semejanza λR más cercana
    obtenida del simplex regular ajustado a la imagen de un simplex unidad."""
    a = np.atleast_2d(np.asarray(matrix, dtype=float))
    d = a.shape[0]
    if a.shape != (d, d):
        raise DimensionException("matrix must be square")
    unit = regular_simplex(d + 1, 1.0, d)
    base = unit.vertices - unit.vertices[0]
    image = base @ a.T
    defect = approx_simplex_defect(image)
    fitted, _ = fit_regular_simplex(image)
    lam = fitted.edge
    edges = (fitted.vertices[1:] - fitted.vertices[0]).T / lam
    rotation, _ = polar(edges @ np.linalg.inv(base[1:].T))
    gap = float(np.linalg.norm(a - lam * rotation, 2))
    return SimilarityGap(scale=lam, rotation=rotation, gap=gap, defect=defect)

