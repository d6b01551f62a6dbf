"""
Embedders que producen configuraciones compatibles con un diseño de
comparaciones.

- exact_rejection_embed: muestreo por rechazo uniforme en la bola unidad.
- refine_embed: minimización de una penalización bisagra sobre distancias
  cuadradas, con reinicios.
- landmark_embed: dos etapas (landmarks, luego celdas de Voronoi iteradas).
- one_nn_interpolate: extensión 1-NN de una configuración a todo el dominio.
"""

from __future__ import annotations

import logging
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import linprog
from scipy.spatial.distance import cdist

from ..config.settings import settings
from ..exceptions import (
    ConfigException,
    DegenerateInputException,
    DesignException,
    DesignSizeException,
    DimensionException,
    EmbeddingTimeoutException,
    InsufficientLandmarksException,
    NumericException,
)
from ..utils.seeds import derive_seed, rng_for
from .alignment import SimilarityTransform
from .designs import ComparisonSet, LandmarkDesign, LocalDesign, image_distances
from .geometry import PointCloud

logger = logging.getLogger(__name__)

MAX_BACKTRACKS = 30
MIN_KEPT_FRACTION = 8
REPLENISH_ROUNDS = 4
TIE_TOLERANCE = 1e-12
QUERY_CHUNK = 2048


@dataclass(frozen=True, eq=False)
class Embedding:
    """Posiciones p_i (fila i) y procedencia del embedder que las produjo."""

    points: np.ndarray
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim != 2:
            raise DimensionException("Embedding points must be an (n, d) array")
        if not np.all(np.isfinite(pts)):
            raise NumericException("Embedding has non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "provenance", dict(self.provenance))

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def n(self) -> int:
        return int(self.points.shape[0])

    def bounding_ball(self) -> Tuple[np.ndarray, float]:
        """Bola Q centrada en el centroide que contiene la imagen."""
        center = self.points.mean(axis=0)
        return center, float(np.max(np.linalg.norm(self.points - center, axis=1)))

    def transformed(self, transform: SimilarityTransform) -> "Embedding":
        provenance = dict(self.provenance, transformed=True)
        return Embedding(transform.apply(self.points), provenance)

    def subset(self, indices: Any) -> "Embedding":
        return Embedding(self.points[np.asarray(indices, dtype=int)], self.provenance)


@dataclass
class EmbedReport:
    violations: int
    iterations: int
    wall_time: float
    extras: Dict[str, Any] = field(default_factory=dict)

    @property
    def exact(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "violations": self.violations,
            "iterations": self.iterations,
            "wall_time": self.wall_time,
        }
        data.update({k: v for k, v in self.extras.items() if k != "penalty_trace"})
        return data


def uniform_ball(rng: np.random.Generator, count: int, dim: int, shape: Tuple[int, ...] = ()) -> np.ndarray:
    """Puntos uniformes en la bola unidad de R^dim con forma shape + (count, dim)."""
    directions = rng.standard_normal(shape + (count, dim))
    directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
    radii = rng.random(shape + (count, 1)) ** (1.0 / dim)
    return directions * radii


def normalize(points: np.ndarray) -> np.ndarray:
    """Centra y escala a radio cuadrático medio unidad."""
    centered = points - points.mean(axis=0)
    rms = float(np.sqrt(np.mean(np.sum(centered**2, axis=1))))
    if rms <= 0.0 or not np.isfinite(rms):
        raise NumericException("Configuration collapsed to a point", {"rms": rms})
    return centered / rms


def classical_mds(dissimilarity: np.ndarray, dim: int) -> np.ndarray:
    """Escalado clásico (Torgerson) de una matriz de disimilitudes."""
    D = np.asarray(dissimilarity, dtype=float)
    n = len(D)
    H = np.eye(n) - np.ones((n, n)) / n
    B = -H.dot(D**2).dot(H) / 2
    evals, evecs = np.linalg.eigh(B)
    idx = np.argsort(evals)[::-1][:dim]
    evals, evecs = evals[idx], evecs[:, idx]
    coords = np.zeros((n, dim))
    positive = evals > 0
    coords[:, : int(positive.sum())] = evecs[:, positive] * np.sqrt(evals[positive])
    return coords


@dataclass
class RefineSchedule:
    iterations: int = 2000
    restarts: int = 5
    learning_rate: float = 0.05
    margin: Optional[float] = None
    margin_stages: int = 3
    margin_decay: float = 0.1
    check_every: int = 25
    batch_size: Optional[int] = None
    enforce_outside: bool = False
    workers: int = 1

    def margins(self) -> List[float]:
        base = settings.default_margin if self.margin is None else float(self.margin)
        stages = max(1, int(self.margin_stages))
        if base == 0.0:
            return [0.0]
        return [base * self.margin_decay**s for s in range(stages - 1)] + [0.0]


def _hinge(points: np.ndarray, tuples: np.ndarray, margin: float) -> Tuple[float, np.ndarray]:
    """Σ max(0, ‖p_i − p_j‖² − ‖p_k − p_l‖² + margin) y su gradiente."""
    left = points[tuples[:, 0]] - points[tuples[:, 1]]
    right = points[tuples[:, 2]] - points[tuples[:, 3]]
    slack = np.sum(left**2, axis=1) - np.sum(right**2, axis=1) + margin
    active = slack > 0
    penalty = float(np.sum(slack[active]))
    grad = np.zeros_like(points)
    if np.any(active):
        t, lft, rgt = tuples[active], 2.0 * left[active], 2.0 * right[active]
        n = len(points)
        for axis in range(points.shape[1]):
            grad[:, axis] = (
                np.bincount(t[:, 0], weights=lft[:, axis], minlength=n)
                - np.bincount(t[:, 1], weights=lft[:, axis], minlength=n)
                - np.bincount(t[:, 2], weights=rgt[:, axis], minlength=n)
                + np.bincount(t[:, 3], weights=rgt[:, axis], minlength=n)
            )
    return penalty, grad


class _RefineRun:
    """Un reinicio del descenso con márgenes decrecientes."""

    def __init__(self, cset: ComparisonSet, schedule: RefineSchedule, restart: int, seed: int):
        self.cset = cset
        self.schedule = schedule
        self.restart = restart
        self.rng = rng_for(seed, "restart", restart)
        self.outside = schedule.enforce_outside and isinstance(cset, LocalDesign)
        self.dynamic = bool(
            not cset.certificate_is_static or self.outside or schedule.batch_size
        )
        self.iterations = 0
        self.trace: List[float] = []

    def _tuples(self, points: np.ndarray, margin: float) -> np.ndarray:
        tuples = self.cset.certificate(points)
        if self.outside:
            tuples = np.concatenate([tuples, self.cset.outside_certificate(points)])
        limit = self.schedule.batch_size
        if limit and len(tuples) > limit:
            slack = _hinge_slack(points, tuples, margin)
            active = np.flatnonzero(slack > 0)
            if len(active) >= limit:
                pick = self.rng.choice(active, size=limit, replace=False)
            else:
                rest = np.setdiff1d(np.arange(len(tuples)), active)
                fill = self.rng.choice(rest, size=limit - len(active), replace=False)
                pick = np.concatenate([active, fill])
            tuples = tuples[np.sort(pick)]
        return tuples

    def violations(self, points: np.ndarray) -> Tuple[int, int]:
        outside = self.cset.count_outside_violations(points) if self.outside else 0
        return self.cset.count_violations(points), outside

    def run(self, start: np.ndarray) -> Tuple[np.ndarray, int, int]:
        points = normalize(start)
        inside, outside = self.violations(points)
        if inside + outside == 0:
            return points, inside, outside

        schedule = self.schedule
        margins = schedule.margins()
        per_stage = max(1, schedule.iterations // len(margins))
        lr = schedule.learning_rate
        for margin in margins:
            tuples = self._tuples(points, margin)
            penalty, grad = _hinge(points, tuples, margin)
            for step in range(per_stage):
                if not (np.isfinite(penalty) and np.all(np.isfinite(grad))):
                    raise NumericException(
                        "Non-finite penalty or gradient",
                        {"restart": self.restart, "iteration": self.iterations, "penalty": penalty},
                    )
                self.iterations += 1
                accepted = False
                for _ in range(MAX_BACKTRACKS):
                    candidate = normalize(points - lr * grad)
                    new_penalty, new_grad = _hinge(candidate, tuples, margin)
                    if new_penalty <= penalty:
                        points, penalty, grad = candidate, new_penalty, new_grad
                        lr *= 1.05
                        accepted = True
                        break
                    lr *= 0.5
                self.trace.append(penalty)
                if not accepted:
                    logger.debug("restart %d stalled at margin %.3g", self.restart, margin)
                    break

                if penalty == 0.0 or (step + 1) % schedule.check_every == 0:
                    inside, outside = self.violations(points)
                    if inside + outside == 0:
                        return points, inside, outside
                    if self.dynamic:
                        tuples = self._tuples(points, margin)
                        penalty, grad = _hinge(points, tuples, margin)
                    if penalty == 0.0:
                        break
        inside, outside = self.violations(points)
        return points, inside, outside


def _hinge_slack(points: np.ndarray, tuples: np.ndarray, margin: float) -> np.ndarray:
    left = np.sum((points[tuples[:, 0]] - points[tuples[:, 1]]) ** 2, axis=1)
    right = np.sum((points[tuples[:, 2]] - points[tuples[:, 3]]) ** 2, axis=1)
    return left - right + margin


def _initial(
    cset: ComparisonSet,
    dim: int,
    init: str,
    restart: int,
    seed: int,
    initial: Optional[np.ndarray],
) -> np.ndarray:
    rng = rng_for(seed, "init", restart)
    if init == "random":
        return rng.standard_normal((cset.n, dim))
    if init == "given":
        if initial is None:
            raise ConfigException("init='given' needs an initial configuration")
        start = np.asarray(initial, dtype=float)
        if start.shape != (cset.n, dim):
            raise DimensionException(f"Initial configuration must be ({cset.n}, {dim})")
        if restart == 0:
            return start
        return start + 0.05 * float(np.std(start)) * rng.standard_normal(start.shape)
    if init == "spectral":
        start = classical_mds(cset.rank_surrogate(), dim)
        jitter = 1e-3 if restart == 0 else 0.05
        return start + jitter * max(float(np.std(start)), 1e-6) * rng.standard_normal(start.shape)
    raise ConfigException(f"Unknown init: {init}")


def refine_embed(
    cset: ComparisonSet,
    dim: int,
    seed: int,
    init: str = "random",
    schedule: Optional[RefineSchedule] = None,
    initial: Optional[np.ndarray] = None,
) -> Tuple[Embedding, EmbedReport]:
    """Descenso por gradiente con reinicios sobre la penalización bisagra.

    Devuelve el mejor reinicio: el primero (por índice) con cero violaciones
    o, si ninguno lo logra, el de menos violaciones.
    """
    if dim < 1:
        raise DimensionException("Embedding dimension must be at least 1")
    schedule = schedule or RefineSchedule()
    started = time.perf_counter()

    def attempt(restart: int) -> Tuple[int, np.ndarray, int, int, _RefineRun]:
        run = _RefineRun(cset, schedule, restart, seed)
        start = _initial(cset, dim, init, restart, seed, initial)
        if init == "given" and restart == 0:
            inside, outside = run.violations(start)
            if inside + outside == 0:
                return restart, np.asarray(start, dtype=float), inside, outside, run
        points, inside, outside = run.run(start)
        logger.debug("restart %d: %d violations after %d iterations", restart, inside, run.iterations)
        return restart, points, inside, outside, run

    restarts = max(1, schedule.restarts)
    results = []
    if schedule.workers <= 1:
        for r in range(restarts):
            results.append(attempt(r))
            if results[-1][2] + results[-1][3] == 0:
                break
    else:
        with ThreadPoolExecutor(max_workers=schedule.workers) as pool:
            results = list(pool.map(attempt, range(restarts)))

    best = min(results, key=lambda res: (res[2] + res[3], res[0]))
    restart, points, inside, outside, run = best
    report = EmbedReport(
        violations=int(inside),
        iterations=run.iterations,
        wall_time=time.perf_counter() - started,
        extras={
            "restart": restart,
            "restarts_run": len(results),
            "penalty_trace": run.trace,
        },
    )
    if run.outside:
        report.extras["outside_violations"] = int(outside)
    logger.info(
        "refine_embed %s n=%d: %d violations (restart %d)", cset.kind, cset.n, inside, restart
    )
    embedding = Embedding(
        points, {"embedder": "refine", "seed": seed, "init": init, "restart": restart}
    )
    return embedding, report


def exact_rejection_embed(
    cset: ComparisonSet,
    dim: int,
    seed: int,
    max_draws: int = 1_000_000,
) -> Tuple[Embedding, EmbedReport]:
    """Primer lote i.i.d. uniforme en la bola unidad que cumple estrictamente
    todas las comparaciones afirmadas."""
    if cset.n > settings.rejection_max_items:
        raise DesignSizeException(
            f"Rejection sampling guarded to m <= {settings.rejection_max_items}, got {cset.n}"
        )
    started = time.perf_counter()
    tuples = cset.materialize()
    rng = np.random.default_rng(seed)
    draws = 0
    while draws < max_draws:
        batch = min(settings.rejection_batch, max_draws - draws)
        configs = uniform_ball(rng, cset.n, dim, shape=(batch,))
        left = np.linalg.norm(configs[:, tuples[:, 0]] - configs[:, tuples[:, 1]], axis=2)
        right = np.linalg.norm(configs[:, tuples[:, 2]] - configs[:, tuples[:, 3]], axis=2)
        ok = np.all(left < right, axis=1)
        if np.any(ok):
            first = int(np.argmax(ok))
            draws += first + 1
            embedding = Embedding(configs[first], {"embedder": "rejection", "seed": seed})
            report = EmbedReport(
                violations=cset.count_violations_exhaustive(embedding.points),
                iterations=draws,
                wall_time=time.perf_counter() - started,
                extras={"draws": draws},
            )
            logger.debug("rejection success after %d draws", draws)
            return embedding, report
        draws += batch
    raise EmbeddingTimeoutException(draws)


class _CellPlacer:
    """Ubica un no-landmark en su celda hoja respecto de los landmarks embebidos."""

    def __init__(
        self,
        cset: LandmarkDesign,
        anchors: np.ndarray,
        samples: int,
        placement: str,
        seed: int,
    ):
        self.cset = cset
        self.anchors = anchors
        self.samples = samples
        self.placement = placement
        self.seed = seed
        positions = anchors[cset.landmarks.indices]
        self.center = positions.mean(axis=0)
        self.radius = max(float(np.max(np.linalg.norm(positions - self.center, axis=1))), 1e-12)

    def _satisfies(self, candidates: np.ndarray, chain: np.ndarray) -> np.ndarray:
        near = np.linalg.norm(candidates[:, None, :] - self.anchors[chain[:, 0]][None], axis=2)
        far = np.linalg.norm(candidates[:, None, :] - self.anchors[chain[:, 1]][None], axis=2)
        return np.all(near <= far, axis=1)

    def monte_carlo(self, i: int) -> Tuple[Optional[np.ndarray], int]:
        rng = rng_for(self.seed, "cell", i)
        chain = self.cset.item_chain(i)
        dim = self.anchors.shape[1]
        kept = self.center + self.radius * uniform_ball(rng, self.samples, dim)
        floor = max(1, self.samples // MIN_KEPT_FRACTION)
        for depth, (a, b) in enumerate(chain):
            mask = np.linalg.norm(kept - self.anchors[a], axis=1) <= np.linalg.norm(
                kept - self.anchors[b], axis=1
            )
            if not np.any(mask):
                return (kept.mean(axis=0) if depth else None), depth
            kept = kept[mask]
            rounds = 0
            while len(kept) < floor and rounds < REPLENISH_ROUNDS:
                lo, hi = kept.min(axis=0), kept.max(axis=0)
                pad = 0.05 * (hi - lo) + 1e-12
                fresh = rng.uniform(lo - pad, hi + pad, size=(self.samples, dim))
                inside = np.linalg.norm(fresh - self.center, axis=1) <= self.radius
                fresh = fresh[inside]
                fresh = fresh[self._satisfies(fresh, chain[: depth + 1])]
                kept = np.concatenate([kept, fresh])
                rounds += 1
        return kept.mean(axis=0), len(chain)

    def chebyshev(self, i: int) -> Tuple[Optional[np.ndarray], int]:
        chain = self.cset.item_chain(i)
        dim = self.anchors.shape[1]
        near, far = self.anchors[chain[:, 0]], self.anchors[chain[:, 1]]
        normals = 2.0 * (far - near)
        bounds = np.sum(far**2, axis=1) - np.sum(near**2, axis=1)
        box = np.vstack([np.eye(dim), -np.eye(dim)])
        box_bounds = np.concatenate([self.center + self.radius, -(self.center - self.radius)])
        a = np.vstack([normals, box])
        b = np.concatenate([bounds, box_bounds])
        a_ub = np.hstack([a, np.linalg.norm(a, axis=1, keepdims=True)])
        cost = np.zeros(dim + 1)
        cost[-1] = -1.0
        result = linprog(
            cost,
            A_ub=a_ub,
            b_ub=b,
            bounds=[(None, None)] * dim + [(0.0, None)],
            method="highs",
        )
        if result.status != 0:
            return None, 0
        return result.x[:dim], len(chain)

    def place(self, i: int) -> Tuple[Optional[np.ndarray], int]:
        if self.placement == "chebyshev":
            return self.chebyshev(i)
        return self.monte_carlo(i)


def landmark_embed(
    cset: LandmarkDesign,
    dim: int,
    seed: int,
    stage1: str = "refine",
    cell_samples: int = 2000,
    placement: str = "monte_carlo",
    schedule: Optional[RefineSchedule] = None,
    max_draws: int = 1_000_000,
) -> Tuple[Embedding, EmbedReport]:
    """Embedding en dos etapas para diseños de landmarks."""
    if not isinstance(cset, LandmarkDesign):
        raise DesignException("landmark_embed needs a landmark design")
    if cset.landmarks.ell < dim + 1:
        raise InsufficientLandmarksException(
            f"ell={cset.landmarks.ell} landmarks cannot span R^{dim}"
        )
    if placement not in ("monte_carlo", "chebyshev"):
        raise ConfigException(f"Unknown placement: {placement}")
    started = time.perf_counter()

    sub = cset.subdesign()
    stage_seed = derive_seed(seed, "stage1")
    if stage1 == "exact":
        first, first_report = exact_rejection_embed(sub, dim, stage_seed, max_draws=max_draws)
    elif stage1 == "refine":
        init = "random" if sub.n <= dim + 1 else "spectral"
        first, first_report = refine_embed(sub, dim, stage_seed, init=init, schedule=schedule)
    else:
        raise ConfigException(f"Unknown stage-1 embedder: {stage1}")

    landmarks = cset.landmarks.indices
    anchors = np.zeros((cset.n, dim))
    anchors[landmarks] = first.points
    points = anchors.copy()
    others = np.flatnonzero(~cset.is_landmark)

    empty_cells = 0
    truncated: Dict[int, int] = {}
    if len(others):
        placer = _CellPlacer(cset, anchors, cell_samples, placement, seed)
        workers = (schedule.workers if schedule else None) or settings.workers
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                placed = list(pool.map(placer.place, others))
        else:
            placed = [placer.place(int(i)) for i in others]
        for i, (position, depth) in zip(others, placed):
            chain = cset.item_chain(int(i))
            if position is None:
                empty_cells += 1
                nearest = chain[0, 0] if len(chain) else landmarks[0]
                points[i] = anchors[nearest]
                continue
            points[i] = position
            if depth < len(chain):
                truncated[int(i)] = int(depth)
    if empty_cells:
        logger.warning("%d items fell back to their nearest landmark", empty_cells)

    embedding = Embedding(
        points,
        {"embedder": "landmark", "seed": seed, "stage1": stage1, "placement": placement},
    )
    report = EmbedReport(
        violations=cset.count_violations(points),
        iterations=first_report.iterations,
        wall_time=time.perf_counter() - started,
        extras={
            "stage1_violations": first_report.violations,
            "empty_cells": empty_cells,
            "truncated_cells": len(truncated),
            "truncated_depth": truncated,
        },
    )
    logger.info(
        "landmark_embed n=%d ell=%d: %d violations, %d empty cells",
        cset.n,
        cset.landmarks.ell,
        report.violations,
        empty_cells,
    )
    return embedding, report


def one_nn_interpolate(
    embedding: Embedding, cloud: PointCloud, queries: np.ndarray
) -> np.ndarray:
    """ψ̂(y): media de ψ sobre las muestras a distancia mínima de y."""
    if embedding.n == 0 or embedding.n != cloud.n:
        raise DegenerateInputException("Embedding and cloud must be nonempty and paired")
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    if q.shape[1] != cloud.dim:
        raise DimensionException("Queries must live in the cloud's dimension")
    out = np.empty((len(q), embedding.dim))
    for start in range(0, len(q), QUERY_CHUNK):
        dist = cdist(q[start : start + QUERY_CHUNK], cloud.points)
        nearest = dist.min(axis=1, keepdims=True)
        ties = dist <= nearest * (1.0 + TIE_TOLERANCE)
        weights = ties / ties.sum(axis=1, keepdims=True)
        out[start : start + QUERY_CHUNK] = weights @ embedding.points
    return out


_SAMPLED = re.compile(r"^sampled(?:\((\d+)\))?$")


def verify_embedding(
    embedding: Embedding,
    cset: ComparisonSet,
    mode: str = "exact",
    k: Optional[int] = None,
    seed: int = 0,
) -> EmbedReport:
    """Cuenta comparaciones afirmadas con ‖p_i − p_j‖ > ‖p_k − p_l‖.

    Modos: exhaustive (enumeración materializada, con guarda), exact (conteo
    estructural) y sampled(k).
    """
    if embedding.n != cset.n:
        raise DimensionException("Embedding and design have different item counts")
    started = time.perf_counter()
    extras: Dict[str, Any] = {"mode": mode}
    match = _SAMPLED.match(mode)
    if mode == "exhaustive":
        violations = cset.count_violations_exhaustive(embedding.points)
    elif mode == "exact":
        violations = cset.count_violations(embedding.points)
    elif match:
        size = k or (int(match.group(1)) if match.group(1) else settings.sampled_verification)
        tuples = cset.sample_asserted(size, np.random.default_rng(seed))
        images = image_distances(embedding.points)
        violations = int(
            np.sum(images[tuples[:, 0], tuples[:, 1]] > images[tuples[:, 2], tuples[:, 3]])
        )
        extras["sampled"] = int(len(tuples))
    else:
        raise ConfigException(f"Unknown verification mode: {mode}")
    return EmbedReport(
        violations=int(violations),
        iterations=0,
        wall_time=time.perf_counter() - started,
        extras=extras,
    )
