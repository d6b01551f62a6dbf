"""
Experimentos de tasas de consistencia y batería de certificados de lemas.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from ..config.experiment import EmbedderModel, ExperimentConfig
from ..config.settings import calibration_constant, settings
from ..exceptions import (
    DegenerateInputException,
    ExperimentException,
    InapplicableException,
)
from ..utils.seeds import derive_seed, rng_for
from .alignment import (
    BallWitness,
    SimplexWitness,
    SimilarityTransform,
    affine_deviation_extrapolate,
    affine_similarity_gap,
    fit_isometry,
)
from .designs import (
    ComparisonSet,
    DissimilarityOracle,
    QuadrupleDesign,
    build_design,
    knn_rball_sandwich,
)
from .embedders import (
    EmbedReport,
    Embedding,
    RefineSchedule,
    exact_rejection_embed,
    landmark_embed,
    one_nn_interpolate,
    refine_embed,
)
from .geometry import Ball, DomainSpec, PointCloud, hausdorff_density, sample_domain
from .metrics import (
    alignment_error,
    diam_lower_bound_check,
    eps_isometry_defect,
    interior_indices,
    modulus_of_continuity,
    near_sim_check,
    thickness,
)
from .simplex import (
    apex_height,
    approx_simplex_defect,
    barycenter_bound,
    barycenter_radius,
    fit_regular_simplex,
    regular_simplex,
    smallest_relevant_singular_value,
    trilaterate,
    trilateration_bound,
)

logger = logging.getLogger(__name__)


@dataclass
class RateRecord:
    n: int
    trial: int
    eps: float
    predictor: float
    parameter: Optional[float]
    sup_error: float
    violations: int
    wall_time: float
    excluded: bool

    CSV_FIELDS = ("n", "trial", "eps", "predictor", "parameter", "sup_error", "violations", "excluded")

    def csv_row(self) -> List[Any]:
        return [getattr(self, name) for name in self.CSV_FIELDS]


@dataclass
class RateResult:
    kind: str
    records: List[RateRecord]
    slope: Optional[float]
    intercept: Optional[float]
    excluded: int
    medians: Dict[int, Dict[str, float]]
    ratio_spread: Optional[float]
    slope_gated: bool = True
    gates: Dict[str, Optional[bool]] = field(default_factory=dict)
    eps_increases: List[Tuple[int, int]] = field(default_factory=list)

    @property
    def eps_monotone(self) -> bool:
        """ε_n no crece a lo largo de n en ningún ensayo (las nubes son anidadas)."""
        return not self.eps_increases

    @property
    def passed(self) -> bool:
        return self.eps_monotone and all(v is not False for v in self.gates.values())

    def summary(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "slope": self.slope,
            "intercept": self.intercept,
            "excluded": self.excluded,
            "ratio_spread": self.ratio_spread,
            "slope_gated": self.slope_gated,
            "gates": self.gates,
            "eps_monotone": self.eps_monotone,
            "eps_increases": [list(item) for item in self.eps_increases],
            "medians": {str(n): m for n, m in self.medians.items()},
            "wall_time": sum(r.wall_time for r in self.records),
        }


def _embed(
    cset: ComparisonSet, dim: int, seed: int, embedder: EmbedderModel
) -> Tuple[Embedding, EmbedReport]:
    schedule = embedder.schedule()
    if embedder.kind == "rejection":
        return exact_rejection_embed(cset, dim, seed, max_draws=embedder.max_draws)
    if embedder.kind == "landmark":
        return landmark_embed(
            cset,
            dim,
            seed,
            stage1=embedder.stage1,
            cell_samples=embedder.cell_samples,
            placement=embedder.placement,
            schedule=schedule,
            max_draws=embedder.max_draws,
        )
    return refine_embed(cset, dim, seed, init=embedder.init, schedule=schedule)


def _fit_slope(records: List[RateRecord]) -> Tuple[Optional[float], Optional[float]]:
    usable = [r for r in records if not r.excluded and r.sup_error > 0 and r.predictor > 0]
    if len({r.n for r in usable}) < 2:
        return None, None
    x = np.log([r.predictor for r in usable])
    y = np.log([r.sup_error for r in usable])
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def run_rate_experiment(config: ExperimentConfig) -> RateResult:
    """Mide el error de alineación frente al predictor de tasa en nubes anidadas."""
    domain = config.domain.to_domain()
    dim, diam, h = domain.dim, domain.diameter(), domain.h
    resolution = config.hausdorff_resolution or settings.hausdorff_resolution
    kind = config.design.kind
    n_max = config.n_grid[-1]

    clouds = [
        sample_domain(domain, n_max, derive_seed(config.master_seed, "cloud", trial))
        for trial in range(config.trials)
    ]

    def run_one(task: Tuple[int, int]) -> RateRecord:
        n, trial = task
        started = time.perf_counter()
        cloud = clouds[trial].prefix(n)
        eps = hausdorff_density(cloud, domain, resolution)
        params = config.design.evaluate(n, dim, diam, h)
        oracle = DissimilarityOracle(
            cloud,
            config.design.transform,
            jitter=config.design.jitter,
            jitter_seed=derive_seed(config.master_seed, "jitter", n, trial),
        )
        cset = build_design(oracle, kind, **params)
        embedding, report = _embed(
            cset, dim, derive_seed(config.master_seed, n, trial), config.embedder
        )

        restrict = None
        if kind == "triple" and config.interior_h is not None:
            restrict = interior_indices(cloud, domain, config.interior_h)
        sup_error = alignment_error(embedding, cloud, restrict).sup_error

        parameter: Optional[float] = None
        predictor = eps
        if kind == "local":
            parameter = params["radius"] if params["radius"] is not None else params["neighbors"]
            if params["radius"] is not None:
                predictor = eps / params["radius"] ** 2
        elif kind.startswith("landmark"):
            parameter = params["landmarks"]
            predictor = hausdorff_density(cloud.prefix(params["landmarks"]), domain, resolution)
        elif kind == "knn":
            parameter = params["neighbors"]

        record = RateRecord(
            n=n,
            trial=trial,
            eps=eps,
            predictor=predictor,
            parameter=parameter,
            sup_error=sup_error,
            violations=report.violations,
            wall_time=time.perf_counter() - started,
            excluded=report.violations > 0,
        )
        logger.info(
            "n=%d trial=%d eps=%.4g sup_error=%.4g violations=%d",
            n,
            trial,
            eps,
            sup_error,
            report.violations,
        )
        return record

    tasks = [(n, trial) for trial in range(config.trials) for n in config.n_grid]
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(run_one, tasks))
    else:
        records = [run_one(task) for task in tasks]
    records.sort(key=lambda r: (r.n, r.trial))

    eps_increases: List[Tuple[int, int]] = []
    for trial in range(config.trials):
        series = [r for r in records if r.trial == trial]
        for before, after in zip(series, series[1:]):
            if after.eps > before.eps:
                eps_increases.append((trial, after.n))
                logger.error("eps_n increased along n in trial %d at n=%d", trial, after.n)

    medians: Dict[int, Dict[str, float]] = {}
    for n in config.n_grid:
        kept = [r for r in records if r.n == n and not r.excluded]
        if not kept:
            raise ExperimentException(f"No successful trials at n={n}")
        medians[n] = {
            "sup_error": float(np.median([r.sup_error for r in kept])),
            "ratio": float(np.median([r.sup_error / r.predictor for r in kept])),
            "eps": float(np.median([r.eps for r in kept])),
            "successes": len(kept),
        }
    excluded = sum(r.excluded for r in records)
    if excluded:
        logger.warning("%d records with violations excluded from the fit", excluded)

    slope, intercept = _fit_slope(records)
    ratios = [m["ratio"] for m in medians.values()]
    spread = float(max(ratios) / min(ratios)) if len(ratios) > 1 and min(ratios) > 0 else None

    slope_gated = kind != "triple"
    gates: Dict[str, Optional[bool]] = {}
    if config.slope_gate is not None and slope_gated:
        gates["slope"] = None if slope is None else slope >= config.slope_gate
    if config.ratio_gate is not None:
        gates["ratio"] = None if spread is None else spread <= config.ratio_gate
    return RateResult(
        kind=kind,
        records=records,
        slope=slope,
        intercept=intercept,
        excluded=excluded,
        medians=medians,
        ratio_spread=spread,
        slope_gated=slope_gated,
        gates=gates,
        eps_increases=eps_increases,
    )


@dataclass
class LemmaCheck:
    name: str
    status: str
    slack: Optional[float]
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


DEFAULT_SIZES = {
    "trilateration": 1000,
    "approx_simplex": 50,
    "barycenter": 50,
    "near_sim": 150,
    "diam_bound": 120,
    "diam_bound_instances": 20,
    "one_nn": 60,
    "one_nn_queries": 400,
    "one_nn_instances": 100,
    "knn": 2000,
    "knn_neighbors": 100,
    "inter_vol": 200,
    "affine_close": 200,
    "affine_near_sim": 50,
    "eps_isometry": 200,
}


def _random_rotation(rng: np.random.Generator, dim: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def _check_simplex(rng: np.random.Generator, sizes: Dict[str, int], collinear: bool) -> LemmaCheck:
    worst = 0.0
    for m in range(2, 11):
        simplex = regular_simplex(m, 1.0, m, rotation=_random_rotation(rng, m))
        to_center = np.linalg.norm(simplex.vertices - simplex.barycenter, axis=1)
        worst = max(worst, float(np.max(np.abs(to_center - barycenter_radius(m)))))
        apex = simplex.apex()
        worst = max(worst, abs(float(np.linalg.norm(apex - simplex.barycenter)) - apex_height(m)))
        worst = max(worst, float(np.max(np.abs(np.linalg.norm(simplex.vertices - apex, axis=1) - 1.0))))
    status = "pass" if worst < 1e-12 else "fail"
    return LemmaCheck("simplex", status, 1e-12 - worst, f"max identity error {worst:.2e}")


def _check_trilateration(rng: np.random.Generator, sizes: Dict[str, int], collinear: bool) -> LemmaCheck:
    exact_worst, ratio_worst = 0.0, 0.0
    done = 0
    while done < sizes["trilateration"]:
        d = int(rng.integers(1, 6))
        anchors = rng.standard_normal((d + 1, d))
        if smallest_relevant_singular_value(anchors) < 1e-2:
            continue
        p = rng.standard_normal(d)
        a2 = np.sum((anchors - p) ** 2, axis=1)
        scale = max(1.0, float(np.max(np.abs(p))))
        exact_worst = max(exact_worst, float(np.linalg.norm(trilaterate(anchors, a2) - p)) / scale)
        b2 = np.maximum(a2 + 0.01 * rng.standard_normal(d + 1), 0.0)
        bound = trilateration_bound(anchors, a2, b2)
        error = float(np.linalg.norm(trilaterate(anchors, b2) - p))
        ratio_worst = max(ratio_worst, error / bound if bound > 0 else 0.0)
        done += 1
    ok = exact_worst < 1e-9 and ratio_worst <= 1.0 + 1e-9
    return LemmaCheck(
        "trilateration",
        "pass" if ok else "fail",
        1.0 - ratio_worst,
        f"exact error {exact_worst:.2e}, worst error/bound {ratio_worst:.3f}",
    )


def _noisy_simplex(rng: np.random.Generator, m: int, noise: float, collinear: bool) -> np.ndarray:
    if collinear:
        return np.outer(np.linspace(0.0, 1.0, m), np.ones(m - 1))
    vertices = regular_simplex(m, 1.0, m - 1, rotation=_random_rotation(rng, m - 1)).vertices
    return vertices + noise * rng.uniform(-1.0, 1.0, vertices.shape)


def _check_approx_simplex(rng: np.random.Generator, sizes: Dict[str, int], collinear: bool) -> LemmaCheck:
    threshold = calibration_constant("simplex_defect_threshold", default=0.25)
    worst = 0.0
    for _ in range(sizes["approx_simplex"]):
        m = int(rng.integers(3, 5))
        points = _noisy_simplex(rng, m, 0.01, collinear)
        defect = approx_simplex_defect(points)
        if defect > threshold:
            raise InapplicableException(f"defect {defect:.3f} above {threshold}")
        fitted, deviation = fit_regular_simplex(points)
        budget = calibration_constant("approx_simplex", m) * fitted.edge * max(defect, 1e-15)
        worst = max(worst, deviation / budget)
    return LemmaCheck(
        "approx-simplex",
        "pass" if worst <= 1.0 else "fail",
        1.0 - worst,
        f"worst deviation/(C·λ·η) {worst:.3f}",
    )


def _check_barycenter(rng: np.random.Generator, sizes: Dict[str, int], collinear: bool) -> LemmaCheck:
    exact = regular_simplex(3, 1.0, 2)
    centered = barycenter_bound(exact.vertices, exact.barycenter)
    if centered.distance > 1e-12:
        return LemmaCheck("barycenter", "fail", -centered.distance, "γ=0 case off the barycenter")
    worst = 0.0
    for _ in range(sizes["barycenter"]):
        m = int(rng.integers(3, 5))
        points = _noisy_simplex(rng, m, 0.02, collinear)
        weights = rng.dirichlet(np.ones(m))
        certificate = barycenter_bound(points, weights @ points)
        if not certificate.holds:
            return LemmaCheck("barycenter", "fail", certificate.bound - certificate.distance, "bound violated")
        if certificate.bound > 0:
            worst = max(worst, certificate.distance / certificate.bound)
    return LemmaCheck("barycenter", "pass", 1.0 - worst, f"worst distance/bound {worst:.3f}")


def _disk_cloud(rng: np.random.Generator, n: int, dim: int = 2) -> PointCloud:
    return sample_domain(DomainSpec.unit_ball(dim), n, int(rng.integers(0, 2**32)))


def _random_similarity(rng: np.random.Generator, dim: int) -> SimilarityTransform:
    return SimilarityTransform(
        float(rng.uniform(0.5, 2.0)), _random_rotation(rng, dim), rng.standard_normal(dim)
    )


EXACT_START_NOISE = 0.01
EXACT_SHRINK_STEPS = 30


def _exact_embedding(rng: np.random.Generator, cloud: PointCloud) -> Tuple[np.ndarray, str]:
    """Embedding con cero violaciones del diseño de cuádruplas que no es una semejanza.

    Se refina desde la verdad transformada y perturbada; si el refinamiento no
    llega a cero violaciones se reduce la perturbación a la mitad hasta lograrlo.
    """
    cset = QuadrupleDesign(DissimilarityOracle(cloud))
    base = _random_similarity(rng, cloud.dim).apply(cloud.points)
    noise = EXACT_START_NOISE * rng.standard_normal(base.shape)
    schedule = RefineSchedule(iterations=600, restarts=1)
    embedding, report = refine_embed(
        cset, cloud.dim, int(rng.integers(0, 2**32)), init="given", initial=base + noise, schedule=schedule
    )
    if report.violations == 0:
        return embedding.points, "refined"
    for step in range(1, EXACT_SHRINK_STEPS + 1):
        candidate = base + noise * 0.5**step
        if cset.count_violations(candidate) == 0:
            return candidate, f"perturbed/2^{step}"
    raise InapplicableException("No exact ordinal embedding found for the instance")


def _check_near_sim(rng: np.random.Generator, sizes: Dict[str, int], collinear: bool) -> LemmaCheck:
    cloud = _disk_cloud(rng, sizes["near_sim"])
    image, origin = _exact_embedding(rng, cloud)
    eps = hausdorff_density(cloud, DomainSpec.unit_ball(2), settings.hausdorff_resolution)
    grid = np.linspace(0.0, 0.2, 6)
    report = near_sim_check(
        cloud.points, image, np.zeros(2), 1.0, eps, grid, seed=int(rng.integers(0, 2**32))
    )
    return LemmaCheck(
        "near-sim",
        "pass" if report.fits else "fail",
        report.budget - report.constant,
        f"C={report.constant:.3f} budget={report.budget:.3f} embedding={origin}",
    )


def _check_diam_bound(rng: np.random.Generator, sizes: Dict[str, int], collinear: bool) -> LemmaCheck:
    worst = math.inf
    violators = 0
    origins = set()
    for _ in range(sizes["diam_bound_instances"]):
        cloud = _disk_cloud(rng, sizes["diam_bound"])
        image, origin = _exact_embedding(rng, cloud)
        origins.add(origin.split("/")[0])
        report = diam_lower_bound_check(cloud.points, image)
        worst = min(worst, report.min_ratio - report.c)
        violators += len(report.violators)
    return LemmaCheck(
        "diam-bound",
        "pass" if violators == 0 else "fail",
        worst if math.isfinite(worst) else None,
        f"instances={sizes['diam_bound_instances']} violators={violators} embedding={'+'.join(sorted(origins))}",
    )


def _check_one_nn(rng: np.random.Generator, sizes: Dict[str, int], collinear: bool) -> LemmaCheck:
    grid = np.linspace(0.0, 1.0, 11)
    worst = math.inf
    failures = 0
    instances = sizes["one_nn_instances"]
    for instance in range(instances):
        cloud = _disk_cloud(rng, sizes["one_nn"])
        if instance % 2:
            mixing = rng.standard_normal((2, 2))
            images = np.sin(3.0 * cloud.points @ mixing)
        else:
            images = _random_similarity(rng, 2).apply(cloud.points)
        queries = np.vstack([_disk_cloud(rng, sizes["one_nn_queries"]).points, cloud.points[:5]])
        nearest = np.min(np.linalg.norm(queries[:, None, :] - cloud.points[None], axis=2), axis=1)
        eps = float(nearest.max())
        interpolated = one_nn_interpolate(Embedding(images), cloud, queries)
        omega_hat = modulus_of_continuity(queries, interpolated, grid).omega_values
        omega = modulus_of_continuity(cloud.points, images, grid + 2.0 * eps).omega_values
        gap = float(np.min(omega - omega_hat))
        worst = min(worst, gap)
        failures += gap < 0
    return LemmaCheck(
        "1nn-modulus",
        "pass" if failures == 0 else "fail",
        worst,
        f"instances={instances} failures={failures}",
    )


def _check_knn_sandwich(rng: np.random.Generator, sizes: Dict[str, int], collinear: bool) -> LemmaCheck:
    n, k = sizes["knn"], sizes["knn_neighbors"]
    domain = DomainSpec.unit_ball(2)
    cloud = sample_domain(domain, n, int(rng.integers(0, 2**32)))
    radius = math.sqrt(k / n)
    report = knn_rball_sandwich(cloud, radius, k, domain=domain)
    return LemmaCheck(
        "knn-sandwich",
        "pass" if report.holds_for_all_i else "fail",
        float(report.checked - len(report.violating_indices)) / max(report.checked, 1),
        f"K={k} r={radius:.3f} checked={report.checked} violators={len(report.violating_indices)}",
    )


def _check_inter_vol(rng: np.random.Generator, sizes: Dict[str, int], collinear: bool) -> LemmaCheck:
    domain = DomainSpec((Ball([0.0, 0.0], 1.0), Ball([1.2, 0.0], 0.5)))
    points = sample_domain(domain, sizes["inter_vol"], int(rng.integers(0, 2**32))).points
    worst = math.inf
    for x in points:
        r = float(rng.uniform(0.05, 2.0))
        center, rho = domain.inscribed_ball(x, r)
        inside_query = r - (float(np.linalg.norm(center - x)) + rho)
        inside_domain = float(np.max(domain.radii - (np.linalg.norm(domain.centers - center, axis=1) + rho)))
        expected = min(r, domain.h) / 2.0
        worst = min(worst, inside_query, inside_domain, rho - expected + 1e-15)
    return LemmaCheck("inter-vol", "pass" if worst >= -1e-12 else "fail", worst, "")


def _check_affine_close(rng: np.random.Generator, sizes: Dict[str, int], collinear: bool) -> LemmaCheck:
    worst = 0.0
    for _ in range(sizes["affine_close"]):
        d = int(rng.integers(1, 4))
        a1, b1 = rng.standard_normal((d, d)), rng.standard_normal(d)
        a2, b2 = a1 + 0.01 * rng.standard_normal((d, d)), b1 + 0.01 * rng.standard_normal(d)
        y, r = rng.standard_normal(d), float(rng.uniform(0.1, 1.0))
        diff = a1 - a2
        eps = float(np.linalg.norm(diff, 2)) * r + float(np.linalg.norm(diff @ y + b1 - b2))
        query = y + 10.0 * rng.standard_normal(d)
        ball = affine_deviation_extrapolate((a1, b1), (a2, b2), BallWitness(y, r), eps, query)
        vertices = regular_simplex(d + 1, 1.0, d).vertices + y
        on_vertices = np.linalg.norm(vertices @ diff.T + (b1 - b2), axis=1).max()
        simplex = affine_deviation_extrapolate(
            (a1, b1), (a2, b2), SimplexWitness(vertices), float(on_vertices), query
        )
        for bound in (ball, simplex):
            if not bound.holds:
                return LemmaCheck("affine-close", "fail", bound.bound - bound.actual, "")
            worst = max(worst, bound.actual / bound.bound if bound.bound > 0 else 0.0)
    return LemmaCheck("affine-close", "pass", 1.0 - worst, f"worst actual/bound {worst:.3f}")


def _check_affine_near_sim(rng: np.random.Generator, sizes: Dict[str, int], collinear: bool) -> LemmaCheck:
    threshold = calibration_constant("simplex_defect_threshold", default=0.25)
    worst = 0.0
    for _ in range(sizes["affine_near_sim"]):
        d = int(rng.integers(2, 4))
        lam = float(rng.uniform(0.5, 2.0))
        matrix = lam * _random_rotation(rng, d) + 0.01 * lam * rng.standard_normal((d, d))
        gap = affine_similarity_gap(matrix)
        if gap.defect > threshold:
            raise InapplicableException(f"image defect {gap.defect:.3f} above {threshold}")
        budget = calibration_constant("affine_near_sim", d) * gap.scale * max(gap.defect, 1e-15)
        worst = max(worst, gap.gap / budget)
    return LemmaCheck(
        "affine-near-sim", "pass" if worst <= 1.0 else "fail", 1.0 - worst, f"worst gap/(C·λ·η) {worst:.3f}"
    )


def _check_eps_isometry(rng: np.random.Generator, sizes: Dict[str, int], collinear: bool) -> LemmaCheck:
    cloud = _disk_cloud(rng, sizes["eps_isometry"])
    rigid = SimilarityTransform(1.0, _random_rotation(rng, 2), rng.standard_normal(2))
    noise = rng.uniform(-0.01, 0.01, cloud.points.shape)
    image = rigid.apply(cloud.points) + noise
    defect = eps_isometry_defect(cloud.points, image)
    theta = thickness(cloud.points, seed=int(rng.integers(0, 2**32)))
    eta = theta / float(np.max(np.linalg.norm(cloud.points[:, None] - cloud.points[None], axis=2)))
    _, sup_error = fit_isometry(cloud.points, image)
    budget = calibration_constant("eps_isometry") * defect / eta
    return LemmaCheck(
        "eps-isometry",
        "pass" if sup_error <= budget else "fail",
        budget - sup_error,
        f"defect={defect:.4f} thickness ratio={eta:.3f}",
    )


LEMMA_CHECKS: List[Tuple[str, Callable[..., LemmaCheck]]] = [
    ("simplex", _check_simplex),
    ("trilateration", _check_trilateration),
    ("approx-simplex", _check_approx_simplex),
    ("barycenter", _check_barycenter),
    ("near-sim", _check_near_sim),
    ("diam-bound", _check_diam_bound),
    ("1nn-modulus", _check_one_nn),
    ("knn-sandwich", _check_knn_sandwich),
    ("inter-vol", _check_inter_vol),
    ("affine-close", _check_affine_close),
    ("affine-near-sim", _check_affine_near_sim),
    ("eps-isometry", _check_eps_isometry),
]

COLLINEAR_SENSITIVE = {"approx-simplex", "barycenter"}


def run_lemma_suite(
    seed: int,
    sizes: Optional[Dict[str, int]] = None,
    inject_collinear: bool = False,
    only: Optional[List[str]] = None,
) -> List[LemmaCheck]:
    """Ejecuta cada certificador con las constantes congeladas.

    Una precondición incumplida se informa como `inapplicable`, no como fallo.
    """
    merged = dict(DEFAULT_SIZES, **(sizes or {}))
    results = []
    for name, check in LEMMA_CHECKS:
        if only and name not in only:
            continue
        rng = rng_for(seed, "lemma", name)
        collinear = inject_collinear and name in COLLINEAR_SENSITIVE
        try:
            result = check(rng, merged, collinear)
        except (InapplicableException, DegenerateInputException) as e:
            result = LemmaCheck(name, "inapplicable", None, e.detail)
        logger.info("lemma %s: %s", name, result.status)
        results.append(result)
    return results
