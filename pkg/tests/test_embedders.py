"""
Tests para el módulo embedders
"""

import numpy as np
import pytest

from ordinal_embedding_tool.core.alignment import SimilarityTransform
from ordinal_embedding_tool.core.designs import (
    DissimilarityOracle,
    KnnGraphDesign,
    LandmarkDesign,
    LandmarkIndex,
    LocalDesign,
    QuadrupleDesign,
    TripleDesign,
    image_distances,
)
from ordinal_embedding_tool.core.embedders import (
    Embedding,
    RefineSchedule,
    classical_mds,
    exact_rejection_embed,
    landmark_embed,
    normalize,
    one_nn_interpolate,
    refine_embed,
    uniform_ball,
    verify_embedding,
)
from ordinal_embedding_tool.core.geometry import DomainSpec, PointCloud, sample_domain
from ordinal_embedding_tool.core.metrics import modulus_of_continuity
from ordinal_embedding_tool.exceptions import (
    ConfigException,
    DegenerateInputException,
    DesignException,
    DesignSizeException,
    DimensionException,
    EmbeddingTimeoutException,
    InsufficientLandmarksException,
    NumericException,
)


def _oracle(n, seed=0):
    return DissimilarityOracle(sample_domain(DomainSpec.unit_ball(2), n, seed=seed))


class TestEmbedding:
    """Tests para Embedding y utilidades numéricas"""

    def test_points_are_frozen(self):
        embedding = Embedding(np.zeros((3, 2)), {"embedder": "test"})
        assert embedding.n == 3 and embedding.dim == 2
        assert not embedding.points.flags.writeable

    def test_rejects_non_finite(self):
        with pytest.raises(NumericException):
            Embedding(np.array([[0.0, np.nan]]))

    def test_rejects_wrong_shape(self):
        with pytest.raises(DimensionException):
            Embedding(np.zeros(4))

    def test_bounding_ball(self):
        center, radius = Embedding(np.array([[-1.0, 0.0], [1.0, 0.0]])).bounding_ball()
        np.testing.assert_allclose(center, [0.0, 0.0])
        assert radius == pytest.approx(1.0)

    def test_normalize_unit_rms(self):
        points = normalize(np.random.default_rng(0).standard_normal((20, 3)) * 7.0 + 2.0)
        np.testing.assert_allclose(points.mean(axis=0), 0.0, atol=1e-12)
        assert np.sqrt(np.mean(np.sum(points**2, axis=1))) == pytest.approx(1.0)

    def test_normalize_collapsed(self):
        with pytest.raises(NumericException):
            normalize(np.ones((5, 2)))

    def test_uniform_ball_inside(self):
        samples = uniform_ball(np.random.default_rng(1), 500, 3)
        assert samples.shape == (500, 3)
        assert np.all(np.linalg.norm(samples, axis=1) <= 1.0)

    def test_classical_mds_recovers_distances(self):
        points = np.random.default_rng(2).standard_normal((10, 2))
        coords = classical_mds(image_distances(points), 2)
        np.testing.assert_allclose(image_distances(coords), image_distances(points), atol=1e-8)

    def test_margin_schedule(self):
        assert RefineSchedule(margin=1.0, margin_stages=3).margins() == pytest.approx([1.0, 0.1, 0.0])
        assert RefineSchedule(margin=0.0).margins() == [0.0]


class TestRefineEmbed:
    """Tests para refine_embed"""

    def setup_method(self):
        self.cloud = sample_domain(DomainSpec.unit_ball(2), 10, seed=3)
        self.cset = TripleDesign(DissimilarityOracle(self.cloud))
        self.schedule = RefineSchedule(iterations=300, restarts=2)

    def test_truth_as_initial_is_kept(self):
        embedding, report = refine_embed(
            self.cset, 2, seed=0, init="given", initial=self.cloud.points
        )
        assert report.violations == 0
        assert report.iterations == 0
        np.testing.assert_array_equal(embedding.points, self.cloud.points)

    def test_report_matches_exact_count(self):
        embedding, report = refine_embed(self.cset, 2, seed=1, schedule=self.schedule)
        assert report.violations == self.cset.count_violations(embedding.points)
        assert embedding.provenance["embedder"] == "refine"

    def test_unit_rms_output(self):
        embedding, _ = refine_embed(self.cset, 2, seed=1, schedule=self.schedule)
        centered = embedding.points - embedding.points.mean(axis=0)
        assert np.sqrt(np.mean(np.sum(centered**2, axis=1))) == pytest.approx(1.0)

    def test_penalty_trace_non_increasing(self):
        """Test la penalización nunca crece con certificado estático"""
        _, report = refine_embed(self.cset, 2, seed=4, schedule=self.schedule)
        trace = np.asarray(report.extras["penalty_trace"])
        assert np.all(np.diff(trace) <= 1e-12)
        assert "penalty_trace" not in report.to_dict()

    def test_deterministic(self):
        first, _ = refine_embed(self.cset, 2, seed=7, schedule=self.schedule)
        second, _ = refine_embed(self.cset, 2, seed=7, schedule=self.schedule)
        np.testing.assert_array_equal(first.points, second.points)

    def test_spectral_init_on_local_design(self):
        cset = LocalDesign(DissimilarityOracle(self.cloud), neighbors=4)
        embedding, report = refine_embed(
            cset, 2, seed=2, init="spectral", schedule=RefineSchedule(iterations=200, restarts=1)
        )
        assert embedding.n == 10
        assert report.violations == cset.count_violations(embedding.points)

    def test_outside_constraint_reported(self):
        cset = LocalDesign(DissimilarityOracle(self.cloud), radius=0.9)
        schedule = RefineSchedule(iterations=200, restarts=1, enforce_outside=True)
        embedding, report = refine_embed(cset, 2, seed=2, schedule=schedule)
        assert report.extras["outside_violations"] == cset.count_outside_violations(embedding.points)

    def test_given_init_needs_configuration(self):
        with pytest.raises(ConfigException):
            refine_embed(self.cset, 2, seed=0, init="given")

    def test_given_init_shape(self):
        with pytest.raises(DimensionException):
            refine_embed(self.cset, 2, seed=0, init="given", initial=np.zeros((10, 3)))

    def test_unknown_init(self):
        with pytest.raises(ConfigException):
            refine_embed(self.cset, 2, seed=0, init="pca")


class TestExactRejectionEmbed:
    """Tests para exact_rejection_embed"""

    def test_small_design_is_exact(self):
        cset = QuadrupleDesign(_oracle(4, seed=5))
        embedding, report = exact_rejection_embed(cset, 2, seed=0)
        assert report.violations == 0
        assert report.extras["draws"] >= 1
        assert np.all(np.linalg.norm(embedding.points, axis=1) <= 1.0)

    def test_size_guard(self):
        with pytest.raises(DesignSizeException):
            exact_rejection_embed(QuadrupleDesign(_oracle(9)), 2, seed=0)

    def test_draw_budget(self):
        with pytest.raises(EmbeddingTimeoutException) as info:
            exact_rejection_embed(QuadrupleDesign(_oracle(6)), 2, seed=0, max_draws=1)
        assert info.value.draws == 1


class TestLandmarkEmbed:
    """Tests para landmark_embed"""

    def setup_method(self):
        self.oracle = _oracle(20, seed=6)
        self.cset = LandmarkDesign(self.oracle, LandmarkIndex.first(5, 20), "triple")
        self.schedule = RefineSchedule(iterations=300, restarts=2)

    @pytest.mark.parametrize("placement", ["monte_carlo", "chebyshev"])
    def test_two_stage_embedding(self, placement):
        embedding, report = landmark_embed(
            self.cset, 2, seed=0, placement=placement, cell_samples=500, schedule=self.schedule
        )
        assert embedding.n == 20
        assert report.violations == self.cset.count_violations(embedding.points)
        assert {"stage1_violations", "empty_cells", "truncated_cells"} <= set(report.extras)

    def test_too_few_landmarks(self):
        cset = LandmarkDesign(self.oracle, LandmarkIndex.first(2, 20))
        with pytest.raises(InsufficientLandmarksException):
            landmark_embed(cset, 2, seed=0)

    def test_needs_landmark_design(self):
        with pytest.raises(DesignException):
            landmark_embed(TripleDesign(self.oracle), 2, seed=0)

    def test_unknown_placement(self):
        with pytest.raises(ConfigException):
            landmark_embed(self.cset, 2, seed=0, placement="grid")


class TestOneNnInterpolate:
    """Tests para one_nn_interpolate"""

    def setup_method(self):
        self.cloud = PointCloud(np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 3.0]]))
        self.embedding = Embedding(np.array([[1.0, 1.0], [3.0, 1.0], [5.0, 5.0]]))

    def test_samples_map_to_themselves(self):
        out = one_nn_interpolate(self.embedding, self.cloud, self.cloud.points)
        np.testing.assert_allclose(out, self.embedding.points)

    def test_ties_are_averaged(self):
        out = one_nn_interpolate(self.embedding, self.cloud, [1.0, 0.0])
        np.testing.assert_allclose(out, [[2.0, 1.0]])

    def test_query_dimension(self):
        with pytest.raises(DimensionException):
            one_nn_interpolate(self.embedding, self.cloud, np.zeros((2, 3)))

    def test_unpaired_embedding(self):
        with pytest.raises(DegenerateInputException):
            one_nn_interpolate(self.embedding.subset([0, 1]), self.cloud, [0.0, 0.0])


class TestVerifyEmbedding:
    """Tests para verify_embedding"""

    def setup_method(self):
        self.cset = QuadrupleDesign(_oracle(8, seed=9))
        self.embedding = Embedding(np.random.default_rng(3).standard_normal((8, 2)))

    def test_exhaustive_matches_exact(self):
        exact = verify_embedding(self.embedding, self.cset, "exact")
        exhaustive = verify_embedding(self.embedding, self.cset, "exhaustive")
        assert exact.violations == exhaustive.violations

    def test_sampled_mode(self):
        report = verify_embedding(self.embedding, self.cset, "sampled(50)", seed=1)
        assert report.extras["sampled"] <= 50
        assert 0 <= report.violations <= report.extras["sampled"]

    def test_truth_verifies(self):
        truth = Embedding(self.cset.oracle.cloud.points)
        assert verify_embedding(truth, self.cset).exact

    def test_unknown_mode(self):
        with pytest.raises(ConfigException):
            verify_embedding(self.embedding, self.cset, "fuzzy")

    def test_item_count_mismatch(self):
        with pytest.raises(DimensionException):
            verify_embedding(self.embedding.subset([0, 1]), self.cset)


def _rotation(rng, dim):
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def _spread_subset(dist, threshold):
    """Subconjunto voraz con todas sus distancias mutuas > threshold."""
    chosen = []
    for p in range(len(dist)):
        if all(dist[p, q] > threshold for q in chosen):
            chosen.append(p)
    return chosen


class TestExactEmbeddingStructure:
    """Tests de propiedades estructurales de los embeddings exactos"""

    def setup_method(self):
        rng = np.random.default_rng(21)
        self.cloud = sample_domain(DomainSpec.unit_ball(2), 10, seed=4)
        self.similarity = SimilarityTransform(
            float(rng.uniform(0.5, 2.0)), _rotation(rng, 2), rng.standard_normal(2)
        )

    def _exact_cases(self):
        cset = QuadrupleDesign(_oracle(4, seed=5))
        embedding, report = exact_rejection_embed(cset, 2, seed=0)
        assert report.violations == 0
        return [
            (self.cloud.points, self.similarity.apply(self.cloud.points)),
            (cset.oracle.cloud.points, embedding.points),
        ]

    def test_spread_sets_stay_spread(self):
        """Test que un conjunto con distancias > t en la verdad conserva distancias ≥ ‖φ(a) − φ(b)‖"""
        for truth, image in self._exact_cases():
            dist, emb = image_distances(truth), image_distances(image)
            n = len(truth)
            for a in range(n):
                for b in range(a + 1, n):
                    chosen = _spread_subset(dist, dist[a, b])
                    for p in chosen:
                        for q in chosen:
                            if p < q:
                                assert emb[p, q] >= emb[a, b]

    def test_triple_exact_is_weakly_isotonic_per_anchor(self):
        cset = TripleDesign(_oracle(4, seed=7))
        embedding, report = exact_rejection_embed(cset, 2, seed=1)
        assert verify_embedding(embedding, cset, "exhaustive").violations == 0
        dist = image_distances(cset.oracle.cloud.points)
        emb = image_distances(embedding.points)
        for x in range(4):
            for y in range(4):
                for z in range(4):
                    if dist[x, y] < dist[x, z]:
                        assert emb[x, y] <= emb[x, z]

    @pytest.mark.parametrize("mode", ["exact", "exhaustive", "sampled(40)"])
    def test_verification_invariant_under_similarity(self, mode):
        """Test que el conteo de violaciones no cambia al aplicar una semejanza al embedding"""
        oracle = _oracle(7, seed=8)
        points = np.random.default_rng(2).standard_normal((7, 2))
        moved = SimilarityTransform(2.5, _rotation(np.random.default_rng(3), 2), [1.0, -4.0]).apply(points)
        designs = [
            QuadrupleDesign(oracle),
            TripleDesign(oracle),
            LocalDesign(oracle, radius=1.0),
            LocalDesign(oracle, neighbors=3),
            LandmarkDesign(oracle, LandmarkIndex.first(3, 7), "triple"),
            LandmarkDesign(oracle, LandmarkIndex.first(3, 7), "quadruple"),
            KnnGraphDesign(oracle, 3),
        ]
        for cset in designs:
            before = verify_embedding(Embedding(points), cset, mode, seed=5)
            after = verify_embedding(Embedding(moved), cset, mode, seed=5)
            assert before.violations == after.violations, cset.kind
        assert any(verify_embedding(Embedding(points), cset, mode, seed=5).violations for cset in designs)

    @pytest.mark.parametrize("seed", range(20))
    def test_one_nn_modulus_bound(self, seed):
        """Test ω̂(η) ≤ ω(η + 2ε) para la interpolación 1-NN"""
        rng = np.random.default_rng(seed)
        cloud = sample_domain(DomainSpec.unit_ball(2), 40, seed=seed)
        if seed % 2:
            images = np.sin(3.0 * cloud.points @ rng.standard_normal((2, 2)))
        else:
            images = SimilarityTransform(
                float(rng.uniform(0.5, 2.0)), _rotation(rng, 2), rng.standard_normal(2)
            ).apply(cloud.points)
        queries = np.vstack([sample_domain(DomainSpec.unit_ball(2), 150, seed=seed + 100).points, cloud.points])
        eps = float(np.max(np.min(np.linalg.norm(queries[:, None] - cloud.points[None], axis=2), axis=1)))
        grid = np.linspace(0.0, 1.0, 11)
        interpolated = one_nn_interpolate(Embedding(images), cloud, queries)
        omega_hat = modulus_of_continuity(queries, interpolated, grid).omega_values
        omega = modulus_of_continuity(cloud.points, images, grid + 2.0 * eps).omega_values
        assert np.all(omega_hat <= omega + 1e-12)

    @pytest.mark.slow
    def test_refine_reaches_exact_quadruple_at_moderate_size(self):
        cset = QuadrupleDesign(_oracle(64, seed=12))
        exact = 0
        for seed in range(5):
            _, report = refine_embed(cset, 2, seed=seed)
            exact += report.violations == 0
        assert exact >= 4
