"""
Tests para el módulo alignment
"""

from itertools import combinations

import numpy as np
import pytest

from ordinal_embedding_tool.core.alignment import (
    BallWitness,
    SimilarityTransform,
    SimplexWitness,
    affine_deviation_extrapolate,
    affine_similarity_gap,
    fit_isometry,
    fit_similarity,
)
from ordinal_embedding_tool.exceptions import (
    DegenerateInputException,
    DimensionException,
    InapplicableException,
)


def _rotation(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


class TestSimilarityTransform:
    """Tests para SimilarityTransform"""

    def setup_method(self):
        self.transform = SimilarityTransform(2.0, _rotation(0.7), np.array([1.0, -3.0]))
        self.points = np.random.default_rng(0).standard_normal((10, 2))

    def test_apply(self):
        expected = 2.0 * self.points @ _rotation(0.7).T + np.array([1.0, -3.0])
        np.testing.assert_allclose(self.transform.apply(self.points), expected)

    def test_inverse_and_composition(self):
        """Test S seguida de S⁻¹ es la identidad"""
        roundtrip = self.transform.then(self.transform.inverse())
        np.testing.assert_allclose(roundtrip.apply(self.points), self.points, atol=1e-12)
        assert roundtrip.scale == pytest.approx(1.0)

    def test_then_order(self):
        shift = SimilarityTransform(1.0, np.eye(2), np.array([5.0, 0.0]))
        composed = self.transform.then(shift)
        np.testing.assert_allclose(
            composed.apply(self.points), shift.apply(self.transform.apply(self.points))
        )

    def test_rejects_non_orthogonal(self):
        with pytest.raises(DegenerateInputException):
            SimilarityTransform(1.0, np.array([[1.0, 0.1], [0.0, 1.0]]), np.zeros(2))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(DimensionException):
            SimilarityTransform(1.0, np.eye(2), np.zeros(3))

    def test_reflection_flag(self):
        mirror = SimilarityTransform(1.0, np.diag([1.0, -1.0]), np.zeros(2))
        assert mirror.is_reflection
        assert not self.transform.is_reflection


class TestFitSimilarity:
    """Tests para fit_similarity y fit_isometry"""

    def setup_method(self):
        rng = np.random.default_rng(1)
        self.source = rng.uniform(-1, 1, (30, 2))
        self.truth = SimilarityTransform(1.7, _rotation(-1.1), np.array([0.3, 0.4]))

    def test_recovers_exact_similarity(self):
        transform, error = fit_similarity(self.source, self.truth.apply(self.source))
        assert error < 1e-8
        assert transform.scale == pytest.approx(1.7, abs=1e-8)

    def test_recovers_reflection(self):
        mirror = SimilarityTransform(0.5, np.diag([1.0, -1.0]), np.zeros(2))
        _, error = fit_similarity(self.source, mirror.apply(self.source))
        assert error < 1e-8

    def test_isometry_keeps_unit_scale(self):
        transform, error = fit_isometry(self.source, self.truth.apply(self.source))
        assert transform.scale == 1.0
        assert error > 0.1

    def test_refinement_never_worse(self):
        """Test el refinamiento sup no empeora el ajuste de Procrustes"""
        noisy = self.truth.apply(self.source) + 0.05 * np.random.default_rng(2).standard_normal((30, 2))
        _, plain = fit_similarity(self.source, noisy, refine=False)
        _, refined = fit_similarity(self.source, noisy, refine=True)
        assert refined <= plain + 1e-12

    def test_zero_variance_source(self):
        with pytest.raises(DegenerateInputException):
            fit_similarity(np.ones((5, 2)), np.random.default_rng(0).standard_normal((5, 2)))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionException):
            fit_similarity(self.source, self.source[:5])


class TestAffineExtrapolation:
    """Tests para affine_deviation_extrapolate"""

    def setup_method(self):
        self.first = SimilarityTransform.identity(2)
        self.second = SimilarityTransform(1.01, np.eye(2), np.zeros(2))

    def test_ball_witness(self):
        bound = affine_deviation_extrapolate(
            self.first, self.second, BallWitness(np.zeros(2), 1.0), 0.01, np.array([3.0, 0.0])
        )
        assert bound.actual == pytest.approx(0.03)
        assert bound.bound == pytest.approx(0.07)
        assert bound.holds

    def test_simplex_witness_accepts_tuples(self):
        vertices = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
        eps = float(np.max(np.linalg.norm(0.01 * vertices, axis=1)))
        bound = affine_deviation_extrapolate(
            (np.eye(2), np.zeros(2)),
            (1.01 * np.eye(2), np.zeros(2)),
            SimplexWitness(vertices),
            eps,
            np.array([4.0, 4.0]),
        )
        assert bound.holds

    def test_flat_simplex_witness_inapplicable(self):
        vertices = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.1]])
        with pytest.raises(InapplicableException):
            affine_deviation_extrapolate(
                self.first, self.second, SimplexWitness(vertices), 0.01, np.zeros(2)
            )


class TestAffineSimilarityGap:
    """Tests para affine_similarity_gap"""

    def test_exact_similarity_has_no_gap(self):
        gap = affine_similarity_gap(2.0 * _rotation(0.4))
        assert gap.scale == pytest.approx(2.0)
        assert gap.gap < 1e-9
        assert gap.defect < 1e-12
        np.testing.assert_allclose(gap.rotation, _rotation(0.4), atol=1e-9)

    def test_anisotropic_map_has_gap(self):
        gap = affine_similarity_gap(np.diag([1.0, 1.2]))
        assert gap.gap > 0.01
        assert gap.defect > 0.0

    def test_non_square_matrix(self):
        with pytest.raises(DimensionException):
            affine_similarity_gap(np.ones((2, 3)))


PAIRS = np.array(list(combinations(range(6), 2)))
TRIPLES = np.array(list(combinations(range(6), 3)))


def _enclosing_radius(w):
    """Radio del círculo mínimo que contiene los puntos complejos w (seis puntos)."""
    mids = (w[PAIRS[:, 0]] + w[PAIRS[:, 1]]) / 2.0
    a, b, c = (w[TRIPLES[:, k]] for k in range(3))
    det = 2.0 * (a.real * (b.imag - c.imag) + b.real * (c.imag - a.imag) + c.real * (a.imag - b.imag))
    ok = np.abs(det) > 1e-14
    na, nb, nc = np.abs(a) ** 2, np.abs(b) ** 2, np.abs(c) ** 2
    ux = (na * (b.imag - c.imag) + nb * (c.imag - a.imag) + nc * (a.imag - b.imag))[ok] / det[ok]
    uy = (na * (c.real - b.real) + nb * (a.real - c.real) + nc * (b.real - a.real))[ok] / det[ok]
    centers = np.concatenate([mids, ux + 1j * uy])
    return float(np.min(np.max(np.abs(w[None, :] - centers[:, None]), axis=1)))


def _brute_sup_error(source, target):
    """min sobre w ↦ a·z + b (y a·z̄ + b) del error sup, por rejilla con zoom sobre a."""
    w = target[:, 0] + 1j * target[:, 1]
    best = np.inf
    for z in (source[:, 0] + 1j * source[:, 1], source[:, 0] - 1j * source[:, 1]):
        zc, wc = z - z.mean(), w - w.mean()
        center = np.sum(wc * np.conj(zc)) / np.sum(np.abs(zc) ** 2)
        half = abs(center) + 1.0
        value = np.inf
        for _ in range(14):
            offsets = np.linspace(-half, half, 21)
            values = np.array(
                [[_enclosing_radius(w - (center + dx + 1j * dy) * z) for dy in offsets] for dx in offsets]
            )
            ix, iy = np.unravel_index(np.argmin(values), values.shape)
            center = center + offsets[ix] + 1j * offsets[iy]
            value = float(values[ix, iy])
            half /= 3.0
        best = min(best, value)
    return best


class TestFitEquivarianceAndOptimality:
    """Tests de equivariancia del ajuste de Procrustes y optimalidad del error sup"""

    def setup_method(self):
        rng = np.random.default_rng(7)
        self.source = rng.uniform(-1, 1, (12, 2))
        truth = SimilarityTransform(1.3, _rotation(0.4), np.array([0.5, -0.2]))
        self.target = truth.apply(self.source) + 0.05 * rng.standard_normal((12, 2))

    def test_precomposition_keeps_error(self):
        inner = SimilarityTransform(0.6, _rotation(2.1), np.array([-1.0, 3.0]))
        _, base = fit_similarity(self.source, self.target, refine=False)
        _, moved = fit_similarity(inner.apply(self.source), self.target, refine=False)
        assert moved == pytest.approx(base, rel=1e-9)

    def test_postcomposition_scales_error(self):
        """Test ajuste(x, T(y)) = T ∘ ajuste(x, y) y error multiplicado por la escala de T"""
        outer = SimilarityTransform(2.5, np.diag([1.0, -1.0]) @ _rotation(0.9), np.array([4.0, 1.0]))
        fitted, base = fit_similarity(self.source, self.target, refine=False)
        moved, error = fit_similarity(self.source, outer.apply(self.target), refine=False)
        assert error == pytest.approx(2.5 * base, rel=1e-9)
        expected = fitted.then(outer)
        np.testing.assert_allclose(moved.apply(self.source), expected.apply(self.source), atol=1e-9)

    @pytest.mark.parametrize("seed", range(4))
    def test_sup_error_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        source = rng.uniform(-1, 1, (6, 2))
        truth = SimilarityTransform(float(rng.uniform(0.5, 2.0)), _rotation(rng.uniform(0, 6.28)), rng.standard_normal(2))
        target = truth.apply(source) + 0.05 * rng.standard_normal((6, 2))
        _, error = fit_similarity(source, target)
        assert error == pytest.approx(_brute_sup_error(source, target), abs=5e-3)
