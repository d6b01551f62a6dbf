"""
Tests para el módulo geometry
"""

import math

import numpy as np
import pytest

from ordinal_embedding_tool.core.geometry import (
    Ball,
    DomainSpec,
    PointCloud,
    greedy_packing,
    hausdorff_density,
    packing_candidates,
    sample_domain,
)
from ordinal_embedding_tool.exceptions import DimensionException, DomainException


class TestDomainSpec:
    """Tests para DomainSpec"""

    def setup_method(self):
        self.domain = DomainSpec((Ball([0.0, 0.0], 1.0), Ball([1.5, 0.0], 1.0)))

    def test_ball_needs_positive_radius(self):
        """Test radio no positivo"""
        with pytest.raises(DomainException):
            Ball([0.0, 0.0], 0.0)

    def test_disconnected_union_rejected(self):
        """Test unión de bolas no conexa"""
        with pytest.raises(DomainException):
            DomainSpec((Ball([0.0, 0.0], 1.0), Ball([5.0, 0.0], 1.0)))

    def test_mixed_dimensions_rejected(self):
        with pytest.raises(DimensionException):
            DomainSpec((Ball([0.0, 0.0], 1.0), Ball([0.5], 1.0)))

    def test_derived_quantities(self):
        """Test diámetro, h y ρ de una unión de dos bolas"""
        assert self.domain.diameter() == pytest.approx(3.5)
        assert self.domain.h == pytest.approx(1.0)
        assert self.domain.rho() == pytest.approx(2.0)
        lo, hi = self.domain.bounding_box()
        np.testing.assert_allclose(lo, [-1.0, -1.0])
        np.testing.assert_allclose(hi, [2.5, 1.0])

    def test_contains_is_open(self):
        mask = self.domain.contains([[0.0, 0.0], [-1.0, 0.0], [2.4, 0.0], [0.0, 2.0]])
        assert mask.tolist() == [True, False, True, False]

    def test_interior_mask_skips_small_balls(self):
        """Test U^h: sólo bolas constituyentes de radio ≥ h"""
        domain = DomainSpec((Ball([0.0, 0.0], 1.0), Ball([1.2, 0.0], 0.3)))
        mask = domain.interior_mask([[0.0, 0.0], [1.4, 0.0]], h=0.5)
        assert mask.tolist() == [True, False]

    def test_deep_interior_mask(self):
        domain = DomainSpec.unit_ball(2)
        mask = domain.deep_interior_mask([[0.0, 0.0], [0.8, 0.0]], 0.5)
        assert mask.tolist() == [True, False]

    def test_inscribed_ball_near_boundary(self):
        """Test bola inscrita en B(x, r) ∩ U cerca del borde"""
        domain = DomainSpec.unit_ball(2)
        x = np.array([0.95, 0.0])
        center, radius = domain.inscribed_ball(x, 0.5)
        assert radius == pytest.approx(0.25)
        assert np.linalg.norm(center - x) + radius <= 0.5 + 1e-12
        assert np.linalg.norm(center) + radius <= 1.0 + 1e-12

    def test_inscribed_ball_outside_point(self):
        with pytest.raises(DomainException):
            DomainSpec.unit_ball(2).inscribed_ball([3.0, 0.0], 0.5)

    def test_to_dict_from_dict(self):
        restored = DomainSpec.from_dict(self.domain.to_dict())
        assert restored.dim == 2
        assert restored.diameter() == pytest.approx(self.domain.diameter())


class TestSampling:
    """Tests para sample_domain y hausdorff_density"""

    def setup_method(self):
        self.domain = DomainSpec.unit_ball(2)

    def test_samples_inside_domain(self):
        cloud = sample_domain(self.domain, 300, seed=4)
        assert cloud.n == 300 and cloud.dim == 2
        assert np.all(self.domain.contains(cloud.points))

    def test_nested_prefixes(self):
        """Test nubes anidadas: la muestra menor es prefijo de la mayor"""
        small = sample_domain(self.domain, 50, seed=11)
        large = sample_domain(self.domain, 400, seed=11)
        np.testing.assert_array_equal(small.points, large.prefix(50).points)

    def test_seeds_differ(self):
        a = sample_domain(self.domain, 20, seed=1)
        b = sample_domain(self.domain, 20, seed=2)
        assert not np.allclose(a.points, b.points)

    def test_hausdorff_density_non_increasing(self):
        """Test ε_n no creciente en nubes anidadas"""
        cloud = sample_domain(self.domain, 400, seed=3)
        values = [hausdorff_density(cloud.prefix(m), self.domain, 0.05) for m in (25, 100, 400)]
        assert values[0] >= values[1] >= values[2] > 0.0
        assert values[0] <= self.domain.diameter()

    def test_hausdorff_density_dimension_mismatch(self):
        cloud = PointCloud(np.zeros((3, 3)))
        with pytest.raises(DimensionException):
            hausdorff_density(cloud, self.domain, 0.1)

    def test_point_cloud_rejects_outside_points(self):
        with pytest.raises(DomainException):
            PointCloud(np.array([[2.0, 0.0]]), domain=self.domain)

    def test_point_cloud_shape(self):
        with pytest.raises(DimensionException):
            PointCloud(np.zeros(4))

    @pytest.mark.parametrize("dim", [1, 2])
    def test_hausdorff_density_of_center_point(self, dim):
        """Test ε = 1 para un único punto en el centro de la bola unidad, salvo la rejilla"""
        cloud = PointCloud(np.zeros((1, dim)))
        value = hausdorff_density(cloud, DomainSpec.unit_ball(dim), 0.001)
        assert 0.998 <= value <= 1.0

    def test_union_sampling_proportions_on_line(self):
        """Test que la zona solapada no se muestrea dos veces"""
        domain = DomainSpec((Ball([0.0], 1.0), Ball([1.5], 1.0)))
        x = sample_domain(domain, 20000, seed=8).points[:, 0]
        assert np.mean(x < 0.5) == pytest.approx(1.5 / 3.5, abs=0.02)
        assert np.mean((x >= 0.5) & (x <= 1.0)) == pytest.approx(0.5 / 3.5, abs=0.02)
        assert np.mean(x > 1.0) == pytest.approx(1.5 / 3.5, abs=0.02)

    def test_union_sampling_proportions_in_plane(self):
        domain = DomainSpec((Ball([0.0, 0.0], 1.0), Ball([1.5, 0.0], 1.0)))
        points = sample_domain(domain, 20000, seed=9).points
        lens = 2.0 * math.acos(0.75) - 0.75 * math.sqrt(1.75)
        in_both = (np.linalg.norm(points, axis=1) < 1.0) & (
            np.linalg.norm(points - [1.5, 0.0], axis=1) < 1.0
        )
        assert np.mean(points[:, 0] < 0.75) == pytest.approx(0.5, abs=0.02)
        assert np.mean(in_both) == pytest.approx(lens / (2.0 * math.pi - lens), abs=0.01)

    def test_point_cloud_dict(self):
        cloud = sample_domain(self.domain, 10, seed=0)
        restored = PointCloud.from_dict(cloud.to_dict())
        np.testing.assert_array_equal(restored.points, cloud.points)
        assert restored.seed == 0
        assert restored.domain is not None and restored.domain.dim == 2


class TestPacking:
    """Tests para greedy_packing"""

    def test_packing_is_separated_and_inside(self):
        points = greedy_packing([0.0, 0.0], 1.0, 0.3, seed=5)
        assert len(points) > 1
        gaps = np.linalg.norm(points[:, None] - points[None], axis=2)
        np.fill_diagonal(gaps, np.inf)
        assert gaps.min() >= 0.3
        assert np.all(np.linalg.norm(points, axis=1) < 1.0)

    def test_large_eta_returns_center(self):
        points = greedy_packing([0.5, 0.5], 0.2, 1.0, seed=0)
        np.testing.assert_array_equal(points, [[0.5, 0.5]])

    @pytest.mark.parametrize("seed", range(5))
    def test_one_dimensional_packing_is_maximal(self, seed):
        """Test que ningún candidato de la rejilla cabe en el empaquetamiento"""
        points = greedy_packing([0.0], 1.0, 0.5, seed=seed)
        assert 4 <= len(points) <= 5
        gaps = np.abs(points[:, None, 0] - points[None, :, 0])
        np.fill_diagonal(gaps, np.inf)
        assert gaps.min() > 0.5
        candidates = packing_candidates(np.array([0.0]), 1.0, 0.5, seed)
        nearest = np.min(np.abs(candidates[:, None, 0] - points[None, :, 0]), axis=1)
        assert np.all(nearest < 0.5 * (1.0 + 1e-9))

    def test_planar_packing_is_maximal(self):
        points = greedy_packing([0.0, 0.0], 1.0, 0.3, seed=5)
        candidates = packing_candidates(np.zeros(2), 1.0, 0.3, 5)
        nearest = np.min(np.linalg.norm(candidates[:, None] - points[None], axis=2), axis=1)
        assert np.all(nearest < 0.3 * (1.0 + 1e-9))
