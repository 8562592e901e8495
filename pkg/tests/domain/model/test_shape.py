import numpy as np
import pytest

from app.domain.model.shape import (BasisSpec, FeatureVector, MlsConfig, Provenance, ShapeKind, ShapeSample,
                                    arc_length_params, feature_distance)
from app.domain.utils.error_collection import ContractError, ValidationError


class TestShapeSample:

    def test_arc_length_params(self):
        points = np.array([[0, 0, 0], [1, 0, 0], [1, 3, 0]], dtype=float)
        assert np.allclose(arc_length_params(points), [0.0, 0.25, 1.0])

    def test_from_points_computes_params_for_curves(self):
        sample = ShapeSample.from_points([[0, 0, 0], [1, 0, 0], [2, 0, 0]], ShapeKind.centerline)
        assert np.allclose(sample.arc_params, [0.0, 0.5, 1.0])
        assert sample.is_curve

    def test_surface_has_no_params(self):
        sample = ShapeSample.from_points(np.random.default_rng(0).random((5, 3)), ShapeKind.surface)
        assert sample.arc_params is None
        assert not sample.is_curve

    def test_repeated_points(self):
        with pytest.raises(ValidationError):
            ShapeSample.from_points([[0, 0, 0], [0, 0, 0], [1, 0, 0]], ShapeKind.centerline)

    def test_unknown_kind(self):
        with pytest.raises(ValidationError):
            ShapeSample.from_points([[0, 0, 0], [1, 0, 0]], 'blob')

    def test_bad_params(self):
        with pytest.raises(ValidationError):
            ShapeSample(points=np.zeros((3, 3)), kind=ShapeKind.contour, arc_params=np.array([0.0, 0.7, 0.6]))

    def test_non_finite_points(self):
        with pytest.raises(ValidationError):
            ShapeSample(points=np.array([[0, 0, np.nan], [1, 0, 0]]), kind=ShapeKind.surface)

    def test_readonly(self):
        sample = ShapeSample.from_points([[0, 0, 0], [1, 0, 0]], ShapeKind.centerline)
        with pytest.raises(ValueError):
            sample.points[0, 0] = 3.0


class TestFeatureVector:

    def test_size_must_match_basis(self):
        with pytest.raises(ValidationError):
            FeatureVector(values=np.zeros(5), provenance=Provenance.lsm_curve, basis=BasisSpec(order_n=1))

    def test_mls_needs_projection(self):
        with pytest.raises(ValidationError):
            FeatureVector(values=np.zeros(6), provenance=Provenance.mls_curve, basis=BasisSpec(order_n=1),
                          mls=MlsConfig())

    def test_with_values(self):
        feature = FeatureVector(values=np.zeros(6), provenance=Provenance.lsm_curve, basis=BasisSpec(order_n=1))
        moved = feature.with_values(np.ones(6))
        assert feature_distance(feature, moved) == pytest.approx(np.sqrt(6))
        assert moved.basis == feature.basis

    def test_distance_size_mismatch(self):
        a = FeatureVector(values=np.zeros(6), provenance=Provenance.lsm_curve, basis=BasisSpec(order_n=1))
        b = FeatureVector(values=np.zeros(4), provenance=Provenance.lsm_surface,
                          basis=BasisSpec(order_nx=1, order_ny=1))
        with pytest.raises(ContractError):
            feature_distance(a, b)

    def test_to_json(self):
        feature = FeatureVector(values=np.arange(6.0), provenance=Provenance.lsm_curve, basis=BasisSpec(order_n=1))
        data = feature.to_json()
        assert data['values'] == [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
        assert data['basis']['order_n'] == 1
        assert data['projection'] is None


class TestBasisSpec:

    def test_counts(self):
        spec = BasisSpec(order_n=5, order_nx=2, order_ny=3)
        assert spec.curve_count() == 18
        assert spec.surface_count() == 12

    @pytest.mark.parametrize('kwargs', [dict(family='chebyshev'), dict(order_n=0), dict(order_nx=-1)])
    def test_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            BasisSpec(**kwargs)

    def test_mls_config(self):
        with pytest.raises(ValidationError):
            MlsConfig(support_radius_d=0.0)
