import numpy as np
import pytest

from app.domain.model.shape import BasisFamily, BasisSpec, ShapeKind, ShapeSample
from app.domain.service.shape_repr import (fit_curve_lsm, fit_error, fit_surface_lsm, reconstruct_curve,
                                           reconstruct_points, reconstruct_surface)
from app.domain.utils import generator
from app.domain.utils.error_collection import DomainError, FitPreconditionError, SingularFitError


class TestCurveLsm:

    @pytest.fixture
    def line_feature(self):
        return fit_curve_lsm(generator.line_curve(10), BasisSpec(family=BasisFamily.polynomial, order_n=1))

    def test_line_is_represented_exactly(self, line_feature):
        assert np.allclose(line_feature.values, [0, 0, 0, 1, 2, 0], atol=1e-9)
        assert fit_error(generator.line_curve(10), line_feature) < 1e-9

    def test_reconstruct_midpoint(self, line_feature):
        assert np.allclose(reconstruct_curve(line_feature, [0.5])[0], [0.5, 1.0, 0.0])

    def test_reconstruct_empty(self, line_feature):
        assert reconstruct_curve(line_feature, []).shape == (0, 3)

    def test_reconstruct_outside_unit_interval(self, line_feature):
        with pytest.raises(DomainError):
            reconstruct_curve(line_feature, [1.5])

    @pytest.mark.parametrize('family', [BasisFamily.bernstein, BasisFamily.polynomial, BasisFamily.cox_deboor])
    @pytest.mark.parametrize('order', [2, 5])
    def test_basis_generated_round_trip(self, family, order):
        spec = BasisSpec(family=family, order_n=order)
        weights = generator.random_weights(np.random.default_rng(order), order)
        sample = generator.basis_curve(spec, weights, n_points=64)
        feature = fit_curve_lsm(sample, spec)
        error = np.abs(reconstruct_points(feature, sample) - sample.points).max()
        assert error < 1e-9

    def test_higher_order_refines(self):
        sample = generator.wavy_cable(64)
        residuals = []
        for order in (3, 5):
            feature = fit_curve_lsm(sample, BasisSpec(family=BasisFamily.bernstein, order_n=order))
            residuals.append(np.linalg.norm(reconstruct_points(feature, sample) - sample.points))
        assert residuals[1] < residuals[0]

    def test_no_perturbation_lowers_residual(self):
        sample = generator.wavy_cable(64)
        feature = fit_curve_lsm(sample, BasisSpec(family=BasisFamily.bernstein, order_n=5))

        def residual(values):
            return np.sum((reconstruct_points(feature.with_values(values), sample) - sample.points) ** 2)

        best = residual(feature.values)
        rng = np.random.default_rng(0)
        for _ in range(100):
            direction = rng.normal(size=feature.size)
            direction *= 1e-4 / np.linalg.norm(direction)
            assert residual(feature.values + direction) >= best - 1e-12
            assert residual(feature.values - direction) >= best - 1e-12

    def test_too_few_points(self):
        with pytest.raises(FitPreconditionError):
            fit_curve_lsm(generator.line_curve(5), BasisSpec(family=BasisFamily.polynomial, order_n=2))

    def test_feature_size(self):
        feature = fit_curve_lsm(generator.wavy_cable(64), BasisSpec(family=BasisFamily.bernstein, order_n=5))
        assert feature.size == 18


class TestSurfaceLsm:

    def test_bilinear_plane(self):
        sample = generator.grid_surface(lambda x, y: x + y, nx=6, ny=6)
        feature = fit_surface_lsm(sample, BasisSpec(family=BasisFamily.polynomial, order_nx=1, order_ny=1))
        assert np.allclose(feature.values, [0.0, 1.0, 1.0, 0.0], atol=1e-9)

    def test_quadratic_surface_exact(self):
        sample = generator.grid_surface(lambda x, y: x ** 2 * y, nx=6, ny=6)
        feature = fit_surface_lsm(sample, BasisSpec(family=BasisFamily.polynomial, order_nx=2, order_ny=2))
        assert np.abs(reconstruct_surface(feature, sample.points[:, :2]) - sample.points[:, 2]).max() < 1e-9

    def test_too_few_points(self):
        sample = generator.grid_surface(lambda x, y: x * y, nx=4, ny=8)
        with pytest.raises(FitPreconditionError):
            fit_surface_lsm(sample, BasisSpec(family=BasisFamily.polynomial, order_nx=5, order_ny=5))

    def test_degenerate_layout_is_singular(self):
        y = np.linspace(0.0, 1.0, 12)
        sample = ShapeSample(points=np.column_stack([np.full(12, 0.5), y, y ** 2]), kind=ShapeKind.surface)
        with pytest.raises(SingularFitError):
            fit_surface_lsm(sample, BasisSpec(family=BasisFamily.polynomial, order_nx=1, order_ny=1))

    def test_curve_fit_rejects_surface(self):
        sample = generator.grid_surface(lambda x, y: x, nx=4, ny=4)
        with pytest.raises(DomainError):
            fit_curve_lsm(sample, BasisSpec(order_n=1))
