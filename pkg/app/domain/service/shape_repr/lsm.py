import numpy as np

from app.domain.model.shape import BasisSpec, FeatureVector, Provenance, ShapeKind, ShapeSample
from app.domain.service.shape_repr.basis import basis_matrix, surface_design, surface_frame
from app.domain.utils import error_collection

CONDITION_LIMIT = 1e12


def check_curve_sample(sample: ShapeSample, count: int):
    if not sample.is_curve:
        raise error_collection.DomainError(f'curve fitting needs a centerline or contour sample, receive {sample.kind}')
    _check_count(sample, count)


def check_surface_sample(sample: ShapeSample, count: int):
    if sample.kind != ShapeKind.surface:
        raise error_collection.DomainError(f'surface fitting needs a surface sample, receive {sample.kind}')
    _check_count(sample, count)


def _check_count(sample: ShapeSample, count: int):
    if sample.n_points < 2 * count:
        raise error_collection.FitPreconditionError(
            f'{sample.n_points} points cannot support {count} basis weights, at least {2 * count} are needed',
            data={'points': sample.n_points, 'parameters': count})


def solve_least_squares(design: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Least squares through SVD; refuses designs whose normal matrix condition exceeds the limit"""
    singular = np.linalg.svd(design, compute_uv=False)
    condition = np.inf if singular[-1] <= 0 else (singular[0] / singular[-1]) ** 2
    if condition > CONDITION_LIMIT:
        raise error_collection.SingularFitError(
            f'normal matrix condition number {condition:.3e} exceeds {CONDITION_LIMIT:.0e}',
            data={'condition': float(condition)})
    solution, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    return solution


def fit_curve_lsm(sample: ShapeSample, spec: BasisSpec) -> FeatureVector:
    """One global set of shape weights p_0..p_n, flattened as (p0x, p0y, p0z, p1x, ...)"""
    n = spec.order_n
    check_curve_sample(sample, n + 1)
    design = basis_matrix(spec.family, n, sample.arc_params)
    weights = solve_least_squares(design, sample.points)
    return FeatureVector(values=weights.ravel(), provenance=Provenance.lsm_curve, basis=spec)


def fit_surface_lsm(sample: ShapeSample, spec: BasisSpec) -> FeatureVector:
    """Depth as sum_jl q_jl B_j(x) B_l(y) over the (x, y) of each point, normalized to the sample footprint"""
    check_surface_sample(sample, spec.surface_count())
    frame = surface_frame(sample.points[:, :2])
    design = surface_design(spec, sample.points[:, :2], frame)
    weights = solve_least_squares(design, sample.points[:, 2])
    return FeatureVector(values=weights, provenance=Provenance.lsm_surface, basis=spec, frame=frame)


def evaluate_curve_lsm(feature: FeatureVector, rhos) -> np.ndarray:
    spec = feature.basis
    design = basis_matrix(spec.family, spec.order_n, rhos)
    return design @ feature.values.reshape(spec.order_n + 1, 3)


def evaluate_surface_lsm(feature: FeatureVector, xy) -> np.ndarray:
    return surface_design(feature.basis, xy, feature.frame) @ feature.values
