"""Moving least squares: one weighted local fit per node, stacked into Π and compressed by PCA."""
from typing import Optional, Tuple

import numpy as np
from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator, interp1d

from app.domain.model.shape import BasisSpec, FeatureVector, MlsConfig, PcaProjection, Provenance, ShapeSample
from app.domain.service.shape_repr.basis import basis_matrix, surface_design, surface_frame
from app.domain.service.shape_repr.lsm import check_curve_sample, check_surface_sample
from app.domain.utils import error_collection, validation

RCOND = 1e-10
# pulls of the local solves towards the global fit, relative to the mean diagonal of each local normal matrix;
# 0 is the plain local fit, inf collapses every node onto the global fit
RIDGE_LADDER = (0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, np.inf)


def mls_weight(epsilon):
    """Compactly supported cubic spline weight, zero beyond eps = 1"""
    eps = np.asarray(epsilon, dtype=float)
    inner = 2.0 / 3.0 - 4.0 * eps ** 2 + 4.0 * eps ** 3
    outer = 4.0 / 3.0 * (1.0 - eps) ** 3
    weight = np.maximum(np.where(eps <= 0.5, inner, np.where(eps <= 1.0, outer, 0.0)), 0.0)
    return float(weight) if weight.ndim == 0 else weight


def _local_solves(design: np.ndarray, targets: np.ndarray, weights: np.ndarray, params: np.ndarray,
                  ridge: float = 0.0) -> np.ndarray:
    """argmin_x sum_k w_ik |design_k x - target_k|^2 + λ_i |x - x̄|^2 for every node i, shape (N, c, d).

    x̄ is the unweighted fit over all points and λ_i = ridge * trace(A_i^T W_i A_i) / c."""
    count = design.shape[1]
    covered = (weights > 0).sum(axis=1)
    short = np.flatnonzero(covered < count)
    if short.size:
        where = params[short[0]]
        raise error_collection.UnderdeterminedLocalFitError(
            f'support field around node {short[0]} (param {np.round(where, 6).tolist()}) covers {covered[short[0]]} '
            f'points, {count} are needed',
            data={'node': int(short[0]), 'param': np.asarray(where).tolist(), 'covered': int(covered[short[0]])})
    if ridge == 0:
        root = np.sqrt(weights)
        a = root[:, :, None] * design[None, :, :]
        b = root[:, :, None] * targets[None, :, :]
        return np.linalg.pinv(a, RCOND) @ b

    anchor, *_ = np.linalg.lstsq(design, targets, rcond=None)
    if np.isinf(ridge):
        return np.repeat(anchor[None], len(weights), axis=0)
    normal = np.einsum('ik,kc,ke->ice', weights, design, design)
    rhs = np.einsum('ik,kc,kd->icd', weights, design, targets - design @ anchor)
    pull = ridge * np.trace(normal, axis1=1, axis2=2) / count
    return anchor + np.linalg.solve(normal + pull[:, None, None] * np.eye(count), rhs)


def solve_curve_nodes(points, rhos, spec: BasisSpec, d: float, ridge: float = 0.0) -> np.ndarray:
    """Π with one column of local shape weights per node, 3(n+1) x N"""
    points = np.asarray(points, dtype=float)
    rhos = np.asarray(rhos, dtype=float)
    design = basis_matrix(spec.family, spec.order_n, rhos)
    weights = mls_weight(np.abs(rhos[None, :] - rhos[:, None]) / d)
    local = _local_solves(design, points, weights, rhos, ridge)
    return local.reshape(len(rhos), -1).T


def solve_surface_nodes(points, spec: BasisSpec, d: float, ridge: float = 0.0, frame=None) -> np.ndarray:
    """Π for a surface, (nx+1)(ny+1) x N, local distances measured in the (x, y) plane"""
    points = np.asarray(points, dtype=float)
    xy = points[:, :2]
    design = surface_design(spec, xy, frame)
    distance = np.linalg.norm(xy[None, :, :] - xy[:, None, :], axis=2)
    local = _local_solves(design, points[:, 2:3], mls_weight(distance / d), xy, ridge)
    return local[:, :, 0].T


def pca_compress(pi: np.ndarray, m: int, nodes, reference: Optional[PcaProjection] = None, ridge: float = 0.0
                 ) -> Tuple[np.ndarray, PcaProjection]:
    """Rows of Π are the samples: columns are centered, Π̃ = (Π - mean) V_m.

    With a reference projection the mean and directions are reused instead of recomputed."""
    pi = np.asarray(pi, dtype=float)
    if reference is not None:
        if reference.components.shape != (pi.shape[1], m):
            raise error_collection.ContractError(
                f'reference projection is {reference.components.shape}, this fit needs ({pi.shape[1]}, {m})')
        compressed = (pi - reference.mean) @ reference.components
        return compressed, PcaProjection(mean=reference.mean, components=reference.components,
                                         singular_values=reference.singular_values, nodes=nodes,
                                         ridge=reference.ridge)
    mean = pi.mean(axis=0)
    centered = pi - mean
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    components = np.zeros((pi.shape[1], m))
    kept = min(m, vt.shape[0])
    components[:, :kept] = vt[:kept].T
    values = np.zeros(m)
    values[:kept] = singular[:kept]

    # sign convention: the largest-magnitude entry of every direction is positive
    lead = components[np.argmax(np.abs(components), axis=0), np.arange(m)]
    components *= np.where(lead < 0, -1.0, 1.0)
    return centered @ components, PcaProjection(mean=mean, components=components, singular_values=values,
                                                 nodes=nodes, ridge=ridge)


def pca_expand(compressed: np.ndarray, projection: PcaProjection) -> np.ndarray:
    return compressed @ projection.components.T + projection.mean


def _check_rank(sample: ShapeSample, cfg: MlsConfig):
    if cfg.pca_rank_m > sample.n_points:
        raise error_collection.ValidationError(
            f'PCA rank m={cfg.pca_rank_m} exceeds the number of points {sample.n_points}')


def _compress_best(solve, residual, m: int, nodes, reference: Optional[PcaProjection]
                   ) -> Tuple[np.ndarray, PcaProjection]:
    """Compressed Π at the reference pull, or at the rung of RIDGE_LADDER whose rank-m
    reconstruction misses the sample points the least"""
    if reference is not None:
        return pca_compress(solve(reference.ridge), m, nodes, reference)
    best, best_error = None, np.inf
    for ridge in RIDGE_LADDER:
        try:
            compressed, projection = pca_compress(solve(ridge), m, nodes, ridge=ridge)
        except np.linalg.LinAlgError:
            continue
        error = residual(pca_expand(compressed, projection))
        if error < best_error:
            best, best_error = (compressed, projection), error
    if best is None:
        raise error_collection.SingularFitError('no local solve of the MLS fit is well posed')
    return best


def fit_curve_mls(sample: ShapeSample, spec: BasisSpec, cfg: MlsConfig,
                  reference: Optional[PcaProjection] = None) -> FeatureVector:
    check_curve_sample(sample, spec.order_n + 1)
    _check_rank(sample, cfg)
    rhos = sample.arc_params
    design = basis_matrix(spec.family, spec.order_n, rhos)

    def residual(pi):
        local = pi.reshape(spec.order_n + 1, 3, -1)
        return float(np.linalg.norm(sample.points - np.einsum('kj,jdk->kd', design, local), axis=1).sum())

    compressed, projection = _compress_best(
        lambda ridge: solve_curve_nodes(sample.points, rhos, spec, cfg.support_radius_d, ridge),
        residual, cfg.pca_rank_m, rhos, reference)
    return FeatureVector(values=compressed.ravel(order='F'), provenance=Provenance.mls_curve, basis=spec, mls=cfg,
                         projection=projection)


def fit_surface_mls(sample: ShapeSample, spec: BasisSpec, cfg: MlsConfig,
                    reference: Optional[PcaProjection] = None) -> FeatureVector:
    check_surface_sample(sample, spec.surface_count())
    _check_rank(sample, cfg)
    xy = sample.points[:, :2]
    frame = surface_frame(xy)
    design = surface_design(spec, xy, frame)

    def residual(pi):
        return float(np.abs(sample.points[:, 2] - np.einsum('kj,jk->k', design, pi)).sum())

    compressed, projection = _compress_best(
        lambda ridge: solve_surface_nodes(sample.points, spec, cfg.support_radius_d, ridge, frame),
        residual, cfg.pca_rank_m, xy, reference)
    return FeatureVector(values=compressed.ravel(order='F'), provenance=Provenance.mls_surface, basis=spec, mls=cfg,
                         projection=projection, frame=frame)


def node_coefficients(feature: FeatureVector) -> np.ndarray:
    """Back-projected Π of an MLS feature"""
    rows = feature.values.size // feature.mls.pca_rank_m
    compressed = feature.values.reshape(feature.mls.pca_rank_m, rows).T
    return pca_expand(compressed, feature.projection)


def evaluate_curve_mls(feature: FeatureVector, rhos) -> np.ndarray:
    spec = feature.basis
    rhos = validation.validate_unit_interval(np.asarray(rhos, dtype=float).reshape(-1))
    design = basis_matrix(spec.family, spec.order_n, rhos)
    pi = node_coefficients(feature)
    local = interp1d(feature.projection.nodes, pi, axis=1, assume_sorted=True)(rhos)
    weights = local.T.reshape(len(rhos), spec.order_n + 1, 3)
    return np.einsum('kj,kjd->kd', design, weights)


def evaluate_surface_mls(feature: FeatureVector, xy) -> np.ndarray:
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    design = surface_design(feature.basis, xy, feature.frame)
    nodes = feature.projection.nodes
    columns = node_coefficients(feature).T
    local = np.full((len(xy), columns.shape[1]), np.nan)
    if len(xy):
        try:
            local = LinearNDInterpolator(nodes, columns)(xy)
        except RuntimeError:
            pass
        outside = np.isnan(local).any(axis=1)
        if outside.any():
            local[outside] = NearestNDInterpolator(nodes, columns)(xy[outside])
    return np.einsum('kj,kj->k', design, local)
