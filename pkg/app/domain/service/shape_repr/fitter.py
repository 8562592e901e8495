from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from app.domain.model.shape import (BasisSpec, FeatureVector, FitMethod, MlsConfig, PcaProjection, Provenance,
                                    ShapeKind, ShapeSample, CURVE_PROVENANCES)
from app.domain.service.shape_repr import lsm, mls
from app.domain.utils import error_collection, validation


def reconstruct_curve(feature: FeatureVector, rhos) -> np.ndarray:
    """Points f(rho) = sum_j p_j B_j(rho); MLS features are back-projected from Π̃ first"""
    if feature.provenance not in CURVE_PROVENANCES:
        raise error_collection.DomainError(f'{feature.provenance} feature does not describe a curve')
    rhos = validation.validate_unit_interval(np.asarray(rhos, dtype=float).reshape(-1))
    if rhos.size == 0:
        return np.zeros((0, 3))
    if feature.provenance == Provenance.lsm_curve:
        return lsm.evaluate_curve_lsm(feature, rhos)
    return mls.evaluate_curve_mls(feature, rhos)


def reconstruct_surface(feature: FeatureVector, xy) -> np.ndarray:
    """Depth z at each (x, y)"""
    if feature.provenance in CURVE_PROVENANCES:
        raise error_collection.DomainError(f'{feature.provenance} feature does not describe a surface')
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    if feature.provenance == Provenance.lsm_surface:
        return lsm.evaluate_surface_lsm(feature, xy)
    return mls.evaluate_surface_mls(feature, xy)


def reconstruct_points(feature: FeatureVector, template: ShapeSample) -> np.ndarray:
    """Reconstruction at the parameters of template: its arc params, or its (x, y) for surfaces"""
    if template.is_curve:
        return reconstruct_curve(feature, template.arc_params)
    xy = template.points[:, :2]
    return np.column_stack([xy, reconstruct_surface(feature, xy)])


def fit_error(sample: ShapeSample, feature: FeatureVector) -> float:
    """sum_i |c_i - ĉ_i| over the points of sample"""
    return float(np.linalg.norm(sample.points - reconstruct_points(feature, sample), axis=1).sum())


@dataclass(frozen=True)
class ShapeFitter(object):
    """Fitting configuration shared by the compensator, the estimator and the controller.

    A reference projection pins the PCA mean and directions of MLS fits, so the features of
    successive frames are expressed in one coordinate system."""
    method: str = FitMethod.lsm
    basis: BasisSpec = BasisSpec()
    mls: MlsConfig = MlsConfig()
    reference: Optional[PcaProjection] = None

    def __post_init__(self):
        validation.validate_choice(self.method, (FitMethod.lsm, FitMethod.mls), 'method')

    def fit(self, sample: ShapeSample) -> FeatureVector:
        if sample.kind == ShapeKind.surface:
            if self.method == FitMethod.lsm:
                return lsm.fit_surface_lsm(sample, self.basis)
            return mls.fit_surface_mls(sample, self.basis, self.mls, self.reference)
        if self.method == FitMethod.lsm:
            return lsm.fit_curve_lsm(sample, self.basis)
        return mls.fit_curve_mls(sample, self.basis, self.mls, self.reference)

    def reconstruct(self, feature: FeatureVector, template: ShapeSample) -> ShapeSample:
        points = reconstruct_points(feature, template)
        if template.is_curve:
            return ShapeSample.from_points(points, template.kind)
        return ShapeSample(points=points, kind=template.kind)

    def pinned_to(self, feature: FeatureVector) -> 'ShapeFitter':
        """Same configuration, reusing the PCA projection of feature (no-op for LSM)"""
        if self.method != FitMethod.mls or feature.projection is None:
            return self
        return replace(self, reference=feature.projection)

    def feature_size(self, kind: str) -> int:
        count = self.basis.surface_count() if kind == ShapeKind.surface else self.basis.curve_count()
        return count if self.method == FitMethod.lsm else count * self.mls.pca_rank_m
