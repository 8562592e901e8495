from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from app.domain.model._serializable import Serializable
from app.domain.utils import error_collection, validation


@dataclass
class ShapeKind:
    centerline: str = 'centerline'
    contour: str = 'contour'
    surface: str = 'surface'


CURVE_KINDS = (ShapeKind.centerline, ShapeKind.contour)


@dataclass
class BasisFamily:
    polynomial: str = 'polynomial'
    bernstein: str = 'bernstein'
    cox_deboor: str = 'cox_deboor'
    trigonometric: str = 'trigonometric'


BASIS_FAMILIES = (BasisFamily.polynomial, BasisFamily.bernstein, BasisFamily.cox_deboor,
                  BasisFamily.trigonometric)


@dataclass
class FitMethod:
    lsm: str = 'lsm'
    mls: str = 'mls'


@dataclass
class Provenance:
    lsm_curve: str = 'lsm_curve'
    lsm_surface: str = 'lsm_surface'
    mls_curve: str = 'mls_curve'
    mls_surface: str = 'mls_surface'


CURVE_PROVENANCES = (Provenance.lsm_curve, Provenance.mls_curve)


def readonly(array) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


def arc_length_params(points) -> np.ndarray:
    """Cumulative chord length normalized to [0, 1]"""
    points = np.asarray(points, dtype=float)
    chords = np.linalg.norm(np.diff(points, axis=0), axis=1)
    cumulative = np.concatenate([[0.0], np.cumsum(chords)])
    if cumulative[-1] <= 0 or np.any(chords <= 0):
        raise error_collection.ValidationError('consecutive curve points must be distinct')
    rhos = cumulative / cumulative[-1]
    rhos[-1] = 1.0
    return rhos


@dataclass(frozen=True, eq=False)
class ShapeSample(Serializable):
    """Ordered, fixed-cardinality point set observed from the plant."""
    points: np.ndarray
    kind: str
    arc_params: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, 'points', readonly(self.points))
        if self.arc_params is not None:
            object.__setattr__(self, 'arc_params', readonly(self.arc_params))
        self.validate()

    @classmethod
    def from_points(cls, points, kind: str) -> 'ShapeSample':
        points = np.asarray(points, dtype=float)
        rhos = arc_length_params(points) if kind in CURVE_KINDS else None
        return cls(points=points, kind=kind, arc_params=rhos)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def is_curve(self) -> bool:
        return self.kind in CURVE_KINDS

    def with_points(self, points) -> 'ShapeSample':
        return ShapeSample.from_points(points, self.kind)

    def validate(self):
        validation.validate_choice(self.kind, (ShapeKind.centerline, ShapeKind.contour, ShapeKind.surface), 'kind')
        validation.validate_points(self.points, 'points', min_count=2)
        if self.is_curve:
            if self.arc_params is None:
                raise error_collection.ValidationError('curve samples need arc_params')
            rhos = self.arc_params
            if rhos.shape != (self.n_points,):
                raise error_collection.ValidationError('arc_params must have one entry per point')
            if abs(rhos[0]) > 1e-12 or abs(rhos[-1] - 1.0) > 1e-12 or np.any(np.diff(rhos) <= 0):
                raise error_collection.ValidationError('arc_params must increase strictly from 0 to 1')


@dataclass(frozen=True)
class BasisSpec(Serializable):
    family: str = BasisFamily.bernstein
    order_n: int = 5
    order_nx: int = 2
    order_ny: int = 2

    def __post_init__(self):
        self.validate()

    def validate(self):
        validation.validate_choice(self.family, BASIS_FAMILIES, 'family')
        validation.validate_positive_int(self.order_n, 'order_n')
        validation.validate_positive_int(self.order_nx, 'order_nx')
        validation.validate_positive_int(self.order_ny, 'order_ny')

    def curve_count(self) -> int:
        """3(n+1) shape weights"""
        return 3 * (self.order_n + 1)

    def surface_count(self) -> int:
        return (self.order_nx + 1) * (self.order_ny + 1)


@dataclass(frozen=True)
class MlsConfig(Serializable):
    support_radius_d: float = 0.2
    pca_rank_m: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        validation.validate_positive(self.support_radius_d, 'support_radius_d')
        validation.validate_positive_int(self.pca_rank_m, 'pca_rank_m')


@dataclass(frozen=True, eq=False)
class PcaProjection(Serializable):
    """What is needed to expand Π̃ back into Π: per-node means, principal directions and
    the node parameters (ρ_i for curves, (x_i, y_i) for surfaces).

    ridge is the pull of the local solves towards the global fit that produced Π, fits pinned
    to this projection solve with the same pull."""
    mean: np.ndarray
    components: np.ndarray
    singular_values: np.ndarray
    nodes: np.ndarray
    ridge: float = 0.0

    def __post_init__(self):
        for name in ('mean', 'components', 'singular_values', 'nodes'):
            object.__setattr__(self, name, readonly(getattr(self, name)))
        object.__setattr__(self, 'ridge', float(self.ridge))
        if not self.ridge >= 0:
            raise error_collection.ValidationError(f'ridge must be nonnegative, receive {self.ridge}')


@dataclass(frozen=True, eq=False)
class FeatureVector(Serializable):
    values: np.ndarray
    provenance: str
    basis: BasisSpec
    mls: Optional[MlsConfig] = None
    projection: Optional[PcaProjection] = None
    # (x_lo, y_lo, x_hi, y_hi) the surface basis is normalized over; None evaluates on raw (x, y)
    frame: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, 'values', readonly(np.asarray(self.values, dtype=float).reshape(-1)))
        if self.frame is not None:
            object.__setattr__(self, 'frame', readonly(self.frame))
        self.validate()

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def is_curve(self) -> bool:
        return self.provenance in CURVE_PROVENANCES

    def expected_size(self) -> int:
        if self.provenance == Provenance.lsm_curve:
            return self.basis.curve_count()
        if self.provenance == Provenance.lsm_surface:
            return self.basis.surface_count()
        if self.provenance == Provenance.mls_curve:
            return self.mls.pca_rank_m * self.basis.curve_count()
        return self.mls.pca_rank_m * self.basis.surface_count()

    def with_values(self, values) -> 'FeatureVector':
        return replace(self, values=np.asarray(values, dtype=float))

    def validate(self):
        validation.validate_choice(self.provenance, (Provenance.lsm_curve, Provenance.lsm_surface,
                                                     Provenance.mls_curve, Provenance.mls_surface), 'provenance')
        if self.provenance in (Provenance.mls_curve, Provenance.mls_surface):
            if self.mls is None or self.projection is None:
                raise error_collection.ValidationError('MLS features need their MlsConfig and PCA projection')
        validation.validate_finite(self.values, 'feature values')
        if self.frame is not None:
            if self.is_curve:
                raise error_collection.ValidationError('only surface features carry a frame')
            if self.frame.shape != (4,) or not np.all(self.frame[2:] > self.frame[:2]):
                raise error_collection.ValidationError(
                    f'frame must be (x_lo, y_lo, x_hi, y_hi) with positive extent, receive {self.frame.tolist()}')
        if self.values.size != self.expected_size():
            raise error_collection.ValidationError(
                f'feature vector has {self.values.size} entries, {self.provenance} needs {self.expected_size()}')


@dataclass(frozen=True, eq=False)
class FitReport(Serializable):
    """One row of the fitting benchmark table"""
    family: str
    order: int
    method: str
    d: float
    m: int
    mean_error: float
    elapsed_us: float
    samples: int = 0
    failures: int = 0

    _json_black_list = []


def feature_distance(a: FeatureVector, b: FeatureVector) -> float:
    if a.size != b.size:
        raise error_collection.ContractError(f'feature sizes differ: {a.size} vs {b.size}')
    return float(np.linalg.norm(a.values - b.values))


__all__ = ['ShapeKind', 'BasisFamily', 'FitMethod', 'Provenance', 'ShapeSample', 'BasisSpec', 'MlsConfig',
           'PcaProjection', 'FeatureVector', 'FitReport', 'arc_length_params', 'feature_distance',
           'CURVE_KINDS', 'BASIS_FAMILIES', 'CURVE_PROVENANCES', 'readonly']
