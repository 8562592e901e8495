import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pydantic
from pydantic import BaseModel, root_validator, validator

from app.domain.model._serializable import Serializable
from app.domain.model.control import MpcConfig
from app.domain.model.jacobian import EstimatorMethod, RtmWeights
from app.domain.model.plant import OcclusionSchedule, Stiffness
from app.domain.model.shape import (BASIS_FAMILIES, BasisSpec, FeatureVector, FitMethod, MlsConfig, ShapeKind,
                                    ShapeSample)
from app.domain.utils import error_collection
from app.pkgs.errors import Error


@dataclass
class ObjectName:
    cable: str = 'cable'
    contour: str = 'contour'
    sheet: str = 'sheet'


OBJECT_NAMES = (ObjectName.cable, ObjectName.contour, ObjectName.sheet)


class PlantSection(BaseModel):
    object: str = ObjectName.cable
    n_nodes: int = 64
    rows: int = 4
    cols: int = 8
    stretch_ks: float = 50.0
    bend_kb: float = 1e-3

    class Config:
        extra = 'forbid'

    @validator('object')
    def known_object(cls, v):
        if v not in OBJECT_NAMES:
            raise ValueError(f'object must be one of {list(OBJECT_NAMES)}')
        return v

    @root_validator(skip_on_failure=True)
    def grid_size(cls, values):
        if values['object'] == ObjectName.sheet:
            values['n_nodes'] = values['rows'] * values['cols']
        if values['n_nodes'] < 3:
            raise ValueError('a plant needs at least 3 nodes')
        return values

    def stiffness(self) -> Stiffness:
        return Stiffness(stretch_ks=self.stretch_ks, bend_kb=self.bend_kb)


class FittingSection(BaseModel):
    method: str = FitMethod.lsm
    family: str = 'bernstein'
    order_n: int = 5
    order_nx: int = 2
    order_ny: int = 2
    support_radius_d: float = 0.2
    pca_rank_m: int = 1

    class Config:
        extra = 'forbid'

    @validator('method')
    def known_method(cls, v):
        if v not in (FitMethod.lsm, FitMethod.mls):
            raise ValueError('method must be lsm or mls')
        return v

    @validator('family')
    def known_family(cls, v):
        if v not in BASIS_FAMILIES:
            raise ValueError(f'family must be one of {list(BASIS_FAMILIES)}')
        return v

    @validator('order_n', 'order_nx', 'order_ny', 'pca_rank_m')
    def positive(cls, v):
        if v < 1:
            raise ValueError('orders and PCA rank must be at least 1')
        return v

    @validator('support_radius_d')
    def positive_radius(cls, v):
        if v <= 0:
            raise ValueError('support radius must be positive')
        return v

    def basis_spec(self) -> BasisSpec:
        return BasisSpec(family=self.family, order_n=self.order_n, order_nx=self.order_nx, order_ny=self.order_ny)

    def mls_config(self) -> MlsConfig:
        return MlsConfig(support_radius_d=self.support_radius_d, pca_rank_m=self.pca_rank_m)


class TerminationSection(BaseModel):
    threshold: Optional[float] = None  # absolute; None means threshold_ratio of the initial error
    threshold_ratio: float = 0.01
    max_steps: int = 600
    stall_window: int = 200

    class Config:
        extra = 'forbid'

    @validator('threshold')
    def positive_threshold(cls, v):
        if v is not None and v <= 0:
            raise ValueError('threshold must be positive')
        return v

    @validator('threshold_ratio')
    def ratio_range(cls, v):
        if not 0 < v < 1:
            raise ValueError('threshold_ratio must be in (0, 1)')
        return v

    @validator('max_steps', 'stall_window')
    def positive_steps(cls, v):
        if v < 1:
            raise ValueError('step counts must be positive')
        return v

    def resolve(self, initial_error: float) -> float:
        if self.threshold is not None:
            return self.threshold
        return max(self.threshold_ratio * initial_error, 1e-9)


OBJECT_DEFAULTS = {
    ObjectName.cable: dict(
        plant=dict(object=ObjectName.cable, n_nodes=64),
        fitting=dict(method=FitMethod.lsm, family='bernstein', order_n=5),
        mpc=dict(r_min=(0.4, 0.2, 0.2), r_max=(1.0, 0.8, 0.8))),
    ObjectName.contour: dict(
        plant=dict(object=ObjectName.contour, n_nodes=64),
        fitting=dict(method=FitMethod.mls, family='trigonometric', order_n=4, support_radius_d=0.2, pca_rank_m=1),
        mpc=dict(r_min=(0.45, 0.3, 0.3), r_max=(0.8, 0.7, 0.7))),
    ObjectName.sheet: dict(
        plant=dict(object=ObjectName.sheet, rows=4, cols=8),
        fitting=dict(method=FitMethod.mls, family='polynomial', order_nx=2, order_ny=2, support_radius_d=0.2,
                     pca_rank_m=1),
        mpc=dict(r_min=(0.3, 0.2, 0.3), r_max=(0.6, 0.55, 0.8))),
}


class ServoConfig(BaseModel):
    """Everything one experiment needs; dumped by print-config, read back from JSON"""
    plant: PlantSection = PlantSection()
    fitting: FittingSection = FittingSection()
    rtm: RtmWeights = RtmWeights()
    mpc: MpcConfig = MpcConfig()
    occlusion: str = ''
    target_file: Optional[str] = None
    termination: TerminationSection = TerminationSection()
    estimator: str = EstimatorMethod.rtm
    broyden_gain: float = 1.0
    probe_amplitude: float = 0.001
    resolution_scale: int = 2
    seed: int = 0

    class Config:
        extra = 'forbid'

    @validator('occlusion')
    def parsable_occlusion(cls, v):
        try:
            OcclusionSchedule.parse(v)
        except Error as e:
            raise ValueError(e.message)
        return v

    @validator('estimator')
    def known_estimator(cls, v):
        if v not in (EstimatorMethod.rtm, EstimatorMethod.broyden):
            raise ValueError('estimator must be rtm or broyden')
        return v

    @validator('broyden_gain')
    def gain_range(cls, v):
        if not 0 < v <= 1:
            raise ValueError('broyden_gain must be in (0, 1]')
        return v

    @validator('probe_amplitude')
    def positive_probe(cls, v):
        if v <= 0:
            raise ValueError('probe_amplitude must be positive')
        return v

    @classmethod
    def load(cls, data: dict) -> 'ServoConfig':
        try:
            return cls.parse_obj(data)
        except pydantic.ValidationError as e:
            raise error_collection.ValidationError(f'invalid servo config: {e}', data={'errors': e.errors()})

    @classmethod
    def from_file(cls, path: str) -> 'ServoConfig':
        try:
            with open(path, 'r') as json_file:
                data = json.load(json_file)
        except (OSError, ValueError) as e:
            raise error_collection.ValidationError(f'cannot read config file {path}: {e}')
        return cls.load(data)

    @classmethod
    def for_object(cls, name: str) -> 'ServoConfig':
        if name not in OBJECT_DEFAULTS:
            raise error_collection.ValidationError(f'object must be one of {list(OBJECT_NAMES)}, receive {name}')
        return cls.load(OBJECT_DEFAULTS[name])

    def with_overrides(self, **overrides) -> 'ServoConfig':
        """Dotted keys ('rtm.eta', 'mpc.horizon_h', ...) replace single values; None is ignored"""
        data = json.loads(self.json())
        for key, value in overrides.items():
            if value is None:
                continue
            section, _, name = key.rpartition('.')
            target = data[section] if section else data
            target[name] = value
        return ServoConfig.load(data)

    def occlusion_schedule(self) -> OcclusionSchedule:
        return OcclusionSchedule.parse(self.occlusion)


@dataclass
class StopReason:
    converged: str = 'converged'
    stalled: str = 'stalled'
    max_steps: str = 'max_steps'


@dataclass(frozen=True)
class EstimatorTraceRow(Serializable):
    step: int
    T1: float
    T2: float
    Q1: float
    Q2: float
    Q3: float
    objective: float
    eta: int
    mu1: float
    mu2: float
    mu3: float


@dataclass(frozen=True)
class ControllerTraceRow(Serializable):
    step: int
    err_norm: float
    ux: float
    uy: float
    uz: float
    rx: float
    ry: float
    rz: float
    active_constraints: int
    qp_iters: int
    qp_residual: float


def phase_steps(error_series: List[float], threshold: float) -> Tuple[int, int, int, bool]:
    """(T_max, t_d, t_s, converged) from the per-step errors, error_series[0] being the initial one.

    t_d counts the steps until the error first reaches 10% of the initial error, t_s the steps
    from there to the threshold."""
    errors = np.asarray(error_series, dtype=float)
    below = np.flatnonzero(errors < threshold)
    converged = below.size > 0
    t_max = int(below[0]) if converged else max(len(errors) - 1, 0)
    decayed = np.flatnonzero(errors[:t_max + 1] <= 0.1 * errors[0]) if errors.size else np.array([])
    t_d = int(decayed[0]) if decayed.size else t_max
    return t_max, t_d, t_max - t_d, converged


@dataclass(frozen=True)
class RunMetrics(Serializable):
    error_series: List[float]
    T_max: int
    t_d: int
    t_s: int
    d_eff: float
    threshold: float
    converged: bool
    stalled: bool
    stop_reason: str = StopReason.converged
    estimator_trace: List[EstimatorTraceRow] = field(default_factory=list)
    controller_trace: List[ControllerTraceRow] = field(default_factory=list)
    estimator_failures: int = 0
    solver_failures: int = 0

    _json_black_list = ['estimator_trace', 'controller_trace']

    @classmethod
    def build(cls, error_series: List[float], commands: List[np.ndarray], threshold: float, stop_reason: str,
              estimator_trace=(), controller_trace=(), estimator_failures: int = 0,
              solver_failures: int = 0) -> 'RunMetrics':
        t_max, t_d, t_s, converged = phase_steps(error_series, threshold)
        d_eff = float(sum(np.linalg.norm(u) for u in commands[:t_max]))
        return cls(error_series=[float(e) for e in error_series], T_max=t_max, t_d=t_d, t_s=t_s, d_eff=d_eff,
                   threshold=float(threshold), converged=converged, stalled=not converged,
                   stop_reason=StopReason.converged if converged else stop_reason,
                   estimator_trace=list(estimator_trace), controller_trace=list(controller_trace),
                   estimator_failures=estimator_failures, solver_failures=solver_failures)


@dataclass(frozen=True)
class LoopTiming(Serializable):
    """Per-step wall time of fit + estimate + QP, kept apart from the deterministic metrics"""
    steps: int
    mean_ms: float
    max_ms: float
    budget_ms: float

    @property
    def within_budget(self) -> bool:
        return self.mean_ms <= self.budget_ms

    def to_json(self, except_fields: List[str] = ()) -> dict:
        data = super().to_json(except_fields)
        data['within_budget'] = self.within_budget
        return data


@dataclass(frozen=True, eq=False)
class DemonstrationTarget(Serializable):
    """Final shape of an open-loop demonstration and its feature vector"""
    sample: ShapeSample
    feature: FeatureVector
    object_name: str
    script_steps: int = 0
    grasp: Optional[Tuple[float, float, float]] = None


@dataclass(frozen=True)
class FitCell(Serializable):
    """One (method, family, order[, d, m]) configuration of the fitting benchmark.

    For surfaces the order applies to both directions."""
    method: str
    family: str
    order: int
    d: float = 0.2
    m: int = 1

    def fitting(self) -> FittingSection:
        return FittingSection(method=self.method, family=self.family, order_n=self.order, order_nx=self.order,
                              order_ny=self.order, support_radius_d=self.d, pca_rank_m=self.m)


def default_fit_grid(kind: str, d: float = 0.2, m: int = 1, methods: Sequence[str] = (),
                     families: Sequence[str] = (), orders: Sequence[int] = ()) -> List[FitCell]:
    """Cartesian grid; empty selections fall back to both methods, every family and orders per kind"""
    orders = orders or ((1, 2) if kind == ShapeKind.surface else (3, 4, 5))
    return [FitCell(method=method, family=family, order=order, d=d, m=m)
            for method in (methods or (FitMethod.lsm, FitMethod.mls))
            for family in (families or BASIS_FAMILIES) for order in orders]


SHAPE_KIND_OF_OBJECT = {
    ObjectName.cable: ShapeKind.centerline,
    ObjectName.contour: ShapeKind.contour,
    ObjectName.sheet: ShapeKind.surface,
}
