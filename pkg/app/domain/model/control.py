from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, root_validator, validator

from app.domain.model._serializable import Serializable
from app.domain.model.shape import readonly
from app.domain.utils import error_collection, validation
from app.pkgs.errors import Error

Vector3 = Tuple[float, float, float]


class MpcConfig(BaseModel):
    """Horizon, weights and the saturation / workspace boxes of the shape controller.

    The weights are either scalars multiplying the identity or explicit per-step blocks
    (p x p for the tracking term, 3 x 3 for the effort term)."""
    horizon_h: int = 5
    upsilon1: float = 1.0
    upsilon2: float = 0.1
    upsilon1_block: Optional[List[List[float]]] = None
    upsilon2_block: Optional[List[List[float]]] = None
    u_min: Vector3 = (-0.01, -0.01, -0.01)
    u_max: Vector3 = (0.01, 0.01, 0.01)
    r_min: Vector3 = (0.4, 0.2, 0.2)
    r_max: Vector3 = (1.0, 0.8, 0.8)
    warm_start: bool = True

    class Config:
        allow_mutation = False
        extra = 'forbid'

    @validator('horizon_h')
    def positive_horizon(cls, v):
        if v < 1:
            raise ValueError('horizon_h must be at least 1')
        return v

    @validator('upsilon1', 'upsilon2')
    def positive_weight(cls, v):
        if v <= 0:
            raise ValueError('scalar weights must be positive')
        return v

    @validator('upsilon1_block', 'upsilon2_block')
    def spd_block(cls, v):
        if v is not None:
            try:
                validation.validate_spd(np.asarray(v, dtype=float), 'weight block')
            except Error as e:
                raise ValueError(e.message)
        return v

    @root_validator(skip_on_failure=True)
    def ordered_boxes(cls, values):
        if np.any(np.asarray(values['u_min']) >= np.asarray(values['u_max'])):
            raise ValueError('u_min must be below u_max componentwise')
        if np.any(np.asarray(values['r_min']) >= np.asarray(values['r_max'])):
            raise ValueError('r_min must be below r_max componentwise')
        block = values.get('upsilon2_block')
        if block is not None and np.asarray(block).shape != (3, 3):
            raise ValueError('upsilon2_block must be 3 x 3')
        return values

    def tracking_block(self, p: int) -> np.ndarray:
        if self.upsilon1_block is None:
            return self.upsilon1 * np.eye(p)
        block = np.asarray(self.upsilon1_block, dtype=float)
        if block.shape != (p, p):
            raise error_collection.ContractError(f'upsilon1_block must be {p} x {p}')
        return block

    def effort_block(self) -> np.ndarray:
        if self.upsilon2_block is None:
            return self.upsilon2 * np.eye(3)
        return np.asarray(self.upsilon2_block, dtype=float)

    @property
    def bounds(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return (np.asarray(self.u_min, dtype=float), np.asarray(self.u_max, dtype=float),
                np.asarray(self.r_min, dtype=float), np.asarray(self.r_max, dtype=float))


@dataclass(frozen=True, eq=False)
class ControlCommand(Serializable):
    """End-effector translational velocity for one step (m/step)"""
    u: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'u', readonly(validation.validate_vector(self.u, 3, 'u')))

    @classmethod
    def zero(cls) -> 'ControlCommand':
        return cls(u=np.zeros(3))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.u))

    def within(self, u_min, u_max, tol: float = 0.0) -> bool:
        return bool(np.all(self.u >= np.asarray(u_min) - tol) and np.all(self.u <= np.asarray(u_max) + tol))


@dataclass(frozen=True, eq=False)
class QpProblem(Serializable):
    """min ½ uᵀHu + qᵀu  s.t.  lower <= M u <= upper, with M = [I; C]"""
    H: np.ndarray
    q: np.ndarray
    M: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        for name in ('H', 'q', 'M', 'lower', 'upper'):
            object.__setattr__(self, name, readonly(getattr(self, name)))

    @property
    def size(self) -> int:
        return self.q.size

    def objective(self, u) -> float:
        u = np.asarray(u, dtype=float)
        return float(0.5 * u @ self.H @ u + self.q @ u)


@dataclass
class QpStatus:
    solved: str = 'solved'


@dataclass(frozen=True, eq=False)
class QpSolution(Serializable):
    u: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float
    duals: np.ndarray
    active_constraints: int
    status: str = QpStatus.solved

    _json_black_list = ['duals']

    def __post_init__(self):
        object.__setattr__(self, 'u', readonly(self.u))
        object.__setattr__(self, 'duals', readonly(self.duals))
