from dataclasses import dataclass, replace
from typing import Protocol, Tuple

import numpy as np
from pydantic import BaseModel, root_validator, validator

from app.domain.model._serializable import Serializable
from app.domain.model.shape import readonly
from app.domain.utils import error_collection, validation

Pair = Tuple[np.ndarray, np.ndarray]


class RtmWeights(BaseModel):
    mu1: float = 0.8
    mu2: float = 0.1
    mu3: float = 0.1
    eta: int = 10
    gamma: float = 0.9

    class Config:
        allow_mutation = False
        extra = 'forbid'

    @validator('mu1', 'mu2', 'mu3')
    def nonnegative(cls, v):
        if v < 0:
            raise ValueError('weights must be nonnegative')
        return v

    @validator('eta')
    def window_size(cls, v):
        if v < 1:
            raise ValueError('eta must be at least 1')
        return v

    @validator('gamma')
    def forgetting_factor(cls, v):
        if not 0 < v <= 1:
            raise ValueError('gamma must be in (0, 1]')
        return v

    @root_validator(skip_on_failure=True)
    def weights_sum_to_one(cls, values):
        total = values['mu1'] + values['mu2'] + values['mu3']
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f'mu1 + mu2 + mu3 must equal 1, receive {total}')
        return values


@dataclass(frozen=True, eq=False)
class JacobianEstimate(Serializable):
    """Current p x 3 deformation Jacobian and the (ds, u) window behind it, most recent first."""
    J_hat: np.ndarray
    history: Tuple[Pair, ...] = ()
    eta_max: int = 50

    _json_black_list = ['history']

    def __post_init__(self):
        object.__setattr__(self, 'J_hat', readonly(self.J_hat))
        object.__setattr__(self, 'history', tuple((readonly(ds), readonly(u)) for ds, u in self.history))
        self.validate()

    @classmethod
    def zeros(cls, p: int, eta_max: int = 50) -> 'JacobianEstimate':
        return cls(J_hat=np.zeros((p, 3)), eta_max=eta_max)

    @property
    def p(self) -> int:
        return self.J_hat.shape[0]

    def push(self, ds, u) -> 'JacobianEstimate':
        ds = validation.validate_vector(ds, self.p, 'ds')
        u = validation.validate_vector(u, 3, 'u')
        history = ((ds, u),) + self.history
        return replace(self, history=history[:self.eta_max])

    def with_jacobian(self, J_hat) -> 'JacobianEstimate':
        return replace(self, J_hat=J_hat)

    def window(self, eta: int) -> Tuple[np.ndarray, np.ndarray]:
        """(ds rows, u rows) of the newest min(eta, len) pairs"""
        pairs = self.history[:eta]
        if not pairs:
            return np.zeros((0, self.p)), np.zeros((0, 3))
        return np.stack([ds for ds, _ in pairs]), np.stack([u for _, u in pairs])

    def validate(self):
        validation.validate_finite(self.J_hat, 'J_hat')
        if self.J_hat.ndim != 2 or self.J_hat.shape[1] != 3:
            raise error_collection.ContractError(f'J_hat must be p x 3, receive shape {self.J_hat.shape}')
        validation.validate_positive_int(self.eta_max, 'eta_max')
        if len(self.history) > self.eta_max:
            raise error_collection.ValidationError('history is longer than eta_max')
        for ds, u in self.history:
            if ds.shape != (self.p,) or u.shape != (3,):
                raise error_collection.ContractError('history pairs must be (p,) and (3,) vectors')


@dataclass(frozen=True)
class RtmStepReport(Serializable):
    """Objective terms at the accepted increment, for the estimator trace"""
    q1: float
    q2: float
    q3: float
    objective: float
    baseline: float
    stage2_iterations: int = 0
    skipped: bool = False


@dataclass
class EstimatorMethod:
    rtm: str = 'rtm'
    broyden: str = 'broyden'


class ShapePlant(Protocol):
    """Anything that can be moved and then report its current feature vector"""

    def features(self) -> np.ndarray:
        ...

    def actuate(self, u: np.ndarray) -> None:
        ...
