from dataclasses import dataclass

from app.domain.model._serializable import Serializable
from app.domain.model.shape import FeatureVector, ShapeSample
from app.domain.utils import validation


@dataclass(frozen=True, eq=False)
class CompensatorState(Serializable):
    """Best complete estimate of the shape, its features and the FPS scale for diagnostics"""
    last_complete: ShapeSample
    last_feature: FeatureVector
    resolution_scale: int = 2

    def __post_init__(self):
        self.validate()

    def validate(self):
        validation.validate_positive_int(self.resolution_scale, 'resolution_scale')

    @property
    def n_points(self) -> int:
        return self.last_complete.n_points
