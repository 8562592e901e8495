from typing import Tuple, Union

import numpy as np

from app.domain.model.compensator import CompensatorState
from app.domain.model.control import ControlCommand
from app.domain.model.jacobian import JacobianEstimate
from app.domain.model.shape import ShapeSample
from app.domain.service.shape_repr import ShapeFitter, fps_downsample
from app.domain.utils import error_collection, validation


def start_compensator(sample: ShapeSample, fitter: ShapeFitter, resolution_scale: int = 2) -> CompensatorState:
    return CompensatorState(last_complete=sample, last_feature=fitter.fit(sample), resolution_scale=resolution_scale)


def compensate(state: CompensatorState, observed: ShapeSample, mask, u: Union[ControlCommand, np.ndarray],
               J: JacobianEstimate, fitter: ShapeFitter) -> Tuple[ShapeSample, CompensatorState]:
    """Complete an occluded observation with the shape predicted by ŝ⁺ = s + Ĵu.

    Visible points keep the sensor value, hidden points take the prediction."""
    mask = np.asarray(mask, dtype=bool).reshape(-1)
    if mask.size != state.n_points or observed.n_points != state.n_points:
        raise error_collection.ContractError(
            f'mask has {mask.size} entries and the observation {observed.n_points} points, '
            f'the compensator tracks {state.n_points}')
    if observed.kind != state.last_complete.kind:
        raise error_collection.ContractError(f'observation kind {observed.kind} != {state.last_complete.kind}')
    command = u.u if isinstance(u, ControlCommand) else validation.validate_vector(u, 3, 'u')

    feature = fitter.fit(state.last_complete)
    if J.p != feature.size:
        raise error_collection.ContractError(
            f'jacobian has {J.p} rows, the fitting configuration produces {feature.size} features')
    predicted = fitter.reconstruct(feature.with_values(feature.values + J.J_hat @ command), state.last_complete)

    if mask.all():
        fused = observed
    else:
        points = np.where(mask[:, None], observed.points, predicted.points)
        fused = ShapeSample.from_points(points, observed.kind) if observed.is_curve else \
            ShapeSample(points=points, kind=observed.kind)
    new_state = CompensatorState(last_complete=fused, last_feature=fitter.fit(fused),
                                 resolution_scale=state.resolution_scale)
    return fused, new_state


def multires_views(sample: ShapeSample, delta: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """FPS index sets of sizes N, N/δ and N/δ², each in canonical (ascending) order.

    The coarsest level is drawn from the points of the middle one."""
    validation.validate_positive_int(delta, 'delta')
    n = sample.n_points
    if delta ** 2 > n:
        raise error_collection.DomainError(f'delta^2 = {delta ** 2} exceeds the number of points {n}')
    full = np.arange(n)
    middle = np.sort(fps_downsample(sample.points, n // delta, seed_index=0))
    coarse = np.sort(middle[fps_downsample(sample.points[middle], n // delta ** 2, seed_index=0)])
    return full, middle, coarse
