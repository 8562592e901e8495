import math
from typing import Sequence

import numpy as np

from app.domain.utils import error_collection


def validate_positive_int(value: int, name: str = 'value') -> int:
    if value is None or int(value) != value or value < 1:
        raise error_collection.ValidationError(f'{name} must be a positive integer, receive {value}')
    return int(value)


def validate_positive(value: float, name: str = 'value') -> float:
    if value is None or not math.isfinite(value) or value <= 0:
        raise error_collection.ValidationError(f'{name} must be a positive number, receive {value}')
    return float(value)


def validate_nonnegative(value: float, name: str = 'value') -> float:
    if value is None or not math.isfinite(value) or value < 0:
        raise error_collection.ValidationError(f'{name} must be nonnegative, receive {value}')
    return float(value)


def validate_finite(array, name: str = 'array') -> np.ndarray:
    array = np.asarray(array, dtype=float)
    if not np.all(np.isfinite(array)):
        raise error_collection.ValidationError(f'{name} contains non-finite entries')
    return array


def validate_points(points, name: str = 'points', min_count: int = 1) -> np.ndarray:
    points = validate_finite(points, name)
    if points.ndim != 2 or points.shape[1] != 3:
        raise error_collection.ValidationError(f'{name} must be an N x 3 array, receive shape {points.shape}')
    if points.shape[0] < min_count:
        raise error_collection.ValidationError(f'{name} needs at least {min_count} points, receive {points.shape[0]}')
    return points


def validate_vector(vector, size: int, name: str = 'vector') -> np.ndarray:
    vector = validate_finite(vector, name).reshape(-1)
    if vector.size != size:
        raise error_collection.ContractError(f'{name} must have {size} entries, receive {vector.size}')
    return vector


def validate_unit_interval(values, name: str = 'rho', tol: float = 1e-12) -> np.ndarray:
    """Accept values in [0, 1] up to round-off and clip them into the interval"""
    values = np.asarray(values, dtype=float)
    if values.size and (np.any(~np.isfinite(values)) or values.min() < -tol or values.max() > 1 + tol):
        raise error_collection.DomainError(f'{name} must lie in [0, 1]')
    return np.clip(values, 0.0, 1.0)


def validate_index(index: int, upper: int, name: str = 'index') -> int:
    """0 <= index <= upper"""
    if index is None or int(index) != index or index < 0 or index > upper:
        raise error_collection.DomainError(f'{name} must be in [0, {upper}], receive {index}')
    return int(index)


def validate_choice(value: str, choices: Sequence[str], name: str = 'value') -> str:
    value = str(value).strip().lower()
    if value not in choices:
        raise error_collection.ValidationError(f'{name} must be one of {list(choices)}, receive {value}')
    return value


def validate_box(lower, upper, name: str = 'box') -> None:
    lower = validate_finite(lower, f'{name} lower')
    upper = validate_finite(upper, f'{name} upper')
    if lower.shape != upper.shape or np.any(lower >= upper):
        raise error_collection.ValidationError(f'{name} lower bound must be below the upper bound componentwise')


def validate_spd(matrix, name: str = 'matrix') -> np.ndarray:
    matrix = validate_finite(matrix, name)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise error_collection.ValidationError(f'{name} must be square')
    if not np.allclose(matrix, matrix.T, atol=1e-12):
        raise error_collection.ValidationError(f'{name} must be symmetric')
    if np.linalg.eigvalsh(matrix).min() <= 0:
        raise error_collection.ValidationError(f'{name} must be positive definite')
    return matrix
