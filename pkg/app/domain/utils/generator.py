"""Synthetic shapes with known parametric structure, for tests and benchmark sanity checks."""
from typing import Callable, List

import numpy as np

from app.domain.model.shape import BasisSpec, ShapeKind, ShapeSample
from app.domain.service.shape_repr.basis import basis_matrix


def uniform_rhos(n_points: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, n_points)


def line_curve(n_points: int = 10, direction=(1.0, 2.0, 0.0)) -> ShapeSample:
    """c_i = rho_i * direction, parameterized by the uniform rhos (equal to arc length here)"""
    rhos = uniform_rhos(n_points)
    return ShapeSample(points=np.outer(rhos, direction), kind=ShapeKind.centerline, arc_params=rhos)


def basis_curve(spec: BasisSpec, weights, n_points: int = 64, kind: str = ShapeKind.centerline) -> ShapeSample:
    """Curve lying exactly in the span of the basis, sampled at uniform parameters"""
    rhos = uniform_rhos(n_points)
    points = basis_matrix(spec.family, spec.order_n, rhos) @ np.asarray(weights, dtype=float).reshape(-1, 3)
    return ShapeSample(points=points, kind=kind, arc_params=rhos)


def random_weights(rng: np.random.Generator, order_n: int, scale: float = 0.1) -> np.ndarray:
    """(n+1) x 3 weights; a monotone x column keeps the sampled points distinct"""
    weights = rng.normal(scale=scale, size=(order_n + 1, 3))
    weights[:, 0] = np.sort(rng.uniform(0.0, 1.0, order_n + 1))
    weights[0, 0], weights[-1, 0] = 0.0, 1.0
    return weights


def wavy_cable(n_points: int = 64, amplitude: float = 0.05, phase: float = 0.0) -> ShapeSample:
    x = np.linspace(0.1, 0.73, n_points)
    t = (x - x[0]) / (x[-1] - x[0])
    points = np.column_stack([x, 0.5 + amplitude * np.sin(np.pi * t + phase) * t,
                              0.5 + 0.5 * amplitude * np.sin(2 * np.pi * t) * t])
    return ShapeSample.from_points(points, ShapeKind.centerline)


def ring(n_points: int = 64, radius: float = 0.1, wobble: float = 0.0, lobes: int = 3) -> ShapeSample:
    """Closed contour in the z = 0.5 plane, optionally with a radial wobble"""
    angle = 2 * np.pi * np.arange(n_points) / n_points
    r = radius * (1.0 + wobble * np.cos(lobes * angle))
    points = np.column_stack([0.5 + r * np.cos(angle), 0.5 + r * np.sin(angle), 0.5 + 0.2 * wobble * np.sin(angle)])
    return ShapeSample.from_points(points, ShapeKind.contour)


def grid_surface(depth: Callable[[np.ndarray, np.ndarray], np.ndarray], nx: int = 6, ny: int = 6,
                 x_range=(0.0, 1.0), y_range=(0.0, 1.0)) -> ShapeSample:
    x, y = np.meshgrid(np.linspace(*x_range, nx), np.linspace(*y_range, ny), indexing='ij')
    x, y = x.ravel(), y.ravel()
    return ShapeSample(points=np.column_stack([x, y, depth(x, y)]), kind=ShapeKind.surface)


def random_curves(rng: np.random.Generator, count: int, n_points: int = 64) -> List[ShapeSample]:
    """Smooth random space curves with monotone x"""
    samples = []
    for _ in range(count):
        t = uniform_rhos(n_points)
        coefficients = rng.normal(scale=0.05, size=(2, 3))
        y = coefficients[0] @ np.vstack([np.sin(np.pi * t), np.sin(2 * np.pi * t), t ** 2])
        z = coefficients[1] @ np.vstack([np.cos(np.pi * t), np.sin(3 * np.pi * t), t])
        samples.append(ShapeSample.from_points(np.column_stack([t, y, z]), ShapeKind.centerline))
    return samples
