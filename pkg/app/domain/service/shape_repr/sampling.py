import numpy as np

from app.domain.utils import error_collection, validation


def fps_downsample(points, k: int, seed_index: int = 0) -> np.ndarray:
    """Farthest point sampling: start at seed_index, then keep adding the point whose distance to
    the chosen set is largest. Ties go to the lowest index."""
    points = validation.validate_points(points, 'points')
    n = len(points)
    validation.validate_positive_int(k, 'k')
    if k > n:
        raise error_collection.DomainError(f'cannot sample {k} points out of {n}')
    validation.validate_index(seed_index, n - 1, 'seed_index')

    chosen = [int(seed_index)]
    distance = np.linalg.norm(points - points[seed_index], axis=1)
    distance[seed_index] = -1.0
    while len(chosen) < k:
        index = int(np.argmax(distance))
        chosen.append(index)
        distance = np.minimum(distance, np.linalg.norm(points - points[index], axis=1))
        distance[chosen] = -1.0
    return np.asarray(chosen, dtype=int)


def min_pairwise_distance(points) -> float:
    points = np.asarray(points, dtype=float)
    if len(points) < 2:
        return float('inf')
    distance = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    return float(distance[np.triu_indices(len(points), k=1)].min())
