import numpy as np

# constant per-step grasp displacement (m) of the demonstrations, chosen to end inside each workspace box
DEMO_VELOCITIES = {
    'cable': (-0.0004, 0.0008, 0.0004),
    'contour': (0.0003, 0.0002, 0.0002),
    'sheet': (0.0, 0.0, 0.0006),
}
DEMO_STEPS = 150


def demo_script(object_name: str, steps: int = DEMO_STEPS) -> np.ndarray:
    return np.tile(np.asarray(DEMO_VELOCITIES[object_name], dtype=float), (steps, 1))
