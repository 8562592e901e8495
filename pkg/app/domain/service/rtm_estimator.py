"""Receding-time estimation of the deformation Jacobian, plus the Broyden baseline.

The increment ΔĴ minimizes μ1 Q1 + μ2 Q2 + μ3 Q3: stage 1 solves the quadratic part
(Q1, Q2) exactly as one stacked ridge regression, stage 2 refines it for Q3 by projected
gradient descent inside the Frobenius ball centred on the stage-1 increment."""
from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np

from app.domain.model.jacobian import EstimatorMethod, JacobianEstimate, Pair, RtmStepReport, RtmWeights, ShapePlant
from app.domain.utils import error_collection, validation

MIN_MOTION = 1e-9
SINGULAR_EIGENVALUE = 1e-12
Q3_CAP = 1e12
FD_STEP = 1e-6
STAGE2_ITERATIONS = 100
BACKTRACK_STEPS = 30
SHRINK_STEPS = 50

History = Union[JacobianEstimate, Sequence[Pair]]


def _window(hist: History, eta: int) -> Tuple[np.ndarray, np.ndarray]:
    pairs = hist.history if isinstance(hist, JacobianEstimate) else tuple(hist)
    pairs = pairs[:eta]
    if not pairs:
        raise error_collection.DomainError('receding-time error needs at least one (ds, u) pair')
    return (np.stack([np.asarray(ds, dtype=float).reshape(-1) for ds, _ in pairs]),
            np.stack([np.asarray(u, dtype=float).reshape(-1) for _, u in pairs]))


def _discounts(gamma: float, count: int) -> np.ndarray:
    return gamma ** np.arange(1, count + 1)


def q1_receding_error(J_prev, dJ, hist: History, gamma: float, eta: int) -> float:
    """sum_j gamma^j |ds_j - (J_prev + dJ) u_j|^2 over the newest min(eta, len) pairs"""
    ds, u = _window(hist, eta)
    residual = ds - u @ (np.asarray(J_prev, dtype=float) + np.asarray(dJ, dtype=float)).T
    return float(_discounts(gamma, len(ds)) @ np.sum(residual ** 2, axis=1))


def q2_smoothness(dJ) -> float:
    return float(np.sum(np.asarray(dJ, dtype=float) ** 2))


def q3_manipulability(J) -> float:
    """(λmax / λmin)² of JᵀJ; +inf when λmin <= 1e-12"""
    J = np.asarray(J, dtype=float)
    eigenvalues = np.linalg.eigvalsh(J.T @ J)
    if eigenvalues[0] <= SINGULAR_EIGENVALUE:
        return float('inf')
    return float((eigenvalues[-1] / eigenvalues[0]) ** 2)


def _q3_batch(jacobians: np.ndarray) -> np.ndarray:
    gram = np.einsum('kpi,kpj->kij', jacobians, jacobians)
    eigenvalues = np.linalg.eigvalsh(gram)
    low, high = eigenvalues[:, 0], eigenvalues[:, -1]
    ratio = np.full(len(jacobians), Q3_CAP)
    regular = low > SINGULAR_EIGENVALUE
    ratio[regular] = np.minimum((high[regular] / low[regular]) ** 2, Q3_CAP)
    return ratio


class _Objective(object):
    """μ1 Q1 + μ2 Q2 + μ3 min(Q3, 1e12) as a function of the increment"""

    def __init__(self, J_prev: np.ndarray, ds: np.ndarray, u: np.ndarray, w: RtmWeights):
        self.J_prev = J_prev
        self.u = u
        self.w = w
        self.discount = _discounts(w.gamma, len(ds))
        self.innovation = ds - u @ J_prev.T

    def terms(self, dJ: np.ndarray) -> Tuple[float, float, float]:
        residual = self.innovation - self.u @ dJ.T
        q1 = float(self.discount @ np.sum(residual ** 2, axis=1))
        q2 = q2_smoothness(dJ)
        q3 = q3_manipulability(self.J_prev + dJ)
        return q1, q2, q3

    def __call__(self, dJ: np.ndarray) -> float:
        q1, q2, q3 = self.terms(dJ)
        return self.combine(q1, q2, q3)

    def combine(self, q1: float, q2: float, q3: float) -> float:
        total = self.w.mu1 * q1 + self.w.mu2 * q2
        if self.w.mu3 > 0:
            total += self.w.mu3 * min(q3, Q3_CAP)
        return float(total)

    def gradient(self, dJ: np.ndarray) -> np.ndarray:
        residual = self.innovation - self.u @ dJ.T
        grad = -2.0 * self.w.mu1 * (residual * self.discount[:, None]).T @ self.u + 2.0 * self.w.mu2 * dJ
        if self.w.mu3 > 0:
            grad = grad + self.w.mu3 * self._q3_gradient(self.J_prev + dJ)
        return grad

    def _q3_gradient(self, J: np.ndarray) -> np.ndarray:
        # central differences, every entry perturbed in one batched eigenvalue call
        size = J.size
        offsets = np.eye(size).reshape(size, *J.shape) * FD_STEP
        values = _q3_batch(np.concatenate([J[None] + offsets, J[None] - offsets]))
        return ((values[:size] - values[size:]) / (2 * FD_STEP)).reshape(J.shape)


def solve_quadratic_increment(J_prev, ds: np.ndarray, u: np.ndarray, w: RtmWeights) -> np.ndarray:
    """argmin μ1 Q1 + μ2 Q2: one stacked least-squares problem shared by every feature row"""
    J_prev = np.asarray(J_prev, dtype=float)
    root = np.sqrt(w.mu1 * _discounts(w.gamma, len(ds)))[:, None]
    innovation = ds - u @ J_prev.T
    design = np.vstack([root * u, np.sqrt(w.mu2) * np.eye(3)])
    target = np.vstack([root * innovation, np.zeros((3, J_prev.shape[0]))])
    solution, *_ = np.linalg.lstsq(design, target, rcond=None)
    return solution.T


def _project(point: np.ndarray, centre: np.ndarray, radius: float) -> np.ndarray:
    offset = point - centre
    norm = np.linalg.norm(offset)
    if norm <= radius:
        return point
    return centre + offset * (radius / norm)


def _refine_manipulability(objective: _Objective, start: np.ndarray) -> Tuple[np.ndarray, int]:
    centre, radius = start, float(np.linalg.norm(start))
    point, value = start, objective(start)
    iterations = 0
    for iterations in range(1, STAGE2_ITERATIONS + 1):
        grad = objective.gradient(point)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm == 0 or radius == 0:
            break
        step = radius / grad_norm
        improved = False
        for _ in range(BACKTRACK_STEPS):
            trial = _project(point - step * grad, centre, radius)
            trial_value = objective(trial)
            if trial_value < value:
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        moved = np.linalg.norm(trial - point)
        point, value = trial, trial_value
        if moved < 1e-12:
            break
    return point, iterations


def rtm_step(est: JacobianEstimate, w: RtmWeights, newest: Pair) -> Tuple[JacobianEstimate, RtmStepReport]:
    ds, u = newest
    ds = validation.validate_vector(ds, est.p, 'ds')
    u = validation.validate_vector(u, 3, 'u')
    if np.linalg.norm(u) <= MIN_MOTION:
        return est, RtmStepReport(q1=float('nan'), q2=0.0, q3=q3_manipulability(est.J_hat), objective=float('nan'),
                                  baseline=float('nan'), skipped=True)

    est = est.push(ds, u)
    window_ds, window_u = est.window(w.eta)
    objective = _Objective(np.array(est.J_hat), window_ds, window_u, w)
    zero = np.zeros_like(est.J_hat)
    baseline = objective(zero)

    increment = solve_quadratic_increment(est.J_hat, window_ds, window_u, w)
    iterations = 0
    if w.mu3 > 0:
        increment, iterations = _refine_manipulability(objective, increment)

    tolerance = 1e-12 * max(1.0, abs(baseline))
    value = objective(increment)
    if not value <= baseline + tolerance:
        # shrink towards ΔĴ = 0 until the objective no longer exceeds the baseline
        for _ in range(SHRINK_STEPS):
            increment = 0.5 * increment
            value = objective(increment)
            if value <= baseline + tolerance:
                break
    if not np.all(np.isfinite(increment)) or not value <= baseline + tolerance:
        raise error_collection.EstimatorError(
            f'jacobian increment raises the objective from {baseline:.6e} to {value:.6e}',
            data={'objective': float(value), 'baseline': float(baseline), 'stage2_iterations': iterations,
                  'increment_norm': float(np.linalg.norm(increment))})

    q1, q2, q3 = objective.terms(increment)
    report = RtmStepReport(q1=q1, q2=q2, q3=q3, objective=objective.combine(q1, q2, q3), baseline=baseline,
                           stage2_iterations=iterations)
    return est.with_jacobian(est.J_hat + increment), report


def rtm_update(est: JacobianEstimate, w: RtmWeights, newest: Pair) -> JacobianEstimate:
    """Push the newest (ds, u) and apply the increment minimizing μ1 Q1 + μ2 Q2 + μ3 Q3.

    Motions with |u| <= 1e-9 leave the estimate untouched."""
    updated, _ = rtm_step(est, w, newest)
    return updated


def broyden_update(J, ds, u, lam: float = 1.0) -> np.ndarray:
    """J + λ (ds - J u) uᵀ / (uᵀu)"""
    J = np.asarray(J, dtype=float)
    ds = validation.validate_vector(ds, J.shape[0], 'ds')
    u = validation.validate_vector(u, 3, 'u')
    if np.linalg.norm(u) <= MIN_MOTION:
        raise error_collection.DomainError('broyden update needs a nonzero motion')
    return J + lam * np.outer(ds - J @ u, u) / float(u @ u)


def calibrate_initial(plant: ShapePlant, probe_amplitude: float, eta_max: int = 50) -> JacobianEstimate:
    """Finite-difference Jacobian from +x, +y, +z probes, each followed by the way back.

    The three probe pairs seed the history, the z probe being the most recent."""
    if probe_amplitude is None or not probe_amplitude > 0:
        raise error_collection.DomainError(f'probe amplitude must be positive, receive {probe_amplitude}')
    start = np.asarray(plant.features(), dtype=float)
    estimate = JacobianEstimate.zeros(start.size, eta_max=eta_max)
    columns = []
    for axis in range(3):
        u = np.zeros(3)
        u[axis] = probe_amplitude
        plant.actuate(u)
        ds = np.asarray(plant.features(), dtype=float) - start
        plant.actuate(-u)
        columns.append(ds / probe_amplitude)
        estimate = estimate.push(ds, u)
    return estimate.with_jacobian(np.column_stack(columns))


def predict_feature(s_hat, J, u) -> np.ndarray:
    """ŝ_k+1 = ŝ_k + Ĵ u"""
    J = J.J_hat if isinstance(J, JacobianEstimate) else np.asarray(J, dtype=float)
    return np.asarray(s_hat, dtype=float) + J @ np.asarray(u, dtype=float)


def metrics_t1_t2(est, s_hat_prev, s_now, ds, u) -> Tuple[float, float]:
    """T1 = |ŝ_k+1 - s_k+1| with ŝ_k+1 = ŝ_k + Ĵu, T2 = |ds - Ĵu|"""
    J = est.J_hat if isinstance(est, JacobianEstimate) else np.asarray(est, dtype=float)
    s_now = validation.validate_vector(s_now, J.shape[0], 's_now')
    ds = validation.validate_vector(ds, J.shape[0], 'ds')
    u = validation.validate_vector(u, 3, 'u')
    t1 = float(np.linalg.norm(predict_feature(s_hat_prev, J, u) - s_now))
    t2 = float(np.linalg.norm(ds - J @ u))
    return t1, t2


def warm_start_jacobian(ds: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Least-squares Ĵ0 over a block of logged (ds, u) pairs"""
    ds = np.asarray(ds, dtype=float)
    u = np.asarray(u, dtype=float)
    if len(ds) == 0 or len(ds) != len(u):
        raise error_collection.ContractError('warm start needs matching, nonempty ds and u blocks')
    solution, *_ = np.linalg.lstsq(u, ds, rcond=None)
    return solution.T


def broyden_step(est: JacobianEstimate, w: RtmWeights, newest: Pair,
                 lam: float = 1.0) -> Tuple[JacobianEstimate, RtmStepReport]:
    """Broyden update scored with the same objective terms as the receding-time estimator"""
    ds, u = newest
    ds = validation.validate_vector(ds, est.p, 'ds')
    u = validation.validate_vector(u, 3, 'u')
    if np.linalg.norm(u) <= MIN_MOTION:
        return est, RtmStepReport(q1=float('nan'), q2=0.0, q3=q3_manipulability(est.J_hat), objective=float('nan'),
                                  baseline=float('nan'), skipped=True)
    est = est.push(ds, u)
    window_ds, window_u = est.window(w.eta)
    objective = _Objective(np.array(est.J_hat), window_ds, window_u, w)
    increment = broyden_update(est.J_hat, ds, u, lam) - est.J_hat
    q1, q2, q3 = objective.terms(increment)
    report = RtmStepReport(q1=q1, q2=q2, q3=q3, objective=objective.combine(q1, q2, q3),
                           baseline=objective(np.zeros_like(increment)))
    return est.with_jacobian(est.J_hat + increment), report


@dataclass(frozen=True)
class ReplayStep(object):
    step: int
    t1: float
    t2: float
    report: RtmStepReport
    failed: bool = False


def replay(features: np.ndarray, next_features: np.ndarray, commands: np.ndarray, J0, w: RtmWeights,
           method: str = EstimatorMethod.rtm, lam: float = 1.0, start: int = 0) -> List[ReplayStep]:
    """Feed logged (s_k, u_k, s_k+1) triples from `start` on through one estimator.

    The pairs before `start` seed the window. T1 follows the open-loop prediction ŝ started
    from the first replayed feature; T2 is the one-step error of the Jacobian held before
    each update."""
    features = np.asarray(features, dtype=float)
    next_features = np.asarray(next_features, dtype=float)
    commands = np.asarray(commands, dtype=float)
    if not (len(features) == len(next_features) == len(commands)):
        raise error_collection.ContractError('features, next features and commands must have one row per step')
    estimate = JacobianEstimate(J_hat=np.asarray(J0, dtype=float), eta_max=max(50, w.eta))
    if estimate.p != features.shape[1]:
        raise error_collection.ContractError(
            f'initial jacobian has {estimate.p} rows, the log holds {features.shape[1]} features')
    for k in range(min(start, len(features))):
        if np.linalg.norm(commands[k]) > MIN_MOTION:
            estimate = estimate.push(next_features[k] - features[k], commands[k])

    steps = []
    s_hat = features[start] if start < len(features) else None
    for k in range(start, len(features)):
        u = commands[k]
        ds = next_features[k] - features[k]
        t1, t2 = metrics_t1_t2(estimate, s_hat, next_features[k], ds, u)
        s_hat = predict_feature(s_hat, estimate, u)
        failed = False
        try:
            if method == EstimatorMethod.broyden:
                estimate, report = broyden_step(estimate, w, (ds, u), lam)
            else:
                estimate, report = rtm_step(estimate, w, (ds, u))
        except error_collection.EstimatorError as e:
            estimate = estimate.push(ds, u)
            report = RtmStepReport(q1=float('nan'), q2=0.0, q3=q3_manipulability(estimate.J_hat),
                                   objective=e.data['objective'], baseline=e.data['baseline'])
            failed = True
        steps.append(ReplayStep(step=k, t1=t1, t2=t2, report=report, failed=failed))
    return steps
