"""Horizon-h shape controller: predictions under a frozen Jacobian, a dense QP, osqp to solve it."""
from typing import Optional, Tuple, Union

import numpy as np
import osqp
from scipy import sparse

from app.domain.model.control import ControlCommand, MpcConfig, QpProblem, QpSolution
from app.domain.model.shape import FeatureVector
from app.domain.utils import error_collection, validation

BOUNDARY_SLACK = 1e-9
START_TOLERANCE = 1e-6  # osqp leaves the workspace constraint satisfied to about eps_abs
ACTIVE_TOLERANCE = 1e-7

# operator splitting settings: fixed penalty, over-relaxation, tolerances, iteration cap
OSQP_SETTINGS = dict(rho=1.0, alpha=1.6, eps_abs=1e-8, eps_rel=1e-6, max_iter=10000, adaptive_rho=False,
                     polish=True, verbose=False)


def _values(s) -> np.ndarray:
    return s.values if isinstance(s, FeatureVector) else np.asarray(s, dtype=float).reshape(-1)


def lower_ones(h: int) -> np.ndarray:
    return np.tril(np.ones((h, h)))


def build_prediction(J, s_k: Union[FeatureVector, np.ndarray], h: int) -> Tuple[np.ndarray, np.ndarray]:
    """A and Θ with s̄ = A s_k + Θ ū over the horizon, Ĵ frozen"""
    validation.validate_positive_int(h, 'horizon')
    J = np.asarray(J, dtype=float)
    p = J.shape[0]
    validation.validate_vector(_values(s_k), p, 's_k')
    A = np.tile(np.eye(p), (h, 1))
    theta = np.kron(lower_ones(h), J)
    return A, theta


def build_qp(A: np.ndarray, theta: np.ndarray, s_k, s_star, cfg: MpcConfig, r_prev) -> QpProblem:
    """H = 2(ΘᵀΥ1Θ + Υ2), q = 2ΘᵀΥ1Ω with Ω = A s_k - s̄*, subject to the saturation box on ū
    and the workspace box on the cumulative grasp displacement"""
    h = cfg.horizon_h
    p = A.shape[1]
    if A.shape != (p * h, p) or theta.shape != (p * h, 3 * h):
        raise error_collection.ContractError(
            f'prediction matrices {A.shape}, {theta.shape} do not match horizon {h} and {p} features')
    s_k = validation.validate_vector(_values(s_k), p, 's_k')
    s_star = validation.validate_vector(_values(s_star), p, 's_star')
    r_prev = validation.validate_vector(r_prev, 3, 'r_prev')
    u_min, u_max, r_min, r_max = cfg.bounds
    if np.any(r_prev < r_min - START_TOLERANCE) or np.any(r_prev > r_max + START_TOLERANCE):
        raise error_collection.InfeasibleStartError(
            f'grasp {r_prev.tolist()} is outside the workspace [{r_min.tolist()}, {r_max.tolist()}]',
            data={'r_prev': r_prev.tolist(), 'r_min': r_min.tolist(), 'r_max': r_max.tolist()})

    upsilon1 = np.kron(np.eye(h), cfg.tracking_block(p))
    upsilon2 = np.kron(np.eye(h), cfg.effort_block())
    omega = A @ s_k - np.tile(s_star, h)
    H = 2.0 * (theta.T @ upsilon1 @ theta + upsilon2)
    H = 0.5 * (H + H.T)
    q = 2.0 * theta.T @ upsilon1 @ omega

    # ū = 0 stays feasible when the grasp sits on the workspace boundary
    room_low = np.minimum(r_min - r_prev, -BOUNDARY_SLACK)
    room_high = np.maximum(r_max - r_prev, BOUNDARY_SLACK)
    M = np.vstack([np.eye(3 * h), np.kron(lower_ones(h), np.eye(3))])
    lower = np.concatenate([np.tile(u_min, h), np.tile(room_low, h)])
    upper = np.concatenate([np.tile(u_max, h), np.tile(room_high, h)])
    return QpProblem(H=H, q=q, M=M, lower=lower, upper=upper)


def solve_qp(prob: QpProblem, warm_start: Optional[np.ndarray] = None, **settings) -> QpSolution:
    """Operator-splitting solve; the returned stack is clipped onto the saturation box"""
    options = dict(OSQP_SETTINGS)
    options.update(settings)
    solver = osqp.OSQP()
    solver.setup(P=sparse.triu(sparse.csc_matrix(prob.H), format='csc'), q=np.array(prob.q),
                 A=sparse.csc_matrix(prob.M), l=np.array(prob.lower), u=np.array(prob.upper), **options)
    if warm_start is not None and len(warm_start) == prob.size:
        solver.warm_start(x=np.asarray(warm_start, dtype=float))
    result = solver.solve()
    if result.info.status != 'solved':
        raise error_collection.SolverFailure(
            f'osqp stopped with status "{result.info.status}" after {result.info.iter} iterations',
            data={'status': result.info.status, 'iterations': int(result.info.iter),
                  'primal_residual': float(result.info.pri_res), 'dual_residual': float(result.info.dua_res)})

    n = prob.size
    u = np.clip(result.x, prob.lower[:n], prob.upper[:n])
    constrained = prob.M @ u
    at_upper = constrained >= prob.upper - ACTIVE_TOLERANCE * (1.0 + np.abs(prob.upper))
    at_lower = constrained <= prob.lower + ACTIVE_TOLERANCE * (1.0 + np.abs(prob.lower))
    active = at_upper | at_lower
    return QpSolution(u=u, iterations=int(result.info.iter), primal_residual=float(result.info.pri_res),
                      dual_residual=float(result.info.dua_res), duals=np.array(result.y),
                      active_constraints=int(active.sum()), status=result.info.status)


def step_command(solution: Union[QpSolution, np.ndarray]) -> ControlCommand:
    """First command of the horizon"""
    stack = solution.u if isinstance(solution, QpSolution) else np.asarray(solution, dtype=float).reshape(-1)
    if stack.size < 3 or stack.size % 3:
        raise error_collection.ContractError(f'command stack must hold 3h entries, receive {stack.size}')
    return ControlCommand(u=stack[:3])


def kkt_residuals(prob: QpProblem, u: np.ndarray, duals: np.ndarray) -> Tuple[float, float]:
    """(stationarity |Hu + q + Mᵀy|_inf, primal infeasibility |max(0, l - Mu, Mu - u)|_inf)"""
    u = np.asarray(u, dtype=float)
    stationarity = prob.H @ u + prob.q + prob.M.T @ np.asarray(duals, dtype=float)
    constrained = prob.M @ u
    violation = np.maximum(np.maximum(prob.lower - constrained, constrained - prob.upper), 0.0)
    return float(np.abs(stationarity).max()), float(violation.max())
