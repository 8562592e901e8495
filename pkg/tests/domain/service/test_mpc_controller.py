import numpy as np
import pytest
from scipy.optimize import lsq_linear

from app.domain.model.control import ControlCommand, MpcConfig, QpProblem
from app.domain.service import mpc_controller
from app.domain.utils.error_collection import ContractError, InfeasibleStartError, SolverFailure, ValidationError

WIDE = dict(r_min=(-10.0, -10.0, -10.0), r_max=(10.0, 10.0, 10.0))


def make_problem(J, s_k, s_star, cfg, r_prev):
    A, theta = mpc_controller.build_prediction(J, s_k, cfg.horizon_h)
    return mpc_controller.build_qp(A, theta, s_k, s_star, cfg, r_prev)


class TestPrediction:

    def test_shapes(self):
        J = np.arange(12.0).reshape(4, 3)
        A, theta = mpc_controller.build_prediction(J, np.zeros(4), 3)
        assert A.shape == (12, 4)
        assert theta.shape == (12, 9)
        assert np.array_equal(theta[8:12, 0:3], J)
        assert not theta[0:4, 3:6].any()

    def test_rollout_matches_frozen_jacobian(self):
        rng = np.random.default_rng(0)
        J, s = rng.normal(size=(5, 3)), rng.normal(size=5)
        u = rng.normal(size=(4, 3))
        A, theta = mpc_controller.build_prediction(J, s, 4)
        predicted = (A @ s + theta @ u.reshape(-1)).reshape(4, 5)
        expected = s + np.cumsum(u, axis=0) @ J.T
        assert np.allclose(predicted, expected)

    def test_horizon_must_be_positive(self):
        with pytest.raises(ValidationError):
            mpc_controller.build_prediction(np.eye(3), np.zeros(3), 0)

    def test_feature_size_mismatch(self):
        with pytest.raises(ContractError):
            mpc_controller.build_prediction(np.eye(3), np.zeros(4), 2)


class TestBuildQp:

    def test_hessian_is_positive_definite(self):
        rng = np.random.default_rng(1)
        prob = make_problem(rng.normal(size=(6, 3)), rng.normal(size=6), rng.normal(size=6),
                            MpcConfig(horizon_h=4), np.array([0.7, 0.5, 0.5]))
        assert np.allclose(prob.H, prob.H.T)
        assert np.linalg.eigvalsh(prob.H).min() > 0
        assert prob.M.shape == (24, 12)
        assert prob.size == 12

    def test_objective_is_tracking_plus_effort(self):
        rng = np.random.default_rng(2)
        J, s, s_star = rng.normal(size=(4, 3)), rng.normal(size=4), rng.normal(size=4)
        cfg = MpcConfig(horizon_h=2, upsilon1=2.0, upsilon2=0.5)
        prob = make_problem(J, s, s_star, cfg, np.array([0.7, 0.5, 0.5]))
        u = rng.normal(size=6)
        predicted = (s + np.cumsum(u.reshape(2, 3), axis=0) @ J.T)
        cost = 2.0 * np.sum((predicted - s_star) ** 2) + 0.5 * np.sum(u ** 2)
        assert prob.objective(u) == pytest.approx(cost - 2.0 * 2 * np.sum((s - s_star) ** 2))

    def test_start_outside_workspace(self):
        with pytest.raises(InfeasibleStartError) as e:
            make_problem(np.eye(3), np.zeros(3), np.ones(3), MpcConfig(), np.array([1.1, 0.5, 0.5]))
        assert e.value.data['r_prev'] == [1.1, 0.5, 0.5]

    def test_matrix_mismatch(self):
        A, theta = mpc_controller.build_prediction(np.eye(3), np.zeros(3), 2)
        with pytest.raises(ContractError):
            mpc_controller.build_qp(A, theta, np.zeros(3), np.ones(3), MpcConfig(horizon_h=3),
                                    np.array([0.7, 0.5, 0.5]))

    def test_tracking_block_size(self):
        cfg = MpcConfig(upsilon1_block=np.eye(2).tolist())
        with pytest.raises(ContractError):
            make_problem(np.eye(3), np.zeros(3), np.ones(3), cfg, np.array([0.7, 0.5, 0.5]))

    @pytest.mark.parametrize('kwargs', [dict(horizon_h=0), dict(upsilon2=0.0), dict(u_min=(0.01, 0.0, 0.0)),
                                        dict(r_max=(0.4, 0.8, 0.8)), dict(upsilon2_block=[[1.0, 2.0], [2.0, 1.0]])])
    def test_invalid_config(self, kwargs):
        with pytest.raises(ValueError):
            MpcConfig(**kwargs)


class TestSolveQp:

    def test_unconstrained_optimum(self):
        error = np.array([0.001, -0.002, 0.0005])
        cfg = MpcConfig(horizon_h=1, upsilon1=1.0, upsilon2=0.1)
        prob = make_problem(np.eye(3), np.zeros(3), error, cfg, np.array([0.7, 0.5, 0.5]))
        solution = mpc_controller.solve_qp(prob)
        assert np.allclose(solution.u, error / 1.1, atol=1e-7)
        assert solution.active_constraints == 0
        assert solution.status == 'solved'

    def test_saturation_clips(self):
        cfg = MpcConfig(horizon_h=1, upsilon2=1e-9)
        prob = make_problem(np.eye(3), np.zeros(3), np.ones(3), cfg, np.array([0.7, 0.5, 0.5]))
        solution = mpc_controller.solve_qp(prob)
        assert np.allclose(solution.u, 0.01, atol=1e-7)
        assert np.all(np.abs(solution.u) <= 0.01)
        assert solution.active_constraints >= 3

    def test_workspace_limits_cumulative_motion(self):
        cfg = MpcConfig(horizon_h=3)
        r_prev = np.array([cfg.r_max[0] - 0.002, 0.5, 0.5])
        prob = make_problem(np.eye(3), np.zeros(3), np.array([1.0, 0.0, 0.0]), cfg, r_prev)
        solution = mpc_controller.solve_qp(prob)
        reach = np.cumsum(solution.u.reshape(3, 3)[:, 0])
        assert np.all(reach <= 0.002 + 1e-6)
        assert reach[-1] == pytest.approx(0.002, abs=1e-6)

    def test_grasp_on_workspace_boundary(self):
        cfg = MpcConfig(horizon_h=2)
        r_prev = np.array([cfg.r_max[0], 0.5, 0.5])
        prob = make_problem(np.eye(3), np.zeros(3), np.array([1.0, 0.0, 0.0]), cfg, r_prev)
        solution = mpc_controller.solve_qp(prob)
        assert np.all(np.cumsum(solution.u.reshape(2, 3)[:, 0]) <= 1e-6)

    @pytest.mark.parametrize('seed', range(100))
    def test_matches_bounded_least_squares(self, seed):
        rng = np.random.default_rng(seed)
        p, h = 6, (1, 3, 5)[seed % 3]
        J = 0.5 * rng.normal(size=(p, 3))
        s_k = rng.normal(size=p)
        s_star = s_k + 0.05 * rng.normal(size=p)
        cfg = MpcConfig(horizon_h=h, upsilon1=1.0, upsilon2=0.1, **WIDE)
        A, theta = mpc_controller.build_prediction(J, s_k, h)
        prob = mpc_controller.build_qp(A, theta, s_k, s_star, cfg, np.zeros(3))
        solution = mpc_controller.solve_qp(prob)

        omega = A @ s_k - np.tile(s_star, h)
        design = np.vstack([theta, np.sqrt(0.1) * np.eye(3 * h)])
        target = np.concatenate([-omega, np.zeros(3 * h)])
        oracle = lsq_linear(design, target, bounds=(-0.01, 0.01), method='bvls')
        best = prob.objective(oracle.x)
        assert abs(prob.objective(solution.u) - best) <= 1e-6 * max(1.0, abs(best))
        assert np.all(np.abs(solution.u) <= 0.01)

    @pytest.mark.parametrize('scale', [0.1, 10.0, 1e3])
    def test_weight_scale_leaves_command(self, scale):
        rng = np.random.default_rng(21)
        J, s_k = 0.5 * rng.normal(size=(6, 3)), rng.normal(size=6)
        s_star = s_k + 0.02 * rng.normal(size=6)
        r_prev = np.array([0.6, 0.5, 0.5])
        base = make_problem(J, s_k, s_star, MpcConfig(horizon_h=3, upsilon1=1.0, upsilon2=0.1), r_prev)
        scaled = make_problem(J, s_k, s_star, MpcConfig(horizon_h=3, upsilon1=scale, upsilon2=0.1 * scale),
                              r_prev)
        assert np.allclose(scaled.H, scale * base.H) and np.allclose(scaled.q, scale * base.q)
        u_base, u_scaled = mpc_controller.solve_qp(base).u, mpc_controller.solve_qp(scaled).u
        best = base.objective(u_base)
        assert abs(base.objective(u_scaled) - best) <= 1e-6 * max(1.0, abs(best))
        assert np.allclose(u_scaled, u_base, atol=1e-5)

    @pytest.mark.parametrize('seed', range(10))
    def test_shifted_plan_bounds_next_objective(self, seed):
        rng = np.random.default_rng(100 + seed)
        h = 4
        cfg = MpcConfig(horizon_h=h)
        J, s_k = 0.5 * rng.normal(size=(5, 3)), rng.normal(size=5)
        s_star = s_k + 0.03 * rng.normal(size=5)
        r_prev = np.array([0.7, 0.5, 0.5]) + 0.05 * rng.uniform(-1, 1, size=3)
        plan = mpc_controller.solve_qp(make_problem(J, s_k, s_star, cfg, r_prev)).u.reshape(h, 3)

        s_next, r_next = s_k + J @ plan[0], r_prev + plan[0]
        following = make_problem(J, s_next, s_star, cfg, r_next)
        shifted = np.concatenate([plan[1:], np.zeros((1, 3))]).reshape(-1)
        reach = following.M @ shifted
        assert np.all(reach >= following.lower - 1e-6) and np.all(reach <= following.upper + 1e-6)
        tail = following.objective(shifted)
        assert following.objective(mpc_controller.solve_qp(following).u) <= tail + 1e-6 * max(1.0, abs(tail))

    def test_kkt_conditions(self):
        rng = np.random.default_rng(11)
        cfg = MpcConfig(horizon_h=3, **WIDE)
        prob = make_problem(rng.normal(size=(5, 3)), rng.normal(size=5), rng.normal(size=5), cfg, np.zeros(3))
        solution = mpc_controller.solve_qp(prob)
        stationarity, primal = mpc_controller.kkt_residuals(prob, solution.u, solution.duals)
        assert stationarity <= 1e-5 * max(1.0, np.abs(prob.q).max())
        assert primal <= 1e-8

    def test_warm_start_reaches_same_command(self):
        rng = np.random.default_rng(12)
        prob = make_problem(rng.normal(size=(4, 3)), rng.normal(size=4), rng.normal(size=4),
                            MpcConfig(horizon_h=3, **WIDE), np.zeros(3))
        cold = mpc_controller.solve_qp(prob)
        warm = mpc_controller.solve_qp(prob, warm_start=cold.u)
        assert np.allclose(warm.u, cold.u, atol=1e-7)

    def test_iteration_cap(self):
        rng = np.random.default_rng(13)
        prob = make_problem(rng.normal(size=(4, 3)), rng.normal(size=4), rng.normal(size=4),
                            MpcConfig(horizon_h=3, **WIDE), np.zeros(3))
        with pytest.raises(SolverFailure) as e:
            mpc_controller.solve_qp(prob, max_iter=1)
        assert e.value.data['iterations'] <= 1


class TestCommand:

    def test_first_block(self):
        command = mpc_controller.step_command(np.arange(9.0))
        assert isinstance(command, ControlCommand)
        assert command.u.tolist() == [0.0, 1.0, 2.0]

    def test_bad_stack(self):
        with pytest.raises(ContractError):
            mpc_controller.step_command(np.zeros(4))

    def test_within(self):
        assert ControlCommand(u=np.array([0.01, 0.0, -0.01])).within(-0.01, 0.01)
        assert not ControlCommand(u=np.array([0.02, 0.0, 0.0])).within(-0.01, 0.01)

    def test_kkt_residuals_by_hand(self):
        prob = QpProblem(H=2 * np.eye(1), q=np.array([-4.0]), M=np.eye(1), lower=np.array([-1.0]),
                         upper=np.array([1.0]))
        # optimum sits on the upper bound with multiplier 2
        assert mpc_controller.kkt_residuals(prob, np.array([1.0]), np.array([2.0])) == (0.0, 0.0)
        assert mpc_controller.kkt_residuals(prob, np.array([1.5]), np.array([0.0]))[1] == pytest.approx(0.5)
