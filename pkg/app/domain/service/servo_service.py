"""Closed-loop shape servoing: observe, compensate, fit, estimate, plan, actuate."""
import os
from logging import Logger
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from app.config import Config
from app.domain.model.jacobian import EstimatorMethod, JacobianEstimate, RtmStepReport
from app.domain.model.plant import PlantState
from app.domain.model.servo import (SHAPE_KIND_OF_OBJECT, ControllerTraceRow, DemonstrationTarget,
                                    EstimatorTraceRow, FittingSection, LoopTiming, RunMetrics, ServoConfig,
                                    StopReason)
from app.domain.model.shape import ShapeSample
from app.domain.service import mpc_controller, occlusion, plant_sim, rtm_estimator
from app.domain.service.shape_repr import ShapeFitter
from app.domain.utils import error_collection, validation
from app.infrastructure.persistence.corpus import CorpusRepository
from app.infrastructure.persistence.file_store import FileStore
from app.infrastructure.persistence.report import ReportRepository
from app.infrastructure.persistence.target import TargetRepository
from app.pkgs.time_utils import Stopwatch, timeit

PROGRESS_RATIO = 1e-6  # an error counts as progress when it beats the best one by this fraction


def fitter_for(fitting: FittingSection) -> ShapeFitter:
    return ShapeFitter(method=fitting.method, basis=fitting.basis_spec(), mls=fitting.mls_config())


def plant_for(cfg: ServoConfig) -> PlantState:
    section = cfg.plant
    return plant_sim.make_plant(section.object, n_nodes=section.n_nodes, rows=section.rows, cols=section.cols,
                                stiffness=section.stiffness())


class SimulatedPlant(object):
    """Simulated object seen through a fitter, the way the estimator calibration expects a plant"""

    def __init__(self, state: PlantState, fitter: ShapeFitter):
        self.state = state
        self.fitter = fitter

    def observe(self) -> ShapeSample:
        sample, _ = plant_sim.observe(self.state, None, 0)
        return sample

    def features(self) -> np.ndarray:
        return np.array(self.fitter.fit(self.observe()).values)

    def actuate(self, u: np.ndarray) -> None:
        u = validation.validate_vector(u, 3, 'u')
        self.state = plant_sim.settle(self.state, self.state.grasp + u)


class ServoService(object):

    def __init__(self, target_repo: TargetRepository, report_repo: ReportRepository, corpus_repo: CorpusRepository,
                 store: FileStore, logger: Logger, config: Config):
        self.target_repo = target_repo
        self.corpus_repo = corpus_repo
        self.report_repo = report_repo
        self.store = store
        self.logger = logger
        self.step_budget_ms = config.STEP_BUDGET_MS

    @timeit()
    def record_target(self, cfg: ServoConfig, script, path: Optional[str] = None) -> DemonstrationTarget:
        """Drive the plant open-loop through script (K x 3 commands) and keep the final shape"""
        script = np.asarray(script, dtype=float).reshape(-1, 3) if np.size(script) else np.zeros((0, 3))
        validation.validate_finite(script, 'script')
        u_min, u_max, _, _ = cfg.mpc.bounds
        if np.any(script < u_min - 1e-12) or np.any(script > u_max + 1e-12):
            raise error_collection.DomainError('script commands exceed the saturation bounds',
                                               data={'u_min': u_min.tolist(), 'u_max': u_max.tolist()})
        state = plant_for(cfg)
        for u in script:
            state = plant_sim.settle(state, state.grasp + u)
        sample, _ = plant_sim.observe(state, None, 0)
        target = DemonstrationTarget(sample=sample, feature=fitter_for(cfg.fitting).fit(sample),
                                     object_name=cfg.plant.object, script_steps=len(script),
                                     grasp=tuple(float(v) for v in state.grasp))
        self.logger.info(f'recorded {cfg.plant.object} target after {len(script)} steps, '
                         f'grasp at {np.round(state.grasp, 4).tolist()}')
        if path:
            self.target_repo.save(path, target)
        return target

    def load_target(self, cfg: ServoConfig) -> DemonstrationTarget:
        if not cfg.target_file:
            raise error_collection.ValidationError('servo config names no target file')
        return self.target_repo.load(cfg.target_file)

    def run_servo(self, cfg: ServoConfig, target: DemonstrationTarget = None, out_dir: str = None) -> RunMetrics:
        metrics, _ = self.run_servo_timed(cfg, target, out_dir)
        return metrics

    def run_servo_timed(self, cfg: ServoConfig, target: DemonstrationTarget = None,
                        out_dir: str = None) -> Tuple[RunMetrics, LoopTiming]:
        target = target or self.load_target(cfg)
        state = plant_for(cfg)
        expected_kind = SHAPE_KIND_OF_OBJECT[cfg.plant.object]
        if target.sample.kind != expected_kind or target.sample.n_points != state.n_nodes:
            raise error_collection.ContractError(
                f'target is a {target.sample.kind} of {target.sample.n_points} points, '
                f'the plant observes a {expected_kind} of {state.n_nodes}')

        fitter = fitter_for(cfg.fitting)
        fitter = fitter.pinned_to(fitter.fit(target.sample))
        s_star = np.array(fitter.fit(target.sample).values)

        plant = SimulatedPlant(state, fitter)
        estimate = rtm_estimator.calibrate_initial(plant, cfg.probe_amplitude, eta_max=max(50, cfg.rtm.eta))
        state = plant.state
        schedule = cfg.occlusion_schedule()

        observed, _ = plant_sim.observe(state, None, 0)
        compensator = occlusion.start_compensator(observed, fitter, cfg.resolution_scale)
        s_k = np.array(compensator.last_feature.values)
        s_hat = s_k
        errors = [float(np.linalg.norm(s_star - s_k))]
        threshold = cfg.termination.resolve(errors[0])
        self.logger.info(f'servo {cfg.plant.object}: initial error {errors[0]:.6e}, threshold {threshold:.6e}, '
                         f'{estimate.p} features, estimator {cfg.estimator}')

        commands, estimator_rows, controller_rows = [], [], []
        fused_clouds, fused_masks = [], []
        estimator_failures = solver_failures = 0
        stop_reason = StopReason.max_steps
        best, last_progress = errors[0], 0
        warm = None
        stopwatch = Stopwatch()
        step = 0
        while errors[-1] >= threshold and step < cfg.termination.max_steps:
            step += 1
            grasp = np.array(state.grasp)
            with stopwatch:
                A, theta = mpc_controller.build_prediction(estimate.J_hat, s_k, cfg.mpc.horizon_h)
                problem = mpc_controller.build_qp(A, theta, s_k, s_star, cfg.mpc, grasp)
                try:
                    solution = mpc_controller.solve_qp(problem, warm if cfg.mpc.warm_start else None)
                    u = np.array(mpc_controller.step_command(solution).u)
                    warm = np.concatenate([solution.u[3:], solution.u[-3:]])
                    active, iterations = solution.active_constraints, solution.iterations
                    residual = max(solution.primal_residual, solution.dual_residual)
                except error_collection.SolverFailure as e:
                    self.logger.warning(f'step {step}: {e.message}, holding the grasp')
                    solver_failures += 1
                    u, warm, active, iterations, residual = np.zeros(3), None, 0, e.data['iterations'], float('nan')

            state = plant_sim.settle(state, grasp + u)
            observed, visible = plant_sim.observe(state, schedule, step, previous=observed)

            with stopwatch:
                fused, compensator = occlusion.compensate(compensator, observed, visible, u, estimate, fitter)
                s_next = np.array(compensator.last_feature.values)
                ds = s_next - s_k
                t1, t2 = rtm_estimator.metrics_t1_t2(estimate, s_hat, s_next, ds, u)
                s_hat = rtm_estimator.predict_feature(s_hat, estimate, u)
                estimate, report, failed = self._estimate(cfg, estimate, ds, u)
                estimator_failures += failed
            stopwatch.lap()

            s_k = s_next
            if schedule.intervals:
                fused_clouds.append(fused)
                fused_masks.append(visible)
            commands.append(u)
            errors.append(float(np.linalg.norm(s_star - s_k)))
            estimator_rows.append(EstimatorTraceRow(
                step=step, T1=t1, T2=t2, Q1=report.q1, Q2=report.q2, Q3=report.q3, objective=report.objective,
                eta=cfg.rtm.eta, mu1=cfg.rtm.mu1, mu2=cfg.rtm.mu2, mu3=cfg.rtm.mu3))
            controller_rows.append(ControllerTraceRow(
                step=step, err_norm=errors[-1], ux=u[0], uy=u[1], uz=u[2], rx=state.grasp[0], ry=state.grasp[1],
                rz=state.grasp[2], active_constraints=active, qp_iters=iterations, qp_residual=residual))

            if errors[-1] < best * (1.0 - PROGRESS_RATIO):
                best, last_progress = errors[-1], step
            elif step - last_progress >= cfg.termination.stall_window:
                stop_reason = StopReason.stalled
                self.logger.warning(f'no progress for {cfg.termination.stall_window} steps, '
                                    f'best error {best:.6e} at step {last_progress}')
                break

        metrics = RunMetrics.build(errors, commands, threshold, stop_reason, estimator_trace=estimator_rows,
                                   controller_trace=controller_rows, estimator_failures=estimator_failures,
                                   solver_failures=solver_failures)
        timing = LoopTiming(steps=len(stopwatch.laps), mean_ms=stopwatch.mean_ms(), max_ms=stopwatch.max_ms(),
                            budget_ms=self.step_budget_ms)
        self.logger.info(f'servo {cfg.plant.object} stopped ({metrics.stop_reason}) after {step} steps: '
                         f'T_max={metrics.T_max} t_d={metrics.t_d} t_s={metrics.t_s} d_eff={metrics.d_eff:.4f} m, '
                         f'{timing.mean_ms:.2f} ms/step')
        if out_dir is not None:
            self.write_run(out_dir, cfg, metrics, timing)
            if fused_clouds:
                self.corpus_repo.save(self.store.output_path(out_dir, 'fused.csv'), fused_clouds, fused_masks)
        return metrics, timing

    def _estimate(self, cfg: ServoConfig, estimate: JacobianEstimate, ds: np.ndarray,
                  u: np.ndarray) -> Tuple[JacobianEstimate, RtmStepReport, int]:
        try:
            if cfg.estimator == EstimatorMethod.broyden:
                estimate, report = rtm_estimator.broyden_step(estimate, cfg.rtm, (ds, u), cfg.broyden_gain)
            else:
                estimate, report = rtm_estimator.rtm_step(estimate, cfg.rtm, (ds, u))
            return estimate, report, 0
        except error_collection.EstimatorError as e:
            self.logger.warning(f'{e.message}, keeping the previous jacobian')
            estimate = estimate.push(ds, u)
            report = RtmStepReport(q1=float('nan'), q2=0.0, q3=rtm_estimator.q3_manipulability(estimate.J_hat),
                                   objective=e.data['objective'], baseline=e.data['baseline'])
            return estimate, report, 1

    def write_run(self, out_dir: str, cfg: ServoConfig, metrics: RunMetrics, timing: LoopTiming) -> str:
        out_dir = self.store.output_dir(out_dir)
        self.report_repo.write_controller_trace(os.path.join(out_dir, 'trace.csv'), metrics.controller_trace)
        self.report_repo.write_estimator_trace(os.path.join(out_dir, 'estimator_trace.csv'), metrics.estimator_trace)
        summary = metrics.to_json()
        summary['timing'] = timing.to_json()
        summary['config'] = cfg.dict()
        self.report_repo.write_summary(os.path.join(out_dir, 'metrics.json'), summary)
        return out_dir

    def run_horizon_study(self, cfg: ServoConfig, horizons: Sequence[int] = (5, 15),
                          target: DemonstrationTarget = None, out_dir: str = None) -> Dict[int, RunMetrics]:
        """One servo run per horizon against the same target, traces in one folder per horizon"""
        target = target or self.load_target(cfg)
        results = {}
        for h in horizons:
            run_dir = os.path.join(out_dir, f'h{h}') if out_dir is not None else None
            results[h] = self.run_servo(cfg.with_overrides(**{'mpc.horizon_h': h}), target, run_dir)
        if out_dir is not None:
            self.report_repo.write_summary(
                self.store.output_path(out_dir, 'metrics.json'),
                {f'h{h}': {k: v for k, v in m.to_json().items() if k != 'error_series'} for h, m in results.items()})
        return results
