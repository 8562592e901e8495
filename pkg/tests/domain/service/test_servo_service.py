import json
import logging
import os

import numpy as np
import pytest

from app.domain.model.servo import StopReason
from app.domain.service import rtm_estimator
from app.domain.service.servo_service import ServoService, SimulatedPlant, fitter_for, plant_for
from app.domain.utils.error_collection import ContractError, DomainError, ValidationError
from app.infrastructure.factory_bot.scripts import demo_script


class TestServoService:

    @pytest.fixture
    def servo_service(self, store_container) -> ServoService:
        return store_container.get_singleton(ServoService)

    def test_record_target_without_motion(self, servo_service, cable_config):
        target = servo_service.record_target(cable_config, [])
        assert target.script_steps == 0
        assert target.object_name == 'cable'
        assert np.allclose(target.sample.points, plant_for(cable_config).nodes)
        assert target.feature.size == 18

    def test_record_target_logs_its_wall_time(self, servo_service, cable_config, caplog):
        with caplog.at_level(logging.DEBUG, logger=servo_service.logger.name):
            servo_service.record_target(cable_config, [])
        assert "'record_target'" in caplog.text

    def test_record_target_respects_saturation(self, servo_service, cable_config):
        with pytest.raises(DomainError):
            servo_service.record_target(cable_config, [[0.02, 0.0, 0.0]])

    def test_saved_target_is_loaded_from_config(self, servo_service, cable_config, tmp_path):
        path = str(tmp_path / 'target.csv')
        recorded = servo_service.record_target(cable_config, [[0.0, 0.001, 0.0]] * 3, path)
        loaded = servo_service.load_target(cable_config.with_overrides(target_file=path))
        assert np.allclose(loaded.sample.points, recorded.sample.points)
        assert np.allclose(loaded.feature.values, recorded.feature.values)
        assert loaded.script_steps == 3

    def test_load_target_needs_a_file(self, servo_service, cable_config):
        with pytest.raises(ValidationError):
            servo_service.load_target(cable_config)

    def test_already_at_target(self, servo_service, cable_config, tmp_path):
        cfg = cable_config.with_overrides(**{'termination.threshold': 1e-3})
        target = servo_service.record_target(cfg, [])
        metrics = servo_service.run_servo(cfg, target, str(tmp_path))
        assert metrics.converged
        assert (metrics.T_max, metrics.d_eff) == (0, 0.0)
        assert metrics.stop_reason == StopReason.converged
        for name in ('trace.csv', 'estimator_trace.csv', 'metrics.json'):
            assert os.path.isfile(tmp_path / name)
        with open(tmp_path / 'metrics.json') as f:
            summary = json.load(f)
        assert summary['config']['termination']['threshold'] == 1e-3
        assert 'within_budget' in summary['timing']

    def test_target_must_match_the_object(self, servo_service, cable_config, contour_config):
        ring = servo_service.record_target(contour_config, [])
        with pytest.raises(ContractError):
            servo_service.run_servo(cable_config, ring)

    def test_short_runs_are_deterministic(self, servo_service, cable_config, cable_target):
        cfg = cable_config.with_overrides(**{'termination.max_steps': 5})
        first = servo_service.run_servo(cfg, cable_target)
        second = servo_service.run_servo(cfg, cable_target)
        assert first.error_series == second.error_series
        assert len(first.error_series) == 6
        assert len(first.controller_trace) == 5
        assert first.stop_reason == StopReason.max_steps

    def test_run_under_occlusion(self, servo_service, cable_config, cable_target, tmp_path):
        cfg = cable_config.with_overrides(**{'termination.max_steps': 4, 'occlusion': 'range:40:63@1-'})
        metrics, timing = servo_service.run_servo_timed(cfg, cable_target, str(tmp_path))
        assert len(metrics.estimator_trace) == 4
        assert timing.steps == 4
        assert all(np.isfinite(metrics.error_series))

        fused = servo_service.corpus_repo.load(str(tmp_path / 'fused.csv'))
        assert len(fused.samples) == 4
        assert fused.visible[0][:40].all()
        assert not fused.visible[0][40:].any()

    def test_no_fused_dump_without_occlusion(self, servo_service, cable_config, cable_target, tmp_path):
        cfg = cable_config.with_overrides(**{'termination.max_steps': 1})
        servo_service.run_servo(cfg, cable_target, str(tmp_path))
        assert os.path.isfile(tmp_path / 'metrics.json')
        assert not os.path.exists(tmp_path / 'fused.csv')

    def test_broyden_estimator(self, servo_service, cable_config, cable_target):
        cfg = cable_config.with_overrides(**{'termination.max_steps': 3, 'estimator': 'broyden'})
        metrics = servo_service.run_servo(cfg, cable_target)
        assert len(metrics.controller_trace) == 3
        assert metrics.estimator_failures == 0

    def test_horizon_study(self, servo_service, cable_config, cable_target, tmp_path):
        cfg = cable_config.with_overrides(**{'termination.max_steps': 2})
        results = servo_service.run_horizon_study(cfg, (1, 3), cable_target, str(tmp_path))
        assert sorted(results) == [1, 3]
        assert os.path.isfile(tmp_path / 'h1' / 'trace.csv')
        assert os.path.isfile(tmp_path / 'h3' / 'metrics.json')
        with open(tmp_path / 'metrics.json') as f:
            assert set(json.load(f)) == {'h1', 'h3'}

    @pytest.mark.slow
    def test_cable_reaches_demonstration(self, servo_service, cable_config, cable_target):
        metrics = servo_service.run_servo(cable_config, cable_target)
        assert metrics.converged
        assert metrics.error_series[-1] < 0.01 * metrics.error_series[0]
        assert metrics.T_max <= 600
        rows = metrics.controller_trace
        assert all(abs(u) <= 0.01 + 1e-9 for row in rows for u in (row.ux, row.uy, row.uz))
        r_min, r_max = np.asarray(cable_config.mpc.r_min), np.asarray(cable_config.mpc.r_max)
        grasps = np.array([[row.rx, row.ry, row.rz] for row in rows])
        assert np.all(grasps >= r_min - 1e-6) and np.all(grasps <= r_max + 1e-6)

    @pytest.mark.slow
    @pytest.mark.parametrize('object_name', ['contour', 'sheet'])
    def test_reaches_demonstration(self, servo_service, object_name, contour_config, sheet_config):
        cfg = {'contour': contour_config, 'sheet': sheet_config}[object_name]
        target = servo_service.record_target(cfg, demo_script(object_name))
        metrics = servo_service.run_servo(cfg, target)
        assert metrics.converged
        assert metrics.error_series[-1] < 0.01 * metrics.error_series[0]
        assert len(metrics.controller_trace) <= 600

    @pytest.mark.slow
    def test_occlusion_at_most_doubles_steps(self, servo_service, cable_config, cable_target):
        clear = servo_service.run_servo(cable_config, cable_target)
        occluded = servo_service.run_servo(cable_config.with_overrides(occlusion='fraction:0.3:7'), cable_target)
        assert clear.converged and occluded.converged
        assert occluded.T_max <= 2 * clear.T_max


class TestSimulatedPlant:

    def test_probe_and_return(self, cable_config):
        plant = SimulatedPlant(plant_for(cable_config), fitter_for(cable_config.fitting))
        start = plant.features()
        plant.actuate(np.array([0.0, 0.002, 0.0]))
        assert not np.allclose(plant.features(), start)
        plant.actuate(np.array([0.0, -0.002, 0.0]))
        assert np.allclose(plant.features(), start, atol=1e-6)

    def test_small_motions_are_linear(self, cable_config):
        plant = SimulatedPlant(plant_for(cable_config), fitter_for(cable_config.fitting))
        J = rtm_estimator.calibrate_initial(plant, 0.001).J_hat
        rng = np.random.default_rng(4)
        relative = []
        for _ in range(5):
            u = rng.normal(size=3)
            u *= 0.001 / np.linalg.norm(u)
            before = plant.features()
            plant.actuate(u)
            ds = plant.features() - before
            plant.actuate(-u)
            _, calibrated = rtm_estimator.metrics_t1_t2(J, before, before + ds, ds, u)
            _, zero = rtm_estimator.metrics_t1_t2(np.zeros_like(J), before, before + ds, ds, u)
            assert calibrated < zero
            relative.append(calibrated / zero)
        assert np.mean(relative) < 0.1
