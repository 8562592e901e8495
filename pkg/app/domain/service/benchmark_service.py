"""Standalone studies: babble corpora, the fitting benchmark and the estimator comparison."""
import os
import time
from logging import Logger
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.domain.model.jacobian import EstimatorMethod, RtmWeights
from app.domain.model.plant import BabbleDataset
from app.domain.model.servo import SHAPE_KIND_OF_OBJECT, EstimatorTraceRow, FitCell, ServoConfig, default_fit_grid
from app.domain.model.shape import FitReport, ShapeSample
from app.domain.service import plant_sim, rtm_estimator
from app.domain.service.servo_service import fitter_for, plant_for
from app.domain.service.shape_repr import fit_error
from app.domain.utils import error_collection
from app.infrastructure.persistence.corpus import CorpusRepository
from app.infrastructure.persistence.dataset import DatasetRepository
from app.infrastructure.persistence.file_store import FileStore
from app.infrastructure.persistence.report import ReportRepository
from app.pkgs.errors import Error, error_handler
from app.pkgs.time_utils import elapsed_us, timeit

WARMUP_STEPS = 10


def parse_method(text: str, cfg: ServoConfig) -> Tuple[str, str, int, float]:
    """`rtm`, `rtm:ETA`, `broyden` or `broyden:GAIN` -> (label, method, eta, gain)"""
    name, _, argument = text.strip().lower().partition(':')
    try:
        if name == EstimatorMethod.rtm:
            eta = int(argument) if argument else cfg.rtm.eta
            if eta < 1:
                raise ValueError(eta)
            return f'rtm_eta{eta}', name, eta, cfg.broyden_gain
        if name == EstimatorMethod.broyden:
            gain = float(argument) if argument else cfg.broyden_gain
            return f'broyden_{gain:g}', name, cfg.rtm.eta, gain
    except ValueError:
        pass
    raise error_collection.ValidationError(f'unknown estimator "{text}", use rtm[:ETA] or broyden[:GAIN]')


def summarize_trace(rows: Sequence[EstimatorTraceRow]) -> dict:
    t1 = np.array([r.T1 for r in rows], dtype=float)
    t2 = np.array([r.T2 for r in rows], dtype=float)
    q3 = np.minimum(np.array([r.Q3 for r in rows], dtype=float), rtm_estimator.Q3_CAP)
    return {'steps': len(rows), 'mean_T1': float(np.nanmean(t1)) if rows else float('nan'),
            'mean_T2': float(np.nanmean(t2)) if rows else float('nan'),
            'Q3_p95': float(np.nanpercentile(q3, 95)) if rows else float('nan')}


class BenchmarkService(object):

    def __init__(self, corpus_repo: CorpusRepository, dataset_repo: DatasetRepository,
                 report_repo: ReportRepository, store: FileStore, logger: Logger):
        self.corpus_repo = corpus_repo
        self.dataset_repo = dataset_repo
        self.report_repo = report_repo
        self.store = store
        self.logger = logger

    @timeit()
    def generate_dataset(self, cfg: ServoConfig, n_steps: int, amplitude: float,
                         out_dir: str = None) -> BabbleDataset:
        """Babble the configured plant; writes dataset.csv and the matching corpus.csv when out_dir is given"""
        dataset, _ = plant_sim.babble(plant_for(cfg), n_steps, amplitude, seed=cfg.seed,
                                      saturation=float(np.min(np.abs(cfg.mpc.bounds[1]))),
                                      schedule=cfg.occlusion_schedule())
        self.logger.info(f'babbled {len(dataset)} steps on the {cfg.plant.object}, amplitude {amplitude}')
        if out_dir is not None and len(dataset):
            self.dataset_repo.save(self.store.output_path(out_dir, 'dataset.csv'), dataset)
            samples = [ShapeSample.from_points(r.shape, dataset.kind) for r in dataset.records]
            self.corpus_repo.save(self.store.output_path(out_dir, 'corpus.csv'), samples)
        return dataset

    def run_fit_benchmark(self, corpus_path: str, grid: Optional[Sequence[FitCell]] = None, out_dir: str = None,
                          **grid_options) -> List[FitReport]:
        """Mean Σ|c_i - ĉ_i| and mean per-sample fit time of every grid cell over the corpus.

        Without an explicit grid, default_fit_grid(kind, **grid_options) is used."""
        contents = self.corpus_repo.load(corpus_path)
        if contents.skipped:
            self.logger.warning(f'{corpus_path}: skipped {contents.skipped_rows} malformed rows and '
                                f'{contents.skipped_samples} incomplete samples')
        if grid is None:
            grid = default_fit_grid(contents.samples[0].kind, **grid_options)
        reports = [self.benchmark_cell(contents.samples, cell) for cell in grid]
        if out_dir is not None:
            self.report_repo.write_fit_report(self.store.output_path(out_dir, 'fit_report.csv'), reports)
            self.report_repo.write_summary(self.store.output_path(out_dir, 'metrics.json'), {
                'corpus': os.path.abspath(corpus_path), 'samples': len(contents.samples),
                'skipped_rows': contents.skipped_rows, 'skipped_samples': contents.skipped_samples,
                'cells': [r.to_json() for r in reports]})
        return reports

    def benchmark_cell(self, samples: Sequence[ShapeSample], cell: FitCell) -> FitReport:
        fitter = fitter_for(cell.fitting())

        @error_handler
        def measure(sample: ShapeSample):
            start = time.perf_counter()
            feature = fitter.fit(sample)
            elapsed = elapsed_us(start)
            return fit_error(sample, feature), elapsed

        errors, times, failures = [], [], 0
        for sample in samples:
            result = measure(sample)
            if isinstance(result, Error):
                failures += 1
                continue
            errors.append(result[0])
            times.append(result[1])
        if failures:
            self.logger.warning(f'{cell.method}/{cell.family}/{cell.order}: {failures} of {len(samples)} fits failed')
        return FitReport(family=cell.family, order=cell.order, method=cell.method, d=cell.d, m=cell.m,
                         mean_error=float(np.mean(errors)) if errors else float('nan'),
                         elapsed_us=float(np.mean(times)) if times else float('nan'),
                         samples=len(errors), failures=failures)

    def run_estimator_compare(self, dataset_path: str, cfg: ServoConfig, methods: Sequence[str],
                              warmup: int = WARMUP_STEPS, out_dir: str = None) -> Dict[str, List[EstimatorTraceRow]]:
        dataset = self.dataset_repo.load(dataset_path)
        if self.dataset_repo.last_skipped:
            self.logger.warning(f'{dataset_path}: skipped {self.dataset_repo.last_skipped} malformed rows')
        traces = self.compare_estimators(dataset, cfg, methods, warmup)
        if out_dir is not None:
            for label, rows in traces.items():
                self.report_repo.write_estimator_trace(self.store.output_path(out_dir, f'estimator_{label}.csv'), rows)
            self.report_repo.write_summary(self.store.output_path(out_dir, 'metrics.json'), {
                'dataset': os.path.abspath(dataset_path), 'warmup': warmup,
                'methods': {label: summarize_trace(rows) for label, rows in traces.items()}})
        return traces

    @timeit()
    def compare_estimators(self, dataset: BabbleDataset, cfg: ServoConfig, methods: Sequence[str],
                           warmup: int = WARMUP_STEPS) -> Dict[str, List[EstimatorTraceRow]]:
        """Replay the log through every estimator from a shared least-squares warm start"""
        expected_kind = SHAPE_KIND_OF_OBJECT[cfg.plant.object]
        if dataset.kind != expected_kind:
            raise error_collection.ContractError(
                f'dataset holds {dataset.kind} shapes, the fitting configuration expects {expected_kind}')
        parsed = [parse_method(text, cfg) for text in methods]
        longest = max([eta for _, _, eta, _ in parsed] + [warmup])
        if len(dataset) < longest + 1:
            raise error_collection.ValidationError(f'dataset has {len(dataset)} steps, at least {longest + 1} needed')

        fitter = fitter_for(cfg.fitting)
        shapes = [ShapeSample.from_points(points, dataset.kind) for points in dataset.shapes()]
        fitter = fitter.pinned_to(fitter.fit(shapes[0]))
        features = np.array([fitter.fit(s).values for s in shapes])
        next_features = np.array([fitter.fit(ShapeSample.from_points(points, dataset.kind)).values
                                  for points in dataset.next_shapes()])
        commands = dataset.commands()
        J0 = rtm_estimator.warm_start_jacobian(next_features[:warmup] - features[:warmup], commands[:warmup])

        traces = {}
        for label, method, eta, gain in parsed:
            weights = RtmWeights(**dict(cfg.rtm.dict(), eta=eta))
            steps = rtm_estimator.replay(features, next_features, commands, J0, weights, method=method, lam=gain,
                                         start=warmup)
            failures = sum(s.failed for s in steps)
            if failures:
                self.logger.warning(f'{label}: {failures} updates kept the previous jacobian')
            traces[label] = [EstimatorTraceRow(step=s.step, T1=s.t1, T2=s.t2, Q1=s.report.q1, Q2=s.report.q2,
                                               Q3=s.report.q3, objective=s.report.objective, eta=eta,
                                               mu1=weights.mu1, mu2=weights.mu2, mu3=weights.mu3) for s in steps]
            summary = summarize_trace(traces[label])
            self.logger.info(f'{label}: mean T1 {summary["mean_T1"]:.4e}, mean T2 {summary["mean_T2"]:.4e}, '
                             f'Q3 p95 {summary["Q3_p95"]:.4e}')
        return traces
