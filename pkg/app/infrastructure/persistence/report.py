from typing import List, Sequence

import pandas as pd

from app.domain.model.servo import ControllerTraceRow, EstimatorTraceRow
from app.domain.model.shape import FitReport
from app.infrastructure.persistence.file_store import FileStore

FIT_COLUMNS = ['family', 'order', 'method', 'd', 'm', 'mean_error', 'elapsed_us']
ESTIMATOR_COLUMNS = ['step', 'T1', 'T2', 'Q1', 'Q2', 'Q3', 'objective', 'eta', 'mu1', 'mu2', 'mu3']
CONTROLLER_COLUMNS = ['step', 'err_norm', 'ux', 'uy', 'uz', 'rx', 'ry', 'rz', 'active_constraints', 'qp_iters',
                      'qp_residual']


def _table(rows: Sequence, columns: List[str]) -> pd.DataFrame:
    return pd.DataFrame([row.to_json() for row in rows], columns=columns)


class ReportRepository(object):
    """Benchmark tables, per-step traces and run summaries"""

    def __init__(self, store: FileStore):
        self.store = store

    def write_fit_report(self, path: str, reports: Sequence[FitReport]) -> str:
        return self.store.write_csv(path, _table(reports, FIT_COLUMNS))

    def write_estimator_trace(self, path: str, rows: Sequence[EstimatorTraceRow]) -> str:
        return self.store.write_csv(path, _table(rows, ESTIMATOR_COLUMNS))

    def write_controller_trace(self, path: str, rows: Sequence[ControllerTraceRow]) -> str:
        return self.store.write_csv(path, _table(rows, CONTROLLER_COLUMNS))

    def write_summary(self, path: str, summary: dict) -> str:
        return self.store.write_json(path, summary)

    def read_table(self, path: str, columns: Sequence[str]) -> pd.DataFrame:
        frame, _ = self.store.read_csv(path, columns)
        return frame
