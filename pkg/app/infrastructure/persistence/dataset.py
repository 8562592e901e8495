from typing import List

import numpy as np
import pandas as pd

from app.domain.model.plant import BabbleDataset, BabbleRecord, Stiffness, Topology
from app.domain.utils import error_collection
from app.infrastructure.persistence.file_store import FileStore, sidecar_path

HEAD_COLUMNS = ['step', 'ux', 'uy', 'uz', 'rx', 'ry', 'rz']


def shape_columns(prefix: str, n_points: int) -> List[str]:
    return [f'{prefix}{i}{axis}' for i in range(n_points) for axis in 'xyz']


class DatasetRepository(object):
    """Babble logs: `step,ux,uy,uz,rx,ry,rz`, 3N shape columns, 3N next-shape columns, JSON sidecar"""

    def __init__(self, store: FileStore):
        self.store = store
        self.last_skipped = 0

    def save(self, path: str, dataset: BabbleDataset) -> str:
        n = dataset.n_points
        columns = HEAD_COLUMNS + shape_columns('c', n) + shape_columns('n', n)
        rows = [np.concatenate([[r.step], r.command, r.grasp, np.ravel(r.shape), np.ravel(r.next_shape)])
                for r in dataset.records]
        frame = pd.DataFrame(np.array(rows).reshape(-1, len(columns)), columns=columns)
        frame['step'] = frame['step'].astype(int)
        self.store.write_csv(path, frame)
        self.store.write_json(sidecar_path(path), dataset.to_json())
        return path

    def load(self, path: str) -> BabbleDataset:
        meta = self.store.read_json(sidecar_path(path))
        try:
            n = int(meta['n_points'])
            topology = Topology(**meta['topology'])
            stiffness = Stiffness(**meta['stiffness'])
            kind, seed, amplitude = meta['kind'], int(meta['seed']), float(meta['amplitude'])
        except (KeyError, TypeError) as e:
            raise error_collection.CorpusError(f'sidecar of {path} is incomplete: {e}')
        shape_cols, next_cols = shape_columns('c', n), shape_columns('n', n)
        frame, skipped = self.store.read_csv(path, HEAD_COLUMNS + shape_cols + next_cols)
        self.last_skipped = skipped
        if frame.empty:
            raise error_collection.CorpusError(f'{path} holds no usable row', data={'skipped_rows': skipped})

        frame = frame.sort_values('step')
        records = tuple(BabbleRecord(step=int(row.step), command=np.array([row.ux, row.uy, row.uz]),
                                     grasp=np.array([row.rx, row.ry, row.rz]),
                                     shape=shapes.reshape(n, 3), next_shape=nexts.reshape(n, 3))
                        for row, shapes, nexts in zip(frame.itertuples(index=False),
                                                      frame[shape_cols].to_numpy(dtype=float),
                                                      frame[next_cols].to_numpy(dtype=float)))
        return BabbleDataset(records=records, kind=kind, n_points=n, topology=topology, stiffness=stiffness,
                             seed=seed, amplitude=amplitude)
