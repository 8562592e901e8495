from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from app.domain.model.shape import ShapeSample
from app.domain.utils import error_collection
from app.infrastructure.persistence.file_store import FileStore, sidecar_path
from app.pkgs.errors import Error

POINT_COLUMNS = ['sample', 'idx', 'x', 'y', 'z']


@dataclass
class CorpusContents(object):
    samples: List[ShapeSample]
    skipped_rows: int = 0
    skipped_samples: int = 0
    visible: List[np.ndarray] = field(default_factory=list)

    @property
    def skipped(self) -> int:
        return self.skipped_rows + self.skipped_samples


class CorpusRepository(object):
    """Shape corpora: one CSV row per point (`sample,idx,x,y,z[,rho][,visible]`) plus a JSON sidecar"""

    def __init__(self, store: FileStore):
        self.store = store

    def save(self, path: str, samples: Sequence[ShapeSample], visible: Optional[Sequence[np.ndarray]] = None) -> str:
        if not samples:
            raise error_collection.CorpusError('nothing to write, the corpus is empty')
        kind, n_points = samples[0].kind, samples[0].n_points
        if any(s.kind != kind or s.n_points != n_points for s in samples):
            raise error_collection.ContractError('every sample of a corpus must share its kind and point count')
        if visible is not None and len(visible) != len(samples):
            raise error_collection.ContractError('one visibility mask per sample is required')

        frames = []
        for i, sample in enumerate(samples):
            frame = pd.DataFrame({'sample': i, 'idx': np.arange(n_points), 'x': sample.points[:, 0],
                                  'y': sample.points[:, 1], 'z': sample.points[:, 2]})
            if sample.is_curve:
                frame['rho'] = sample.arc_params
            if visible is not None:
                frame['visible'] = np.asarray(visible[i], dtype=bool)
            frames.append(frame)
        self.store.write_csv(path, pd.concat(frames, ignore_index=True))
        self.store.write_json(sidecar_path(path), {'kind': kind, 'n_points': n_points, 'units': 'm',
                                                   'samples': len(samples)})
        return path

    def load(self, path: str) -> CorpusContents:
        meta = self.store.read_json(sidecar_path(path))
        kind, n_points = meta.get('kind'), meta.get('n_points')
        if kind is None or n_points is None:
            raise error_collection.CorpusError(f'sidecar of {path} must name kind and n_points')
        frame, skipped_rows = self.store.read_csv(path, POINT_COLUMNS)

        contents = CorpusContents(samples=[], skipped_rows=skipped_rows)
        for _, group in frame.groupby('sample', sort=True):
            group = group.sort_values('idx')
            if len(group) != n_points or not np.array_equal(group['idx'].to_numpy(), np.arange(n_points)):
                contents.skipped_samples += 1
                continue
            try:
                sample = ShapeSample.from_points(group[['x', 'y', 'z']].to_numpy(dtype=float), kind)
            except Error:
                contents.skipped_samples += 1
                continue
            contents.samples.append(sample)
            if 'visible' in group.columns:
                contents.visible.append(group['visible'].astype(bool).to_numpy())
        if not contents.samples:
            raise error_collection.CorpusError(f'{path} holds no usable sample',
                                               data={'skipped_rows': contents.skipped_rows,
                                                     'skipped_samples': contents.skipped_samples})
        return contents


