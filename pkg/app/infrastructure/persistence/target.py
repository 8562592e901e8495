import numpy as np
import pandas as pd

from app.domain.model.servo import DemonstrationTarget
from app.domain.model.shape import BasisSpec, FeatureVector, MlsConfig, PcaProjection, ShapeSample
from app.domain.utils import error_collection
from app.infrastructure.persistence.file_store import FileStore, sidecar_path
from app.pkgs.errors import Error


def feature_from_json(data: dict) -> FeatureVector:
    projection = data.get('projection')
    mls = data.get('mls')
    frame = data.get('frame')
    return FeatureVector(values=np.asarray(data['values'], dtype=float), provenance=data['provenance'],
                         basis=BasisSpec(**data['basis']),
                         mls=MlsConfig(**mls) if mls else None,
                         projection=PcaProjection(**{k: np.asarray(v, dtype=float) for k, v in projection.items()})
                         if projection else None,
                         frame=np.asarray(frame, dtype=float) if frame is not None else None)


class TargetRepository(object):
    """Demonstration targets: the final shape as `idx,x,y,z[,rho]` and its feature vector in the sidecar"""

    def __init__(self, store: FileStore):
        self.store = store

    def save(self, path: str, target: DemonstrationTarget) -> str:
        sample = target.sample
        frame = pd.DataFrame({'idx': np.arange(sample.n_points), 'x': sample.points[:, 0],
                              'y': sample.points[:, 1], 'z': sample.points[:, 2]})
        if sample.is_curve:
            frame['rho'] = sample.arc_params
        self.store.write_csv(path, frame)
        self.store.write_json(sidecar_path(path), {
            'object_name': target.object_name, 'kind': sample.kind, 'n_points': sample.n_points, 'units': 'm',
            'script_steps': target.script_steps,
            'grasp': list(target.grasp) if target.grasp is not None else None,
            'feature': target.feature.to_json(),
        })
        return path

    def load(self, path: str) -> DemonstrationTarget:
        meta = self.store.read_json(sidecar_path(path))
        frame, skipped = self.store.read_csv(path, ['idx', 'x', 'y', 'z'])
        if skipped or len(frame) != meta.get('n_points'):
            raise error_collection.CorpusError(
                f'target {path} is damaged: {skipped} malformed rows, {len(frame)} of {meta.get("n_points")} points')
        frame = frame.sort_values('idx')
        try:
            sample = ShapeSample.from_points(frame[['x', 'y', 'z']].to_numpy(dtype=float), meta['kind'])
            feature = feature_from_json(meta['feature'])
        except (KeyError, TypeError) as e:
            raise error_collection.CorpusError(f'sidecar of target {path} is incomplete: {e}')
        except Error as e:
            raise error_collection.CorpusError(f'target {path} is invalid: {e.message}')
        grasp = meta.get('grasp')
        return DemonstrationTarget(sample=sample, feature=feature, object_name=meta.get('object_name', ''),
                                   script_steps=int(meta.get('script_steps', 0)),
                                   grasp=tuple(grasp) if grasp is not None else None)

    def load_script(self, path: str) -> np.ndarray:
        """Command script for record-target: CSV with `ux,uy,uz` columns, one row per step"""
        frame, skipped = self.store.read_csv(path, ['ux', 'uy', 'uz'])
        if skipped:
            raise error_collection.ValidationError(f'script {path} has {skipped} malformed rows')
        return frame[['ux', 'uy', 'uz']].to_numpy(dtype=float)
