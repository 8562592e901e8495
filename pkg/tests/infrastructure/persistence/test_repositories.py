import json

import numpy as np
import pandas as pd
import pytest

from app.config import Config
from app.domain.model.servo import DemonstrationTarget
from app.domain.model.shape import BasisSpec, FitMethod, MlsConfig, ShapeKind
from app.domain.service import plant_sim
from app.domain.service.shape_repr import ShapeFitter
from app.domain.utils import generator
from app.domain.utils.error_collection import ContractError, CorpusError, ValidationError
from app.infrastructure.persistence.corpus import CorpusRepository
from app.infrastructure.persistence.dataset import DatasetRepository
from app.infrastructure.persistence.file_store import FileStore
from app.infrastructure.persistence.target import TargetRepository


@pytest.fixture
def store(tmp_path) -> FileStore:
    config = Config('test')
    config.OUTPUT_DIR = str(tmp_path)
    return FileStore(config)


def write_sidecar(path, **meta):
    with open(str(path).replace('.csv', '.json'), 'w') as f:
        json.dump(meta, f)


class TestCorpusRepository:

    @pytest.fixture
    def repo(self, store):
        return CorpusRepository(store)

    def test_round_trip(self, repo, tmp_path):
        samples = [generator.wavy_cable(16), generator.wavy_cable(16, phase=0.5)]
        masks = [np.ones(16, dtype=bool), np.arange(16) < 10]
        path = repo.save(str(tmp_path / 'corpus.csv'), samples, masks)
        contents = repo.load(path)
        assert contents.skipped == 0
        assert len(contents.samples) == 2
        assert np.array_equal(contents.samples[1].points, samples[1].points)
        assert np.allclose(contents.samples[0].arc_params, samples[0].arc_params)
        assert np.array_equal(contents.visible[1], masks[1])

    def test_malformed_rows_are_skipped(self, repo, tmp_path):
        path = tmp_path / 'corpus.csv'
        path.write_text('sample,idx,x,y,z\n'
                        '0,0,0,0,0\n0,1,abc,0,0\n0,2,2,0,0\n'
                        '1,0,0,0,0\n1,1,1,0,0\n1,2,2,1,0\n'
                        '1,2,2,1,0,7,7\n')
        write_sidecar(path, kind=ShapeKind.centerline, n_points=3)
        contents = repo.load(str(path))
        assert contents.skipped_rows == 2
        assert contents.skipped_samples == 1
        assert len(contents.samples) == 1
        assert contents.samples[0].points[2].tolist() == [2.0, 1.0, 0.0]

    def test_missing_file(self, repo, tmp_path):
        with pytest.raises(CorpusError):
            repo.load(str(tmp_path / 'missing.csv'))

    def test_empty_file(self, repo, tmp_path):
        path = tmp_path / 'corpus.csv'
        path.write_text('')
        write_sidecar(path, kind=ShapeKind.centerline, n_points=3)
        with pytest.raises(CorpusError):
            repo.load(str(path))

    def test_missing_columns(self, repo, tmp_path):
        path = tmp_path / 'corpus.csv'
        path.write_text('a,b\n1,2\n')
        write_sidecar(path, kind=ShapeKind.centerline, n_points=3)
        with pytest.raises(CorpusError) as e:
            repo.load(str(path))
        assert 'x' in e.value.data['missing']

    def test_incomplete_sidecar(self, repo, tmp_path):
        path = tmp_path / 'corpus.csv'
        path.write_text('sample,idx,x,y,z\n0,0,0,0,0\n')
        write_sidecar(path, n_points=1)
        with pytest.raises(CorpusError):
            repo.load(str(path))

    def test_mixed_corpus(self, repo, tmp_path):
        with pytest.raises(ContractError):
            repo.save(str(tmp_path / 'corpus.csv'), [generator.wavy_cable(16), generator.ring(16)])
        with pytest.raises(CorpusError):
            repo.save(str(tmp_path / 'corpus.csv'), [])


class TestDatasetRepository:

    def test_round_trip(self, store, tmp_path, cable_plant):
        repo = DatasetRepository(store)
        dataset, _ = plant_sim.babble(cable_plant, 3, 0.002, seed=5)
        loaded = repo.load(repo.save(str(tmp_path / 'dataset.csv'), dataset))
        assert repo.last_skipped == 0
        assert len(loaded) == 3
        assert np.array_equal(loaded.commands(), dataset.commands())
        assert np.array_equal(loaded.next_shapes(), dataset.next_shapes())
        assert (loaded.kind, loaded.seed, loaded.amplitude) == (ShapeKind.centerline, 5, 0.002)
        assert loaded.topology.n_nodes == 64

    def test_sidecar_without_topology(self, store, tmp_path):
        path = tmp_path / 'dataset.csv'
        path.write_text('step\n0\n')
        write_sidecar(path, n_points=2, kind=ShapeKind.centerline)
        with pytest.raises(CorpusError):
            DatasetRepository(store).load(str(path))


class TestTargetRepository:

    @pytest.fixture
    def repo(self, store):
        return TargetRepository(store)

    def test_lsm_target(self, repo, tmp_path):
        sample = generator.wavy_cable(32)
        feature = ShapeFitter(basis=BasisSpec(order_n=5)).fit(sample)
        target = DemonstrationTarget(sample=sample, feature=feature, object_name='cable', script_steps=4,
                                     grasp=(0.73, 0.5, 0.5))
        loaded = repo.load(repo.save(str(tmp_path / 'target.csv'), target))
        assert np.array_equal(loaded.sample.points, sample.points)
        assert np.array_equal(loaded.feature.values, feature.values)
        assert loaded.grasp == (0.73, 0.5, 0.5)
        assert loaded.script_steps == 4

    def test_mls_target_keeps_projection(self, repo, tmp_path):
        fitter = ShapeFitter(method=FitMethod.mls, basis=BasisSpec(family='trigonometric', order_n=4),
                             mls=MlsConfig(support_radius_d=0.2, pca_rank_m=1))
        sample = generator.ring(64)
        target = DemonstrationTarget(sample=sample, feature=fitter.fit(sample), object_name='contour')
        loaded = repo.load(repo.save(str(tmp_path / 'ring.csv'), target))
        assert loaded.feature.projection is not None
        assert np.allclose(fitter.reconstruct(loaded.feature, loaded.sample).points,
                           fitter.reconstruct(target.feature, target.sample).points)

    def test_surface_target_keeps_frame_and_ridge(self, repo, tmp_path, sheet_plant):
        state = plant_sim.settle(sheet_plant, np.asarray(sheet_plant.grasp) + np.array([0.0, 0.0, 0.03]))
        sample, _ = plant_sim.observe(state, None, 0)
        fitter = ShapeFitter(method=FitMethod.mls, basis=BasisSpec(family='polynomial', order_nx=2, order_ny=2),
                             mls=MlsConfig(support_radius_d=0.2, pca_rank_m=1))
        target = DemonstrationTarget(sample=sample, feature=fitter.fit(sample), object_name='sheet')
        loaded = repo.load(repo.save(str(tmp_path / 'sheet.csv'), target)).feature
        assert np.array_equal(loaded.frame, target.feature.frame)
        assert loaded.projection.ridge == target.feature.projection.ridge
        assert np.allclose(fitter.pinned_to(loaded).fit(sample).values, target.feature.values, atol=1e-12)

    def test_damaged_target(self, repo, tmp_path):
        sample = generator.wavy_cable(16)
        target = DemonstrationTarget(sample=sample, feature=ShapeFitter(basis=BasisSpec(order_n=3)).fit(sample),
                                     object_name='cable')
        path = tmp_path / 'target.csv'
        repo.save(str(path), target)
        lines = path.read_text().splitlines()
        path.write_text('\n'.join(lines[:-1]) + '\n')
        with pytest.raises(CorpusError):
            repo.load(str(path))

    def test_script(self, repo, tmp_path):
        path = tmp_path / 'script.csv'
        path.write_text('ux,uy,uz\n0.001,0,0\n0,0.001,-0.001\n')
        assert repo.load_script(str(path)).tolist() == [[0.001, 0.0, 0.0], [0.0, 0.001, -0.001]]

    def test_malformed_script(self, repo, tmp_path):
        path = tmp_path / 'script.csv'
        path.write_text('ux,uy,uz\n0.001,fast,0\n')
        with pytest.raises(ValidationError):
            repo.load_script(str(path))


class TestFileStore:

    def test_floats_round_trip_exactly(self, store, tmp_path):
        values = np.array([0.1 + 0.2, 1.0 / 3.0, 0.5000000000000001, -2.2250738585072014e-308, 0.73])
        path = store.write_csv(str(tmp_path / 'values.csv'), pd.DataFrame({'v': values}))
        frame, skipped = store.read_csv(path, ['v'])
        assert skipped == 0
        assert np.array_equal(frame['v'].to_numpy(), values)

    def test_visible_flags_and_bad_cells(self, store, tmp_path):
        path = tmp_path / 'flags.csv'
        path.write_text('v,visible\n1.5,True\nnan,True\nx,False\n2.5,False\n')
        frame, skipped = store.read_csv(str(path), ['v'])
        assert skipped == 2
        assert frame['v'].tolist() == [1.5, 2.5]
        assert frame['visible'].tolist() == [True, False]
