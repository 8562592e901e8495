import json
import os
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd

from app.config import Config
from app.domain.utils import error_collection

FLOAT_FORMAT = '%.17g'


def parse_float(text) -> float:
    """Round-trip exact parse of one cell, NaN when it is not a number"""
    try:
        return float(text)
    except (TypeError, ValueError):
        return np.nan


def sidecar_path(path: str) -> str:
    """corpus.csv -> corpus.json"""
    return os.path.splitext(path)[0] + '.json'


class FileStore(object):
    """CSV and JSON access shared by the artifact repositories; outputs default under OUTPUT_DIR"""

    def __init__(self, config: Config):
        self.root = config.OUTPUT_DIR

    def output_dir(self, out_dir: str = None) -> str:
        path = os.path.abspath(out_dir or self.root)
        os.makedirs(path, exist_ok=True)
        return path

    def output_path(self, out_dir: str, name: str) -> str:
        return os.path.join(self.output_dir(out_dir), name)

    @staticmethod
    def _make_parent(path: str):
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)

    def write_csv(self, path: str, frame: pd.DataFrame) -> str:
        self._make_parent(path)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
        return path

    def read_csv(self, path: str, required: Sequence[str]) -> Tuple[pd.DataFrame, int]:
        """Numeric table with the required columns, plus the number of malformed lines dropped"""
        if not os.path.isfile(path):
            raise error_collection.CorpusError(f'{path} does not exist')
        bad_lines: List[list] = []
        try:
            frame = pd.read_csv(path, engine='python', dtype=str, on_bad_lines=lambda line: bad_lines.append(line))
        except pd.errors.EmptyDataError:
            raise error_collection.CorpusError(f'{path} is empty')
        missing = [name for name in required if name not in frame.columns]
        if missing:
            raise error_collection.CorpusError(f'{path} lacks the columns {missing}', data={'missing': missing})
        numeric = frame.columns.drop('visible', errors='ignore')
        frame[numeric] = frame[numeric].apply(lambda column: column.map(parse_float)).astype(float)
        if 'visible' in frame.columns:
            frame['visible'] = frame['visible'].map(lambda cell: str(cell).strip() in ('True', '1'))
        invalid = ~np.isfinite(frame[list(required)].to_numpy(dtype=float)).all(axis=1)
        return frame.loc[~invalid].reset_index(drop=True), len(bad_lines) + int(invalid.sum())

    def write_json(self, path: str, data: dict) -> str:
        self._make_parent(path)
        with open(path, 'w') as json_file:
            json.dump(data, json_file, indent=2, default=str)
        return path

    def read_json(self, path: str) -> dict:
        if not os.path.isfile(path):
            raise error_collection.CorpusError(f'{path} does not exist')
        try:
            with open(path, 'r') as json_file:
                return json.load(json_file)
        except ValueError as e:
            raise error_collection.CorpusError(f'{path} is not valid JSON: {e}')
