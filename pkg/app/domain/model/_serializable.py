import dataclasses
from typing import List

import numpy as np


def to_plain(value):
    """numpy arrays and scalars become lists and floats, nested models use their to_json"""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if hasattr(value, 'to_json'):
        return value.to_json()
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    return value


class Serializable:
    _json_black_list: List[str] = []

    def validate(self):
        # add validation here
        pass

    def to_json(self, except_fields: List[str] = ()) -> dict:
        json_data = {}
        for key, value in self.to_dict().items():
            if not key.startswith('_') and key not in self._json_black_list and key not in except_fields:
                json_data[key] = to_plain(value)
        return json_data

    def to_dict(self) -> dict:
        if dataclasses.is_dataclass(self):
            return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        return {key: value for key, value in self.__dict__.items() if not key.startswith('_')}
