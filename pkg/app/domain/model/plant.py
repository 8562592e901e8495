import re
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from app.domain.model._serializable import Serializable
from app.domain.model.shape import ShapeKind, readonly
from app.domain.utils import error_collection, validation


@dataclass
class TopologyKind:
    chain: str = 'chain'
    loop: str = 'loop'
    grid: str = 'grid'


SHAPE_KIND_OF_TOPOLOGY = {
    TopologyKind.chain: ShapeKind.centerline,
    TopologyKind.loop: ShapeKind.contour,
    TopologyKind.grid: ShapeKind.surface,
}


@dataclass(frozen=True)
class Topology(Serializable):
    kind: str = TopologyKind.chain
    n_nodes: int = 64
    rows: int = 0
    cols: int = 0

    def __post_init__(self):
        self.validate()

    @classmethod
    def grid(cls, rows: int, cols: int) -> 'Topology':
        return cls(kind=TopologyKind.grid, n_nodes=rows * cols, rows=rows, cols=cols)

    def validate(self):
        validation.validate_choice(self.kind, (TopologyKind.chain, TopologyKind.loop, TopologyKind.grid), 'topology')
        validation.validate_positive_int(self.n_nodes, 'n_nodes')
        if self.kind == TopologyKind.grid:
            if self.rows < 2 or self.cols < 2 or self.rows * self.cols != self.n_nodes:
                raise error_collection.ValidationError(
                    f'grid topology needs rows, cols >= 2 with rows * cols = n_nodes, receive {self.rows}x{self.cols}')
        elif self.n_nodes < 3:
            raise error_collection.ValidationError('chain and loop topologies need at least 3 nodes')

    @property
    def shape_kind(self) -> str:
        return SHAPE_KIND_OF_TOPOLOGY[self.kind]

    def node(self, row: int, col: int) -> int:
        """row-major index of a grid node"""
        return row * self.cols + col

    def structural_edges(self) -> np.ndarray:
        n = self.n_nodes
        if self.kind == TopologyKind.chain:
            return np.stack([np.arange(n - 1), np.arange(1, n)], axis=1)
        if self.kind == TopologyKind.loop:
            return np.stack([np.arange(n), (np.arange(n) + 1) % n], axis=1)
        index = np.arange(n).reshape(self.rows, self.cols)
        horizontal = np.stack([index[:, :-1].ravel(), index[:, 1:].ravel()], axis=1)
        vertical = np.stack([index[:-1, :].ravel(), index[1:, :].ravel()], axis=1)
        return np.concatenate([horizontal, vertical])

    def shear_edges(self) -> np.ndarray:
        if self.kind != TopologyKind.grid:
            return np.zeros((0, 2), dtype=int)
        index = np.arange(self.n_nodes).reshape(self.rows, self.cols)
        main = np.stack([index[:-1, :-1].ravel(), index[1:, 1:].ravel()], axis=1)
        anti = np.stack([index[:-1, 1:].ravel(), index[1:, :-1].ravel()], axis=1)
        return np.concatenate([main, anti])

    def springs(self) -> np.ndarray:
        return np.concatenate([self.structural_edges(), self.shear_edges()]).astype(int)

    def bending_triplets(self) -> np.ndarray:
        """(a, b, c) with b the node whose discrete Laplacian x_a - 2 x_b + x_c is penalized"""
        n = self.n_nodes
        if self.kind == TopologyKind.chain:
            b = np.arange(1, n - 1)
            return np.stack([b - 1, b, b + 1], axis=1)
        if self.kind == TopologyKind.loop:
            b = np.arange(n)
            return np.stack([(b - 1) % n, b, (b + 1) % n], axis=1)
        index = np.arange(n).reshape(self.rows, self.cols)
        along_rows = np.stack([index[:, :-2].ravel(), index[:, 1:-1].ravel(), index[:, 2:].ravel()], axis=1)
        along_cols = np.stack([index[:-2, :].ravel(), index[1:-1, :].ravel(), index[2:, :].ravel()], axis=1)
        return np.concatenate([along_rows, along_cols]).reshape(-1, 3)

    def twist_quads(self) -> np.ndarray:
        """grid cells (a, b, c, d) penalized by the mixed difference x_a - x_b - x_c + x_d"""
        if self.kind != TopologyKind.grid:
            return np.zeros((0, 4), dtype=int)
        index = np.arange(self.n_nodes).reshape(self.rows, self.cols)
        return np.stack([index[:-1, :-1].ravel(), index[:-1, 1:].ravel(),
                         index[1:, :-1].ravel(), index[1:, 1:].ravel()], axis=1)


@dataclass(frozen=True)
class Stiffness(Serializable):
    stretch_ks: float = 50.0  # N/m
    bend_kb: float = 1e-3  # N m^2

    def __post_init__(self):
        self.validate()

    def validate(self):
        validation.validate_positive(self.stretch_ks, 'stretch_ks')
        validation.validate_nonnegative(self.bend_kb, 'bend_kb')


@dataclass(frozen=True, eq=False)
class PlantState(Serializable):
    """Node positions of the simulated object plus everything that stays fixed while it deforms."""
    nodes: np.ndarray
    grasp_index: int
    fixed_indices: Tuple[int, ...]
    topology: Topology
    stiffness: Stiffness
    rest_lengths: np.ndarray
    spacing: float

    _json_black_list = ['rest_lengths']

    def __post_init__(self):
        object.__setattr__(self, 'nodes', readonly(self.nodes))
        object.__setattr__(self, 'rest_lengths', readonly(self.rest_lengths))
        object.__setattr__(self, 'fixed_indices', tuple(int(i) for i in self.fixed_indices))
        self.validate()

    @classmethod
    def at_rest(cls, nodes, topology: Topology, grasp_index: int, fixed_indices, stiffness: Stiffness = None):
        """The given configuration becomes the stress-free reference"""
        nodes = np.asarray(nodes, dtype=float)
        springs = topology.springs()
        rest = np.linalg.norm(nodes[springs[:, 1]] - nodes[springs[:, 0]], axis=1)
        structural = len(topology.structural_edges())
        return cls(nodes=nodes, grasp_index=grasp_index, fixed_indices=tuple(fixed_indices), topology=topology,
                   stiffness=stiffness or Stiffness(), rest_lengths=rest, spacing=float(rest[:structural].mean()))

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def grasp(self) -> np.ndarray:
        return self.nodes[self.grasp_index]

    @property
    def shape_kind(self) -> str:
        return self.topology.shape_kind

    def with_nodes(self, nodes) -> 'PlantState':
        return replace(self, nodes=nodes)

    def free_mask(self) -> np.ndarray:
        free = np.ones(self.n_nodes, dtype=bool)
        free[list(self.fixed_indices)] = False
        free[self.grasp_index] = False
        return free

    def validate(self):
        validation.validate_points(self.nodes, 'nodes', min_count=2)
        if self.nodes.shape[0] != self.topology.n_nodes:
            raise error_collection.ValidationError(
                f'topology expects {self.topology.n_nodes} nodes, receive {self.nodes.shape[0]}')
        validation.validate_index(self.grasp_index, self.n_nodes - 1, 'grasp_index')
        for index in self.fixed_indices:
            validation.validate_index(index, self.n_nodes - 1, 'fixed index')
        if self.grasp_index in self.fixed_indices:
            raise error_collection.ValidationError('the grasped node cannot also be fixed')
        if self.rest_lengths.shape != (len(self.topology.springs()),):
            raise error_collection.ValidationError('one rest length per spring is required')
        validation.validate_positive(self.spacing, 'spacing')


@dataclass
class MaskKind:
    index_range: str = 'range'
    halfspace: str = 'halfspace'
    fraction: str = 'fraction'


@dataclass(frozen=True)
class IndexRange(Serializable):
    """Hides points a..b, both ends included"""
    start: int
    end: int
    kind: str = MaskKind.index_range

    def __post_init__(self):
        if self.start < 0 or self.end < self.start:
            raise error_collection.ValidationError(f'invalid index range {self.start}..{self.end}')

    def hidden(self, points: np.ndarray, step: int) -> np.ndarray:
        hidden = np.zeros(len(points), dtype=bool)
        hidden[self.start:self.end + 1] = True
        return hidden


@dataclass(frozen=True)
class Halfspace(Serializable):
    """Hides the points with normal . x > offset"""
    normal: Tuple[float, float, float]
    offset: float
    kind: str = MaskKind.halfspace

    def __post_init__(self):
        object.__setattr__(self, 'normal', tuple(float(v) for v in self.normal))
        if len(self.normal) != 3 or not np.any(self.normal):
            raise error_collection.ValidationError('halfspace normal must be a nonzero 3-vector')

    def hidden(self, points: np.ndarray, step: int) -> np.ndarray:
        return points @ np.asarray(self.normal) > self.offset


@dataclass(frozen=True)
class Fraction(Serializable):
    """Hides floor(f N) points drawn anew every step from (seed, step)"""
    f: float
    seed: int = 0
    kind: str = MaskKind.fraction

    def __post_init__(self):
        if not 0.0 <= self.f < 1.0:
            raise error_collection.ValidationError(f'occluded fraction must be in [0, 1), receive {self.f}')

    def hidden(self, points: np.ndarray, step: int) -> np.ndarray:
        n = len(points)
        hidden = np.zeros(n, dtype=bool)
        count = int(np.floor(self.f * n))
        rng = np.random.default_rng([int(self.seed), int(step)])
        hidden[rng.choice(n, size=count, replace=False)] = True
        return hidden


@dataclass(frozen=True)
class OcclusionInterval(Serializable):
    """Steps start..end, both included; end None keeps the mask on for the rest of the run"""
    mask: object
    start: int = 0
    end: Optional[int] = None

    def active(self, step: int) -> bool:
        return self.start <= step and (self.end is None or step <= self.end)

    def upper(self) -> float:
        return float('inf') if self.end is None else self.end


MASK_PATTERN = re.compile(r'^(?P<body>[^@]+)(@(?P<start>\d+)-(?P<end>\d*))?$')


@dataclass(frozen=True)
class OcclusionSchedule(Serializable):
    intervals: Tuple[OcclusionInterval, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, 'intervals', tuple(self.intervals))
        self.validate()

    def validate(self):
        ordered = sorted(self.intervals, key=lambda i: i.start)
        for interval in ordered:
            if interval.end is not None and interval.end < interval.start:
                raise error_collection.ValidationError(f'occlusion interval ends before it starts: {interval}')
        for before, after in zip(ordered, ordered[1:]):
            if after.start <= before.upper():
                raise error_collection.ValidationError('occlusion intervals must not overlap')

    def active_mask(self, step: int):
        for interval in self.intervals:
            if interval.active(step):
                return interval.mask
        return None

    @classmethod
    def parse(cls, text: str) -> 'OcclusionSchedule':
        """`fraction:F:SEED`, `range:A:B` or `halfspace:NX,NY,NZ:OFFSET`, each optionally
        followed by `@START-END` (`@START-` leaves the end open); masks are separated by `;`"""
        intervals: List[OcclusionInterval] = []
        for item in filter(None, (part.strip() for part in (text or '').split(';'))):
            match = MASK_PATTERN.match(item)
            if not match:
                raise error_collection.ValidationError(f'cannot parse occlusion mask "{item}"')
            parts = match.group('body').split(':')
            try:
                if parts[0] == MaskKind.fraction and len(parts) in (2, 3):
                    mask = Fraction(f=float(parts[1]), seed=int(parts[2]) if len(parts) == 3 else 0)
                elif parts[0] == MaskKind.index_range and len(parts) == 3:
                    mask = IndexRange(start=int(parts[1]), end=int(parts[2]))
                elif parts[0] == MaskKind.halfspace and len(parts) == 3:
                    mask = Halfspace(normal=tuple(float(v) for v in parts[1].split(',')), offset=float(parts[2]))
                else:
                    raise error_collection.ValidationError(f'unknown occlusion mask "{item}"')
            except ValueError as e:
                raise error_collection.ValidationError(f'cannot parse occlusion mask "{item}": {e}')
            start = int(match.group('start')) if match.group('start') else 0
            end = int(match.group('end')) if match.group('end') else None
            intervals.append(OcclusionInterval(mask=mask, start=start, end=end))
        return cls(intervals=tuple(intervals))

    def describe(self) -> str:
        parts = []
        for interval in self.intervals:
            mask = interval.mask
            if isinstance(mask, Fraction):
                body = f'fraction:{mask.f}:{mask.seed}'
            elif isinstance(mask, IndexRange):
                body = f'range:{mask.start}:{mask.end}'
            else:
                body = f'halfspace:{",".join(str(v) for v in mask.normal)}:{mask.offset}'
            if interval.start != 0 or interval.end is not None:
                body = f'{body}@{interval.start}-{"" if interval.end is None else interval.end}'
            parts.append(body)
        return ';'.join(parts)


@dataclass(frozen=True, eq=False)
class BabbleRecord(Serializable):
    """One (c_k, r_k, u_k, c_k+1) tuple of a babble dataset"""
    step: int
    command: np.ndarray
    grasp: np.ndarray
    shape: np.ndarray
    next_shape: np.ndarray


@dataclass(frozen=True, eq=False)
class BabbleDataset(Serializable):
    """Random-motion log of one plant, written as the dataset CSV plus a JSON sidecar"""
    records: Tuple[BabbleRecord, ...]
    kind: str
    n_points: int
    topology: Topology
    stiffness: Stiffness
    seed: int
    amplitude: float

    _json_black_list = ['records']

    def __len__(self):
        return len(self.records)

    def commands(self) -> np.ndarray:
        return np.array([r.command for r in self.records]).reshape(-1, 3)

    def shapes(self) -> np.ndarray:
        return np.array([r.shape for r in self.records]).reshape(-1, self.n_points, 3)

    def next_shapes(self) -> np.ndarray:
        return np.array([r.next_shape for r in self.records]).reshape(-1, self.n_points, 3)
