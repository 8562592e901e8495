"""Quasi-static elastic plant: springs plus a discrete bending penalty, settled by Newton's method."""
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from app.domain.model.plant import (BabbleDataset, BabbleRecord, OcclusionSchedule, PlantState, Stiffness, Topology,
                                    TopologyKind)
from app.domain.model.shape import ShapeSample
from app.domain.utils import error_collection, validation

MAX_SETTLE_ITERATIONS = 10000
SETTLE_TOLERANCE = 1e-7  # m, largest node displacement of the last iteration
ARMIJO = 1e-4
RESTORING_GAIN = 0.05


@lru_cache(maxsize=32)
def _curvature_operator(topology: Topology) -> np.ndarray:
    """G with one row per bending triplet and twist cell, so that bending energy = ½ c |G X|²"""
    triplets = topology.bending_triplets()
    quads = topology.twist_quads()
    operator = np.zeros((len(triplets) + len(quads), topology.n_nodes))
    rows = np.arange(len(triplets))
    for column, coefficient in zip(triplets.T, (1.0, -2.0, 1.0)):
        np.add.at(operator, (rows, column), coefficient)
    rows = len(triplets) + np.arange(len(quads))
    for column, coefficient in zip(quads.T, (1.0, -1.0, -1.0, 1.0)):
        np.add.at(operator, (rows, column), coefficient)
    operator.setflags(write=False)
    return operator


@lru_cache(maxsize=32)
def _bending_matrix(topology: Topology) -> np.ndarray:
    operator = _curvature_operator(topology)
    matrix = operator.T @ operator
    matrix.setflags(write=False)
    return matrix


def _bending_coefficient(state: PlantState) -> float:
    return state.stiffness.bend_kb / state.spacing ** 3


def _spring_geometry(state: PlantState, nodes: np.ndarray):
    springs = state.topology.springs()
    delta = nodes[springs[:, 1]] - nodes[springs[:, 0]]
    length = np.linalg.norm(delta, axis=1)
    return springs, delta, length


def energy_of(state: PlantState, nodes: np.ndarray) -> float:
    _, _, length = _spring_geometry(state, nodes)
    stretch = 0.5 * state.stiffness.stretch_ks * np.sum((length - state.rest_lengths) ** 2)
    curvature = _curvature_operator(state.topology) @ nodes
    bend = 0.5 * _bending_coefficient(state) * np.sum(curvature ** 2)
    return float(stretch + bend)


def plant_energy(state: PlantState) -> float:
    """Stretch plus bending energy of the current configuration (J)"""
    return energy_of(state, state.nodes)


def _gradient(state: PlantState, nodes: np.ndarray) -> np.ndarray:
    springs, delta, length = _spring_geometry(state, nodes)
    force = (state.stiffness.stretch_ks * (length - state.rest_lengths) / length)[:, None] * delta
    gradient = _bending_coefficient(state) * (_bending_matrix(state.topology) @ nodes)
    np.add.at(gradient, springs[:, 1], force)
    np.add.at(gradient, springs[:, 0], -force)
    return gradient


def _hessian(state: PlantState, nodes: np.ndarray, exact: bool) -> np.ndarray:
    """3N x 3N Hessian, node-major. With exact=False the compressive part of every spring block
    is dropped, which keeps the matrix positive semidefinite."""
    n = state.n_nodes
    springs, delta, length = _spring_geometry(state, nodes)
    direction = delta / length[:, None]
    outer = direction[:, :, None] * direction[:, None, :]
    transverse = 1.0 - state.rest_lengths / length
    if not exact:
        transverse = np.maximum(transverse, 0.0)
    blocks = state.stiffness.stretch_ks * (outer + transverse[:, None, None] * (np.eye(3)[None] - outer))

    hessian = np.zeros((n, 3, n, 3))
    head, tail = springs[:, 0], springs[:, 1]
    np.add.at(hessian, (head, slice(None), head, slice(None)), blocks)
    np.add.at(hessian, (tail, slice(None), tail, slice(None)), blocks)
    np.add.at(hessian, (head, slice(None), tail, slice(None)), -blocks)
    np.add.at(hessian, (tail, slice(None), head, slice(None)), -blocks)
    hessian = hessian.reshape(3 * n, 3 * n)
    hessian += _bending_coefficient(state) * np.kron(_bending_matrix(state.topology), np.eye(3))
    return hessian


def _newton_direction(state: PlantState, nodes: np.ndarray, free_dof: np.ndarray, gradient: np.ndarray) -> np.ndarray:
    hessian = _hessian(state, nodes, exact=True)[np.ix_(free_dof, free_dof)]
    try:
        factor = cho_factor(hessian)
    except LinAlgError:
        hessian = _hessian(state, nodes, exact=False)[np.ix_(free_dof, free_dof)]
        hessian += 1e-9 * state.stiffness.stretch_ks * np.eye(len(hessian))
        try:
            factor = cho_factor(hessian)
        except LinAlgError:
            step, *_ = np.linalg.lstsq(hessian, -gradient, rcond=None)
            return step
    return -cho_solve(factor, gradient)


def settle(state: PlantState, new_grasp) -> PlantState:
    """Move the grasped node to new_grasp and return the energy-minimizing configuration.

    Fixed nodes and the grasp stay put; the free nodes follow Newton steps with Armijo
    backtracking until the largest node displacement of an iteration drops below 1e-7 m."""
    new_grasp = validation.validate_vector(new_grasp, 3, 'new_grasp')
    nodes = np.array(state.nodes)
    nodes[state.grasp_index] = new_grasp
    free = state.free_mask()
    if not free.any():
        return state.with_nodes(nodes)
    free_dof = np.repeat(free, 3)

    for iteration in range(MAX_SETTLE_ITERATIONS):
        gradient = _gradient(state, nodes).reshape(-1)[free_dof]
        step = _newton_direction(state, nodes, free_dof, gradient)
        longest = float(np.linalg.norm(step.reshape(-1, 3), axis=1).max())
        if longest < SETTLE_TOLERANCE:
            nodes.reshape(-1)[free_dof] += step
            return state.with_nodes(nodes)

        current = energy_of(state, nodes)
        slope = float(gradient @ step)
        scale = 1.0
        while True:
            trial = nodes.copy()
            trial.reshape(-1)[free_dof] += scale * step
            if energy_of(state, trial) <= current + ARMIJO * scale * slope:
                break
            scale *= 0.5
            if scale * longest < SETTLE_TOLERANCE:
                # no descent left at this resolution
                return state.with_nodes(nodes)
        nodes = trial
        if scale * longest < SETTLE_TOLERANCE:
            return state.with_nodes(nodes)

    raise error_collection.SettleFailure(
        f'no equilibrium after {MAX_SETTLE_ITERATIONS} iterations',
        data={'grasp': new_grasp.tolist(), 'energy': energy_of(state, nodes)})


def make_cable(n_nodes: int = 64, spacing: float = 0.01, stiffness: Stiffness = None) -> PlantState:
    """Straight cable along x clamped by its first two nodes, grasped at the last one"""
    nodes = np.column_stack([0.1 + spacing * np.arange(n_nodes), np.full(n_nodes, 0.5), np.full(n_nodes, 0.5)])
    topology = Topology(kind=TopologyKind.chain, n_nodes=n_nodes)
    return PlantState.at_rest(nodes, topology, grasp_index=n_nodes - 1, fixed_indices=(0, 1), stiffness=stiffness)


def make_contour(n_nodes: int = 64, radius: float = 0.1, stiffness: Stiffness = None) -> PlantState:
    """Closed ring in the xy-plane, clamped around node 0 and grasped on the opposite side"""
    angle = np.pi + 2 * np.pi * np.arange(n_nodes) / n_nodes
    nodes = np.column_stack([0.5 + radius * np.cos(angle), 0.5 + radius * np.sin(angle), np.full(n_nodes, 0.5)])
    topology = Topology(kind=TopologyKind.loop, n_nodes=n_nodes)
    state = PlantState.at_rest(nodes, topology, grasp_index=n_nodes // 2, fixed_indices=(n_nodes - 1, 0, 1),
                               stiffness=stiffness)
    # the bending term bends a ring inwards, start from its equilibrium
    return settle(state, state.grasp)


def make_sheet(rows: int = 4, cols: int = 8, spacing: float = 0.05, stiffness: Stiffness = None) -> PlantState:
    """Flat rectangular sheet, first column clamped, grasped at the far end of row 1"""
    r, c = np.meshgrid(np.arange(rows), np.arange(cols), indexing='ij')
    nodes = np.column_stack([0.1 + spacing * c.ravel(), 0.3 + spacing * r.ravel(), np.full(rows * cols, 0.5)])
    topology = Topology.grid(rows, cols)
    fixed = tuple(topology.node(row, 0) for row in range(rows))
    grasp = topology.node(min(1, rows - 1), cols - 1)
    return PlantState.at_rest(nodes, topology, grasp_index=grasp, fixed_indices=fixed, stiffness=stiffness)


def observe(state: PlantState, schedule: Optional[OcclusionSchedule], step: int,
            previous: Optional[ShapeSample] = None) -> Tuple[ShapeSample, np.ndarray]:
    """Ordered sample of the nodes plus a visibility mask; hidden points repeat the previous report"""
    points = np.array(state.nodes)
    visible = np.ones(state.n_nodes, dtype=bool)
    mask = schedule.active_mask(step) if schedule is not None else None
    if mask is not None:
        visible = ~mask.hidden(points, step)
        if previous is None:
            if not visible.all():
                raise error_collection.ContractError(
                    f'{int((~visible).sum())} points are hidden at step {step}, they need the previous report',
                    data={'step': step, 'hidden': int((~visible).sum())})
        elif previous.n_points != state.n_nodes:
            raise error_collection.ContractError('previous sample does not match the plant')
        else:
            points[~visible] = previous.points[~visible]
    return ShapeSample.from_points(points, state.shape_kind), visible


def babble(state: PlantState, n_steps: int, amplitude: float, seed: int = 0, saturation: float = 0.01,
           schedule: Optional[OcclusionSchedule] = None) -> Tuple[BabbleDataset, PlantState]:
    """Random bounded grasp motions, settling and observing after each one.

    u = clip(a U³ - 0.05 (r - r0), -a, a) with U uniform in [-1, 1]^3 and r0 the starting grasp."""
    if n_steps < 0:
        raise error_collection.ValidationError(f'n_steps must be nonnegative, receive {n_steps}')
    validation.validate_nonnegative(amplitude, 'amplitude')
    if amplitude > saturation:
        raise error_collection.DomainError(f'amplitude {amplitude} exceeds the saturation bound {saturation}')

    rng = np.random.default_rng(seed)
    home = np.array(state.grasp)
    sample, _ = observe(state, None, 0)
    records = []
    for step in range(n_steps):
        grasp = np.array(state.grasp)
        u = np.clip(amplitude * rng.uniform(-1.0, 1.0, 3) ** 3 - RESTORING_GAIN * (grasp - home), -amplitude, amplitude)
        state = settle(state, grasp + u)
        next_sample, _ = observe(state, schedule, step + 1, previous=sample)
        records.append(BabbleRecord(step=step, command=u, grasp=grasp, shape=sample.points,
                                    next_shape=next_sample.points))
        sample = next_sample
    dataset = BabbleDataset(records=tuple(records), kind=state.shape_kind, n_points=state.n_nodes,
                            topology=state.topology, stiffness=state.stiffness, seed=seed, amplitude=amplitude)
    return dataset, state


def make_plant(object_name: str, n_nodes: int = 64, rows: int = 4, cols: int = 8,
               stiffness: Stiffness = None) -> PlantState:
    if object_name == 'cable':
        return make_cable(n_nodes=n_nodes, stiffness=stiffness)
    if object_name == 'contour':
        return make_contour(n_nodes=n_nodes, stiffness=stiffness)
    if object_name == 'sheet':
        return make_sheet(rows=rows, cols=cols, stiffness=stiffness)
    raise error_collection.ValidationError(f'unknown object {object_name}')
