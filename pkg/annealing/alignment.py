"""Partition-respecting alignment of padded matrices by simulated annealing.

The state is a row permutation `perm` of the second matrix; the aligned matrix
is B[perm][:, perm]. A move swaps two entries of `perm` inside one partition and
the energy is the Frobenius distance to the first matrix.
"""
import itertools
import logging
import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from annealing.workers import parallel_map, rng_for
from errors import InputError, LevelMismatchError
from graph.augment import augment
from graph.matrix import PaddedMatrix, to_padded, to_padded_pair
from graph.model import StructuralTemporalGraph

logger = logging.getLogger(__name__)

EXHAUSTIVE_LIMIT = 500_000


class AnnealSchedule(BaseModel):
    model_config = ConfigDict(frozen=True)

    steps: int = Field(default=2000, ge=1)
    t_max: float = Field(default=2.0, gt=0)
    t_min: float = Field(default=0.01, gt=0)
    seed: int = 0

    @model_validator(mode="after")
    def _check_range(self) -> "AnnealSchedule":
        if self.t_min >= self.t_max:
            raise ValueError(f"t_min ({self.t_min}) must be below t_max ({self.t_max})")
        return self

    def temperature(self, step: int) -> float:
        """Geometric decay from t_max at step 0 to t_min at the last step."""
        if self.steps == 1:
            return self.t_max
        fraction = step / (self.steps - 1)
        return self.t_max * math.exp(-math.log(self.t_max / self.t_min) * fraction)


class Alignment(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    perm: np.ndarray
    energy: float
    trace: list[float] = Field(default_factory=list)

    def permutation_matrix(self) -> np.ndarray:
        """P with P[perm[i], i] = 1, so P.T @ B @ P is the aligned second matrix."""
        n = len(self.perm)
        matrix = np.zeros((n, n), dtype=np.uint8)
        matrix[self.perm, np.arange(n)] = 1
        return matrix


def _differing_cells(first: np.ndarray, second: np.ndarray) -> int:
    if first.shape != second.shape:
        raise InputError(f"Matrix dimensions differ: {first.shape} vs {second.shape}.")
    return int(np.count_nonzero(first != second))


def frobenius_distance(first: PaddedMatrix, second: PaddedMatrix) -> float:
    return math.sqrt(_differing_cells(first.adjacency, second.adjacency))


def _check_pair(first: PaddedMatrix, second: PaddedMatrix) -> None:
    if first.partition_map != second.partition_map:
        raise LevelMismatchError("Matrices do not share a partition map; pad them together first.")


def _local_mismatch(target: np.ndarray, aligned: np.ndarray, i: int, j: int) -> int:
    """Mismatching cells in rows and columns i, j."""
    idx = [i, j]
    rows = np.count_nonzero(target[idx, :] != aligned[idx, :])
    cols = np.count_nonzero(target[:, idx] != aligned[:, idx])
    both = np.count_nonzero(target[np.ix_(idx, idx)] != aligned[np.ix_(idx, idx)])
    return int(rows + cols - both)


def _swap(aligned: np.ndarray, i: int, j: int) -> None:
    aligned[[i, j], :] = aligned[[j, i], :]
    aligned[:, [i, j]] = aligned[:, [j, i]]


def align(
    first: PaddedMatrix,
    second: PaddedMatrix,
    sched: AnnealSchedule,
    initial_perm: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
) -> Alignment:
    """Anneals a permutation of `second` towards `first`; returns the best state seen."""
    _check_pair(first, second)
    rng = rng if rng is not None else rng_for(sched.seed)
    n = first.size
    perm = np.arange(n) if initial_perm is None else np.array(initial_perm, copy=True)
    target = first.adjacency
    aligned = second.adjacency[np.ix_(perm, perm)].copy()
    cells = _differing_cells(target, aligned)

    part_ids = first.partition_map.partition_ids()
    movable = np.array([row for row in range(n) if np.count_nonzero(part_ids == part_ids[row]) > 1], dtype=np.int64)
    best_perm, best_cells = perm.copy(), cells
    trace = [math.sqrt(cells)]

    if movable.size == 0 or cells == 0:
        return Alignment(perm=best_perm, energy=math.sqrt(best_cells), trace=trace)

    for step in range(sched.steps):
        temperature = sched.temperature(step)
        i = int(rng.choice(movable))
        peers = np.flatnonzero(part_ids == part_ids[i])
        j = int(rng.choice(peers[peers != i]))
        assert part_ids[i] == part_ids[j], "alignment moves must stay inside one partition"

        before = _local_mismatch(target, aligned, i, j)
        _swap(aligned, i, j)
        after = _local_mismatch(target, aligned, i, j)
        candidate = cells - before + after
        delta = math.sqrt(candidate) - math.sqrt(cells)
        if delta <= 0 or rng.random() < math.exp(-delta / temperature):
            cells = candidate
            perm[[i, j]] = perm[[j, i]]
            if cells < best_cells:
                best_cells, best_perm = cells, perm.copy()
        else:
            _swap(aligned, i, j)
        trace.append(math.sqrt(best_cells))
        if best_cells == 0:
            break

    logger.debug(f"Alignment finished: energy {math.sqrt(best_cells):.4f} after {len(trace) - 1} steps.")
    return Alignment(perm=best_perm, energy=math.sqrt(best_cells), trace=trace)


def search_space(matrix: PaddedMatrix) -> int:
    return math.prod(math.factorial(p.size) for p in matrix.partition_map.partitions)


def exhaustive_align(first: PaddedMatrix, second: PaddedMatrix, limit: int = EXHAUSTIVE_LIMIT) -> Alignment:
    """Minimum over every partition-respecting permutation. Ties keep the first permutation found."""
    _check_pair(first, second)
    space = search_space(first)
    if space > limit:
        raise InputError(f"Exhaustive alignment needs {space} permutations, above the limit of {limit}.")
    partitions = [p for p in first.partition_map.partitions if p.size > 1]
    base = np.arange(first.size)
    best_perm, best_cells = base.copy(), _differing_cells(first.adjacency, second.adjacency)
    for choice in itertools.product(*(itertools.permutations(p.rows) for p in partitions)):
        perm = base.copy()
        for partition, rows in zip(partitions, choice):
            perm[partition.start:partition.stop] = rows
        cells = _differing_cells(first.adjacency, second.adjacency[np.ix_(perm, perm)])
        if cells < best_cells:
            best_cells, best_perm = cells, perm
            if cells == 0:
                break
    return Alignment(perm=best_perm, energy=math.sqrt(best_cells), trace=[math.sqrt(best_cells)])


def structural_distance(
    first: StructuralTemporalGraph,
    second: StructuralTemporalGraph,
    sched: AnnealSchedule,
    exhaustive: bool = False,
) -> float:
    left, right = to_padded_pair(augment(first), augment(second))
    if exhaustive:
        return exhaustive_align(left, right).energy
    return align(left, right, sched).energy


def _pair_distance(task: tuple[PaddedMatrix, PaddedMatrix, AnnealSchedule, int, int, bool]) -> float:
    left, right, sched, i, j, exhaustive = task
    if exhaustive:
        return exhaustive_align(left, right).energy
    return align(left, right, sched, rng=rng_for(sched.seed, i, j)).energy


def pairwise_distances(
    padded: list[PaddedMatrix],
    sched: AnnealSchedule,
    workers: int = 1,
    exhaustive: bool = False,
) -> np.ndarray:
    """Symmetric distances between matrices padded together; pair (i, j) anneals with sub-seed (seed, i, j)."""
    pairs = [(i, j) for i in range(len(padded)) for j in range(i + 1, len(padded))]
    tasks = [(padded[i], padded[j], sched, i, j, exhaustive) for i, j in pairs]
    values = np.zeros((len(padded), len(padded)))
    for (i, j), distance in zip(pairs, parallel_map(_pair_distance, tasks, workers)):
        values[i, j] = values[j, i] = distance
    return values


def distance_matrix(
    graphs: list[StructuralTemporalGraph],
    sched: AnnealSchedule,
    workers: int = 1,
    exhaustive: bool = False,
) -> np.ndarray:
    logger.info(f"Computing {len(graphs) * (len(graphs) - 1) // 2} pairwise distances over {len(graphs)} graphs.")
    return pairwise_distances(to_padded([augment(graph) for graph in graphs]), sched, workers, exhaustive)
