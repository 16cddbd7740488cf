"""Distance matrices, normalization and the Mantel test with Spearman's rho."""
import itertools
import logging
import math
from pathlib import Path
from typing import Literal, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.stats import rankdata, spearmanr

from annealing.alignment import AnnealSchedule, distance_matrix
from annealing.workers import rng_for
from errors import InputError
from graph.ingest import levels_ablate
from graph.model import StructuralTemporalGraph

logger = logging.getLogger(__name__)

DEFAULT_PERMUTATIONS = 9999


class DistanceMatrix(BaseModel):
    """Symmetric, non-negative, zero-diagonal matrix over labeled pieces."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    labels: list[str]
    values: np.ndarray

    @model_validator(mode="after")
    def _normalize(self) -> "DistanceMatrix":
        values = np.asarray(self.values, dtype=float)
        n = len(self.labels)
        if values.shape != (n, n):
            raise InputError(f"Distance matrix is {values.shape}, expected {(n, n)} for {n} labels.")
        if (values < 0).any():
            raise InputError("Distances must be non-negative.")
        values = (values + values.T) / 2
        np.fill_diagonal(values, 0.0)
        self.values = values
        return self

    @property
    def size(self) -> int:
        return len(self.labels)

    def upper_triangle(self) -> np.ndarray:
        return self.values[np.triu_indices(self.size, k=1)]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, columns=self.labels)


def read_matrix_csv(path: Union[str, Path]) -> DistanceMatrix:
    """Header row of labels followed by one row of values per label."""
    frame = pd.read_csv(path)
    return DistanceMatrix(labels=[str(label) for label in frame.columns], values=frame.to_numpy(dtype=float))


def write_matrix_csv(matrix: DistanceMatrix, path: Union[str, Path]) -> None:
    matrix.to_frame().to_csv(path, index=False, float_format="%.10g")


def mean_normalize(matrices: list[DistanceMatrix]) -> DistanceMatrix:
    """Element-wise mean, then min-max scaled to [0, 1] over the off-diagonal entries."""
    if not matrices:
        raise InputError("Nothing to average.")
    labels = matrices[0].labels
    for matrix in matrices[1:]:
        if matrix.labels != labels:
            raise InputError("Distance matrices disagree on their labels or their order.")
    mean = np.mean([matrix.values for matrix in matrices], axis=0)
    off_diagonal = ~np.eye(len(labels), dtype=bool)
    if not off_diagonal.any():
        return DistanceMatrix(labels=labels, values=mean)
    low, high = mean[off_diagonal].min(), mean[off_diagonal].max()
    if math.isclose(high, low):
        logger.warning("All off-diagonal distances are equal; normalized matrix is all zeros.")
        return DistanceMatrix(labels=labels, values=np.zeros_like(mean))
    scaled = (mean - low) / (high - low)
    np.fill_diagonal(scaled, 0.0)
    return DistanceMatrix(labels=labels, values=scaled)


class MantelResult(BaseModel):
    rho: float
    p_value: float
    permutations: int
    exact: bool = False


def _rank_matrix(matrix: DistanceMatrix) -> np.ndarray:
    """Symmetric matrix holding the average ranks of the upper-triangle entries."""
    n = matrix.size
    upper = np.triu_indices(n, k=1)
    ranks = np.zeros((n, n))
    ranks[upper] = rankdata(matrix.upper_triangle())
    return ranks + ranks.T


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    x, y = x - x.mean(), y - y.mean()
    return float((x @ y) / math.sqrt((x @ x) * (y @ y)))


def mantel_spearman(
    first: DistanceMatrix,
    second: DistanceMatrix,
    permutations: Union[int, Literal["all"]] = DEFAULT_PERMUTATIONS,
    seed: int = 0,
) -> MantelResult:
    """Two-sided Mantel test. Rows and columns of `second` are permuted jointly.

    permutations="all" enumerates every relabeling, identity included once;
    otherwise the identity is added to the random draws, so p >= 1/(N+1).
    """
    if first.labels != second.labels:
        raise InputError("Mantel test needs matrices over the same labels in the same order.")
    n = first.size
    if n < 3:
        raise InputError("Mantel test needs at least 3 labels.")
    x, y = first.upper_triangle(), second.upper_triangle()
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise InputError("Mantel test is undefined for a constant distance matrix.")

    observed = float(spearmanr(x, y)[0])
    rank_x = rankdata(x)
    ranks_y = _rank_matrix(second)
    upper = np.triu_indices(n, k=1)
    threshold = abs(observed) - 1e-12

    if permutations == "all":
        total = math.factorial(n)
        better = sum(
            abs(_pearson(rank_x, ranks_y[np.ix_(perm, perm)][upper])) >= threshold
            for perm in map(list, itertools.permutations(range(n)))
        )
        return MantelResult(rho=observed, p_value=better / total, permutations=total, exact=True)

    if permutations < 1:
        raise InputError("Mantel test needs at least one permutation.")
    rng = rng_for(seed)
    better = 0
    for _ in range(permutations):
        perm = rng.permutation(n)
        if abs(_pearson(rank_x, ranks_y[np.ix_(perm, perm)][upper])) >= threshold:
            better += 1
    return MantelResult(rho=observed, p_value=(better + 1) / (permutations + 1), permutations=permutations)


def ablation_matrices(
    graphs: list[StructuralTemporalGraph],
    labels: list[str],
    sched: AnnealSchedule,
    workers: int = 1,
) -> dict[int, DistanceMatrix]:
    """Distance matrices for every bottom-up ablation, keyed by the number of levels kept."""
    if not graphs:
        raise InputError("Ablation needs at least one graph.")
    depth = min(len(graph.levels) for graph in graphs)
    matrices = {}
    for keep in range(depth, 0, -1):
        logger.info(f"Ablation: keeping the top {keep} levels.")
        ablated = [levels_ablate(graph, keep) for graph in graphs]
        matrices[keep] = DistanceMatrix(labels=labels, values=distance_matrix(ablated, sched, workers))
    return matrices
