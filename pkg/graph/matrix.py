"""Padded adjacency-matrix form of augmented graphs.

Rows are grouped into partitions: one per instance level, then one per
(level, feature_name) prototype group. Every graph of a batch is padded to the
same partition sizes so alignment permutations can stay inside a partition.
"""
import logging
from collections import Counter
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from errors import InputError, LevelMismatchError
from graph.augment import chain_order
from graph.model import AugmentedGraph, AugmentedInstance, LevelKind, PrototypeNode
from schemas import MatrixDump, PartitionDump

logger = logging.getLogger(__name__)


class Partition(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["instance", "prototype"]
    level: LevelKind
    feature_name: Optional[str] = None
    start: int
    size: int

    @property
    def stop(self) -> int:
        return self.start + self.size

    @property
    def rows(self) -> range:
        return range(self.start, self.stop)

    @property
    def name(self) -> str:
        if self.kind == "instance":
            return self.level.value
        return f"{self.level.value}/{self.feature_name}"


class PartitionMap(BaseModel):
    model_config = ConfigDict(frozen=True)

    levels: tuple[LevelKind, ...]
    partitions: tuple[Partition, ...]

    @property
    def size(self) -> int:
        return sum(partition.size for partition in self.partitions)

    def partition_ids(self) -> np.ndarray:
        """Partition index of every row."""
        ids = np.empty(self.size, dtype=np.int64)
        for index, partition in enumerate(self.partitions):
            ids[partition.start:partition.stop] = index
        return ids

    def partition_of(self, row: int) -> Partition:
        for partition in self.partitions:
            if partition.start <= row < partition.stop:
                return partition
        raise IndexError(f"Row {row} lies outside the partition map.")

    def instance_partition(self, level: LevelKind) -> Partition:
        for partition in self.partitions:
            if partition.kind == "instance" and partition.level is level:
                return partition
        raise KeyError(level)

    def prototype_partitions(self, level: LevelKind) -> list[Partition]:
        return [p for p in self.partitions if p.kind == "prototype" and p.level is level]


class PaddedMatrix(BaseModel):
    """Binary adjacency matrix with its partition map.

    row_labels holds the level code for instance rows and the feature value for
    prototype rows; None marks padding. node_ids keeps the source node id of each
    real row.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    adjacency: np.ndarray
    partition_map: PartitionMap
    row_labels: tuple[Optional[str], ...]
    node_ids: tuple[Optional[str], ...]
    title: Optional[str] = None

    @property
    def size(self) -> int:
        return self.adjacency.shape[0]

    @property
    def dummy_mask(self) -> np.ndarray:
        return np.array([node_id is None for node_id in self.node_ids], dtype=bool)

    @property
    def degree(self) -> np.ndarray:
        return self.adjacency.sum(axis=0) + self.adjacency.sum(axis=1)

    @property
    def active(self) -> np.ndarray:
        return self.degree > 0

    @property
    def edge_count(self) -> int:
        return int(self.adjacency.sum())

    def permuted(self, perm: np.ndarray) -> "PaddedMatrix":
        """Row/column permutation: row i of the result is row perm[i] of self."""
        perm = np.asarray(perm)
        return PaddedMatrix(
            adjacency=self.adjacency[np.ix_(perm, perm)],
            partition_map=self.partition_map,
            row_labels=tuple(self.row_labels[i] for i in perm),
            node_ids=tuple(self.node_ids[i] for i in perm),
            title=self.title,
        )

    def with_adjacency(self, adjacency: np.ndarray, row_labels: Optional[tuple[Optional[str], ...]] = None) -> "PaddedMatrix":
        return PaddedMatrix(
            adjacency=adjacency.astype(np.uint8),
            partition_map=self.partition_map,
            row_labels=row_labels if row_labels is not None else self.row_labels,
            node_ids=self.node_ids,
            title=self.title,
        )


def _check_levels(graphs: list[AugmentedGraph]) -> tuple[LevelKind, ...]:
    if not graphs:
        raise InputError("Need at least one graph to build matrices.")
    levels = graphs[0].levels
    for graph in graphs[1:]:
        if graph.levels != levels:
            raise LevelMismatchError(
                f"Graphs must share their levels: {[k.value for k in levels]} vs {[k.value for k in graph.levels]}."
            )
    return levels


def _value_order(graphs: list[AugmentedGraph], level: LevelKind, feature_name: str) -> list[str]:
    """Group values ordered by how many graphs carry them, then lexicographically."""
    counts = Counter(
        proto.feature_value
        for graph in graphs
        for proto in graph.prototypes
        if proto.level is level and proto.feature_name == feature_name
    )
    return sorted(counts, key=lambda value: (-counts[value], value))


def build_partition_map(graphs: list[AugmentedGraph]) -> PartitionMap:
    levels = _check_levels(graphs)
    partitions: list[Partition] = []
    start = 0
    for kind in levels:
        size = max(len(graph.level_instances(kind)) for graph in graphs)
        partitions.append(Partition(kind="instance", level=kind, start=start, size=size))
        start += size

    groups = sorted(
        {(proto.level, proto.feature_name) for graph in graphs for proto in graph.prototypes},
        key=lambda group: (group[0].rank, group[1]),
    )
    for level, feature_name in groups:
        size = max(
            sum(1 for proto in graph.prototypes if proto.level is level and proto.feature_name == feature_name)
            for graph in graphs
        )
        partitions.append(Partition(kind="prototype", level=level, feature_name=feature_name, start=start, size=size))
        start += size
    return PartitionMap(levels=levels, partitions=tuple(partitions))


def _rows_for(graph: AugmentedGraph, pmap: PartitionMap, orders: dict[tuple[LevelKind, str], list[str]]) -> dict[str, int]:
    rows: dict[str, int] = {}
    for partition in pmap.partitions:
        if partition.kind == "instance":
            members = chain_order(graph, partition.level, strict=False)
            for offset, node_id in enumerate(members):
                rows[node_id] = partition.start + offset
        else:
            present = {
                proto.feature_value: proto.id
                for proto in graph.prototypes
                if proto.level is partition.level and proto.feature_name == partition.feature_name
            }
            slot = partition.start
            for value in orders[(partition.level, partition.feature_name)]:
                if value in present:
                    rows[present[value]] = slot
                    slot += 1
    return rows


def to_padded(graphs: list[AugmentedGraph]) -> list[PaddedMatrix]:
    """Pads every graph onto one shared partition map."""
    pmap = build_partition_map(graphs)
    orders = {
        (p.level, p.feature_name): _value_order(graphs, p.level, p.feature_name)
        for p in pmap.partitions
        if p.kind == "prototype"
    }
    matrices = []
    for graph in graphs:
        rows = _rows_for(graph, pmap, orders)
        adjacency = np.zeros((pmap.size, pmap.size), dtype=np.uint8)
        for source, target in graph.edges:
            adjacency[rows[source], rows[target]] = 1
        labels: list[Optional[str]] = [None] * pmap.size
        node_ids: list[Optional[str]] = [None] * pmap.size
        for node in graph.instances:
            labels[rows[node.id]] = node.label
            node_ids[rows[node.id]] = node.id
        for proto in graph.prototypes:
            labels[rows[proto.id]] = proto.feature_value
            node_ids[rows[proto.id]] = proto.id
        matrices.append(
            PaddedMatrix(
                adjacency=adjacency,
                partition_map=pmap,
                row_labels=tuple(labels),
                node_ids=tuple(node_ids),
                title=graph.title,
            )
        )
    return matrices


def to_padded_pair(first: AugmentedGraph, second: AugmentedGraph) -> tuple[PaddedMatrix, PaddedMatrix]:
    padded = to_padded([first, second])
    return padded[0], padded[1]


def structural_mask(pmap: PartitionMap) -> np.ndarray:
    """Cells an edge may occupy without breaking the global edge rules."""
    n = pmap.size
    mask = np.zeros((n, n), dtype=bool)
    levels = list(pmap.levels)
    for source in pmap.partitions:
        for target in pmap.partitions:
            if target.kind != "instance":
                continue
            if source.kind == "instance":
                gap = levels.index(target.level) - levels.index(source.level)
                allowed = gap in (0, 1)
            else:
                allowed = source.level is target.level
            if allowed:
                mask[source.start:source.stop, target.start:target.stop] = True
    np.fill_diagonal(mask, False)
    return mask


def to_augmented(matrix: PaddedMatrix) -> AugmentedGraph:
    """Active rows become nodes. Prototype rows sharing a value collapse into one node."""
    pmap = matrix.partition_map
    active = matrix.active
    row_node: dict[int, str] = {}
    instances: list[AugmentedInstance] = []
    prototypes: dict[str, PrototypeNode] = {}

    for partition in pmap.partitions:
        for row in partition.rows:
            if not active[row]:
                continue
            if partition.kind == "instance":
                node_id = matrix.node_ids[row] or f"{partition.level.value}-r{row}"
                instances.append(AugmentedInstance(id=node_id, level=partition.level))
                row_node[row] = node_id
                continue
            value = matrix.row_labels[row]
            if value is None:
                raise InputError(f"Prototype row {row} in {partition.name} carries edges but no value.")
            proto = PrototypeNode(level=partition.level, feature_name=partition.feature_name, feature_value=value)
            if proto.id in prototypes:
                logger.debug(f"Merging duplicate prototype row {row} into {proto.id}.")
            prototypes[proto.id] = proto
            row_node[row] = proto.id

    sources, targets = np.nonzero(matrix.adjacency)
    edges = frozenset((row_node[int(s)], row_node[int(t)]) for s, t in zip(sources, targets))
    return AugmentedGraph(
        levels=pmap.levels,
        instances=tuple(instances),
        prototypes=tuple(sorted(prototypes.values(), key=lambda proto: proto.sort_key)),
        edges=edges,
        title=matrix.title,
    )


def dump_matrix(matrix: PaddedMatrix) -> MatrixDump:
    sources, targets = np.nonzero(matrix.adjacency)
    return MatrixDump(
        title=matrix.title,
        size=matrix.size,
        levels=[kind.value for kind in matrix.partition_map.levels],
        partitions=[
            PartitionDump(kind=p.kind, level=p.level.value, feature_name=p.feature_name, start=p.start, size=p.size)
            for p in matrix.partition_map.partitions
        ],
        row_labels=list(matrix.row_labels),
        node_ids=list(matrix.node_ids),
        edges=sorted((int(s), int(t)) for s, t in zip(sources, targets)),
    )


def load_matrix(dump: MatrixDump) -> PaddedMatrix:
    pmap = PartitionMap(
        levels=tuple(LevelKind(value) for value in dump.levels),
        partitions=tuple(
            Partition(kind=p.kind, level=LevelKind(p.level), feature_name=p.feature_name, start=p.start, size=p.size)
            for p in dump.partitions
        ),
    )
    if pmap.size != dump.size or len(dump.row_labels) != dump.size:
        raise InputError(f"Matrix dump is inconsistent: size {dump.size}, partitions cover {pmap.size} rows.")
    adjacency = np.zeros((dump.size, dump.size), dtype=np.uint8)
    for source, target in dump.edges:
        if not (0 <= source < dump.size and 0 <= target < dump.size):
            raise InputError(f"Matrix edge ({source}, {target}) lies outside the {dump.size}x{dump.size} matrix.")
        adjacency[source, target] = 1
    node_ids = tuple(dump.node_ids) if dump.node_ids else (None,) * dump.size
    return PaddedMatrix(
        adjacency=adjacency,
        partition_map=pmap,
        row_labels=tuple(dump.row_labels),
        node_ids=node_ids,
        title=dump.title,
    )
