"""Common connected k-node subgraphs of a corpus and their containment in a centroid."""
import itertools
import logging
from typing import Iterator, Optional

import networkx as nx
from networkx.algorithms import isomorphism
from pydantic import BaseModel, ConfigDict, Field

from annealing.workers import parallel_map
from errors import InputError, SubgraphOverflowError
from graph.model import AugmentedGraph, EdgeRole

logger = logging.getLogger(__name__)

MIN_SIZE = 2
MAX_SIZE = 5
DEFAULT_CAP = 1_000_000


class LabeledSubgraph(BaseModel):
    """Canonical form: nodes numbered in label order, edges the lexicographically least list."""

    model_config = ConfigDict(frozen=True)

    labels: tuple[str, ...]
    edges: tuple[tuple[int, int], ...]

    @property
    def size(self) -> int:
        return len(self.labels)

    def role(self, edge: tuple[int, int]) -> EdgeRole:
        source, target = (self.labels[i] for i in edge)
        if ":" in source:
            return EdgeRole.PROTOTYPE
        return EdgeRole.CHAIN if source == target else EdgeRole.HIERARCHY

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        for index, label in enumerate(self.labels):
            graph.add_node(index, label=label)
        graph.add_edges_from(self.edges)
        return graph

    def to_dot(self, name: str = "subgraph") -> str:
        lines = [f'digraph "{name}" {{']
        for index, label in enumerate(self.labels):
            shape = "box" if ":" in label else "ellipse"
            lines.append(f'  n{index} [label="{label}", shape={shape}];')
        for source, target in self.edges:
            lines.append(f"  n{source} -> n{target} [label={self.role((source, target)).value}];")
        lines.append("}")
        return "\n".join(lines) + "\n"


def node_labels(graph: AugmentedGraph) -> dict[str, str]:
    """Instances are labeled by level code, prototypes by feature name and value."""
    labels = {node.id: node.label for node in graph.instances}
    labels.update({proto.id: proto.label for proto in graph.prototypes})
    return labels


def to_networkx(graph: AugmentedGraph) -> nx.DiGraph:
    digraph = nx.DiGraph()
    for node_id, label in node_labels(graph).items():
        digraph.add_node(node_id, label=label)
    digraph.add_edges_from(graph.edges)
    return digraph


def canonical_form(labels: list[str], edges: set[tuple[int, int]]) -> LabeledSubgraph:
    """Tries every relabeling that keeps labels sorted and keeps the least edge list."""
    order = sorted(range(len(labels)), key=lambda i: labels[i])
    groups = [list(members) for _, members in itertools.groupby(order, key=lambda i: labels[i])]
    best: Optional[tuple[tuple[int, int], ...]] = None
    for arrangement in itertools.product(*(itertools.permutations(group) for group in groups)):
        position = {node: index for index, node in enumerate(itertools.chain.from_iterable(arrangement))}
        candidate = tuple(sorted((position[s], position[t]) for s, t in edges))
        if best is None or candidate < best:
            best = candidate
    return LabeledSubgraph(labels=tuple(sorted(labels)), edges=best or ())


def connected_node_sets(graph: nx.DiGraph, size: int) -> Iterator[frozenset]:
    """Every connected (ignoring direction) node set of the given size, each exactly once."""
    undirected = graph.to_undirected(as_view=True)
    order = {node: index for index, node in enumerate(sorted(graph.nodes))}

    def extend(subset: set, extension: set, neighborhood: set, root) -> Iterator[frozenset]:
        if len(subset) == size:
            yield frozenset(subset)
            return
        extension = set(extension)
        while extension:
            node = min(extension, key=order.__getitem__)
            extension.discard(node)
            exclusive = {
                other
                for other in undirected[node]
                if order[other] > order[root] and other not in subset and other not in neighborhood
            }
            yield from extend(subset | {node}, extension | exclusive, neighborhood | set(undirected[node]), root)

    for root in sorted(graph.nodes, key=order.__getitem__):
        start = {node for node in undirected[root] if order[node] > order[root]}
        yield from extend({root}, start, set(undirected[root]) | {root}, root)


def induced_subgraph(graph: nx.DiGraph, nodes: frozenset) -> LabeledSubgraph:
    members = sorted(nodes)
    index = {node: i for i, node in enumerate(members)}
    labels = [graph.nodes[node]["label"] for node in members]
    edges = {(index[s], index[t]) for s, t in graph.subgraph(members).edges}
    return canonical_form(labels, edges)


def subgraph_catalog(graph: AugmentedGraph, size: int = MAX_SIZE, cap: int = DEFAULT_CAP) -> set[LabeledSubgraph]:
    digraph = to_networkx(graph)
    catalog: set[LabeledSubgraph] = set()
    for count, nodes in enumerate(connected_node_sets(digraph, size), start=1):
        if count > cap:
            raise SubgraphOverflowError(f"{graph.title or 'graph'} has more than {cap} connected {size}-node subgraphs.")
        catalog.add(induced_subgraph(digraph, nodes))
    logger.debug(f"{graph.title or 'graph'}: {len(catalog)} distinct connected {size}-node subgraphs.")
    return catalog


def _catalog_task(task: tuple[AugmentedGraph, int, int]) -> set[LabeledSubgraph]:
    return subgraph_catalog(*task)


def _sort_key(subgraph: LabeledSubgraph) -> tuple:
    return (subgraph.labels, subgraph.edges)


def common_subgraphs(
    corpus: list[AugmentedGraph],
    size: int = MAX_SIZE,
    cap: int = DEFAULT_CAP,
    workers: int = 1,
) -> list[LabeledSubgraph]:
    """Induced connected subgraphs present in every member, in canonical order.

    Members are compared by their induced catalogs: a pattern is common when every
    member holds a node set whose edges are exactly the pattern's. Containment in a centroid (see
    `embeds`) is looser and accepts extra host edges; every common pattern therefore
    embeds in each member, and a centroid missing one lacks structure every member has.
    """
    if not corpus:
        raise InputError("Cannot mine an empty corpus.", stage="mine")
    if not MIN_SIZE <= size <= MAX_SIZE:
        raise InputError(f"Subgraph size must lie in [{MIN_SIZE}, {MAX_SIZE}], got {size}.", stage="mine")
    ordered = sorted(corpus, key=lambda graph: (len(graph.instances) + len(graph.prototypes), graph.edge_count))
    catalogs = parallel_map(_catalog_task, [(graph, size, cap) for graph in ordered], workers)
    common = set(catalogs[0])
    for catalog in catalogs[1:]:
        common &= catalog
        if not common:
            break
    logger.info(f"{len(common)} connected {size}-node subgraphs are common to all {len(corpus)} graphs.")
    return sorted(common, key=_sort_key)


def embeds(pattern: LabeledSubgraph, host: nx.DiGraph) -> bool:
    """Label- and direction-respecting embedding; extra host edges are allowed."""
    matcher = isomorphism.DiGraphMatcher(
        host, pattern.to_networkx(), node_match=isomorphism.categorical_node_match("label", None)
    )
    return matcher.subgraph_is_monomorphic()


def containment_rate(common: list[LabeledSubgraph], centroid: AugmentedGraph) -> float:
    """Percentage of the subgraphs that embed in the centroid; an empty set counts as 100."""
    if not common:
        logger.warning("No common subgraphs to look for; containment is vacuously 100%.")
        return 100.0
    host = to_networkx(centroid)
    found = sum(1 for pattern in common if embeds(pattern, host))
    return 100.0 * found / len(common)


class MiningReport(BaseModel):
    size: int
    corpus_size: int
    common_count: int
    containment: Optional[float] = None
    vacuous: bool = False
    missing: list[int] = Field(default_factory=list)
    samples: list[str] = Field(default_factory=list)


def mining_report(
    corpus: list[AugmentedGraph],
    centroid: Optional[AugmentedGraph] = None,
    size: int = MAX_SIZE,
    cap: int = DEFAULT_CAP,
    workers: int = 1,
    samples: int = 5,
) -> MiningReport:
    common = common_subgraphs(corpus, size, cap, workers)
    report = MiningReport(
        size=size,
        corpus_size=len(corpus),
        common_count=len(common),
        vacuous=not common,
        samples=[pattern.to_dot(f"S{size}_{i}") for i, pattern in enumerate(common[:samples])],
    )
    if centroid is not None:
        report.containment = containment_rate(common, centroid)
        host = to_networkx(centroid)
        report.missing = [i for i, pattern in enumerate(common) if not embeds(pattern, host)]
    return report
