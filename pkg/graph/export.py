"""JSON dumps and DOT export of compressed and augmented graphs."""
import logging
from typing import Union

from errors import InputError
from graph.model import (
    AugmentedGraph,
    AugmentedInstance,
    EdgeRole,
    edge_role,
    InstanceNode,
    Level,
    LevelKind,
    PrototypeNode,
    StructuralTemporalGraph,
)
from schemas import EdgeDump, GraphDump, NodeDump

logger = logging.getLogger(__name__)

_DOT_COLORS = {
    LevelKind.SEGMENTATION: "mediumpurple",
    LevelKind.MOTIF: "lightskyblue",
    LevelKind.KEY: "palegreen",
    LevelKind.CHORD: "gold",
    LevelKind.MELODY: "salmon",
}


def dump_graph(graph: Union[StructuralTemporalGraph, AugmentedGraph]) -> GraphDump:
    """Deterministic dump: nodes in level/chain order, edges sorted."""
    if isinstance(graph, AugmentedGraph):
        nodes = [NodeDump(id=node.id, role="instance", level=node.level.value) for node in graph.instances]
        nodes += [
            NodeDump(
                id=proto.id,
                role="prototype",
                level=proto.level.value,
                feature_name=proto.feature_name,
                feature_value=proto.feature_value,
            )
            for proto in graph.prototypes
        ]
        instances, prototypes = graph.instance_map(), graph.prototype_map()
        edges = []
        for source, target in sorted(graph.edges):
            role = edge_role((source, target), instances, prototypes)
            edges.append(EdgeDump(source=source, target=target, role=role.value if role else None))
        return GraphDump(kind="augmented", title=graph.title, levels=[k.value for k in graph.levels], nodes=nodes, edges=edges)

    nodes = [
        NodeDump(
            id=node.id,
            level=node.level.value,
            chain_index=node.chain_index,
            start=node.start,
            end=node.end,
            features=dict(node.features),
        )
        for position in range(len(graph.levels))
        for node in graph.chain(position)
    ]
    edges = [EdgeDump(source=s, target=t, role=EdgeRole.HIERARCHY.value) for s, t in sorted(graph.edges)]
    return GraphDump(kind="stg", title=graph.title, levels=[k.value for k in graph.kinds], nodes=nodes, edges=edges)


def load_graph(dump: GraphDump) -> Union[StructuralTemporalGraph, AugmentedGraph]:
    try:
        kinds = tuple(LevelKind(value) for value in dump.levels)
    except ValueError as e:
        raise InputError(f"Unknown level in graph dump: {e}")
    edges = frozenset((edge.source, edge.target) for edge in dump.edges)

    if dump.kind == "augmented":
        instances = tuple(
            AugmentedInstance(id=node.id, level=LevelKind(node.level)) for node in dump.nodes if node.role == "instance"
        )
        prototypes = []
        for node in dump.nodes:
            if node.role != "prototype":
                continue
            if node.feature_name is None or node.feature_value is None:
                raise InputError(f"Prototype node {node.id} lacks its feature name or value.")
            prototypes.append(
                PrototypeNode(level=LevelKind(node.level), feature_name=node.feature_name, feature_value=node.feature_value)
            )
        return AugmentedGraph(levels=kinds, instances=instances, prototypes=tuple(prototypes), edges=edges, title=dump.title)

    by_level: dict[LevelKind, list[InstanceNode]] = {kind: [] for kind in kinds}
    for node in dump.nodes:
        kind = LevelKind(node.level)
        if kind not in by_level:
            raise InputError(f"Node {node.id} sits in level {kind.value}, which the dump does not declare.")
        if node.chain_index is None:
            raise InputError(f"Compressed node {node.id} has no chain_index.")
        by_level[kind].append(
            InstanceNode(
                id=node.id,
                level=kind,
                chain_index=node.chain_index,
                start=node.start,
                end=node.end,
                features=node.features,
            )
        )
    levels = tuple(Level(kind=kind, nodes=tuple(by_level[kind])) for kind in kinds)
    return StructuralTemporalGraph(levels=levels, edges=edges, title=dump.title)


def _quote(text: str) -> str:
    return '"' + text.replace('"', '\\"') + '"'


def to_dot(graph: Union[StructuralTemporalGraph, AugmentedGraph]) -> str:
    """Graphviz source. Levels are ranked together; layout beyond that is left to dot."""
    lines = [f"digraph {_quote(graph.title or 'stg')} {{", "  rankdir=TB;", "  node [style=filled];"]
    if isinstance(graph, AugmentedGraph):
        for kind in graph.levels:
            members = graph.level_instances(kind)
            lines.append("  { rank=same; " + " ".join(_quote(node.id) for node in members) + " }")
            for node in members:
                lines.append(f"  {_quote(node.id)} [label={_quote(node.label)}, fillcolor={_DOT_COLORS[kind]}];")
        for proto in graph.prototypes:
            lines.append(f"  {_quote(proto.id)} [label={_quote(proto.label)}, shape=box, fillcolor=white];")
    else:
        for position, level in enumerate(graph.levels):
            chain = graph.chain(position)
            lines.append("  { rank=same; " + " ".join(_quote(node.id) for node in chain) + " }")
            for node in chain:
                lines.append(f"  {_quote(node.id)} [label={_quote(node.label)}, fillcolor={_DOT_COLORS[level.kind]}];")
    for source, target in sorted(graph.edges):
        lines.append(f"  {_quote(source)} -> {_quote(target)};")
    lines.append("}")
    return "\n".join(lines) + "\n"
