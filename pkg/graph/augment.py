import logging

from errors import CompressError, InputError
from graph.model import (
    AugmentedGraph,
    AugmentedInstance,
    InstanceNode,
    Level,
    LevelKind,
    PrototypeNode,
    StructuralTemporalGraph,
)
from graph.validation import validate_stg

logger = logging.getLogger(__name__)


def augment(graph: StructuralTemporalGraph) -> AugmentedGraph:
    """Moves node labels into topology: one prototype per distinct feature, explicit chains per level."""
    report = validate_stg(graph)
    if not report.ok:
        raise InputError(f"Cannot augment an invalid STG: {report.summary()}", stage="augment")

    instances: list[AugmentedInstance] = []
    prototypes: set[PrototypeNode] = set()
    edges: set[tuple[str, str]] = set(graph.edges)

    for position, level in enumerate(graph.levels):
        chain = graph.chain(position)
        for node in chain:
            instances.append(AugmentedInstance(id=node.id, level=level.kind))
            for name, value in node.features.items():
                proto = PrototypeNode(level=level.kind, feature_name=name, feature_value=value)
                prototypes.add(proto)
                edges.add((proto.id, node.id))
        for previous, current in zip(chain, chain[1:]):
            edges.add((previous.id, current.id))

    augmented = AugmentedGraph(
        levels=graph.kinds,
        instances=tuple(instances),
        prototypes=tuple(sorted(prototypes, key=lambda proto: proto.sort_key)),
        edges=frozenset(edges),
        title=graph.title,
    )
    logger.debug(
        f"Augmented '{graph.title or 'untitled'}': {len(augmented.instances)} instances, "
        f"{len(augmented.prototypes)} prototypes, {augmented.edge_count} edges."
    )
    return augmented


def chain_order(graph: AugmentedGraph, kind: LevelKind, strict: bool = True) -> list[str]:
    """Instance ids of one level in chain order.

    A broken chain raises CompressError when strict, otherwise the level's
    declaration order is returned.
    """
    declared = [node.id for node in graph.level_instances(kind)]
    members = set(declared)
    successor = {source: target for source, target in graph.edges if source in members and target in members}
    has_predecessor = set(successor.values())
    heads = [node_id for node_id in declared if node_id not in has_predecessor]
    order = heads[:1]
    while order and order[-1] in successor and len(order) <= len(declared):
        order.append(successor[order[-1]])
    if len(heads) == 1 and len(order) == len(declared):
        return order
    if strict:
        raise CompressError(f"Level {kind.value} does not form a single chain ({len(heads)} heads).")
    return declared


def compress(graph: AugmentedGraph) -> StructuralTemporalGraph:
    """Folds prototypes back into labels and chains into chain_index. Intervals are not recovered."""
    report = validate_stg(graph)
    if not report.ok:
        raise CompressError(f"Cannot compress an invalid augmented graph: {report.summary()}")

    prototypes = graph.prototype_map()
    feature_parents: dict[str, dict[str, str]] = {}
    for source, target in graph.edges:
        if source in prototypes:
            proto = prototypes[source]
            feature_parents.setdefault(target, {})[proto.feature_name] = proto.feature_value

    renamed: dict[str, str] = {}
    levels: list[Level] = []
    for kind in graph.levels:
        nodes = []
        for index, old_id in enumerate(chain_order(graph, kind)):
            new_id = f"{kind.value}-{index}"
            renamed[old_id] = new_id
            found = feature_parents.get(old_id, {})
            features = {name: found[name] for name in kind.feature_names if name in found}
            nodes.append(InstanceNode(id=new_id, level=kind, chain_index=index, features=features))
        levels.append(Level(kind=kind, nodes=tuple(nodes)))

    instances = graph.instance_map()
    edges = frozenset(
        (renamed[source], renamed[target])
        for source, target in graph.edges
        if source in instances and target in instances and instances[source].level is not instances[target].level
    )
    return StructuralTemporalGraph(levels=tuple(levels), edges=edges, title=graph.title)
