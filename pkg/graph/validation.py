"""Structural rules of STGs in declarative form.

Rule ids:
    G1 no self-loops
    G2 no instance->prototype or prototype->prototype edges
    G3 prototype edges only into instances carrying that feature
    G4 hierarchy edges point downwards
    G5 hierarchy edges join adjacent levels only
    I1 every non-top instance has 1 or 2 parents in the level above
    I2 each level forms one linear chain
    I3 chain ends hang from the ends of the chain above
    I4 first parent of node i never precedes the last parent of node i-1 (non-overlapping levels)
    I5 first parent of node i never precedes the first parent of node i-1
    P1 exactly one prototype parent per feature
    P2 adjacent segmentation/key/chord nodes differ in their prototype parent sets
"""
import logging
from dataclasses import dataclass, field
from typing import Union

from pydantic import BaseModel, Field

from graph.model import AugmentedGraph, LevelKind, StructuralTemporalGraph, is_legal_feature

logger = logging.getLogger(__name__)


class Violation(BaseModel):
    rule: str
    message: str
    nodes: tuple[str, ...] = ()
    edges: tuple[tuple[str, str], ...] = ()


class ValidationReport(BaseModel):
    violations: list[Violation] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def rules(self) -> set[str]:
        return {violation.rule for violation in self.violations}

    def summary(self, limit: int = 5) -> str:
        if self.ok:
            return "valid"
        shown = "; ".join(f"{v.rule}: {v.message}" for v in self.violations[:limit])
        extra = len(self.violations) - limit
        return shown + (f" (+{extra} more)" if extra > 0 else "")


@dataclass
class _View:
    """Graph-kind independent picture of the facts the rules inspect."""

    kinds: list[LevelKind]
    position: dict[str, int]
    chains: list[list[str]]
    broken_chains: set[int] = field(default_factory=set)
    instance_parents: dict[str, list[str]] = field(default_factory=dict)
    prototype_parents: dict[str, list[tuple[str, str]]] = field(default_factory=dict)


def _add(report: ValidationReport, rule: str, message: str, nodes=(), edges=()) -> None:
    report.violations.append(Violation(rule=rule, message=message, nodes=tuple(nodes), edges=tuple(edges)))


def _check_hierarchy_edge(report: ValidationReport, edge: tuple[str, str], position: dict[str, int]) -> bool:
    """G4/G5 on an instance-to-instance edge across levels. True when the edge is a legal hierarchy edge."""
    source, target = edge
    if position[source] > position[target]:
        _add(report, "G4", f"edge {source} -> {target} points up the hierarchy", edges=[edge])
        return False
    if position[target] - position[source] > 1:
        _add(report, "G5", f"edge {source} -> {target} skips a level", edges=[edge])
        return False
    return True


def _compressed_view(graph: StructuralTemporalGraph, report: ValidationReport) -> _View:
    kinds = list(graph.kinds)
    position = graph.level_position()
    nodes = graph.node_map()
    view = _View(kinds=kinds, position=position, chains=[])

    for index, level in enumerate(graph.levels):
        chain = sorted(level.nodes, key=lambda node: (node.chain_index, node.id))
        if not chain:
            _add(report, "I2", f"level {level.kind.value} has no nodes")
            view.broken_chains.add(index)
        if [node.chain_index for node in chain] != list(range(len(chain))):
            _add(report, "I2", f"chain indices of {level.kind.value} are not consecutive from 0", nodes=[n.id for n in chain])
            view.broken_chains.add(index)
        for node in chain:
            if node.level is not level.kind:
                _add(report, "I2", f"node {node.id} of kind {node.level.value} sits in level {level.kind.value}", nodes=[node.id])
            if node.has_interval and node.end <= node.start:
                _add(report, "I2", f"node {node.id} has an empty interval", nodes=[node.id])
        for previous, current in zip(chain, chain[1:]):
            if previous.has_interval and current.has_interval and (previous.start, previous.end) > (current.start, current.end):
                _add(report, "I2", f"{current.id} starts before its chain predecessor {previous.id}", nodes=[previous.id, current.id])
        view.chains.append([node.id for node in chain])

        for node in chain:
            view.prototype_parents[node.id] = sorted(node.features.items())
            for name, value in node.features.items():
                if not is_legal_feature(level.kind, name, value):
                    _add(report, "P1", f"{node.id} carries illegal feature {name}:{value}", nodes=[node.id])

    for edge in sorted(graph.edges):
        source, target = edge
        if source not in nodes or target not in nodes:
            _add(report, "G2", f"edge {source} -> {target} touches an unknown node", edges=[edge])
            continue
        if source == target:
            _add(report, "G1", f"self-loop on {source}", nodes=[source], edges=[edge])
            continue
        if position[source] == position[target]:
            _add(report, "I2", f"compressed graphs keep chains implicit; explicit edge {source} -> {target}", edges=[edge])
            continue
        if _check_hierarchy_edge(report, edge, position):
            view.instance_parents.setdefault(target, []).append(source)
    return view


def _walk_chain(level_nodes: list[str], chain_edges: list[tuple[str, str]]) -> tuple[list[str], bool]:
    """Orders a level by its chain edges. Returns (order, intact)."""
    successors: dict[str, list[str]] = {node: [] for node in level_nodes}
    predecessors: dict[str, list[str]] = {node: [] for node in level_nodes}
    for source, target in chain_edges:
        successors[source].append(target)
        predecessors[target].append(source)
    heads = [node for node in level_nodes if not predecessors[node]]
    branching = any(len(v) > 1 for v in successors.values()) or any(len(v) > 1 for v in predecessors.values())
    if len(heads) != 1 or branching or len(chain_edges) != len(level_nodes) - 1:
        return list(level_nodes), False
    order = [heads[0]]
    while successors[order[-1]]:
        order.append(successors[order[-1]][0])
        if len(order) > len(level_nodes):
            return list(level_nodes), False
    return order, len(order) == len(level_nodes)


def _augmented_view(graph: AugmentedGraph, report: ValidationReport) -> _View:
    kinds = list(graph.levels)
    instances = graph.instance_map()
    prototypes = graph.prototype_map()
    position = {}
    for node in graph.instances:
        if node.level not in kinds:
            _add(report, "G5", f"instance {node.id} belongs to level {node.level.value} absent from the graph", nodes=[node.id])
            continue
        position[node.id] = kinds.index(node.level)
    view = _View(kinds=kinds, position=position, chains=[])
    chain_edges: dict[int, list[tuple[str, str]]] = {index: [] for index in range(len(kinds))}

    for edge in sorted(graph.edges):
        source, target = edge
        if source == target:
            _add(report, "G1", f"self-loop on {source}", nodes=[source], edges=[edge])
            continue
        if target in prototypes or source not in instances and source not in prototypes or target not in instances:
            _add(report, "G2", f"edge {source} -> {target} does not end in an instance", edges=[edge])
            continue
        if source in prototypes:
            proto = prototypes[source]
            if proto.level is not instances[target].level or proto.feature_name not in proto.level.feature_names:
                _add(report, "G3", f"prototype {proto.label} cannot describe {target}", edges=[edge])
                continue
            view.prototype_parents.setdefault(target, []).append((proto.feature_name, proto.feature_value))
            continue
        if source not in position or target not in position:
            continue
        if position[source] == position[target]:
            chain_edges[position[source]].append(edge)
        elif _check_hierarchy_edge(report, edge, position):
            view.instance_parents.setdefault(target, []).append(source)

    for index, kind in enumerate(kinds):
        level_nodes = [node.id for node in graph.instances if node.level is kind]
        if not level_nodes:
            _add(report, "I2", f"level {kind.value} has no nodes")
            view.broken_chains.add(index)
            view.chains.append([])
            continue
        order, intact = _walk_chain(level_nodes, chain_edges[index])
        if not intact:
            _add(report, "I2", f"level {kind.value} does not form a single linear chain", nodes=level_nodes, edges=chain_edges[index])
            view.broken_chains.add(index)
        view.chains.append(order)

    for proto in graph.prototypes:
        if not is_legal_feature(proto.level, proto.feature_name, proto.feature_value):
            _add(report, "P1", f"prototype {proto.id} has an illegal value", nodes=[proto.id])
    return view


def _check_instance_rules(view: _View, report: ValidationReport) -> None:
    chain_position = {node: rank for chain in view.chains for rank, node in enumerate(chain)}

    for index in range(1, len(view.kinds)):
        kind = view.kinds[index]
        chain = view.chains[index]
        upper = view.chains[index - 1]
        for node in chain:
            count = len(set(view.instance_parents.get(node, [])))
            if not 1 <= count <= 2:
                _add(report, "I1", f"{node} has {count} parents in the level above", nodes=[node])

        if index in view.broken_chains or index - 1 in view.broken_chains or not chain or not upper:
            continue
        if upper[0] not in view.instance_parents.get(chain[0], []):
            _add(report, "I3", f"chain head {chain[0]} does not hang from {upper[0]}", nodes=[chain[0], upper[0]])
        if upper[-1] not in view.instance_parents.get(chain[-1], []):
            _add(report, "I3", f"chain tail {chain[-1]} does not hang from {upper[-1]}", nodes=[chain[-1], upper[-1]])

        for previous, current in zip(chain, chain[1:]):
            previous_parents = [chain_position[p] for p in view.instance_parents.get(previous, [])]
            current_parents = [chain_position[p] for p in view.instance_parents.get(current, [])]
            if not previous_parents or not current_parents:
                continue
            if not kind.overlapping and min(current_parents) < max(previous_parents):
                _add(report, "I4", f"first parent of {current} precedes the last parent of {previous}", nodes=[previous, current])
            if min(current_parents) < min(previous_parents):
                _add(report, "I5", f"first parent of {current} precedes the first parent of {previous}", nodes=[previous, current])


def _check_prototype_rules(view: _View, report: ValidationReport) -> None:
    for index, kind in enumerate(view.kinds):
        chain = view.chains[index]
        for node in chain:
            parents = view.prototype_parents.get(node, [])
            names = [name for name, _ in parents]
            for slot in kind.feature_slots:
                count = sum(1 for name in names if name in slot)
                if count != 1:
                    _add(report, "P1", f"{node} has {count} prototype parents for {'/'.join(slot)}", nodes=[node])
        if not kind.distinct_neighbors or index in view.broken_chains:
            continue
        for previous, current in zip(chain, chain[1:]):
            if sorted(view.prototype_parents.get(previous, [])) == sorted(view.prototype_parents.get(current, [])):
                _add(report, "P2", f"adjacent {kind.value} nodes {previous} and {current} share all prototypes", nodes=[previous, current])


def validate_stg(graph: Union[StructuralTemporalGraph, AugmentedGraph]) -> ValidationReport:
    """Checks every structural rule; never raises."""
    report = ValidationReport()
    if isinstance(graph, AugmentedGraph):
        view = _augmented_view(graph, report)
    else:
        view = _compressed_view(graph, report)
    _check_instance_rules(view, report)
    _check_prototype_rules(view, report)
    if not report.ok:
        logger.debug(f"Validation found {len(report.violations)} violations: {report.summary()}")
    return report
