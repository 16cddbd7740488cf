import logging
from typing import Iterable, Optional

from errors import IngestError, InputError
from graph.model import InstanceNode, Level, LevelKind, StructuralTemporalGraph
from graph.validation import validate_stg
from schemas import AnalysisRecordFile, Span

logger = logging.getLogger(__name__)

# Upstream analyzers disagree on boundaries by a few milliseconds.
BOUNDARY_TOLERANCE = 0.010


def _sorted_spans(kind: LevelKind, spans: list[Span]) -> list[tuple[Span, dict[str, str]]]:
    keyed = []
    for position, span in enumerate(spans):
        if span.end <= span.start:
            raise IngestError(f"Malformed {kind.value} span #{position}: end {span.end} <= start {span.start}.")
        if span.start < 0:
            raise IngestError(f"Malformed {kind.value} span #{position}: negative start {span.start}.")
        features = span.features()
        label = ",".join(f"{name}:{value}" for name, value in features.items())
        keyed.append(((span.start, span.end, label, position), span, features))
    keyed.sort(key=lambda item: item[0])
    return [(span, features) for _, span, features in keyed]


def _merge_repeats(kind: LevelKind, spans: list[tuple[Span, dict[str, str]]]) -> list[tuple[Span, dict[str, str]]]:
    """Joins consecutive spans with identical labels on levels whose neighbors must differ."""
    if not kind.distinct_neighbors or not spans:
        return spans
    merged = [spans[0]]
    for span, features in spans[1:]:
        previous, previous_features = merged[-1]
        if features == previous_features:
            logger.debug(f"Merging repeated {kind.value} span {features} at {span.start:.3f}s.")
            merged[-1] = (previous.model_copy(update={"end": max(previous.end, span.end)}), previous_features)
        else:
            merged.append((span, features))
    return merged


def _build_level(kind: LevelKind, spans: list[Span]) -> Level:
    ordered = _merge_repeats(kind, _sorted_spans(kind, spans))
    nodes = tuple(
        InstanceNode(
            id=f"{kind.value}-{index}",
            level=kind,
            chain_index=index,
            start=span.start,
            end=span.end,
            features=features,
        )
        for index, (span, features) in enumerate(ordered)
    )
    return Level(kind=kind, nodes=nodes)


def _holds_start(parent: InstanceNode, child: InstanceNode) -> bool:
    return parent.start - BOUNDARY_TOLERANCE <= child.start < parent.end


def _holds_end(parent: InstanceNode, child: InstanceNode) -> bool:
    return parent.start < child.end <= parent.end + BOUNDARY_TOLERANCE


def _choose_parents(
    child: InstanceNode, upper: list[InstanceNode], floor: int, is_head: bool, is_tail: bool
) -> tuple[int, int]:
    """Indices of the first and last parent of child; equal when one upper span holds it whole.

    Parents sit at or after floor so the ordering rules hold under an overlapping upper level.
    Chain ends keep to the ends of the upper chain whenever those spans hold them.
    """
    starts = [j for j, parent in enumerate(upper) if _holds_start(parent, child)]
    ends = [j for j, parent in enumerate(upper) if _holds_end(parent, child)]
    if not starts or not ends:
        raise IngestError(
            f"{child.level.value} span [{child.start:.3f}, {child.end:.3f}] is not covered by any "
            f"{upper[0].level.value} span; the analyses are inconsistent."
        )
    starts = [j for j in starts if j >= floor] or starts
    if is_head and 0 in starts:
        starts = [0]
    if is_tail and len(upper) - 1 in ends:
        ends = [len(upper) - 1]

    whole = [j for j in starts if j in ends]
    if whole:
        return whole[0], whole[0]
    first = starts[-1]
    last = next((j for j in ends if j > first), ends[-1])
    return min(first, last), max(first, last)


def link_levels(upper: Level, lower: Level) -> set[tuple[str, str]]:
    """Temporal containment edges: one parent when nested, two when the child straddles a boundary."""
    edges: set[tuple[str, str]] = set()
    upper_nodes = list(upper.nodes)
    floor = 0
    for position, child in enumerate(lower.nodes):
        first, last = _choose_parents(
            child, upper_nodes, floor, is_head=position == 0, is_tail=position == len(lower.nodes) - 1
        )
        skipped = [
            node.id
            for node in upper_nodes[first + 1 : last]
            if node.start >= child.start - BOUNDARY_TOLERANCE and node.end <= child.end + BOUNDARY_TOLERANCE
        ]
        if skipped:
            logger.warning(f"{child.id} also covers {skipped}; only its first and last {upper.kind.value} spans become parents.")
        edges.add((upper_nodes[first].id, child.id))
        edges.add((upper_nodes[last].id, child.id))
        floor = first if lower.kind.overlapping else last
    return edges


def ingest(record: AnalysisRecordFile, levels_to_include: Optional[Iterable[LevelKind]] = None) -> StructuralTemporalGraph:
    """Builds a compressed STG from an analysis record, keeping the requested levels in hierarchy order."""
    wanted = set(levels_to_include) if levels_to_include is not None else None
    levels: list[Level] = []
    for kind in LevelKind:
        spans = getattr(record.levels, kind.value)
        if wanted is not None and kind not in wanted:
            continue
        if spans is None:
            if wanted is not None:
                raise IngestError(f"Requested level '{kind.value}' is missing from the record.")
            continue
        if not spans:
            raise IngestError(f"Level '{kind.value}' has no spans.")
        levels.append(_build_level(kind, spans))

    if not levels:
        raise IngestError("Record contains none of the requested levels.")

    edges: set[tuple[str, str]] = set()
    for upper, lower in zip(levels, levels[1:]):
        edges |= link_levels(upper, lower)

    graph = StructuralTemporalGraph(levels=tuple(levels), edges=frozenset(edges), title=record.piece.title)
    report = validate_stg(graph)
    if not report.ok:
        raise IngestError(f"Analyses do not form a valid STG: {report.summary()}")
    logger.info(
        f"Ingested '{record.piece.title or 'untitled'}': {len(graph.nodes)} nodes, {len(graph.edges)} edges, "
        f"levels {[kind.value for kind in graph.kinds]}."
    )
    return graph


def levels_ablate(graph: StructuralTemporalGraph, keep_top_n: int) -> StructuralTemporalGraph:
    """Keeps the top keep_top_n levels and the edges among them."""
    if not 1 <= keep_top_n <= len(graph.levels):
        raise InputError(f"keep_top_n must lie in [1, {len(graph.levels)}], got {keep_top_n}.")
    levels = graph.levels[:keep_top_n]
    kept = {node.id for level in levels for node in level.nodes}
    edges = frozenset(edge for edge in graph.edges if edge[0] in kept and edge[1] in kept)
    return StructuralTemporalGraph(levels=levels, edges=edges, title=graph.title)
