from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class LevelKind(str, Enum):
    """Hierarchy levels, declared top to bottom."""

    SEGMENTATION = "segmentation"
    MOTIF = "motif"
    KEY = "key"
    CHORD = "chord"
    MELODY = "melody"

    @property
    def rank(self) -> int:
        return list(LevelKind).index(self)

    @property
    def code(self) -> str:
        return {"segmentation": "S", "motif": "P", "key": "K", "chord": "C", "melody": "M"}[self.value]

    @property
    def overlapping(self) -> bool:
        # Motifs are the only level whose spans may overlap.
        return self is LevelKind.MOTIF

    @property
    def distinct_neighbors(self) -> bool:
        # Adjacent nodes must differ in their prototype parent sets.
        return self in (LevelKind.SEGMENTATION, LevelKind.KEY, LevelKind.CHORD)

    @property
    def feature_slots(self) -> tuple[tuple[str, ...], ...]:
        """Features every node of this level carries. A slot with several names means exactly one of them."""
        return FEATURE_SLOTS[self]

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(name for slot in self.feature_slots for name in slot)


FEATURE_SLOTS: dict[LevelKind, tuple[tuple[str, ...], ...]] = {
    LevelKind.SEGMENTATION: (("section_num",),),
    LevelKind.MOTIF: (("pattern_num", "filler"),),
    LevelKind.KEY: (("relative_key_num",), ("quality",)),
    LevelKind.CHORD: (("quality",), ("degree1",), ("degree2",)),
    LevelKind.MELODY: (("abs_interval",), ("interval_sign",)),
}

CHORD_QUALITIES = ("M", "m", "d", "d7", "h7", "D7", "a", "a6", "a7")
KEY_QUALITIES = ("M", "m")
INTERVAL_SIGNS = ("+", "-")


def _is_int(value: str, minimum: Optional[int] = None, maximum: Optional[int] = None) -> bool:
    try:
        number = int(value)
    except (TypeError, ValueError):
        return False
    if str(number) != value:
        return False
    if minimum is not None and number < minimum:
        return False
    if maximum is not None and number > maximum:
        return False
    return True


def is_legal_feature(level: LevelKind, name: str, value: str) -> bool:
    """True when name is a feature of the level and value lies in its legal value set."""
    if name not in level.feature_names:
        return False
    if name in ("section_num", "pattern_num", "relative_key_num"):
        return _is_int(value, minimum=0)
    if name == "filler":
        return value == "filler"
    if name == "quality":
        return value in (KEY_QUALITIES if level is LevelKind.KEY else CHORD_QUALITIES)
    if name in ("degree1", "degree2"):
        return _is_int(value, minimum=1, maximum=12)
    if name == "abs_interval":
        return _is_int(value)
    if name == "interval_sign":
        return value in INTERVAL_SIGNS
    return False


class InstanceNode(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    level: LevelKind
    chain_index: int
    start: Optional[float] = None
    end: Optional[float] = None
    features: dict[str, str] = Field(default_factory=dict)

    @property
    def label(self) -> str:
        return ", ".join(f"{name}:{value}" for name, value in self.features.items())

    @property
    def has_interval(self) -> bool:
        return self.start is not None and self.end is not None


class Level(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: LevelKind
    nodes: tuple[InstanceNode, ...] = ()


class StructuralTemporalGraph(BaseModel):
    """Compressed STG: features live in node labels, chains in chain_index."""

    model_config = ConfigDict(frozen=True)

    levels: tuple[Level, ...]
    edges: frozenset[tuple[str, str]] = frozenset()
    title: Optional[str] = None

    @property
    def kinds(self) -> tuple[LevelKind, ...]:
        return tuple(level.kind for level in self.levels)

    @property
    def nodes(self) -> list[InstanceNode]:
        return [node for level in self.levels for node in level.nodes]

    def node_map(self) -> dict[str, InstanceNode]:
        return {node.id: node for node in self.nodes}

    def level_position(self) -> dict[str, int]:
        """Maps node id to the position of its level inside this graph (0 = top)."""
        return {node.id: position for position, level in enumerate(self.levels) for node in level.nodes}

    def parents(self, node_id: str) -> list[str]:
        return sorted(parent for parent, child in self.edges if child == node_id)

    def chain(self, position: int) -> list[InstanceNode]:
        return sorted(self.levels[position].nodes, key=lambda node: node.chain_index)


class PrototypeNode(BaseModel):
    model_config = ConfigDict(frozen=True)

    level: LevelKind
    feature_name: str
    feature_value: str

    @property
    def id(self) -> str:
        return f"{self.level.value}/{self.feature_name}:{self.feature_value}"

    @property
    def label(self) -> str:
        return f"{self.feature_name}:{self.feature_value}"

    @property
    def sort_key(self) -> tuple[int, str, str]:
        return (self.level.rank, self.feature_name, self.feature_value)


class AugmentedInstance(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    level: LevelKind

    @property
    def label(self) -> str:
        return self.level.code


class EdgeRole(str, Enum):
    HIERARCHY = "hierarchy"
    PROTOTYPE = "prototype"
    CHAIN = "chain"


class AugmentedGraph(BaseModel):
    """STG with features as prototype parents and chains as explicit edges."""

    model_config = ConfigDict(frozen=True)

    levels: tuple[LevelKind, ...]
    instances: tuple[AugmentedInstance, ...]
    prototypes: tuple[PrototypeNode, ...] = ()
    edges: frozenset[tuple[str, str]] = frozenset()
    title: Optional[str] = None

    def instance_map(self) -> dict[str, AugmentedInstance]:
        return {node.id: node for node in self.instances}

    def prototype_map(self) -> dict[str, PrototypeNode]:
        return {proto.id: proto for proto in self.prototypes}

    def level_instances(self, kind: LevelKind) -> list[AugmentedInstance]:
        return [node for node in self.instances if node.level is kind]

    def role_of(self, edge: tuple[str, str]) -> Optional[EdgeRole]:
        """Role implied by endpoint kinds; None for edges no role admits."""
        return edge_role(edge, self.instance_map(), self.prototype_map())

    def edges_by_role(self, role: EdgeRole) -> list[tuple[str, str]]:
        instances, prototypes = self.instance_map(), self.prototype_map()
        return sorted(edge for edge in self.edges if edge_role(edge, instances, prototypes) is role)

    @property
    def edge_count(self) -> int:
        return len(self.edges)


def edge_role(
    edge: tuple[str, str],
    instances: dict[str, AugmentedInstance],
    prototypes: dict[str, PrototypeNode],
) -> Optional[EdgeRole]:
    source, target = edge
    if source in prototypes and target in instances:
        return EdgeRole.PROTOTYPE
    if source in instances and target in instances:
        if instances[source].level is instances[target].level:
            return EdgeRole.CHAIN
        return EdgeRole.HIERARCHY
    return None
