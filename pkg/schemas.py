from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, Field


# --- Analysis record files (one per piece, produced by the upstream analyzers) ---

class Span(BaseModel):
    start: float
    end: float

    def features(self) -> dict[str, str]:
        raise NotImplementedError


class SegmentSpan(Span):
    label: int = Field(ge=0)

    def features(self) -> dict[str, str]:
        return {"section_num": str(self.label)}


class MotifSpan(Span):
    pattern: Union[int, Literal["filler"]]

    def features(self) -> dict[str, str]:
        if self.pattern == "filler":
            return {"filler": "filler"}
        return {"pattern_num": str(self.pattern)}


class KeySpan(Span):
    relative_key_num: int = Field(ge=0)
    quality: Literal["M", "m"]

    def features(self) -> dict[str, str]:
        return {"relative_key_num": str(self.relative_key_num), "quality": self.quality}


class ChordSpan(Span):
    quality: Literal["M", "m", "d", "d7", "h7", "D7", "a", "a6", "a7"]
    degree1: int = Field(ge=1, le=12)
    degree2: int = Field(ge=1, le=12)

    def features(self) -> dict[str, str]:
        return {"quality": self.quality, "degree1": str(self.degree1), "degree2": str(self.degree2)}


class MelodySpan(Span):
    abs_interval: int
    interval_sign: Literal["+", "-"]

    def features(self) -> dict[str, str]:
        return {"abs_interval": str(self.abs_interval), "interval_sign": self.interval_sign}


class PieceInfo(BaseModel):
    title: Optional[str] = None
    duration: Optional[float] = None


class RecordLevels(BaseModel):
    segmentation: Optional[list[SegmentSpan]] = None
    motif: Optional[list[MotifSpan]] = None
    key: Optional[list[KeySpan]] = None
    chord: Optional[list[ChordSpan]] = None
    melody: Optional[list[MelodySpan]] = None


class AnalysisRecordFile(BaseModel):
    version: Literal[1] = 1
    piece: PieceInfo = Field(default_factory=PieceInfo)
    levels: RecordLevels


# --- Graph dumps ---

class NodeDump(BaseModel):
    id: str
    role: Literal["instance", "prototype"] = "instance"
    level: str
    chain_index: Optional[int] = None
    start: Optional[float] = None
    end: Optional[float] = None
    features: dict[str, str] = Field(default_factory=dict)
    feature_name: Optional[str] = None
    feature_value: Optional[str] = None


class EdgeDump(BaseModel):
    source: str
    target: str
    role: Optional[Literal["hierarchy", "prototype", "chain"]] = None


class GraphDump(BaseModel):
    version: Literal[1] = 1
    kind: Literal["stg", "augmented"]
    title: Optional[str] = None
    levels: list[str]
    nodes: list[NodeDump]
    edges: list[EdgeDump]


class PartitionDump(BaseModel):
    kind: Literal["instance", "prototype"]
    level: str
    feature_name: Optional[str] = None
    start: int
    size: int


class MatrixDump(BaseModel):
    version: Literal[1] = 1
    kind: Literal["padded"] = "padded"
    title: Optional[str] = None
    size: int
    levels: list[str]
    partitions: list[PartitionDump]
    row_labels: list[Optional[str]]
    node_ids: list[Optional[str]] = Field(default_factory=list)
    edges: list[tuple[int, int]]


# --- Run manifests ---

class RunManifest(BaseModel):
    command: str
    argv: list[str]
    config: dict[str, Any]
    seeds: dict[str, Any] = Field(default_factory=dict)
    inputs: dict[str, str] = Field(default_factory=dict)
    outputs: dict[str, str] = Field(default_factory=dict)
    tool_version: str
    started_at: str
    wall_clock_seconds: float = 0.0
    status: Literal["ok", "error"] = "ok"
    error: Optional[str] = None
