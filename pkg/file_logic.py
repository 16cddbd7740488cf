"""Artifact storage: JSON documents, CSV tables, digests and run manifests."""
import hashlib
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional, TypeVar, Union

import pandas as pd
from pydantic import BaseModel, ValidationError

from errors import InputError
from graph.augment import augment
from graph.export import dump_graph, load_graph
from graph.ingest import ingest
from graph.matrix import PaddedMatrix, dump_matrix, load_matrix, to_augmented
from graph.model import AugmentedGraph, LevelKind, StructuralTemporalGraph
from schemas import AnalysisRecordFile, GraphDump, MatrixDump, RunManifest

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"

ModelT = TypeVar("ModelT", bound=BaseModel)
Graph = Union[StructuralTemporalGraph, AugmentedGraph]


def read_json(path: Path) -> Any:
    try:
        with open(path, "r") as f:
            return json.load(f)
    except FileNotFoundError:
        raise InputError(f"File not found: {path}")
    except json.JSONDecodeError as e:
        raise InputError(f"{path} is not valid JSON: {e}")


def write_json(path: Path, data: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(data, f, indent=4)
    return path


def read_model(path: Path, model: type[ModelT]) -> ModelT:
    try:
        return model.model_validate(read_json(path))
    except ValidationError as e:
        raise InputError(f"{path} does not match {model.__name__}: {e}")


def write_model(path: Path, document: BaseModel) -> Path:
    write_json(path, json.loads(document.model_dump_json(exclude_none=False)))
    logger.debug(f"Wrote {type(document).__name__} to {path}")
    return path


def read_record(path: Path, levels: Optional[list[LevelKind]] = None) -> StructuralTemporalGraph:
    record = read_model(path, AnalysisRecordFile)
    graph = ingest(record, levels)
    if graph.title is None:
        graph = graph.model_copy(update={"title": path.stem})
    return graph


def read_graph(path: Path, levels: Optional[list[LevelKind]] = None) -> Graph:
    """Loads an analysis record, a graph dump or a padded matrix dump, telling them apart by shape.

    Matrices come back as the augmented graph of their active rows.
    """
    data = read_json(path)
    if isinstance(data, dict) and data.get("kind") == "padded":
        try:
            return to_augmented(load_matrix(MatrixDump.model_validate(data)))
        except ValidationError as e:
            raise InputError(f"{path} is not a valid matrix dump: {e}")
    if isinstance(data, dict) and data.get("kind") in ("stg", "augmented"):
        try:
            return load_graph(GraphDump.model_validate(data))
        except ValidationError as e:
            raise InputError(f"{path} is not a valid graph dump: {e}")
    return read_record(path, levels)


def read_augmented(path: Path, levels: Optional[list[LevelKind]] = None) -> AugmentedGraph:
    graph = read_graph(path, levels)
    return graph if isinstance(graph, AugmentedGraph) else augment(graph)


def read_compressed(path: Path, levels: Optional[list[LevelKind]] = None) -> StructuralTemporalGraph:
    graph = read_graph(path, levels)
    if isinstance(graph, AugmentedGraph):
        raise InputError(f"{path} holds an augmented graph; a compressed STG or analysis record is needed here.")
    return graph


def write_graph(path: Path, graph: Graph) -> Path:
    return write_model(path, dump_graph(graph))


def read_matrix(path: Path) -> PaddedMatrix:
    return load_matrix(read_model(path, MatrixDump))


def write_matrix(path: Path, matrix: PaddedMatrix) -> Path:
    return write_model(path, dump_matrix(matrix))


def corpus_files(paths: list[Path]) -> list[Path]:
    """Expands directories into their JSON files, sorted by name."""
    files: list[Path] = []
    for path in paths:
        if path.is_dir():
            files.extend(sorted(p for p in path.glob("*.json") if p.name != MANIFEST_FILE))
        else:
            files.append(path)
    if not files:
        raise InputError(f"No input files found in {[str(p) for p in paths]}")
    return files


def write_csv(path: Path, frame: pd.DataFrame) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.10g")
    return path


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def file_digest(path: Path) -> str:
    sha = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(65536), b""):
            sha.update(block)
    return sha.hexdigest()


def digests(paths: list[Path], root: Optional[Path] = None) -> dict[str, str]:
    result = {}
    for path in paths:
        key = str(path.relative_to(root)) if root is not None and path.is_relative_to(root) else str(path)
        result[key] = file_digest(path)
    return result


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(out_dir: Path, manifest: RunManifest) -> Path:
    return write_model(out_dir / MANIFEST_FILE, manifest)


def read_manifest(path: Path) -> RunManifest:
    if path.is_dir():
        path = path / MANIFEST_FILE
    return read_model(path, RunManifest)
