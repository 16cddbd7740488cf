import json
from pathlib import Path
from typing import Any

import pytest

from graph.augment import augment
from graph.ingest import ingest
from graph.model import AugmentedGraph, StructuralTemporalGraph
from schemas import AnalysisRecordFile
from settings import find_solver

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
BIAMONTI = DATA_DIR / "biamonti_461.json"


def toy_record(title: str = "toy", middle_quality: str = "m", middle_key: int = 1) -> dict[str, Any]:
    """Two sections over three keys; the middle key straddles the section boundary."""
    return {
        "version": 1,
        "piece": {"title": title, "duration": 8.0},
        "levels": {
            "segmentation": [
                {"start": 0.0, "end": 4.0, "label": 0},
                {"start": 4.0, "end": 8.0, "label": 1},
            ],
            "key": [
                {"start": 0.0, "end": 2.0, "relative_key_num": 0, "quality": "M"},
                {"start": 2.0, "end": 6.0, "relative_key_num": middle_key, "quality": middle_quality},
                {"start": 6.0, "end": 8.0, "relative_key_num": 0, "quality": "M"},
            ],
        },
    }


def write_record(path: Path, record: dict[str, Any]) -> Path:
    path.write_text(json.dumps(record))
    return path


def pytest_collection_modifyitems(config, items):
    if find_solver() is not None:
        return
    skip = pytest.mark.skip(reason="no SMT solver available")
    for item in items:
        if "requires_solver" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def biamonti() -> StructuralTemporalGraph:
    return ingest(AnalysisRecordFile.model_validate_json(BIAMONTI.read_text()))


@pytest.fixture
def biamonti_augmented(biamonti) -> AugmentedGraph:
    return augment(biamonti)


@pytest.fixture
def toy() -> StructuralTemporalGraph:
    return ingest(AnalysisRecordFile.model_validate(toy_record()))


@pytest.fixture
def toy_augmented(toy) -> AugmentedGraph:
    return augment(toy)


@pytest.fixture
def toy_major() -> StructuralTemporalGraph:
    """The toy piece with its middle key turned major: two prototype cells away."""
    return ingest(AnalysisRecordFile.model_validate(toy_record("toy_major", middle_quality="M")))


@pytest.fixture
def toy_files(tmp_path) -> list[Path]:
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    return [
        write_record(corpus / "toy.json", toy_record()),
        write_record(corpus / "toy_major.json", toy_record("toy_major", middle_quality="M")),
        write_record(corpus / "toy_shifted.json", toy_record("toy_shifted", middle_key=2)),
    ]
