import json

import pytest

import file_logic
from conftest import toy_record, write_record
from errors import InputError
from graph.matrix import to_padded
from graph.model import AugmentedGraph, StructuralTemporalGraph
from schemas import RunManifest


class TestReadGraph:
    def test_record(self, toy_files):
        graph = file_logic.read_graph(toy_files[0])
        assert isinstance(graph, StructuralTemporalGraph)
        assert graph.title == "toy"

    def test_untitled_record_takes_the_file_name(self, tmp_path):
        record = toy_record()
        record["piece"] = {}
        graph = file_logic.read_graph(write_record(tmp_path / "nameless.json", record))
        assert graph.title == "nameless"

    def test_graph_dumps(self, toy, toy_augmented, tmp_path):
        compressed = file_logic.read_graph(file_logic.write_graph(tmp_path / "stg.json", toy))
        augmented = file_logic.read_graph(file_logic.write_graph(tmp_path / "aug.json", toy_augmented))
        assert isinstance(compressed, StructuralTemporalGraph)
        assert isinstance(augmented, AugmentedGraph)
        assert augmented.edges == toy_augmented.edges

    def test_matrix_dump(self, toy_augmented, tmp_path):
        path = file_logic.write_matrix(tmp_path / "m.json", to_padded([toy_augmented])[0])
        graph = file_logic.read_graph(path)
        assert isinstance(graph, AugmentedGraph)
        assert graph.edge_count == 15

    def test_compressed_rejects_augmented(self, toy_augmented, tmp_path):
        path = file_logic.write_graph(tmp_path / "aug.json", toy_augmented)
        with pytest.raises(InputError):
            file_logic.read_compressed(path)

    def test_bad_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{")
        with pytest.raises(InputError):
            file_logic.read_graph(path)

    def test_missing(self, tmp_path):
        with pytest.raises(InputError):
            file_logic.read_graph(tmp_path / "absent.json")


class TestCorpusFiles:
    def test_directory_is_sorted_without_manifest(self, toy_files):
        directory = toy_files[0].parent
        (directory / "manifest.json").write_text("{}")
        assert file_logic.corpus_files([directory]) == sorted(toy_files)

    def test_empty(self, tmp_path):
        with pytest.raises(InputError):
            file_logic.corpus_files([tmp_path])


class TestDigests:
    def test_relative_to_root(self, toy_files):
        root = toy_files[0].parent
        found = file_logic.digests(toy_files[:1], root=root)
        assert list(found) == ["toy.json"]
        assert len(found["toy.json"]) == 64

    def test_content_addressed(self, tmp_path):
        first = write_record(tmp_path / "a.json", toy_record())
        second = write_record(tmp_path / "b.json", toy_record())
        assert file_logic.file_digest(first) == file_logic.file_digest(second)


class TestManifest:
    def test_round_trip(self, tmp_path):
        manifest = RunManifest(
            command="distance",
            argv=["distance", "a.json", "b.json"],
            config={"seed": 0},
            tool_version="0.1.0",
            started_at=file_logic.now_iso(),
        )
        file_logic.write_manifest(tmp_path, manifest)
        assert json.loads((tmp_path / "manifest.json").read_text())["command"] == "distance"
        assert file_logic.read_manifest(tmp_path) == manifest
