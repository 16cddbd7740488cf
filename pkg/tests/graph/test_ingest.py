import logging

import pytest

from conftest import toy_record
from errors import IngestError, InputError
from graph.ingest import ingest, levels_ablate, link_levels
from graph.model import LevelKind
from graph.validation import validate_stg
from schemas import AnalysisRecordFile


def _record(**levels) -> AnalysisRecordFile:
    return AnalysisRecordFile.model_validate({"piece": {"title": "t"}, "levels": levels})


class TestIngest:
    def test_biamonti_shape(self, biamonti):
        assert biamonti.kinds == tuple(LevelKind)
        assert [len(level.nodes) for level in biamonti.levels] == [1, 3, 1, 5, 5]
        assert len(biamonti.edges) == 16
        assert validate_stg(biamonti).ok

    def test_chain_indices_follow_time(self, biamonti):
        chords = biamonti.chain(3)
        assert [node.chain_index for node in chords] == list(range(5))
        assert [node.start for node in chords] == sorted(node.start for node in chords)

    def test_straddling_child_gets_two_parents(self, toy):
        assert toy.parents("key-1") == ["segmentation-0", "segmentation-1"]
        assert toy.parents("key-0") == ["segmentation-0"]
        assert toy.parents("key-2") == ["segmentation-1"]

    def test_level_selection_keeps_hierarchy_order(self):
        record = AnalysisRecordFile.model_validate(toy_record())
        graph = ingest(record, [LevelKind.KEY, LevelKind.SEGMENTATION])
        assert graph.kinds == (LevelKind.SEGMENTATION, LevelKind.KEY)

    def test_requested_level_missing(self):
        record = AnalysisRecordFile.model_validate(toy_record())
        with pytest.raises(IngestError):
            ingest(record, [LevelKind.CHORD])

    def test_repeated_labels_merge_on_distinct_levels(self):
        record = _record(
            segmentation=[
                {"start": 0.0, "end": 2.0, "label": 0},
                {"start": 2.0, "end": 4.0, "label": 0},
                {"start": 4.0, "end": 6.0, "label": 1},
            ]
        )
        graph = ingest(record)
        nodes = graph.chain(0)
        assert len(nodes) == 2
        assert (nodes[0].start, nodes[0].end) == (0.0, 4.0)

    def test_repeated_motifs_stay_apart(self, biamonti):
        assert [node.features for node in biamonti.chain(1)][:2] == [{"pattern_num": "0"}, {"pattern_num": "0"}]

    def test_malformed_span(self):
        with pytest.raises(IngestError):
            ingest(_record(segmentation=[{"start": 3.0, "end": 1.0, "label": 0}]))

    def test_uncovered_child(self):
        record = _record(
            segmentation=[{"start": 0.0, "end": 4.0, "label": 0}],
            key=[{"start": 0.0, "end": 6.0, "relative_key_num": 0, "quality": "M"}],
        )
        with pytest.raises(IngestError):
            ingest(record)

    def test_boundary_jitter_is_tolerated(self):
        record = _record(
            segmentation=[{"start": 0.0, "end": 4.0, "label": 0}],
            key=[{"start": 0.0, "end": 4.005, "relative_key_num": 0, "quality": "M"}],
        )
        graph = ingest(record)
        assert graph.parents("key-0") == ["segmentation-0"]

    def test_melody_straddling_two_chords(self, biamonti):
        assert biamonti.parents("melody-3") == ["chord-3", "chord-4"]
        nodes = biamonti.node_map()
        parents = [nodes[node_id].features for node_id in biamonti.parents("melody-3")]
        assert [features["quality"] for features in parents] == ["D7", "M"]
        assert [features["degree1"] for features in parents] == ["5", "1"]


class TestOverlappingMotifs:
    def _record(self) -> AnalysisRecordFile:
        return _record(
            segmentation=[{"start": 0.0, "end": 8.0, "label": 0}],
            motif=[
                {"start": 0.0, "end": 4.0, "pattern": 0},
                {"start": 2.0, "end": 6.0, "pattern": 1},
                {"start": 6.0, "end": 8.0, "pattern": "filler"},
            ],
            key=[
                {"start": 0.0, "end": 3.0, "relative_key_num": 0, "quality": "M"},
                {"start": 3.0, "end": 8.0, "relative_key_num": 1, "quality": "m"},
            ],
        )

    def test_nested_key_keeps_one_parent(self):
        graph = ingest(self._record())
        assert graph.parents("key-0") == ["motif-0"]

    def test_parents_follow_the_previous_sibling(self):
        graph = ingest(self._record())
        assert graph.parents("key-1") == ["motif-1", "motif-2"]
        assert validate_stg(graph).ok

    def test_motifs_hang_from_their_section(self):
        graph = ingest(self._record())
        assert all(graph.parents(f"motif-{i}") == ["segmentation-0"] for i in range(3))


class TestLinkLevels:
    def test_nested_child_has_one_parent(self, biamonti):
        edges = link_levels(biamonti.levels[3], biamonti.levels[4])
        assert {parent for parent, child in edges if child == "melody-0"} == {"chord-0"}
        assert {parent for parent, child in edges if child == "melody-3"} == {"chord-3", "chord-4"}

    def test_child_covering_a_whole_span_is_reported(self, caplog):
        record = _record(
            segmentation=[
                {"start": 0.0, "end": 2.0, "label": 0},
                {"start": 2.0, "end": 4.0, "label": 1},
                {"start": 4.0, "end": 6.0, "label": 2},
            ],
            key=[{"start": 0.0, "end": 6.0, "relative_key_num": 0, "quality": "M"}],
        )
        with caplog.at_level(logging.WARNING, logger="graph.ingest"):
            graph = ingest(record)
        assert graph.parents("key-0") == ["segmentation-0", "segmentation-2"]
        assert "segmentation-1" in caplog.text


class TestLevelsAblate:
    def test_keeps_top_levels(self, biamonti):
        ablated = levels_ablate(biamonti, 2)
        assert ablated.kinds == (LevelKind.SEGMENTATION, LevelKind.MOTIF)
        assert len(ablated.edges) == 3
        assert validate_stg(ablated).ok

    def test_identity_when_keeping_all(self, biamonti):
        assert levels_ablate(biamonti, 5) == biamonti

    @pytest.mark.parametrize("keep", [0, 6])
    def test_out_of_range(self, biamonti, keep):
        with pytest.raises(InputError):
            levels_ablate(biamonti, keep)
