from graph.model import AugmentedGraph, InstanceNode, Level, LevelKind, PrototypeNode, StructuralTemporalGraph
from graph.validation import validate_stg


def _without(graph: AugmentedGraph, *edges) -> AugmentedGraph:
    return graph.model_copy(update={"edges": graph.edges - set(edges)})


def _with(graph: AugmentedGraph, *edges) -> AugmentedGraph:
    return graph.model_copy(update={"edges": graph.edges | set(edges)})


class TestCompressed:
    def test_valid(self, toy):
        report = validate_stg(toy)
        assert report.ok
        assert report.summary() == "valid"

    def test_upward_edge(self, toy):
        broken = toy.model_copy(update={"edges": toy.edges | {("key-0", "segmentation-0")}})
        assert "G4" in validate_stg(broken).rules()

    def test_orphan(self, toy):
        broken = toy.model_copy(update={"edges": toy.edges - {("segmentation-0", "key-0")}})
        rules = validate_stg(broken).rules()
        assert "I1" in rules
        assert "I3" in rules

    def test_crossing_parents(self, toy):
        edges = (toy.edges - {("segmentation-1", "key-2")}) | {("segmentation-0", "key-2")}
        broken = toy.model_copy(update={"edges": edges})
        assert {"I4", "I3"} <= validate_stg(broken).rules()

    def test_illegal_feature(self):
        node = InstanceNode(id="key-0", level=LevelKind.KEY, chain_index=0, features={"relative_key_num": "0", "quality": "x"})
        graph = StructuralTemporalGraph(levels=(Level(kind=LevelKind.KEY, nodes=(node,)),))
        assert validate_stg(graph).rules() == {"P1"}

    def test_gapped_chain_indices(self):
        nodes = tuple(
            InstanceNode(id=f"segmentation-{i}", level=LevelKind.SEGMENTATION, chain_index=index, features={"section_num": str(i)})
            for i, index in enumerate((0, 2))
        )
        graph = StructuralTemporalGraph(levels=(Level(kind=LevelKind.SEGMENTATION, nodes=nodes),))
        assert "I2" in validate_stg(graph).rules()


class TestAugmented:
    def test_valid(self, toy_augmented, biamonti_augmented):
        assert validate_stg(toy_augmented).ok
        assert validate_stg(biamonti_augmented).ok

    def test_self_loop(self, toy_augmented):
        assert "G1" in validate_stg(_with(toy_augmented, ("key-0", "key-0"))).rules()

    def test_edge_into_prototype(self, toy_augmented):
        proto = "key/quality:M"
        assert "G2" in validate_stg(_with(toy_augmented, ("key-0", proto))).rules()

    def test_prototype_of_another_level(self, toy_augmented):
        assert "G3" in validate_stg(_with(toy_augmented, ("segmentation/section_num:0", "key-0"))).rules()

    def test_level_skip(self, biamonti_augmented):
        assert "G5" in validate_stg(_with(biamonti_augmented, ("segmentation-0", "key-0"))).rules()

    def test_broken_chain(self, toy_augmented):
        assert "I2" in validate_stg(_without(toy_augmented, ("key-0", "key-1"))).rules()

    def test_missing_feature(self, toy_augmented):
        assert "P1" in validate_stg(_without(toy_augmented, ("key/quality:m", "key-1"))).rules()

    def test_two_values_for_one_feature(self, toy_augmented):
        assert "P1" in validate_stg(_with(toy_augmented, ("key/quality:M", "key-1"))).rules()

    def test_identical_neighbors(self, toy_augmented):
        edges = (toy_augmented.edges - {("key/quality:m", "key-1"), ("key/relative_key_num:1", "key-1")}) | {
            ("key/quality:M", "key-1"),
            ("key/relative_key_num:0", "key-1"),
        }
        report = validate_stg(toy_augmented.model_copy(update={"edges": edges}))
        assert report.rules() == {"P2"}

    def test_motifs_may_repeat(self, biamonti_augmented):
        # Adjacent motif instances share pattern 0 and stay valid.
        assert validate_stg(biamonti_augmented).ok

    def test_illegal_prototype_value(self, toy_augmented):
        bad = PrototypeNode(level=LevelKind.KEY, feature_name="quality", feature_value="x")
        graph = toy_augmented.model_copy(update={"prototypes": toy_augmented.prototypes + (bad,)})
        assert "P1" in validate_stg(graph).rules()
