import math

import pytest

from annealing.alignment import AnnealSchedule, exhaustive_align
from annealing.centroid import NestedEndpoints
from errors import EditBudgetExceeded, InputError
from evaluation.synthetic import (
    CentroidStudyConfig,
    Edit,
    EditScript,
    apply,
    build_corpus,
    centroid_error_study,
    loss_error,
    random_valid_edits,
    relative_error,
    relative_error_study,
)
from graph.matrix import to_padded, to_padded_pair
from graph.validation import validate_stg


class TestRandomValidEdits:
    def test_zero_edits(self, toy_augmented):
        script = random_valid_edits(toy_augmented, 0, seed=0)
        assert script.size == 0
        assert script.certified
        assert script.certificate == 0.0

    def test_negative(self, toy_augmented):
        with pytest.raises(InputError):
            random_valid_edits(toy_augmented, -1, seed=0)

    def test_single_flip_drops_a_redundant_parent(self, toy_augmented):
        script = random_valid_edits(toy_augmented, 1, seed=4)
        assert script.size == 1
        edit = script.edits[0]
        # Only the straddling key can lose one of its two parents.
        assert (edit.row, edit.col, edit.direction) in {(0, 3, "remove"), (1, 3, "remove")}
        assert script.certified
        assert script.certificate == pytest.approx(1.0)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_two_flips_are_certified(self, toy_augmented, seed):
        script = random_valid_edits(toy_augmented, 2, seed=seed)
        assert script.size == 2
        assert len(set(script.cells)) == 2
        assert script.certified
        assert script.certificate == pytest.approx(math.sqrt(2))
        variant = apply(toy_augmented, script)
        assert validate_stg(variant).ok
        base, edited = to_padded_pair(toy_augmented, variant)
        assert exhaustive_align(base, edited).energy == pytest.approx(math.sqrt(2))

    def test_streams_are_independent_and_reproducible(self, toy_augmented):
        first = random_valid_edits(toy_augmented, 2, seed=9, stream=1)
        again = random_valid_edits(toy_augmented, 2, seed=9, stream=1)
        assert first == again

    def test_steps_are_recorded(self, toy_augmented):
        script = random_valid_edits(toy_augmented, 2, seed=5)
        steps = [edit.step for edit in script.edits]
        assert steps == sorted(steps)
        if script.edits[0].operation != "cell":
            assert steps == [0, 0]

    def test_budget_exhaustion_keeps_the_partial_script(self, toy_augmented):
        with pytest.raises(EditBudgetExceeded) as caught:
            random_valid_edits(toy_augmented, 3, seed=0, budget=0)
        assert caught.value.partial.size == 0
        assert caught.value.exit_code == 3

    def test_uncertified_when_search_space_is_large(self, biamonti_augmented):
        script = random_valid_edits(biamonti_augmented, 1, seed=0)
        assert script.size == 1
        assert not script.certified
        assert validate_stg(apply(biamonti_augmented, script)).ok


class TestApply:
    def test_title_and_validity(self, toy_augmented):
        script = random_valid_edits(toy_augmented, 2, seed=3)
        variant = apply(toy_augmented, script)
        assert variant.title == "toy+2@0"
        assert validate_stg(variant).ok

    def test_rejects_a_stale_edit(self, toy_augmented):
        matrix = to_padded([toy_augmented])[0]
        assert matrix.adjacency[2, 3] == 1
        script = EditScript(seed=0, target=1, edits=[Edit(row=2, col=3, direction="add", operation="cell", step=0)])
        with pytest.raises(InputError):
            apply(toy_augmented, script)

    def test_empty_script_is_identity(self, toy_augmented):
        variant = apply(toy_augmented, EditScript(seed=0, target=0))
        assert variant.edges == toy_augmented.edges


class TestBuildCorpus:
    def test_variants_around_the_base(self, toy_augmented):
        corpus = build_corpus(toy_augmented, k=3, seed=11, n=2)
        assert corpus.k == 3
        assert len(corpus.variants) == 3
        assert [script.stream for script in corpus.scripts] == [0, 1, 2]
        assert all(script.certified for script in corpus.scripts)
        assert all(validate_stg(variant).ok for variant in corpus.variants)

    def test_needs_one_variant(self, toy_augmented):
        with pytest.raises(InputError):
            build_corpus(toy_augmented, k=0, seed=0)


class TestErrors:
    def test_relative_error(self):
        assert relative_error(1.5, 1.0) == pytest.approx(0.5)
        assert relative_error(0.5, 1.0) == pytest.approx(0.5)
        assert relative_error(0.0, 0.0) == 0.0
        assert relative_error(1.0, 0.0) == math.inf

    def test_loss_error_is_signed(self):
        assert loss_error(0.9, 1.0) == pytest.approx(-0.1)
        assert loss_error(1.2, 1.0) == pytest.approx(0.2)
        assert loss_error(0.0, 0.0) == 0.0


class TestStudies:
    def test_relative_error_study(self, toy_augmented):
        sched = AnnealSchedule(steps=200, seed=2)
        table = relative_error_study({"toy": toy_augmented}, [0.1], sched, exhaustive=True)
        assert list(table.columns) == [
            "base",
            "p",
            "target_edits",
            "achieved_edits",
            "status",
            "expected",
            "measured",
            "relative_error",
        ]
        row = table.iloc[0]
        assert row["target_edits"] == 2
        assert row["status"] == "ok"
        assert row["relative_error"] == pytest.approx(0.0)

    def test_centroid_error_study(self, toy_augmented):
        config = CentroidStudyConfig(
            seed=1,
            edits=2,
            sched=AnnealSchedule(steps=200),
            outer=AnnealSchedule(steps=10, t_max=2.5, t_min=0.05),
            nested=NestedEndpoints(steps_initial=50, steps_final=5),
            exhaustive=True,
        )
        table = centroid_error_study(toy_augmented, [2, 3], config)
        assert list(table["k"]) == [2, 3]
        assert table["ground_truth_loss"].tolist() == pytest.approx([math.sqrt(2)] * 2)
        assert (table["edits"] == 2).all()
        assert set(table.columns) >= {"E_gd", "E_gn", "valid", "repair_flips"}
