import math

import numpy as np
import pytest

from annealing.alignment import (
    AnnealSchedule,
    align,
    distance_matrix,
    exhaustive_align,
    frobenius_distance,
    pairwise_distances,
    search_space,
    structural_distance,
)
from annealing.workers import rng_for
from conftest import toy_record
from errors import LevelMismatchError
from evaluation.synthetic import apply, random_valid_edits
from graph.augment import augment
from graph.ingest import ingest
from graph.matrix import to_padded, to_padded_pair
from schemas import AnalysisRecordFile


@pytest.fixture
def sched() -> AnnealSchedule:
    return AnnealSchedule(steps=2000, t_max=2.0, t_min=0.01, seed=7)


def _shuffle_within_partitions(matrix, seed: int) -> np.ndarray:
    rng = rng_for(seed)
    perm = np.arange(matrix.size)
    for partition in matrix.partition_map.partitions:
        perm[partition.start:partition.stop] = rng.permutation(np.arange(partition.start, partition.stop))
    return perm


class TestSchedule:
    def test_geometric_endpoints(self):
        sched = AnnealSchedule(steps=11, t_max=2.0, t_min=0.02)
        assert sched.temperature(0) == pytest.approx(2.0)
        assert sched.temperature(10) == pytest.approx(0.02)
        assert sched.temperature(5) == pytest.approx(0.2)

    def test_rejects_inverted_range(self):
        with pytest.raises(ValueError):
            AnnealSchedule(t_max=0.01, t_min=1.0)


class TestAlign:
    def test_identical_graphs(self, biamonti_augmented, sched):
        left, right = to_padded_pair(biamonti_augmented, biamonti_augmented)
        assert align(left, right, sched).energy == 0.0

    def test_self_alignment_of_the_toy(self, toy, toy_augmented, sched):
        matrix = to_padded([toy_augmented])[0]
        assert align(matrix, matrix, sched).energy == 0.0
        assert structural_distance(toy, toy, sched) == 0.0

    def test_recovers_a_scrambled_copy(self, toy_augmented, sched):
        matrix = to_padded([toy_augmented])[0]
        perm = np.arange(matrix.size)
        perm[[2, 3, 4]] = [4, 2, 3]
        scrambled = matrix.permuted(perm)
        assert frobenius_distance(matrix, scrambled) > 0
        assert align(matrix, scrambled, sched).energy == 0.0

    def test_known_distance(self, toy_augmented, toy_major, sched):
        left, right = to_padded_pair(toy_augmented, augment(toy_major))
        assert exhaustive_align(left, right).energy == pytest.approx(math.sqrt(2))
        assert align(left, right, sched).energy == pytest.approx(math.sqrt(2))

    def test_moves_stay_inside_partitions(self, toy_augmented, toy_major, sched):
        left, right = to_padded_pair(toy_augmented, augment(toy_major))
        perm = align(left, right, sched).perm
        ids = left.partition_map.partition_ids()
        assert np.array_equal(ids[perm], ids)

    def test_reproducible_for_a_seed(self, biamonti_augmented, sched):
        matrix = to_padded([biamonti_augmented])[0]
        shuffled = matrix.permuted(_shuffle_within_partitions(matrix, seed=3))
        first, second = align(matrix, shuffled, sched), align(matrix, shuffled, sched)
        assert np.array_equal(first.perm, second.perm)
        assert first.trace == second.trace

    def test_energy_never_above_start(self, biamonti_augmented, sched):
        matrix = to_padded([biamonti_augmented])[0]
        shuffled = matrix.permuted(_shuffle_within_partitions(matrix, seed=5))
        result = align(matrix, shuffled, sched)
        assert result.energy <= frobenius_distance(matrix, shuffled)
        assert result.trace == sorted(result.trace, reverse=True)

    def test_level_mismatch(self, toy_augmented, biamonti_augmented, sched):
        left = to_padded([toy_augmented])[0]
        right = to_padded([biamonti_augmented])[0]
        with pytest.raises(LevelMismatchError):
            align(left, right, sched)


class TestExhaustive:
    def test_search_space(self, toy_augmented):
        assert search_space(to_padded([toy_augmented])[0]) == 96

    def test_never_worse_than_annealing(self, toy_augmented, sched):
        shifted = augment(ingest(AnalysisRecordFile.model_validate(toy_record(middle_key=2, middle_quality="M"))))
        left, right = to_padded_pair(toy_augmented, shifted)
        assert exhaustive_align(left, right).energy <= align(left, right, sched).energy + 1e-9


class TestDistances:
    def test_structural_distance(self, toy, toy_major, sched):
        assert structural_distance(toy, toy_major, sched) == pytest.approx(math.sqrt(2))
        assert structural_distance(toy, toy_major, sched, exhaustive=True) == pytest.approx(math.sqrt(2))

    def test_pairwise_is_symmetric(self, toy, toy_major, sched):
        values = distance_matrix([toy, toy_major, toy], sched)
        assert np.allclose(values, values.T)
        assert np.allclose(np.diag(values), 0.0)
        assert values[0, 2] == 0.0

    def test_workers_do_not_change_results(self, toy_augmented, toy_major, sched):
        padded = to_padded([toy_augmented, augment(toy_major), toy_augmented])
        assert np.array_equal(pairwise_distances(padded, sched, workers=1), pairwise_distances(padded, sched, workers=2))


class TestEditDistance:
    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
    def test_n_valid_flips_sit_sqrt_n_away(self, toy_augmented, sched, n):
        script = random_valid_edits(toy_augmented, n, seed=n, budget=20_000)
        assert script.size == n
        assert script.certified
        left, right = to_padded_pair(toy_augmented, apply(toy_augmented, script))
        assert exhaustive_align(left, right).energy == pytest.approx(math.sqrt(n))
        assert align(left, right, sched).energy == pytest.approx(math.sqrt(n))
