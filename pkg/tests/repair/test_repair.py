import asyncio

import numpy as np
import pytest

from errors import SolverError
from graph.matrix import to_augmented, to_padded
from graph.validation import validate_stg
from repair.repair import repair
from repair.solver import parse_model, run_solver
from settings import find_solver


def _flipped(matrix, *cells):
    adjacency = matrix.adjacency.copy()
    for cell in cells:
        adjacency[cell] = 1 - adjacency[cell]
    return matrix.with_adjacency(adjacency)


class TestSolverOutput:
    def test_parse_model(self):
        text = """sat
(objectives (flips 1))
(model
  (define-fun e_0_1 () Bool
    true)
  (define-fun e_1_0 () Bool false)
  (define-fun cnt_key () Int 3)
)"""
        assert parse_model(text) == {"e_0_1": True, "e_1_0": False}

    def test_missing_binary(self):
        with pytest.raises(SolverError):
            asyncio.run(run_solver("/nonexistent/z3", "(check-sat)\n", 1.0))


class TestRepairWithoutSolver:
    def test_valid_input_needs_no_solver(self, toy_augmented):
        matrix = to_padded([toy_augmented])[0]
        result = repair(matrix, solver=None)
        assert result.objective == 0
        assert np.array_equal(result.matrix.adjacency, matrix.adjacency)
        assert result.partitions == []

    def test_invalid_input_needs_a_solver(self, toy_augmented):
        matrix = _flipped(to_padded([toy_augmented])[0], (2, 3))
        with pytest.raises(SolverError):
            repair(matrix, solver=None)


@pytest.mark.requires_solver
class TestRepairWithSolver:
    def test_restores_a_broken_chain(self, toy_augmented, tmp_path):
        matrix = _flipped(to_padded([toy_augmented])[0], (2, 3))
        result = repair(matrix, timeout_per_partition=60, solver=find_solver(), dump_dir=tmp_path)
        assert result.objective == 1
        assert validate_stg(result.graph).ok
        assert result.matrix.adjacency[2, 3] == 1
        assert (tmp_path / "segmentation+key.smt2").is_file()

    def test_fills_a_missing_feature(self, toy_augmented):
        matrix = to_padded([toy_augmented])[0]
        quality_m = matrix.node_ids.index("key/quality:m")
        result = repair(_flipped(matrix, (quality_m, 3)), timeout_per_partition=60, solver=find_solver())
        assert result.objective == 1
        assert validate_stg(to_augmented(result.matrix)).ok

    def test_clears_forbidden_edges(self, toy_augmented):
        matrix = to_padded([toy_augmented])[0]
        # Key-to-segment edge points up the hierarchy.
        result = repair(_flipped(matrix, (2, 0)), timeout_per_partition=60, solver=find_solver())
        assert result.matrix.adjacency[2, 0] == 0
        assert result.objective == 1
        assert validate_stg(result.graph).ok

    def test_partition_statistics(self, toy_augmented):
        matrix = _flipped(to_padded([toy_augmented])[0], (2, 3))
        result = repair(matrix, timeout_per_partition=60, solver=find_solver())
        names = [stats.name for stats in result.partitions]
        assert names == ["segmentation+key", "segmentation-prototypes", "key-prototypes"]
        assert sum(stats.flips for stats in result.partitions) == result.objective
        assert all(stats.optimal for stats in result.partitions)

    def test_repairing_twice_changes_nothing(self, toy_augmented):
        matrix = _flipped(to_padded([toy_augmented])[0], (2, 3), (2, 0))
        first = repair(matrix, timeout_per_partition=60, solver=find_solver())
        second = repair(first.matrix, timeout_per_partition=60, solver=find_solver())
        assert second.objective == 0
        assert second.partitions == []
        assert np.array_equal(second.matrix.adjacency, first.matrix.adjacency)

    @pytest.mark.parametrize(
        "cells",
        [
            [(2, 3)],
            [(2, 3), (2, 0)],
            [(2, 0), ("key/quality:m", 3)],
            [(2, 3), (2, 0), ("key/quality:m", 3)],
        ],
    )
    def test_few_flips_are_undone_within_their_count(self, toy_augmented, cells):
        matrix = to_padded([toy_augmented])[0]
        resolved = [(matrix.node_ids.index(row) if isinstance(row, str) else row, col) for row, col in cells]
        broken = _flipped(matrix, *resolved)
        assert not validate_stg(to_augmented(broken)).ok
        result = repair(broken, timeout_per_partition=60, solver=find_solver())
        assert validate_stg(result.graph).ok
        assert result.objective <= len(cells)
        assert int(np.count_nonzero(result.matrix.adjacency != broken.adjacency)) == result.objective
