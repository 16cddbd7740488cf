import logging
from typing import Any

import pandas as pd

import file_logic
from annealing.alignment import align, exhaustive_align, pairwise_distances
from errors import InputError
from evaluation.statistics import DistanceMatrix, ablation_matrices, mantel_spearman, write_matrix_csv
from graph.matrix import to_padded, to_padded_pair
from processors.stage import StageProcessor, inputs_of, level_filter
from settings import PipelineConfig

logger = logging.getLogger(__name__)


class DistanceCalculatorProcessor(StageProcessor):
    """Structural distances: one pair, a whole corpus, or a corpus under level ablation."""

    name = "distance"
    actions = ("distance", "distance-matrix", "ablation")

    def run(self, action: str, config: PipelineConfig, request: dict[str, Any]) -> dict[str, Any]:
        if action == "distance":
            return self._pair(config)
        files = file_logic.corpus_files(inputs_of(config))
        labels = [path.stem for path in files]
        if len(set(labels)) != len(labels):
            raise InputError(f"Corpus file names must be unique: {labels}")
        if action == "distance-matrix":
            return self._matrix(config, files, labels)
        return self._ablation(config, files, labels)

    def _pair(self, config: PipelineConfig) -> dict[str, Any]:
        first_path, second_path = inputs_of(config, 2)
        levels = level_filter(config)
        first, second = to_padded_pair(
            file_logic.read_augmented(first_path, levels), file_logic.read_augmented(second_path, levels)
        )
        if config.exhaustive:
            alignment = exhaustive_align(first, second)
        else:
            alignment = align(first, second, config.align_schedule())
        frame = pd.DataFrame(
            [{"first": first_path.stem, "second": second_path.stem, "distance": alignment.energy}]
        )
        outputs = {"distance": str(file_logic.write_csv(config.out / "distance.csv", frame))}
        if config.dump_perm:
            perm = [int(row) for row in alignment.perm]
            dump = {
                "first": first_path.stem,
                "second": second_path.stem,
                "energy": alignment.energy,
                "perm": perm,
                "rows": [[first.node_ids[i], second.node_ids[row]] for i, row in enumerate(perm)],
            }
            outputs["permutation"] = str(file_logic.write_json(config.out / "permutation.json", dump))
        logger.info(f"Structural distance {first_path.stem} -> {second_path.stem}: {alignment.energy:.4f}")
        return {"outputs": outputs, "summary": {"distance": alignment.energy}}

    def _matrix(self, config: PipelineConfig, files, labels) -> dict[str, Any]:
        levels = level_filter(config)
        graphs = [file_logic.read_augmented(path, levels) for path in files]
        values = pairwise_distances(to_padded(graphs), config.align_schedule(), config.workers, config.exhaustive)
        matrix = DistanceMatrix(labels=labels, values=values)
        path = config.out / "distances.csv"
        write_matrix_csv(matrix, path)
        return {"outputs": {"distances": str(path)}, "summary": {"graphs": len(labels)}}

    def _ablation(self, config: PipelineConfig, files, labels) -> dict[str, Any]:
        graphs = [file_logic.read_compressed(path, level_filter(config)) for path in files]
        matrices = ablation_matrices(graphs, labels, config.align_schedule(), config.workers)
        full = matrices[max(matrices)]
        outputs, correlations = {}, {}
        for keep, matrix in sorted(matrices.items(), reverse=True):
            path = config.out / f"distances_top{keep}.csv"
            write_matrix_csv(matrix, path)
            outputs[f"top{keep}"] = str(path)
            if matrix is full:
                continue
            try:
                result = mantel_spearman(full, matrix, config.permutations, config.seed)
                correlations[keep] = {"rho": result.rho, "p_value": result.p_value}
            except InputError as e:
                logger.warning(f"No correlation for the top {keep} levels: {e}")
        return {"outputs": outputs, "summary": {"graphs": len(labels), "against_full": correlations}}
