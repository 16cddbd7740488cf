import logging
from typing import Any

import file_logic
from evaluation.statistics import mantel_spearman, read_matrix_csv
from processors.stage import StageProcessor, inputs_of
from settings import PipelineConfig

logger = logging.getLogger(__name__)


class MantelTesterProcessor(StageProcessor):
    """Mantel test with Spearman's rho between two distance-matrix CSVs."""

    name = "mantel"
    actions = ("mantel",)

    def run(self, action: str, config: PipelineConfig, request: dict[str, Any]) -> dict[str, Any]:
        first_path, second_path = inputs_of(config, 2)
        permutations = "all" if config.exact else config.permutations
        result = mantel_spearman(read_matrix_csv(first_path), read_matrix_csv(second_path), permutations, config.seed)
        logger.info(f"Mantel: rho={result.rho:.4f} p={result.p_value:.4g} over {result.permutations} permutations")
        path = file_logic.write_model(config.out / "mantel.json", result)
        return {"outputs": {"mantel": str(path)}, "summary": result.model_dump()}
