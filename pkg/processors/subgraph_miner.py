import logging
from typing import Any

import file_logic
from evaluation.subgraphs import mining_report
from processors.stage import StageProcessor, inputs_of, level_filter
from settings import PipelineConfig

logger = logging.getLogger(__name__)


class SubgraphMinerProcessor(StageProcessor):
    name = "mine"
    actions = ("mine",)

    def run(self, action: str, config: PipelineConfig, request: dict[str, Any]) -> dict[str, Any]:
        levels = level_filter(config)
        corpus = [file_logic.read_augmented(path, levels) for path in file_logic.corpus_files(inputs_of(config))]
        centroid = file_logic.read_augmented(config.centroid, levels) if config.centroid else None
        report = mining_report(corpus, centroid, config.subgraph_size, workers=config.workers)
        path = file_logic.write_model(config.out / "mine_report.json", report)
        summary = {"common": report.common_count, "containment": report.containment, "vacuous": report.vacuous}
        return {"outputs": {"report": str(path)}, "summary": summary}
