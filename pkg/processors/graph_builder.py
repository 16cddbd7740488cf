import logging
from typing import Any

import file_logic
from graph.augment import compress
from graph.export import to_dot
from graph.validation import validate_stg
from processors.stage import StageProcessor, inputs_of, level_filter
from settings import PipelineConfig

logger = logging.getLogger(__name__)


class GraphBuilderProcessor(StageProcessor):
    """Builds, checks and converts single graphs: ingest, validate, augment, compress."""

    name = "graph"
    actions = ("ingest", "validate", "augment", "compress")

    def run(self, action: str, config: PipelineConfig, request: dict[str, Any]) -> dict[str, Any]:
        source = inputs_of(config, 1)[0]
        levels = level_filter(config)
        out = config.out

        if action == "ingest":
            graph = file_logic.read_compressed(source, levels)
            outputs = {
                "graph": file_logic.write_graph(out / "graph.json", graph),
                "dot": file_logic.write_text(out / "graph.dot", to_dot(graph)),
            }
            summary = {"levels": [k.value for k in graph.kinds], "nodes": len(graph.nodes), "edges": len(graph.edges)}

        elif action == "validate":
            graph = file_logic.read_graph(source, levels)
            report = validate_stg(graph)
            outputs = {"report": file_logic.write_model(out / "validation.json", report)}
            summary = {"valid": report.ok, "rules": sorted(report.rules())}
            if not report.ok:
                logger.warning(f"{source} is invalid: {report.summary()}")

        elif action == "augment":
            graph = file_logic.read_augmented(source, levels)
            outputs = {
                "graph": file_logic.write_graph(out / "augmented.json", graph),
                "dot": file_logic.write_text(out / "augmented.dot", to_dot(graph)),
            }
            summary = {
                "instances": len(graph.instances),
                "prototypes": len(graph.prototypes),
                "edges": graph.edge_count,
            }

        else:
            stg = compress(file_logic.read_augmented(source, levels))
            outputs = {
                "graph": file_logic.write_graph(out / "graph.json", stg),
                "dot": file_logic.write_text(out / "graph.dot", to_dot(stg)),
            }
            summary = {"nodes": len(stg.nodes), "edges": len(stg.edges)}

        logger.info(f"{action} of {source}: {summary}")
        return {"outputs": {key: str(path) for key, path in outputs.items()}, "summary": summary}
