import logging
from typing import Any

import file_logic
from evaluation.synthetic import CentroidStudyConfig, build_corpus, centroid_error_study, relative_error_study
from processors.stage import StageProcessor, inputs_of, level_filter
from settings import PipelineConfig, resolve_solver

logger = logging.getLogger(__name__)


class CorpusSynthesizerProcessor(StageProcessor):
    """Synthetic corpora around a base graph and the two error studies built on them."""

    name = "synth"
    actions = ("synth", "dist-error", "centroid-error")

    def run(self, action: str, config: PipelineConfig, request: dict[str, Any]) -> dict[str, Any]:
        levels = level_filter(config)
        if action == "dist-error":
            files = file_logic.corpus_files(inputs_of(config))
            bases = {path.stem: file_logic.read_augmented(path, levels) for path in files}
            table = relative_error_study(bases, config.p_grid, config.align_schedule(), config.workers, config.exhaustive)
            path = file_logic.write_csv(config.out / "dist_error.csv", table)
            summary = {"rows": len(table), "max_relative_error": float(table["relative_error"].max())}
            return {"outputs": {"table": str(path)}, "summary": summary}

        base = file_logic.read_augmented(inputs_of(config, 1)[0], levels)
        if action == "centroid-error":
            study = CentroidStudyConfig(
                seed=config.seed,
                edits=config.edits,
                sched=config.align_schedule(),
                outer=config.outer_schedule(),
                nested=config.nested_endpoints(),
                workers=config.workers,
                exhaustive=config.exhaustive,
                solver=resolve_solver(config.solver) if config.repair else None,
                timeout=config.solver_timeout,
            )
            table = centroid_error_study(base, config.k_values, study)
            path = file_logic.write_csv(config.out / "centroid_error.csv", table)
            summary = {"rows": len(table), "max_E_gd": float(table["E_gd"].max()), "max_E_gn": float(table["E_gn"].max())}
            return {"outputs": {"table": str(path)}, "summary": summary}

        corpus = build_corpus(base, config.k, config.seed, config.edits, config.workers)
        outputs = {"base": str(file_logic.write_graph(config.out / "base.json", base))}
        for index, variant in enumerate(corpus.variants):
            path = file_logic.write_graph(config.out / "variants" / f"variant_{index:03d}.json", variant)
            outputs[f"variant_{index:03d}"] = str(path)
        scripts = [script.model_dump() for script in corpus.scripts]
        outputs["scripts"] = str(file_logic.write_json(config.out / "scripts.json", scripts))
        summary = {
            "k": corpus.k,
            "edits_per_variant": corpus.edits_per_variant,
            "certified": sum(script.certified for script in corpus.scripts),
        }
        return {"outputs": outputs, "summary": summary}
