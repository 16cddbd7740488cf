import logging
from pathlib import Path
from typing import Any

import pandas as pd

import file_logic
from annealing.centroid import derive_centroid
from graph.augment import compress
from graph.export import to_dot
from graph.matrix import PaddedMatrix
from processors.stage import StageProcessor, inputs_of, level_filter
from repair.repair import RepairResult, repair
from settings import PipelineConfig, resolve_solver

logger = logging.getLogger(__name__)


def write_repaired(out: Path, result: RepairResult) -> dict[str, str]:
    """Repaired matrix, its compressed graph and the per-partition solver statistics."""
    stg = compress(result.graph)
    outputs = {
        "repaired": file_logic.write_matrix(out / "centroid_repaired.json", result.matrix),
        "centroid": file_logic.write_graph(out / "centroid.json", stg),
        "dot": file_logic.write_text(out / "centroid.dot", to_dot(stg)),
        "repair": file_logic.write_json(
            out / "repair.json",
            {"objective": result.objective, "partitions": [p.model_dump(exclude={"seconds"}) for p in result.partitions]},
        ),
    }
    return {key: str(path) for key, path in outputs.items()}


def _repair(config: PipelineConfig, approx: PaddedMatrix, solver: str) -> RepairResult:
    return repair(
        approx,
        timeout_per_partition=config.solver_timeout,
        solver=solver,
        lns=config.lns,
        workers=config.workers,
        dump_dir=config.out / "smt" if config.dump_smt else None,
    )


class CentroidDeriverProcessor(StageProcessor):
    """Derives a corpus centroid and, unless disabled, repairs it into a valid graph."""

    name = "centroid"
    actions = ("centroid",)

    def run(self, action: str, config: PipelineConfig, request: dict[str, Any]) -> dict[str, Any]:
        solver = resolve_solver(config.solver) if config.repair else None
        files = file_logic.corpus_files(inputs_of(config))
        levels = level_filter(config)
        corpus = [file_logic.read_augmented(path, levels) for path in files]

        problem = derive_centroid(
            corpus, config.outer_schedule(), config.nested_endpoints(), config.workers, config.exhaustive
        )
        trace = pd.DataFrame({"step": range(len(problem.loss_trace)), "best_loss": problem.loss_trace})
        outputs = {
            "approximate": str(file_logic.write_matrix(config.out / "centroid_approx.json", problem.candidate)),
            "trace": str(file_logic.write_csv(config.out / "loss_trace.csv", trace)),
        }
        summary: dict[str, Any] = {
            "graphs": len(corpus),
            "naive": files[problem.naive_index].stem,
            "naive_loss": problem.naive_loss,
            "best_loss": problem.best_loss,
            "accepted_moves": problem.accepted_moves,
            "early_stop": problem.early_stop,
        }
        if solver is not None:
            result = _repair(config, problem.candidate, solver)
            outputs.update(write_repaired(config.out, result))
            summary["repair_flips"] = result.objective
        return {"outputs": outputs, "summary": summary}


class CentroidRepairerProcessor(StageProcessor):
    """Projects an approximate centroid matrix onto the nearest valid graph."""

    name = "repair"
    actions = ("repair",)

    def run(self, action: str, config: PipelineConfig, request: dict[str, Any]) -> dict[str, Any]:
        solver = resolve_solver(config.solver)
        approx = file_logic.read_matrix(inputs_of(config, 1)[0])
        result = _repair(config, approx, solver)
        return {"outputs": write_repaired(config.out, result), "summary": {"repair_flips": result.objective}}
