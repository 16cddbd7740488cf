"""Projection of an approximate centroid onto the nearest valid STG.

Instance level pairs are solved top-down, each solved level frozen for the
next pair; prototype wiring is then solved per level, levels concurrently.
"""
import asyncio
import logging
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from errors import InputError, InternalError, RepairUnsatisfiableError, SolverError
from graph.matrix import PaddedMatrix, structural_mask, to_augmented
from graph.model import AugmentedGraph
from graph.validation import validate_stg
from repair.encoding import ConstraintBundle, active_var, edge_var, encode_instance_pair, encode_prototypes
from repair.solver import SolverOutcome, run_solver

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT_SECONDS = 300.0


class PartitionStats(BaseModel):
    name: str
    rules: list[str]
    variables: int
    flips: int
    seconds: float
    timed_out: bool
    optimal: bool


class RepairResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    matrix: PaddedMatrix
    objective: int
    partitions: list[PartitionStats] = Field(default_factory=list)

    @property
    def graph(self) -> AugmentedGraph:
        return to_augmented(self.matrix)


class RepairOptions(BaseModel):
    solver: Optional[str] = None
    timeout: float = Field(default=DEFAULT_TIMEOUT_SECONDS, gt=0)
    lns: bool = True
    workers: int = Field(default=1, ge=1)
    dump_dir: Optional[Path] = None


def _is_valid(matrix: PaddedMatrix) -> bool:
    try:
        return validate_stg(to_augmented(matrix)).ok
    except InputError:
        return False


async def _solve(bundle: ConstraintBundle, options: RepairOptions) -> SolverOutcome:
    script = bundle.script(timeout_ms=int(options.timeout * 1000), lns=options.lns)
    if options.dump_dir is not None:
        options.dump_dir.mkdir(parents=True, exist_ok=True)
        (options.dump_dir / f"{bundle.name}.smt2").write_text(script)
    if not bundle.variables:
        return SolverOutcome(status="sat")
    outcome = await run_solver(options.solver, script, options.timeout, bundle.name)
    if outcome.status == "unsat":
        raise RepairUnsatisfiableError(f"Partition {bundle.name} admits no valid assignment.")
    if outcome.timed_out and not outcome.model:
        raise SolverError(f"Solver timed out on {bundle.name} without an intermediate model.")
    if outcome.timed_out:
        logger.warning(f"Solver timed out on {bundle.name}; keeping its best intermediate model.")
    return outcome


def _apply(bundle: ConstraintBundle, outcome: SolverOutcome, adjacency: np.ndarray) -> tuple[dict, dict, PartitionStats]:
    """Writes the bundle's decisions into adjacency; returns the decided cells and activeness."""
    cells: dict[tuple[int, int], int] = dict(bundle.frozen)
    for cell in bundle.variables:
        cells[cell] = int(outcome.model.get(edge_var(*cell), bool(bundle.initial[cell])))
    active = dict(bundle.frozen_active)
    for row in bundle.active_rows:
        active[row] = outcome.model.get(active_var(row), True)
    flips = 0
    for cell, bit in cells.items():
        flips += int(adjacency[cell] != bit)
        adjacency[cell] = bit
    stats = PartitionStats(
        name=bundle.name,
        rules=sorted(bundle.rules),
        variables=len(bundle.variables),
        flips=flips,
        seconds=outcome.seconds,
        timed_out=outcome.timed_out,
        optimal=outcome.status == "sat",
    )
    logger.info(f"Repaired {bundle.name}: {flips} flips over {len(bundle.variables)} cells in {outcome.seconds:.2f}s.")
    return cells, active, stats


async def repair_async(approx: PaddedMatrix, options: RepairOptions) -> RepairResult:
    if _is_valid(approx):
        logger.info("Approximate centroid is already valid; nothing to repair.")
        return RepairResult(matrix=approx, objective=0)
    if not options.solver:
        raise SolverError("Repair needs an SMT solver binary.")

    pmap = approx.partition_map
    adjacency = approx.adjacency.copy()
    forbidden = ~structural_mask(pmap) & adjacency.astype(bool)
    if forbidden.any():
        logger.warning(f"Clearing {int(forbidden.sum())} edges that break the global edge rules.")
        adjacency[forbidden] = 0
    working = approx.with_adjacency(adjacency)

    logger.info("=" * 20 + f" Repair: {len(pmap.levels)} levels, solver {options.solver} " + "=" * 20)
    frozen: dict[tuple[int, int], int] = {}
    frozen_active: dict[int, bool] = {}
    stats: list[PartitionStats] = []
    levels = list(pmap.levels)
    pairs = list(zip(levels, levels[1:])) or [(levels[0], None)]
    for upper, lower in pairs:
        bundle = encode_instance_pair(upper, lower, working, frozen, frozen_active)
        outcome = await _solve(bundle, options)
        cells, active, partition_stats = _apply(bundle, outcome, adjacency)
        frozen.update(cells)
        frozen_active.update(active)
        stats.append(partition_stats)
        working = working.with_adjacency(adjacency)

    semaphore = asyncio.Semaphore(options.workers)

    async def prototype_level(level):
        async with semaphore:
            bundle = encode_prototypes(level, working, frozen, frozen_active)
            return bundle, await _solve(bundle, options)

    for bundle, outcome in await asyncio.gather(*(prototype_level(level) for level in levels)):
        _, _, partition_stats = _apply(bundle, outcome, adjacency)
        stats.append(partition_stats)

    repaired = approx.with_adjacency(adjacency)
    report = validate_stg(to_augmented(repaired))
    if not report.ok:
        raise InternalError(f"Repair produced an invalid graph: {report.summary()}", stage="repair")
    objective = int(np.count_nonzero(repaired.adjacency != approx.adjacency))
    logger.info(f"Repair finished: {objective} flips in total.")
    return RepairResult(matrix=repaired, objective=objective, partitions=stats)


def repair(
    approx: PaddedMatrix,
    timeout_per_partition: float = DEFAULT_TIMEOUT_SECONDS,
    solver: Optional[str] = None,
    lns: bool = True,
    workers: int = 1,
    dump_dir: Optional[Path] = None,
) -> RepairResult:
    options = RepairOptions(solver=solver, timeout=timeout_per_partition, lns=lns, workers=workers, dump_dir=dump_dir)
    return asyncio.run(repair_async(approx, options))
