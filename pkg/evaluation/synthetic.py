"""Synthetic corpora with a known centroid.

Every variant is the base graph plus n distinct valid cell flips, so each is
exactly sqrt(n) away from the base before alignment and the base is the
corpus centroid.
"""
import logging
import math
from typing import Literal, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from annealing.alignment import (
    EXHAUSTIVE_LIMIT,
    AnnealSchedule,
    align,
    exhaustive_align,
    search_space,
)
from annealing.centroid import NestedEndpoints, corpus_loss, derive_centroid, naive_centroid
from annealing.workers import parallel_map, rng_for
from errors import EditBudgetExceeded, InputError
from graph.matrix import PaddedMatrix, structural_mask, to_augmented, to_padded, to_padded_pair
from graph.model import AugmentedGraph, EdgeRole
from graph.validation import validate_stg
from repair.repair import DEFAULT_TIMEOUT_SECONDS, repair

logger = logging.getLogger(__name__)

RETRIES_PER_EDIT = 1000
# Attempts without progress before a partial script is abandoned and sampling restarts.
STALL_LIMIT = 200

Operation = Literal["cell", "reassign_parent", "reassign_prototype"]
OPERATIONS: tuple[Operation, ...] = ("cell", "reassign_parent", "reassign_prototype")


class Edit(BaseModel):
    model_config = ConfigDict(frozen=True)

    row: int
    col: int
    direction: Literal["add", "remove"]
    operation: Operation
    step: int


class EditScript(BaseModel):
    """Ordered cell flips on the base graph's own padded matrix."""

    base_id: Optional[str] = None
    seed: int
    stream: int = 0
    target: int
    edits: list[Edit] = Field(default_factory=list)
    certified: bool = False
    certificate: Optional[float] = None

    @property
    def size(self) -> int:
        return len(self.edits)

    @property
    def cells(self) -> list[tuple[int, int]]:
        return [(edit.row, edit.col) for edit in self.edits]


class SyntheticCorpus(BaseModel):
    base: AugmentedGraph
    variants: list[AugmentedGraph]
    scripts: list[EditScript]
    edits_per_variant: int
    k: int
    seed: int


def _is_valid(adjacency: np.ndarray, matrix: PaddedMatrix) -> bool:
    try:
        return validate_stg(to_augmented(matrix.with_adjacency(adjacency))).ok
    except InputError:
        return False


def _propose_cell(
    adjacency: np.ndarray, mask: np.ndarray, touched: set[tuple[int, int]], rng: np.random.Generator
) -> Optional[list[tuple[int, int]]]:
    rows, cols = np.nonzero(mask | adjacency.astype(bool))
    if rows.size == 0:
        return None
    index = int(rng.integers(rows.size))
    cell = (int(rows[index]), int(cols[index]))
    return None if cell in touched else [cell]


def _propose_reassign(
    adjacency: np.ndarray, matrix: PaddedMatrix, rng: np.random.Generator, role: EdgeRole
) -> Optional[list[tuple[int, int]]]:
    """Moves one incoming edge of an instance row to another row of the source's partition."""
    pmap = matrix.partition_map
    part_ids = pmap.partition_ids()
    levels = list(pmap.levels)
    candidates = []
    for source, target in zip(*np.nonzero(adjacency)):
        source_part = pmap.partitions[part_ids[source]]
        target_part = pmap.partitions[part_ids[target]]
        if target_part.kind != "instance":
            continue
        if role is EdgeRole.PROTOTYPE and source_part.kind == "prototype":
            candidates.append((int(source), int(target)))
        elif role is EdgeRole.HIERARCHY and source_part.kind == "instance":
            if levels.index(target_part.level) - levels.index(source_part.level) == 1:
                candidates.append((int(source), int(target)))
    if not candidates:
        return None
    source, target = candidates[int(rng.integers(len(candidates)))]
    partition = pmap.partitions[part_ids[source]]
    others = [
        row
        for row in partition.rows
        if row != source and not adjacency[row, target] and (role is EdgeRole.HIERARCHY or matrix.row_labels[row])
    ]
    if not others:
        return None
    replacement = others[int(rng.integers(len(others)))]
    return [(source, target), (replacement, target)]


def random_valid_edits(
    g: AugmentedGraph,
    n: int,
    seed: int,
    stream: int = 0,
    budget: Optional[int] = None,
    certify: bool = True,
) -> EditScript:
    """Samples n distinct cell flips, each step leaving the graph valid.

    Candidates are drawn from three operations: a single flip anywhere an edge may
    live, moving an instance parent edge to another instance of the same level, and
    moving a prototype parent edge to another value of the same feature. Invalid
    candidates are rejected and resampled. When the search space is small enough the
    finished script is certified by exhaustive alignment and discarded if the base
    and the result can be aligned closer than sqrt(n).
    """
    if n < 0:
        raise InputError(f"Edit count must be non-negative, got {n}.", stage="synth")
    budget = budget if budget is not None else RETRIES_PER_EDIT * max(n, 1)
    matrix = to_padded([g])[0]
    mask = structural_mask(matrix.partition_map)
    rng = rng_for(seed, stream)

    def fresh_script() -> EditScript:
        return EditScript(base_id=g.title, seed=seed, stream=stream, target=n)

    script = fresh_script()
    if n == 0:
        script.certified, script.certificate = True, 0.0
        return script

    adjacency = matrix.adjacency.copy()
    touched: set[tuple[int, int]] = set()
    attempts = stalled = 0
    while attempts < budget:
        attempts += 1
        stalled += 1
        if stalled > STALL_LIMIT and script.size:
            logger.debug(f"Restarting script {stream} after {script.size} edits led to a dead end.")
            script, adjacency, stalled = fresh_script(), matrix.adjacency.copy(), 0
            touched.clear()
        remaining = n - script.size
        operation = OPERATIONS[int(rng.integers(len(OPERATIONS) if remaining >= 2 else 1))]
        if operation == "cell":
            cells = _propose_cell(adjacency, mask, touched, rng)
        elif operation == "reassign_parent":
            cells = _propose_reassign(adjacency, matrix, rng, EdgeRole.HIERARCHY)
        else:
            cells = _propose_reassign(adjacency, matrix, rng, EdgeRole.PROTOTYPE)
        if not cells or any(cell in touched for cell in cells):
            continue

        proposal = adjacency.copy()
        for cell in cells:
            proposal[cell] = 1 - proposal[cell]
        if not _is_valid(proposal, matrix):
            continue

        step = script.size
        for row, col in cells:
            direction = "add" if proposal[row, col] else "remove"
            script.edits.append(Edit(row=row, col=col, direction=direction, operation=operation, step=step))
        touched.update(cells)
        adjacency = proposal
        stalled = 0

        if script.size < n:
            continue
        if not certify:
            return script
        verdict = _certify(g, script)
        if verdict is None:
            return script
        if verdict >= math.sqrt(n) - 1e-9:
            script.certified, script.certificate = True, verdict
            return script
        logger.debug(f"Discarding script {stream}: aligned distance {verdict:.4f} below sqrt({n}).")
        script = fresh_script()
        adjacency = matrix.adjacency.copy()
        touched.clear()

    raise EditBudgetExceeded(
        f"Found {script.size} of {n} valid edits within {budget} attempts (stream {stream}).", partial=script
    )


def _certify(g: AugmentedGraph, script: EditScript) -> Optional[float]:
    """Optimal aligned distance between the base and the edited graph, or None when too costly to enumerate."""
    base, variant = to_padded_pair(g, apply(g, script))
    if search_space(base) > EXHAUSTIVE_LIMIT:
        return None
    return exhaustive_align(base, variant).energy


def apply(g: AugmentedGraph, script: EditScript) -> AugmentedGraph:
    matrix = to_padded([g])[0]
    adjacency = matrix.adjacency.copy()
    for edit in script.edits:
        expected = 0 if edit.direction == "add" else 1
        if adjacency[edit.row, edit.col] != expected:
            raise InputError(f"Edit {edit.row},{edit.col} ({edit.direction}) does not apply to {g.title}.", stage="synth")
        adjacency[edit.row, edit.col] = 1 - expected
    edited = to_augmented(matrix.with_adjacency(adjacency))
    return edited.model_copy(update={"title": f"{g.title or 'base'}+{script.size}@{script.stream}"})


def _variant_task(task: tuple[AugmentedGraph, int, int, int]) -> EditScript:
    g, n, seed, stream = task
    return random_valid_edits(g, n, seed, stream)


def build_corpus(g: AugmentedGraph, k: int, seed: int, n: Optional[int] = None, workers: int = 1) -> SyntheticCorpus:
    """k independent variants of g, each ceil(|E|/2) flips away unless n says otherwise."""
    if k < 1:
        raise InputError(f"Corpus size must be at least 1, got {k}.", stage="synth")
    n = math.ceil(g.edge_count / 2) if n is None else n
    logger.info(f"Building a synthetic corpus of {k} variants, {n} edits each, seed {seed}.")
    scripts = parallel_map(_variant_task, [(g, n, seed, stream) for stream in range(k)], workers)
    return SyntheticCorpus(
        base=g,
        variants=[apply(g, script) for script in scripts],
        scripts=scripts,
        edits_per_variant=n,
        k=k,
        seed=seed,
    )


def relative_error(measured: float, expected: float) -> float:
    if expected == 0:
        return 0.0 if measured == 0 else math.inf
    return abs(measured - expected) / expected


def loss_error(loss: float, truth: float) -> float:
    """Signed excess loss over the ground-truth centroid, relative to it."""
    if truth == 0:
        return 0.0 if loss == 0 else math.inf
    return (loss - truth) / truth


def _distance_row(task: tuple[str, AugmentedGraph, float, AnnealSchedule, int, bool]) -> dict:
    name, g, p, sched, stream, exhaustive = task
    target = math.ceil(g.edge_count * p)
    status = "ok"
    try:
        script = random_valid_edits(g, target, sched.seed, stream)
    except EditBudgetExceeded as e:
        script, status = e.partial, "partial"
        logger.warning(f"{name} p={p}: {e}")
    base, variant = to_padded_pair(g, apply(g, script))
    if exhaustive:
        measured = exhaustive_align(base, variant).energy
    else:
        measured = align(base, variant, sched, rng=rng_for(sched.seed, stream, 1)).energy
    expected = math.sqrt(script.size)
    return {
        "base": name,
        "p": p,
        "target_edits": target,
        "achieved_edits": script.size,
        "status": status,
        "expected": expected,
        "measured": measured,
        "relative_error": relative_error(measured, expected),
    }


def relative_error_study(
    bases: dict[str, AugmentedGraph],
    p_grid: list[float],
    sched: AnnealSchedule,
    workers: int = 1,
    exhaustive: bool = False,
) -> pd.DataFrame:
    """Computed against ground-truth distance for every (base, p) pair."""
    grid = [(name, g, p) for name, g in bases.items() for p in p_grid]
    tasks = [(name, g, p, sched, stream, exhaustive) for stream, (name, g, p) in enumerate(grid)]
    logger.info("=" * 20 + f" Distance error study: {len(bases)} bases x {len(p_grid)} edit rates " + "=" * 20)
    return pd.DataFrame(parallel_map(_distance_row, tasks, workers))


class CentroidStudyConfig(BaseModel):
    seed: int = 0
    edits: Optional[int] = None
    sched: AnnealSchedule = Field(default_factory=AnnealSchedule)
    outer: AnnealSchedule = Field(default_factory=lambda: AnnealSchedule(steps=1000, t_max=2.5, t_min=0.05))
    nested: NestedEndpoints = Field(default_factory=NestedEndpoints)
    workers: int = Field(default=1, ge=1)
    exhaustive: bool = False
    solver: Optional[str] = None
    timeout: float = DEFAULT_TIMEOUT_SECONDS


def centroid_error_study(g: AugmentedGraph, k_values: list[int], config: CentroidStudyConfig) -> pd.DataFrame:
    """Relative loss error of the derived and the naive centroid against the true one, per corpus size."""
    rows = []
    logger.info("=" * 20 + f" Centroid error study: k in {list(k_values)} " + "=" * 20)
    for k in k_values:
        corpus = build_corpus(g, k, config.seed, config.edits, config.workers)
        variants = corpus.variants

        def evaluate(centroid: AugmentedGraph) -> float:
            return corpus_loss(centroid, variants, config.sched, config.workers, config.exhaustive)

        truth = evaluate(g)
        naive = evaluate(variants[naive_centroid(variants, config.sched, config.workers, config.exhaustive)])
        outer = config.outer.model_copy(update={"seed": config.seed + k})
        problem = derive_centroid(variants, outer, config.nested, config.workers, config.exhaustive)

        candidate = problem.candidate
        repaired = validate_stg(to_augmented(candidate)).ok
        flips = 0
        if not repaired and config.solver:
            result = repair(candidate, config.timeout, config.solver, workers=config.workers)
            candidate, flips, repaired = result.matrix, result.objective, True
        elif not repaired:
            logger.warning(f"k={k}: no solver configured; scoring the unrepaired centroid.")
        derived = evaluate(to_augmented(candidate))

        rows.append(
            {
                "k": k,
                "edits": corpus.edits_per_variant,
                "ground_truth_loss": truth,
                "naive_loss": naive,
                "derived_loss": derived,
                "E_gd": loss_error(derived, truth),
                "E_gn": loss_error(naive, truth),
                "valid": repaired,
                "repair_flips": flips,
                "accepted_moves": problem.accepted_moves,
                "best_loss": problem.best_loss,
            }
        )
        logger.info(f"k={k}: E_gd={rows[-1]['E_gd']:.4f} E_gn={rows[-1]['E_gn']:.4f}")
    return pd.DataFrame(rows)
