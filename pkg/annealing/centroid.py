"""Centroid derivation: an outer annealer over candidate matrices whose energy
is the mean aligned distance to the corpus, with nested alignment runs that
shrink as the outer annealer cools."""
import logging
import math
from collections import Counter
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from annealing.alignment import (
    Alignment,
    AnnealSchedule,
    align,
    exhaustive_align,
    frobenius_distance,
    pairwise_distances,
)
from annealing.workers import parallel_map, rng_for
from errors import InputError, NoAdmissibleMove
from graph.matrix import PaddedMatrix, structural_mask, to_padded
from graph.model import AugmentedGraph

logger = logging.getLogger(__name__)

NESTED_T_MIN = 0.01


class NestedEndpoints(BaseModel):
    model_config = ConfigDict(frozen=True)

    t_initial_max: float = Field(default=1.0, gt=0)
    t_final_max: float = Field(default=0.05, gt=0)
    steps_initial: int = Field(default=500, ge=1)
    steps_final: int = Field(default=5, ge=1)
    t_min: float = Field(default=NESTED_T_MIN, gt=0)


class MoveMemory(BaseModel):
    last_move: Optional[tuple[int, int]] = None
    rejected: set[tuple[int, int]] = Field(default_factory=set)

    def accept(self, move: tuple[int, int]) -> None:
        self.last_move = move
        self.rejected.clear()

    def reject(self, move: tuple[int, int]) -> None:
        self.rejected.add(move)

    def forbids(self, move: tuple[int, int]) -> bool:
        return move == self.last_move or move in self.rejected


class CentroidProblem(BaseModel):
    """State and outcome of one centroid derivation."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    corpus: list[PaddedMatrix]
    candidate: PaddedMatrix
    outer: AnnealSchedule
    nested: NestedEndpoints
    loss_trace: list[float] = Field(default_factory=list)
    naive_index: int = 0
    naive_loss: float = 0.0
    best_loss: float = 0.0
    aligned_corpus: list[PaddedMatrix] = Field(default_factory=list)
    accepted_moves: int = 0
    early_stop: bool = False


def loss(candidate: PaddedMatrix, aligned_corpus: list[PaddedMatrix]) -> float:
    if not aligned_corpus:
        raise InputError("Loss needs a non-empty corpus.", stage="centroid")
    return sum(frobenius_distance(candidate, member) for member in aligned_corpus) / len(aligned_corpus)


def nested_schedule(
    outer_t: float,
    outer_t_min: float,
    outer_t_max: float,
    endpoints: NestedEndpoints,
) -> tuple[float, int]:
    """Max temperature and step count of the nested alignment runs at outer temperature outer_t."""
    if outer_t_max <= outer_t_min:
        raise InputError(f"Degenerate outer schedule: t_min {outer_t_min} >= t_max {outer_t_max}.", stage="centroid")
    if not outer_t_min - 1e-9 <= outer_t <= outer_t_max + 1e-9:
        raise InputError(f"Outer temperature {outer_t} lies outside [{outer_t_min}, {outer_t_max}].", stage="centroid")
    ratio = min(1.0, max(0.0, (outer_t - outer_t_min) / (outer_t_max - outer_t_min)))
    t_max = endpoints.t_initial_max * ratio + endpoints.t_final_max * (1 - ratio)
    steps = math.floor(endpoints.steps_initial * ratio + endpoints.steps_final * (1 - ratio))
    return t_max, max(1, steps)


def score_matrix(candidate: PaddedMatrix, aligned_corpus: list[PaddedMatrix]) -> np.ndarray:
    """Per-cell count of corpus members disagreeing with the candidate."""
    if not aligned_corpus:
        raise InputError("Score matrix needs a non-empty corpus.", stage="centroid")
    score = np.zeros(candidate.adjacency.shape, dtype=np.int64)
    for member in aligned_corpus:
        score += candidate.adjacency != member.adjacency
    return score


def centroid_move(
    candidate: PaddedMatrix,
    score: np.ndarray,
    memory: MoveMemory,
    rng: np.random.Generator,
    mask: Optional[np.ndarray] = None,
) -> tuple[tuple[int, int], PaddedMatrix]:
    """Flips the highest-scoring admissible cell; ties are broken by a random shuffle within each score tier."""
    if mask is None:
        mask = structural_mask(candidate.partition_map)
    n = candidate.size
    flat = score.ravel()
    order = np.lexsort((rng.random(flat.size), -flat))
    # Removing an edge never breaks a global rule; adding one must land in an allowed cell.
    admissible = (mask | (candidate.adjacency == 1)).ravel()
    for cell in order:
        if not admissible[cell]:
            continue
        move = (int(cell // n), int(cell % n))
        if move[0] == move[1] or memory.forbids(move):
            continue
        adjacency = candidate.adjacency.copy()
        adjacency[move] = 1 - adjacency[move]
        return move, candidate.with_adjacency(adjacency)
    raise NoAdmissibleMove("Every cell is forbidden, the last accepted move or already rejected.")


def _align_task(task: tuple[PaddedMatrix, PaddedMatrix, AnnealSchedule, np.ndarray, tuple[int, ...], bool]) -> Alignment:
    target, member, sched, initial_perm, keys, exhaustive = task
    if exhaustive:
        return exhaustive_align(target, member)
    return align(target, member, sched, initial_perm=initial_perm, rng=rng_for(sched.seed, *keys))


def _realign(
    target: PaddedMatrix,
    corpus: list[PaddedMatrix],
    perms: list[np.ndarray],
    sched: AnnealSchedule,
    step: int,
    workers: int,
    exhaustive: bool,
) -> tuple[list[PaddedMatrix], list[np.ndarray]]:
    tasks = [(target, member, sched, perms[m], (step, m), exhaustive) for m, member in enumerate(corpus)]
    alignments = parallel_map(_align_task, tasks, workers)
    perms = [alignment.perm for alignment in alignments]
    return [member.permuted(perm) for member, perm in zip(corpus, perms)], perms


def naive_centroid(
    corpus: list[AugmentedGraph],
    sched: AnnealSchedule,
    workers: int = 1,
    exhaustive: bool = False,
) -> int:
    """Index of the member with the least mean distance to the rest; ties go to the lowest index."""
    if not corpus:
        raise InputError("Cannot pick a naive centroid from an empty corpus.", stage="centroid")
    return _naive_index(to_padded(corpus), sched, workers, exhaustive)


def _naive_index(padded: list[PaddedMatrix], sched: AnnealSchedule, workers: int, exhaustive: bool) -> int:
    if len(padded) == 1:
        return 0
    distances = pairwise_distances(padded, sched, workers, exhaustive)
    means = distances.sum(axis=1) / (len(padded) - 1)
    return int(np.argmin(means))


def label_rows(candidate: PaddedMatrix, aligned_corpus: list[PaddedMatrix]) -> PaddedMatrix:
    """Names active unlabeled rows after the values the aligned corpus holds there."""
    labels = list(candidate.row_labels)
    active = candidate.active
    for partition in candidate.partition_map.partitions:
        for row in partition.rows:
            if labels[row] is not None or not active[row]:
                continue
            if partition.kind == "instance":
                labels[row] = partition.level.code
                continue
            taken = {labels[r] for r in partition.rows if labels[r] is not None and active[r]}
            votes = Counter(member.row_labels[row] for member in aligned_corpus if member.row_labels[row] is not None)
            ranked = sorted(votes, key=lambda value: (-votes[value], value))
            fresh = [value for value in ranked if value not in taken]
            if fresh or ranked:
                labels[row] = (fresh or ranked)[0]
                logger.debug(f"Labeled centroid row {row} of {partition.name} as {labels[row]}.")
    return candidate.with_adjacency(candidate.adjacency, tuple(labels))


def derive_centroid(
    corpus: list[AugmentedGraph],
    outer: Optional[AnnealSchedule] = None,
    nested: Optional[NestedEndpoints] = None,
    workers: int = 1,
    exhaustive: bool = False,
) -> CentroidProblem:
    """Anneals from the naive centroid towards the least mean aligned distance to the corpus.

    The returned candidate is the best state seen. It may violate local rules and
    still needs repair.
    """
    outer = outer or AnnealSchedule(steps=1000, t_max=2.5, t_min=0.05)
    nested = nested or NestedEndpoints()
    if not corpus:
        raise InputError("Cannot derive a centroid from an empty corpus.", stage="centroid")

    padded = to_padded(corpus)
    naive_sched = AnnealSchedule(steps=nested.steps_initial, t_max=nested.t_initial_max, t_min=nested.t_min, seed=outer.seed)
    naive = _naive_index(padded, naive_sched, workers, exhaustive)
    logger.info("=" * 20 + f" Centroid derivation: {len(corpus)} graphs, naive centroid #{naive} " + "=" * 20)

    mask = structural_mask(padded[naive].partition_map)
    candidate = padded[naive]
    perms = [np.arange(candidate.size) for _ in padded]

    def nested_sched(temperature: float) -> AnnealSchedule:
        t_max, steps = nested_schedule(temperature, outer.t_min, outer.t_max, nested)
        return AnnealSchedule(steps=steps, t_max=max(t_max, nested.t_min * 1.0001), t_min=nested.t_min, seed=outer.seed)

    aligned, perms = _realign(candidate, padded, perms, nested_sched(outer.t_max), 0, workers, exhaustive)
    current_loss = loss(candidate, aligned)
    problem = CentroidProblem(
        corpus=padded,
        candidate=candidate,
        outer=outer,
        nested=nested,
        loss_trace=[current_loss],
        naive_index=naive,
        naive_loss=current_loss,
        best_loss=current_loss,
        aligned_corpus=aligned,
    )

    memory = MoveMemory()
    rng = rng_for(outer.seed)
    for step in range(outer.steps):
        if problem.best_loss == 0:
            logger.debug("Centroid coincides with every aligned member; stopping.")
            break
        temperature = outer.temperature(step)
        score = score_matrix(candidate, aligned)
        try:
            move, proposal = centroid_move(candidate, score, memory, rng, mask)
        except NoAdmissibleMove as e:
            logger.warning(f"Centroid annealer stopped early at step {step}: {e}")
            problem.early_stop = True
            break

        proposal_aligned, proposal_perms = _realign(
            proposal, padded, perms, nested_sched(temperature), step + 1, workers, exhaustive
        )
        proposal_loss = loss(proposal, proposal_aligned)
        delta = proposal_loss - current_loss
        if delta <= 0 or rng.random() < math.exp(-delta / temperature):
            assert not (proposal.adjacency.astype(bool) & ~mask).any(), "accepted move broke a global edge rule"
            candidate, aligned, perms, current_loss = proposal, proposal_aligned, proposal_perms, proposal_loss
            memory.accept(move)
            problem.accepted_moves += 1
            if current_loss < problem.best_loss:
                problem.best_loss = current_loss
                problem.candidate = candidate
                problem.aligned_corpus = aligned
        else:
            memory.reject(move)
        problem.loss_trace.append(problem.best_loss)
        if step % 100 == 0:
            logger.debug(f"Step {step}: T={temperature:.4f} loss={current_loss:.4f} best={problem.best_loss:.4f}")

    problem.candidate = label_rows(problem.candidate, problem.aligned_corpus)
    logger.info(
        f"Centroid derivation done: naive loss {problem.naive_loss:.4f}, best loss {problem.best_loss:.4f}, "
        f"{problem.accepted_moves} accepted moves."
    )
    return problem


def corpus_loss(
    centroid: AugmentedGraph,
    corpus: list[AugmentedGraph],
    sched: Optional[AnnealSchedule] = None,
    workers: int = 1,
    exhaustive: bool = False,
) -> float:
    """Mean aligned distance from any centroid graph to the corpus."""
    if not corpus:
        raise InputError("Loss needs a non-empty corpus.", stage="centroid")
    sched = sched or AnnealSchedule()
    padded = to_padded([centroid, *corpus])
    target, members = padded[0], padded[1:]
    aligned, _ = _realign(target, members, [np.arange(target.size) for _ in members], sched, 0, workers, exhaustive)
    return loss(target, aligned)
