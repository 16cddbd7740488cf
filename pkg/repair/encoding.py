"""SMT-LIB encodings of the local structural rules over parts of a padded matrix.

Instance level pairs carry the chain and parent rules; single levels carry the
prototype rules once their instance subgraph is fixed. Chain positions and
first/last parent positions are uninterpreted functions over row indices.
"""
import logging
from typing import Optional

from pydantic import BaseModel, Field, model_validator

from errors import InputError, RepairUnsatisfiableError
from graph.matrix import PaddedMatrix, Partition
from graph.model import LevelKind, is_legal_feature
from repair import smtlib_utils as smt

logger = logging.getLogger(__name__)

POS, FIRST_PARENT, LAST_PARENT = "pos", "firstp", "lastp"


class ConstraintBundle(BaseModel):
    """One solver call: the cells it decides, the cells it must respect and the rule text."""

    name: str
    rules: frozenset[str]
    scope: tuple[int, ...]
    variables: tuple[tuple[int, int], ...]
    frozen: dict[tuple[int, int], int] = Field(default_factory=dict)
    active_rows: tuple[int, ...] = ()
    frozen_active: dict[int, bool] = Field(default_factory=dict)
    initial: dict[tuple[int, int], int] = Field(default_factory=dict)
    statements: list[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_frozen(self) -> "ConstraintBundle":
        overlap = set(self.variables) & set(self.frozen)
        if overlap:
            raise ValueError(f"Cells both free and frozen in {self.name}: {sorted(overlap)[:5]}")
        if any(bit not in (0, 1) for bit in self.frozen.values()):
            raise ValueError(f"Frozen cells of {self.name} must be 0 or 1")
        return self

    def script(self, timeout_ms: Optional[int] = None, lns: bool = False) -> str:
        header = [smt.add_comment(f"bundle {self.name}, rules {','.join(sorted(self.rules))}"), smt.set_option("produce-models", "true")]
        if timeout_ms is not None:
            header.append(smt.set_timeout(timeout_ms))
        if lns:
            header.append(smt.set_option("opt.enable_lns", "true"))
        header.append(smt.set_logic("QF_UFLIA"))
        footer = [smt.check_sat(), smt.get_objectives(), smt.get_model()]
        return "\n".join(header + self.statements + footer) + "\n"


def edge_var(i: int, j: int) -> str:
    return smt.var_name("e", i, j)


def active_var(row: int) -> str:
    return smt.var_name("a", row)


class _Builder:
    """Accumulates declarations and assertions; frozen cells become literals."""

    def __init__(self, approx: PaddedMatrix, frozen: dict[tuple[int, int], int], frozen_active: dict[int, bool]):
        self.approx = approx
        self.frozen = dict(frozen)
        self.frozen_active = dict(frozen_active)
        self.variables: list[tuple[int, int]] = []
        self.active_rows: list[int] = []
        self.declarations: list[str] = []
        self.constraints: list[str] = []
        self.ints: set[str] = set()
        self._declared_cells: set[tuple[int, int]] = set()
        self._declared_rows: set[int] = set()

    def edge(self, i: int, j: int) -> str:
        if (i, j) in self.frozen:
            return smt.bool_literal(bool(self.frozen[(i, j)]))
        if (i, j) not in self._declared_cells:
            self._declared_cells.add((i, j))
            self.variables.append((i, j))
            self.declarations.append(smt.declare_boolvar(edge_var(i, j)))
        return edge_var(i, j)

    def active(self, row: int) -> str:
        if row in self.frozen_active:
            return smt.bool_literal(self.frozen_active[row])
        if row not in self._declared_rows:
            self._declared_rows.add(row)
            self.active_rows.append(row)
            self.declarations.append(smt.declare_boolvar(active_var(row)))
        return active_var(row)

    def int_const(self, name: str) -> str:
        if name not in self.ints:
            self.ints.add(name)
            self.declarations.append(smt.declare_intvar(name))
        return name

    def require(self, statement: str) -> None:
        self.constraints.append(smt.add_assert(statement))

    def soft_constraints(self) -> list[str]:
        soft = []
        for i, j in self.variables:
            bit = int(self.approx.adjacency[i, j])
            soft.append(smt.add_assert_soft(edge_var(i, j) if bit else smt.add_not(edge_var(i, j))))
        return soft

    def bundle(self, name: str, rules: set[str], scope: list[int]) -> ConstraintBundle:
        functions = [smt.declare_int_function(fn) for fn in (POS, FIRST_PARENT, LAST_PARENT)]
        return ConstraintBundle(
            name=name,
            rules=frozenset(rules),
            scope=tuple(scope),
            variables=tuple(self.variables),
            frozen={cell: bit for cell, bit in self.frozen.items() if cell[0] in scope and cell[1] in scope},
            active_rows=tuple(self.active_rows),
            frozen_active={row: value for row, value in self.frozen_active.items() if row in scope},
            initial={cell: int(self.approx.adjacency[cell]) for cell in self.variables},
            statements=functions + self.declarations + self.constraints + self.soft_constraints(),
        )


def _pos(row: int) -> str:
    return smt.call(POS, row)


def _encode_chain(builder: _Builder, partition: Partition) -> str:
    """Single linear chain over the active rows of one level. Returns the active-count constant."""
    rows = list(partition.rows)
    degree = builder.approx.degree
    for row in rows:
        if row not in builder.frozen_active and degree[row] == 0:
            builder.frozen_active[row] = False

    count = builder.int_const(f"cnt_{partition.level.value}")
    builder.require(smt.add_eq(count, smt.count_true(builder.active(row) for row in rows)))
    builder.require(smt.add_leq(1, count))

    chain_edges = []
    for i in rows:
        outgoing = [builder.edge(i, j) for j in rows if j != i]
        incoming = [builder.edge(j, i) for j in rows if j != i]
        chain_edges.extend(outgoing)
        builder.require(smt.add_leq(smt.count_true(outgoing), 1))
        builder.require(smt.add_leq(smt.count_true(incoming), 1))
        builder.require(smt.add_implies(builder.active(i), smt.add_and(smt.add_leq(0, _pos(i)), smt.add_lt(_pos(i), count))))
        builder.require(smt.add_implies(smt.add_and(builder.active(i), smt.add_not(smt.add_or(*incoming))), smt.add_eq(_pos(i), 0)))
        for j in rows:
            if j == i:
                continue
            edge = builder.edge(i, j)
            builder.require(smt.add_implies(edge, smt.add_and(builder.active(i), builder.active(j))))
            builder.require(smt.add_implies(edge, smt.add_eq(_pos(j), smt.add_plus(_pos(i), 1))))
    builder.require(smt.add_eq(smt.count_true(chain_edges), smt.add_minus(count, 1)))
    return count


def _encode_parents(builder: _Builder, upper: Partition, lower: Partition, upper_count: str, lower_count: str) -> None:
    first = lambda row: smt.call(FIRST_PARENT, row)
    last = lambda row: smt.call(LAST_PARENT, row)
    for child in lower.rows:
        active = builder.active(child)
        parents = [builder.edge(parent, child) for parent in upper.rows]
        count = smt.count_true(parents)
        builder.require(smt.add_implies(active, smt.add_and(smt.add_leq(1, count), smt.add_leq(count, 2))))
        for parent in upper.rows:
            edge = builder.edge(parent, child)
            builder.require(smt.add_implies(edge, smt.add_and(builder.active(parent), active)))
            builder.require(smt.add_implies(edge, smt.add_and(smt.add_leq(first(child), _pos(parent)), smt.add_leq(_pos(parent), last(child)))))
            # Chain ends hang from the chain ends above.
            heads = smt.add_and(active, builder.active(parent), smt.add_eq(_pos(child), 0), smt.add_eq(_pos(parent), 0))
            tails = smt.add_and(
                active,
                builder.active(parent),
                smt.add_eq(_pos(child), smt.add_minus(lower_count, 1)),
                smt.add_eq(_pos(parent), smt.add_minus(upper_count, 1)),
            )
            builder.require(smt.add_implies(heads, edge))
            builder.require(smt.add_implies(tails, edge))
        builder.require(smt.add_implies(active, smt.add_or(*(smt.add_and(builder.edge(p, child), smt.add_eq(first(child), _pos(p))) for p in upper.rows))))
        builder.require(smt.add_implies(active, smt.add_or(*(smt.add_and(builder.edge(p, child), smt.add_eq(last(child), _pos(p))) for p in upper.rows))))

    for previous in lower.rows:
        for current in lower.rows:
            if previous == current:
                continue
            edge = builder.edge(previous, current)
            if not lower.level.overlapping:
                builder.require(smt.add_implies(edge, smt.add_leq(last(previous), first(current))))
            builder.require(smt.add_implies(edge, smt.add_leq(first(previous), first(current))))


def encode_instance_pair(
    upper: LevelKind,
    lower: Optional[LevelKind],
    approx: PaddedMatrix,
    frozen: Optional[dict[tuple[int, int], int]] = None,
    frozen_active: Optional[dict[int, bool]] = None,
) -> ConstraintBundle:
    """Chain and parent rules over two adjacent instance levels; lower=None encodes a lone top level."""
    pmap = approx.partition_map
    levels = list(pmap.levels)
    if upper not in levels or (lower is not None and lower not in levels):
        raise InputError("Level pair is not part of the matrix.", stage="repair")
    if lower is not None and levels.index(lower) != levels.index(upper) + 1:
        raise InputError(f"Levels {upper.value} and {lower.value} are not adjacent.", stage="repair")

    builder = _Builder(approx, frozen or {}, frozen_active or {})
    upper_part = pmap.instance_partition(upper)
    upper_count = _encode_chain(builder, upper_part)
    scope = list(upper_part.rows)
    rules = {"G1", "G4", "G5", "I2"}
    name = upper.value
    if lower is not None:
        lower_part = pmap.instance_partition(lower)
        lower_count = _encode_chain(builder, lower_part)
        _encode_parents(builder, upper_part, lower_part, upper_count, lower_count)
        scope += list(lower_part.rows)
        rules |= {"I1", "I3", "I5"} | (set() if lower.overlapping else {"I4"})
        name = f"{upper.value}+{lower.value}"
    return builder.bundle(name, rules, scope)


def encode_prototypes(
    level: LevelKind,
    approx: PaddedMatrix,
    frozen: dict[tuple[int, int], int],
    frozen_active: dict[int, bool],
) -> ConstraintBundle:
    """Prototype rules for one level over its prototype-to-instance cells."""
    pmap = approx.partition_map
    instance_rows = list(pmap.instance_partition(level).rows)
    missing = [row for row in instance_rows if row not in frozen_active]
    if missing:
        raise InputError(f"Instance rows {missing[:5]} of {level.value} are not repaired yet.", stage="repair")

    builder = _Builder(approx, {}, frozen_active)
    groups = pmap.prototype_partitions(level)
    usable: dict[int, str] = {}
    for group in groups:
        for row in group.rows:
            value = approx.row_labels[row]
            if value is not None and is_legal_feature(level, group.feature_name, value):
                usable[row] = value

    active_instances = [row for row in instance_rows if frozen_active[row]]
    for group in groups:
        for proto in group.rows:
            for inst in instance_rows:
                if proto not in usable or not frozen_active[inst]:
                    builder.frozen[(proto, inst)] = 0

    for inst in active_instances:
        for slot in level.feature_slots:
            cells = [builder.edge(p, inst) for g in groups if g.feature_name in slot for p in g.rows if p in usable]
            if not cells:
                raise RepairUnsatisfiableError(f"No prototype can fill {'/'.join(slot)} of {level.value} row {inst}.")
            builder.require(smt.add_eq(smt.count_true(cells), 1))

    rules = {"G2", "G3", "P1"}
    if level.distinct_neighbors:
        rules.add("P2")
        values = sorted({(g.feature_name, usable[p]) for g in groups for p in g.rows if p in usable})

        def has(inst: int, feature: tuple[str, str]) -> str:
            rows = [p for g in groups if g.feature_name == feature[0] for p in g.rows if usable.get(p) == feature[1]]
            return smt.add_or(*(builder.edge(p, inst) for p in rows))

        for previous in active_instances:
            for current in active_instances:
                if previous != current and frozen.get((previous, current)) == 1:
                    same = [smt.add_eq(has(previous, value), has(current, value)) for value in values]
                    builder.require(smt.add_not(smt.add_and(*same)))

    scope = instance_rows + [row for group in groups for row in group.rows]
    return builder.bundle(f"{level.value}-prototypes", rules, scope)
