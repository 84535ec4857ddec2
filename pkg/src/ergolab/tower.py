"""Exact stage metadata and floor-set algebra for the rank-one tower construction.

The construction starts from a single unit-width interval (stage 1, one floor).
At stage j the current tower of ``h_j`` floors is cut into ``r_j`` equal-width
columns, ``s_j(i)`` spacer floors are stacked on top of column ``i``, and the
columns are restacked left to right into the stage-(j+1) tower of height

    h_{j+1} = r_j * h_j + sum_i s_j(i).

Everything here is exact: floor indices and heights are arbitrary-precision
integers, floor widths and measures are ``fractions.Fraction``.  A measurable
set is always a union of *full* floors of some stage (``FloorSet``); the step
map acts on floor indices as +1 inside a tower.

Marker floors: on designated even stages ``q`` the construction places two
marker floors above every column, at spacer offsets ``h_q`` and ``q*h_q``.
These drive the two-level extension in :mod:`ergolab.extension`.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

__all__ = [
    "ConstructionParams",
    "StageTable",
    "FloorSet",
    "InvalidConstruction",
    "MarkerOutsideSpacers",
    "StageOverflow",
    "build_stage_table",
    "refine",
    "shift",
    "intersect",
    "subtract",
    "measure",
    "base_floorset",
    "marker_floorset",
]

PRESETS = ("basic", "staircase-mixing")


class InvalidConstruction(ValueError):
    """A stage violates the construction's parameter constraints."""


class MarkerOutsideSpacers(InvalidConstruction):
    """A marker floor would land outside the spacer region of its column."""


class StageOverflow(ValueError):
    """An operation needs stages beyond ``j_max``; rebuild with a larger table."""


@dataclass(frozen=True)
class ConstructionParams:
    """Cut/spacer schedule, marker stages, and the stage horizon.

    ``preset='basic'`` uses ``r_j = max(j, 2)`` cuts and ``s_j(i) = j*h_j``
    spacers on every column.  ``preset='staircase-mixing'`` adds a staircase
    term, ``s_j(i) = j*h_j + i``, on the stages that carry no markers, and
    keeps the uniform ``j*h_j`` on marker stages so the marker mechanism is
    unchanged.

    ``marker_stages=None`` means every even stage ``q`` with ``q+1 <= j_max``
    carries markers; an explicit frozenset restricts to those stages.
    """

    preset: str = "basic"
    j_max: int = 9
    marker_stages: frozenset[int] | None = None

    def __post_init__(self) -> None:
        if self.preset not in PRESETS:
            raise InvalidConstruction(f"unknown preset {self.preset!r}")
        if self.j_max < 1:
            raise InvalidConstruction(f"j_max must be >= 1, got {self.j_max}")
        if self.marker_stages is not None:
            bad = [q for q in self.marker_stages if q < 2 or q % 2 != 0]
            if bad:
                raise InvalidConstruction(
                    f"marker stages must be even and >= 2, got {sorted(bad)}"
                )

    def cut_count(self, j: int) -> int:
        # r_j = j is degenerate at j=1; the basic override max(j, 2) keeps
        # every materialized stage a genuine cut.
        return max(j, 2)

    def spacer_count(self, j: int, column: int, h_j: int) -> int:
        """Spacers above 1-based ``column`` of stage ``j`` with height ``h_j``."""
        base = j * h_j
        if self.preset == "staircase-mixing" and not self.carries_markers(j):
            return base + column
        return base

    def carries_markers(self, stage: int) -> bool:
        if stage % 2 != 0 or stage < 2:
            return False
        if self.marker_stages is not None and stage not in self.marker_stages:
            return False
        return True

    def effective_marker_stages(self) -> tuple[int, ...]:
        """Marker stages whose marker floors exist within ``j_max`` stages."""
        return tuple(
            q for q in range(2, self.j_max) if q + 1 <= self.j_max and self.carries_markers(q)
        )


@dataclass(frozen=True)
class StageTable:
    """Materialized per-stage data: heights, widths, spacers and column offsets.

    ``heights[j-1]`` is ``h_j``.  ``offsets[j-1][i-1]`` is the bottom index of
    column ``i`` of stage ``j`` inside the stage-(j+1) tower, defined for
    ``j < j_max``.  ``widths[j-1]`` is the exact floor width ``w_j``.
    """

    params: ConstructionParams
    heights: tuple[int, ...]
    widths: tuple[Fraction, ...]
    spacers: tuple[tuple[int, ...], ...]
    offsets: tuple[tuple[int, ...], ...]

    @property
    def j_max(self) -> int:
        return len(self.heights)

    def height(self, j: int) -> int:
        self._check_stage(j)
        return self.heights[j - 1]

    def width(self, j: int) -> Fraction:
        self._check_stage(j)
        return self.widths[j - 1]

    def cut_count(self, j: int) -> int:
        return len(self.column_offsets(j))

    def column_offsets(self, j: int) -> tuple[int, ...]:
        self._check_stage(j)
        if j >= self.j_max:
            raise StageOverflow(f"stage {j} is the last materialized stage; no offsets")
        return self.offsets[j - 1]

    def spacer_counts(self, j: int) -> tuple[int, ...]:
        self._check_stage(j)
        if j >= self.j_max:
            raise StageOverflow(f"stage {j} is the last materialized stage; no spacers")
        return self.spacers[j - 1]

    def _check_stage(self, j: int) -> None:
        if not 1 <= j <= self.j_max:
            raise StageOverflow(f"stage {j} outside materialized range [1, {self.j_max}]")

    def to_json_obj(self) -> list[dict]:
        """Dump as a list of per-stage records, integers as decimal strings."""
        out = []
        for j in range(1, self.j_max + 1):
            w = self.width(j)
            rec = {
                "j": j,
                "h": str(self.height(j)),
                "w_num": str(w.numerator),
                "w_den": str(w.denominator),
                "offsets": [str(o) for o in (self.offsets[j - 1] if j < self.j_max else ())],
            }
            out.append(rec)
        return out


def build_stage_table(params: ConstructionParams, j_max: int | None = None) -> StageTable:
    """Materialize heights, widths, spacer counts and column offsets.

    Rejects any stage with fewer than two cuts and any marker stage whose
    spacer counts are too small for both markers to land on spacer floors
    (``s_q(i) >= q*h_q`` is required on marker stages ``q``).
    """
    if j_max is None:
        j_max = params.j_max
    if j_max < 1:
        raise InvalidConstruction(f"j_max must be >= 1, got {j_max}")
    if j_max != params.j_max:
        params = ConstructionParams(params.preset, j_max, params.marker_stages)

    heights = [1]
    widths = [Fraction(1)]
    spacers: list[tuple[int, ...]] = []
    offsets: list[tuple[int, ...]] = []
    for j in range(1, j_max):
        h_j = heights[-1]
        r_j = params.cut_count(j)
        if r_j < 2:
            raise InvalidConstruction(f"stage {j}: cut count {r_j} < 2")
        s_j = tuple(params.spacer_count(j, i, h_j) for i in range(1, r_j + 1))
        if any(s < 0 for s in s_j):
            raise InvalidConstruction(f"stage {j}: negative spacer count in {s_j}")
        if params.carries_markers(j):
            short = [i + 1 for i, s in enumerate(s_j) if s < j * h_j]
            if short:
                raise MarkerOutsideSpacers(
                    f"marker stage {j}: columns {short} have fewer than {j}*h_{j}"
                    f" = {j * h_j} spacers; the top marker would leave the spacer region"
                )
        o_j = [0]
        for i in range(1, r_j):
            o_j.append(o_j[-1] + h_j + s_j[i - 1])
        h_next = r_j * h_j + sum(s_j)
        assert o_j[-1] + h_j + s_j[-1] == h_next  # offset telescoping
        heights.append(h_next)
        widths.append(widths[-1] / r_j)
        spacers.append(s_j)
        offsets.append(tuple(o_j))

    return StageTable(
        params=params,
        heights=tuple(heights),
        widths=tuple(widths),
        spacers=tuple(spacers),
        offsets=tuple(offsets),
    )


@dataclass(frozen=True)
class FloorSet:
    """A union of full floors of one stage: sorted, duplicate-free indices."""

    stage: int
    indices: tuple[int, ...]

    @staticmethod
    def of(stage: int, indices: Iterable[int]) -> FloorSet:
        return FloorSet(stage, tuple(sorted(set(indices))))

    def __len__(self) -> int:
        return len(self.indices)

    def is_empty(self) -> bool:
        return not self.indices


def _check_bounds(table: StageTable, fs: FloorSet) -> None:
    h = table.height(fs.stage)
    if fs.indices and (fs.indices[0] < 0 or fs.indices[-1] >= h):
        raise ValueError(
            f"floor indices out of range [0, {h}) at stage {fs.stage}:"
            f" min={fs.indices[0]} max={fs.indices[-1]}"
        )


def refine(table: StageTable, fs: FloorSet, to_stage: int) -> FloorSet:
    """Re-express ``fs`` as floors of ``to_stage`` >= ``fs.stage``.

    Each stage-j floor ``f`` splits into the floors ``o_j(i) + f`` over all
    columns ``i``; measure is preserved exactly.
    """
    if to_stage < fs.stage:
        raise ValueError(f"cannot refine stage {fs.stage} down to {to_stage}")
    _check_bounds(table, fs)
    cur = list(fs.indices)
    for j in range(fs.stage, to_stage):
        cols = table.column_offsets(j)
        # column blocks are disjoint and ascending, so this stays sorted
        cur = [o + f for o in cols for f in cur]
    return FloorSet(to_stage, tuple(cur))


def _max_index_at(table: StageTable, fs: FloorSet, to_stage: int) -> int:
    """Largest index of ``refine(fs, to_stage)`` without materializing it."""
    m = fs.indices[-1]
    for j in range(fs.stage, to_stage):
        m += table.column_offsets(j)[-1]
    return m


def shift(table: StageTable, fs: FloorSet, n: int, to_stage: int | None = None) -> FloorSet:
    """Apply the step map n times: refine until the whole set fits, then add n.

    Refines to the smallest stage ``J`` with ``max(refine(fs, J)) + n < h_J``
    (or to ``to_stage`` if given), then adds ``n`` to every index.  Raises
    :class:`StageOverflow` when no materialized stage is high enough.
    """
    if n < 0:
        raise ValueError(f"shift count must be >= 0, got {n}")
    if fs.is_empty():
        return fs
    if to_stage is None:
        J = fs.stage
        while J <= table.j_max and _max_index_at(table, fs, J) + n >= table.height(J):
            J += 1
        if J > table.j_max:
            raise StageOverflow(
                f"shift by {n} does not fit below stage {table.j_max};"
                " rebuild the table with a larger j_max"
            )
    else:
        J = to_stage
        if _max_index_at(table, fs, J) + n >= table.height(J):
            raise StageOverflow(f"shift by {n} does not fit inside stage {J}")
    refined = refine(table, fs, J)
    return FloorSet(J, tuple(f + n for f in refined.indices))


def _common_stage(table: StageTable, a: FloorSet, b: FloorSet) -> tuple[FloorSet, FloorSet]:
    J = max(a.stage, b.stage)
    return refine(table, a, J), refine(table, b, J)


def intersect(table: StageTable, a: FloorSet, b: FloorSet) -> FloorSet:
    ra, rb = _common_stage(table, a, b)
    sb = set(rb.indices)
    return FloorSet(ra.stage, tuple(f for f in ra.indices if f in sb))


def subtract(table: StageTable, a: FloorSet, b: FloorSet) -> FloorSet:
    ra, rb = _common_stage(table, a, b)
    sb = set(rb.indices)
    return FloorSet(ra.stage, tuple(f for f in ra.indices if f not in sb))


def measure(table: StageTable, fs: FloorSet) -> Fraction:
    return len(fs.indices) * table.width(fs.stage)


def base_floorset(table: StageTable, stage: int) -> FloorSet:
    """The unit-measure base (the whole stage-1 tower) as stage-``stage`` floors."""
    return refine(table, FloorSet(1, (0,)), stage)


def marker_floorset(table: StageTable, half_index: int) -> FloorSet:
    """Both marker floors of marker stage ``q = 2*half_index``, at stage ``q+1``.

    The bottom floor of stage ``q`` is shifted up by ``h_q`` and by ``q*h_q``;
    each lands on a spacer floor of every column.  Raises
    :class:`MarkerOutsideSpacers` if any landing floor is not a spacer.
    """
    q = 2 * half_index
    if not table.params.carries_markers(q):
        raise InvalidConstruction(f"stage {q} carries no markers")
    if q + 1 > table.j_max:
        raise StageOverflow(f"marker stage {q} needs stage {q + 1} materialized")
    h_q = table.height(q)
    bottom = FloorSet(q, (0,))
    lower = shift(table, bottom, h_q, to_stage=q + 1)
    upper = shift(table, bottom, q * h_q, to_stage=q + 1)
    cols = table.column_offsets(q)
    spc = table.spacer_counts(q)
    for fs in (lower, upper):
        for f in fs.indices:
            ok = any(
                o + h_q <= f < o + h_q + s for o, s in zip(cols, spc)
            )
            if not ok:
                raise MarkerOutsideSpacers(
                    f"marker floor {f} of stage {q + 1} is not a spacer floor"
                )
    return FloorSet.of(q + 1, lower.indices + upper.indices)
