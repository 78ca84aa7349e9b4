"""Region-by-time data grid and the transformations charts are built from.

The dataset document is line-oriented text:

    #! cubedeck-dataset v1
    unit "USD per capita"
    bins 1990-2000 2000-2010 2010-2020
    region CAN "Canada" 0.2056 0.8111 534.2 612.9 701.3

``bins`` lists contiguous, non-overlapping year spans.  Each ``region`` row
carries the region id, a quoted label, a normalized map anchor (u, v) in
[0, 1]^2, then one value per bin.  Comments start with ``#`` (except the
``#!`` header), blank lines are ignored.

Every operation below is pure; slices are immutable values.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from typing import Iterable, List, Optional, Sequence, Tuple

from .errors import (
    AlignmentError,
    EmptySelectionError,
    InsufficientResolutionError,
    InvalidPartitionError,
    SchemaError,
)

DATASET_HEADER = "#! cubedeck-dataset v1"


@dataclass(frozen=True)
class TimeBin:
    start_year: int
    end_year: int

    @property
    def label(self) -> str:
        return f"{self.start_year}-{self.end_year}"

    @property
    def span(self) -> int:
        return self.end_year - self.start_year


@dataclass(frozen=True)
class Region:
    region_id: str
    label: str
    anchor: Tuple[float, float]


@dataclass(frozen=True)
class SpaceTimeCube:
    regions: Tuple[Region, ...]
    bins: Tuple[TimeBin, ...]
    values: Tuple[Tuple[float, ...], ...]  # region-major grid
    unit: str

    def region_ids(self) -> Tuple[str, ...]:
        return tuple(r.region_id for r in self.regions)


@dataclass(frozen=True)
class DataSlice:
    """A rectangular selection of cells, with per-cell hidden flags."""

    regions: Tuple[Region, ...]
    bins: Tuple[TimeBin, ...]
    values: Tuple[Tuple[float, ...], ...]
    hidden: Tuple[Tuple[bool, ...], ...]
    unit: str

    @property
    def cell_count(self) -> int:
        return len(self.regions) * len(self.bins)

    def region_ids(self) -> Tuple[str, ...]:
        return tuple(r.region_id for r in self.regions)

    def row(self, region_id: str) -> Tuple[float, ...]:
        for i, r in enumerate(self.regions):
            if r.region_id == region_id:
                return self.values[i]
        raise KeyError(region_id)

    def total(self) -> float:
        return sum(sum(row) for row in self.values)

    def with_hidden(self, flags: Iterable[Tuple[int, int]]) -> "DataSlice":
        """Copy with the given (region_idx, bin_idx) cells marked hidden."""
        marks = set(flags)
        hidden = tuple(
            tuple((ri, bi) in marks or self.hidden[ri][bi] for bi in range(len(self.bins)))
            for ri in range(len(self.regions))
        )
        return replace(self, hidden=hidden)


@dataclass(frozen=True)
class ExtremeCell:
    region_id: str
    bin: TimeBin
    value: float


@dataclass(frozen=True)
class ExtremeReport:
    min_cell: ExtremeCell
    max_cell: ExtremeCell


def _tokenize(line: str, lineno: int) -> List[str]:
    tokens: List[str] = []
    i = 0
    n = len(line)
    while i < n:
        if line[i] == " ":
            i += 1
            continue
        if line[i] == '"':
            j = line.find('"', i + 1)
            if j < 0:
                raise SchemaError(f"line {lineno}: unterminated quote")
            tokens.append(line[i + 1 : j])
            i = j + 1
        else:
            j = i
            while j < n and line[j] != " ":
                j += 1
            tokens.append(line[i:j])
            i = j
    return tokens


def parse_bin_token(token: str) -> TimeBin:
    try:
        start, end = token.split("-")
        b = TimeBin(int(start), int(end))
    except ValueError as exc:
        raise SchemaError(f"malformed bin token {token!r}") from exc
    if b.end_year <= b.start_year:
        raise SchemaError(f"bin {token!r} must end after it starts")
    return b


def load_dataset(text: str) -> SpaceTimeCube:
    """Parse and validate a dataset document."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != DATASET_HEADER:
        raise SchemaError(f"missing dataset header {DATASET_HEADER!r}")
    unit: Optional[str] = None
    bins: Optional[Tuple[TimeBin, ...]] = None
    regions: List[Region] = []
    grid: List[Tuple[float, ...]] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = _tokenize(line, lineno)
        head = tokens[0]
        if head == "unit":
            if len(tokens) != 2:
                raise SchemaError(f"line {lineno}: unit takes one (quoted) value")
            unit = tokens[1]
        elif head == "bins":
            if bins is not None:
                raise SchemaError(f"line {lineno}: duplicate bins line")
            parsed = [parse_bin_token(t) for t in tokens[1:]]
            if not parsed:
                raise SchemaError(f"line {lineno}: at least one bin required")
            for prev, cur in zip(parsed, parsed[1:]):
                if cur.start_year != prev.end_year:
                    raise SchemaError(
                        f"line {lineno}: bins {prev.label} and {cur.label} are not contiguous"
                    )
            bins = tuple(parsed)
        elif head == "region":
            if bins is None:
                raise SchemaError(f"line {lineno}: region row before bins line")
            expected = 5 + len(bins)
            if len(tokens) != expected:
                raise SchemaError(
                    f"line {lineno}: region row needs id, label, anchor u v and {len(bins)} values"
                )
            rid, label = tokens[1], tokens[2]
            if any(r.region_id == rid for r in regions):
                raise SchemaError(f"line {lineno}: duplicate region id {rid!r}")
            try:
                u, v = float(tokens[3]), float(tokens[4])
                values = tuple(float(t) for t in tokens[5:])
            except ValueError as exc:
                raise SchemaError(f"line {lineno}: non-numeric cell in region {rid}") from exc
            if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
                raise SchemaError(f"line {lineno}: anchor ({u}, {v}) outside unit square")
            for bi, value in enumerate(values):
                if not math.isfinite(value):
                    raise SchemaError(
                        f"region {rid} bin {bins[bi].label}: non-finite value {value!r}"
                    )
            regions.append(Region(rid, label, (u, v)))
            grid.append(values)
        else:
            raise SchemaError(f"line {lineno}: unknown directive {head!r}")
    if unit is None:
        raise SchemaError("missing unit line")
    if bins is None:
        raise SchemaError("missing bins line")
    if not regions:
        raise SchemaError("dataset has no regions")
    return SpaceTimeCube(tuple(regions), bins, tuple(grid), unit)


def dataset_to_text(cube: SpaceTimeCube) -> str:
    from .model import fmt_float

    lines = [DATASET_HEADER, f'unit "{cube.unit}"', "bins " + " ".join(b.label for b in cube.bins)]
    for region, row in zip(cube.regions, cube.values):
        cells = " ".join(fmt_float(v) for v in row)
        u, v = region.anchor
        lines.append(f'region {region.region_id} "{region.label}" {fmt_float(u)} {fmt_float(v)} {cells}')
    return "\n".join(lines) + "\n"


def full_slice(cube: SpaceTimeCube) -> DataSlice:
    hidden = tuple(tuple(False for _ in cube.bins) for _ in cube.regions)
    return DataSlice(cube.regions, cube.bins, cube.values, hidden, cube.unit)


def slice_cube(
    cube: SpaceTimeCube,
    region_ids: Optional[Iterable[str]] = None,
    bin_range: Optional[Tuple[int, int]] = None,
) -> DataSlice:
    """Select regions (by id) and bins fully inside a year range.

    ``None`` selects everything along that axis; an empty result raises
    EmptySelectionError.
    """
    wanted = None if region_ids is None else set(region_ids)
    if wanted is not None:
        unknown = wanted - set(cube.region_ids())
        if unknown:
            raise EmptySelectionError(f"unknown regions {sorted(unknown)}")
    r_idx = [
        i for i, r in enumerate(cube.regions) if wanted is None or r.region_id in wanted
    ]
    if bin_range is None:
        b_idx = list(range(len(cube.bins)))
    else:
        lo, hi = bin_range
        b_idx = [i for i, b in enumerate(cube.bins) if b.start_year >= lo and b.end_year <= hi]
    if not r_idx or not b_idx:
        raise EmptySelectionError(f"selection region_ids={region_ids} bin_range={bin_range} is empty")
    regions = tuple(cube.regions[i] for i in r_idx)
    bins = tuple(cube.bins[i] for i in b_idx)
    values = tuple(tuple(cube.values[i][j] for j in b_idx) for i in r_idx)
    hidden = tuple(tuple(False for _ in b_idx) for _ in r_idx)
    return DataSlice(regions, bins, values, hidden, cube.unit)


def arith(a: DataSlice, b: DataSlice, op: str) -> DataSlice:
    """Cellwise add/subtract over aligned bins; pairs regions positionally."""
    if op not in ("add", "subtract"):
        raise ValueError(f"op must be add or subtract, got {op!r}")
    if a.bins != b.bins:
        raise AlignmentError(
            f"bin mismatch: {[x.label for x in a.bins]} vs {[x.label for x in b.bins]}"
        )
    if len(a.regions) != len(b.regions):
        raise AlignmentError(f"region count mismatch: {len(a.regions)} vs {len(b.regions)}")
    sign = 1.0 if op == "add" else -1.0
    glyph = "+" if op == "add" else "-"
    regions: List[Region] = []
    values: List[Tuple[float, ...]] = []
    for ra, rb, va, vb in zip(a.regions, b.regions, a.values, b.values):
        regions.append(
            Region(
                f"{ra.region_id}{glyph}{rb.region_id}",
                f"{ra.label} {glyph} {rb.label}",
                (
                    (ra.anchor[0] + rb.anchor[0]) / 2.0,
                    (ra.anchor[1] + rb.anchor[1]) / 2.0,
                ),
            )
        )
        values.append(tuple(x + sign * y for x, y in zip(va, vb)))
    hidden = tuple(tuple(False for _ in a.bins) for _ in regions)
    return DataSlice(tuple(regions), a.bins, tuple(values), hidden, a.unit)


def flatten(slice_: DataSlice, axis: str, aggregator: str = "sum") -> DataSlice:
    """Collapse the time or space axis to a single synthetic bin or region."""
    if axis not in ("time", "space"):
        raise ValueError(f"axis must be time or space, got {axis!r}")
    if aggregator not in ("sum", "mean"):
        raise ValueError(f"aggregator must be sum or mean, got {aggregator!r}")

    def agg(cells: Sequence[float]) -> float:
        total = sum(cells)
        return total if aggregator == "sum" else total / len(cells)

    if axis == "time":
        bin_ = TimeBin(slice_.bins[0].start_year, slice_.bins[-1].end_year)
        values = tuple((agg(row),) for row in slice_.values)
        hidden = tuple((False,) for _ in slice_.regions)
        return DataSlice(slice_.regions, (bin_,), values, hidden, slice_.unit)
    u = sum(r.anchor[0] for r in slice_.regions) / len(slice_.regions)
    v = sum(r.anchor[1] for r in slice_.regions) / len(slice_.regions)
    region = Region("all", "combined", (u, v))
    values = (tuple(agg([row[bi] for row in slice_.values]) for bi in range(len(slice_.bins))),)
    hidden = (tuple(False for _ in slice_.bins),)
    return DataSlice((region,), slice_.bins, values, hidden, slice_.unit)


def chop(slice_: DataSlice, axis: str, parts: int) -> List[DataSlice]:
    """Contiguous, order-preserving partition; earlier parts take the
    remainder cells."""
    if axis not in ("time", "space"):
        raise ValueError(f"axis must be time or space, got {axis!r}")
    extent = len(slice_.bins) if axis == "time" else len(slice_.regions)
    if parts < 1 or parts > extent:
        raise InvalidPartitionError(f"cannot chop extent {extent} into {parts} parts")
    base, rem = divmod(extent, parts)
    sizes = [base + 1 if i < rem else base for i in range(parts)]
    out: List[DataSlice] = []
    offset = 0
    for size in sizes:
        idx = list(range(offset, offset + size))
        offset += size
        if axis == "time":
            out.append(
                DataSlice(
                    slice_.regions,
                    tuple(slice_.bins[i] for i in idx),
                    tuple(tuple(row[i] for i in idx) for row in slice_.values),
                    tuple(tuple(row[i] for i in idx) for row in slice_.hidden),
                    slice_.unit,
                )
            )
        else:
            out.append(
                DataSlice(
                    tuple(slice_.regions[i] for i in idx),
                    slice_.bins,
                    tuple(slice_.values[i] for i in idx),
                    tuple(slice_.hidden[i] for i in idx),
                    slice_.unit,
                )
            )
    return out


def rescale(slice_: DataSlice, granularity: int) -> DataSlice:
    """Re-bin the time axis to ``granularity`` years per bin.

    Coarsening sums groups of source bins; asking for bins finer than the
    source raises InsufficientResolutionError (the grid invents no data).
    """
    spans = {b.span for b in slice_.bins}
    if len(spans) != 1:
        raise InvalidPartitionError(f"bins have mixed spans {sorted(spans)}; cannot rescale")
    span = spans.pop()
    if granularity == span:
        return slice_
    if granularity < span:
        raise InsufficientResolutionError(
            f"source bins span {span} years; cannot refine to {granularity}"
        )
    if granularity % span != 0:
        raise InvalidPartitionError(f"{granularity}-year bins do not group {span}-year bins evenly")
    k = granularity // span
    if len(slice_.bins) % k != 0:
        raise InvalidPartitionError(
            f"{len(slice_.bins)} bins do not group evenly into runs of {k}"
        )
    groups = [list(range(i, i + k)) for i in range(0, len(slice_.bins), k)]
    bins = tuple(
        TimeBin(slice_.bins[g[0]].start_year, slice_.bins[g[-1]].end_year) for g in groups
    )
    values = tuple(
        tuple(sum(row[i] for i in g) for g in groups) for row in slice_.values
    )
    hidden = tuple(tuple(False for _ in groups) for _ in slice_.regions)
    return DataSlice(slice_.regions, bins, values, hidden, slice_.unit)


def filter_range(slice_: DataSlice, axis: str, bounds: Tuple[float, float]) -> DataSlice:
    """Restrict to bins overlapping a year range, or regions in an index
    range; hidden flags are preserved."""
    lo, hi = bounds
    if axis == "time":
        idx = [i for i, b in enumerate(slice_.bins) if b.start_year < hi and b.end_year > lo]
        if not idx:
            raise EmptySelectionError(f"no bins overlap [{lo}, {hi}]")
        return DataSlice(
            slice_.regions,
            tuple(slice_.bins[i] for i in idx),
            tuple(tuple(row[i] for i in idx) for row in slice_.values),
            tuple(tuple(row[i] for i in idx) for row in slice_.hidden),
            slice_.unit,
        )
    if axis == "space":
        idx = [i for i in range(len(slice_.regions)) if lo <= i <= hi]
        if not idx:
            raise EmptySelectionError(f"no regions in index range [{lo}, {hi}]")
        return DataSlice(
            tuple(slice_.regions[i] for i in idx),
            slice_.bins,
            tuple(slice_.values[i] for i in idx),
            tuple(slice_.hidden[i] for i in idx),
            slice_.unit,
        )
    raise ValueError(f"axis must be time or space, got {axis!r}")


def extremes(slice_: DataSlice) -> ExtremeReport:
    """Min and max over visible cells; ties resolve to the earliest bin,
    then the earliest region."""
    best_min = None
    best_max = None
    for bi in range(len(slice_.bins)):
        for ri in range(len(slice_.regions)):
            if slice_.hidden[ri][bi]:
                continue
            v = slice_.values[ri][bi]
            if best_min is None or v < best_min[0]:
                best_min = (v, bi, ri)
            if best_max is None or v > best_max[0]:
                best_max = (v, bi, ri)
    if best_min is None or best_max is None:
        raise EmptySelectionError("all cells hidden")

    def cell(entry) -> ExtremeCell:
        v, bi, ri = entry
        return ExtremeCell(slice_.regions[ri].region_id, slice_.bins[bi], v)

    return ExtremeReport(cell(best_min), cell(best_max))


def sort_series(slice_: DataSlice, key: str) -> List[str]:
    """Stable ordering of region ids by visible-cell sum or by label."""
    if key not in ("value_asc", "value_desc", "label"):
        raise ValueError(f"unknown sort key {key!r}")
    indexed = list(range(len(slice_.regions)))
    if key == "label":
        indexed.sort(key=lambda i: slice_.regions[i].label)
    else:
        sums = [
            sum(v for v, h in zip(slice_.values[i], slice_.hidden[i]) if not h)
            for i in range(len(slice_.regions))
        ]
        indexed.sort(key=lambda i: sums[i], reverse=(key == "value_desc"))
    return [slice_.regions[i].region_id for i in indexed]


def synthetic_values(count: int, seed: int = 42, lo: float = 100.0, hi: float = 1000.0) -> List[float]:
    """Deterministic value generator used to freeze the shipped fixtures.

    Draws ``count`` uniforms from ``random.Random(seed)`` in [lo, hi],
    rounded to 2 decimals, in row-major (region-major) order.
    """
    rng = random.Random(seed)
    return [round(rng.uniform(lo, hi), 2) for _ in range(count)]
