"""The live engine: map-region binding, command application, chart state.

A ``Session`` owns one recognizer, one dataset, one rulebook, and the chart
state they drive.  ``step`` is the single entry point: validate a sample,
recognize events, bind cubes dwelling on map slots, dispatch events through
the rulebook, apply the commands, and report everything that changed.

Chart specs are recomposed from session state after every step; they are
pure functions of that state, so replaying a trace always reproduces the
same specs byte for byte.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from . import datacube, recognizer as rec
from .datacube import DataSlice, Region, SpaceTimeCube, TimeBin
from .errors import (
    EmptySelectionError,
    InsufficientResolutionError,
    InvalidPartitionError,
    LayoutError,
    StaleTargetError,
)
from .model import (
    CommandKind,
    InputSample,
    InteractionEvent,
    InteractionKind,
    PoseSample,
    VisualizationCommand,
    fmt_float,
    validate_sample,
)
from .recognizer import RecognizerParams, RecognizerState
from .rulebook import RuleBook, dispatch
from .spatial import SpatialParams

PALETTE = ("yellow", "purple", "teal", "orange", "blue", "red", "green", "pink")
BINDING_DWELL = 0.5  # seconds a cube must rest on a slot before binding
VIS_TYPES = ("bar", "line", "pictogram")

SNAPSHOT_HEADER = "#! cubedeck-snapshot v1"


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def overlaps(self, other: "Rect") -> bool:
        return not (
            self.x1 <= other.x0 or other.x1 <= self.x0 or self.y1 <= other.y0 or other.y1 <= self.y0
        )

    def token(self) -> str:
        return ",".join(fmt_float(v) for v in (self.x0, self.y0, self.x1, self.y1))


@dataclass(frozen=True)
class SessionLayout:
    """Tabletop geometry: map region with slots, interaction region, and the
    anchored chart's anchor point behind it."""

    map_region: Rect = Rect(0.0, 0.0, 0.4, 0.4)
    interaction_region: Rect = Rect(0.45, 0.0, 0.85, 0.4)
    anchored_anchor: Tuple[float, float, float] = (0.65, 0.45, 0.0)

    def slot_center(self, region: Region) -> Tuple[float, float]:
        u, v = region.anchor
        return (
            self.map_region.x0 + u * (self.map_region.x1 - self.map_region.x0),
            self.map_region.y0 + v * (self.map_region.y1 - self.map_region.y0),
        )

    def validate(self, regions: Sequence[Region]) -> None:
        if self.map_region.x1 <= self.map_region.x0 or self.map_region.y1 <= self.map_region.y0:
            raise LayoutError("map region is empty")
        if (
            self.interaction_region.x1 <= self.interaction_region.x0
            or self.interaction_region.y1 <= self.interaction_region.y0
        ):
            raise LayoutError("interaction region is empty")
        if self.map_region.overlaps(self.interaction_region):
            raise LayoutError("map and interaction regions overlap")
        for region in regions:
            x, y = self.slot_center(region)
            if not self.map_region.contains(x, y):
                raise LayoutError(f"slot {region.region_id} falls outside the map region")


@dataclass(frozen=True)
class Binding:
    cube_id: str
    region_id: str
    color: int
    bound_at: float

    def to_line(self) -> str:
        return (
            f"binding cube={self.cube_id} region={self.region_id}"
            f" color={self.color} bound_at={fmt_float(self.bound_at)}"
        )


@dataclass
class _SeriesState:
    region_id: str
    color: int
    hidden: bool = False


@dataclass(frozen=True)
class SeriesSpec:
    region_id: str
    color: int
    hidden: bool
    column: int
    values: Tuple[float, ...]

    def token(self) -> str:
        vals = ",".join(fmt_float(v) for v in self.values)
        return f"{self.region_id}:{self.color}:{'true' if self.hidden else 'false'}:{self.column}:{vals}"


@dataclass(frozen=True)
class ChartSpec:
    """Declarative chart description; rendering is someone else's job."""

    chart_id: str
    placement: str  # "anchored" | "dynamic"
    subject: str  # cube or component id; "-" for the anchored chart
    structure: str  # "neighbored" | "stacked"
    vis_type: str
    detail: bool
    zoom: float
    pan: Tuple[float, float]
    bins: Tuple[TimeBin, ...]
    series: Tuple[SeriesSpec, ...]
    highlights: Tuple[str, ...]  # "region@bin" markers from identify-extremes
    value_extent: Tuple[float, float]

    def to_line(self) -> str:
        series = "|".join(s.token() for s in self.series)
        bins = ",".join(b.label for b in self.bins)
        highlights = ",".join(self.highlights) if self.highlights else "-"
        return (
            f"chart id={self.chart_id} placement={self.placement} subject={self.subject}"
            f" structure={self.structure} vis={self.vis_type}"
            f" detail={'true' if self.detail else 'false'}"
            f" zoom={fmt_float(self.zoom)} pan={fmt_float(self.pan[0])},{fmt_float(self.pan[1])}"
            f" extent={fmt_float(self.value_extent[0])},{fmt_float(self.value_extent[1])}"
            f" bins={bins} highlights={highlights} series={series or '-'}"
        )


@dataclass(frozen=True)
class ChartDelta:
    op: str  # "created" | "updated" | "removed"
    chart_id: str
    spec: Optional[ChartSpec]  # None for removals

    def to_line(self) -> str:
        if self.spec is None:
            return f"chart-delta op={self.op} id={self.chart_id}"
        return f"chart-delta op={self.op} {self.spec.to_line()[6:]}"


@dataclass(frozen=True)
class BindingDelta:
    op: str  # "bound" | "unbound"
    cube_id: str
    region_id: str
    color: int

    def to_line(self) -> str:
        return f"binding-delta op={self.op} cube={self.cube_id} region={self.region_id} color={self.color}"


@dataclass(frozen=True)
class StepReport:
    t: float
    events: Tuple[InteractionEvent, ...]
    commands: Tuple[VisualizationCommand, ...]
    binding_deltas: Tuple[BindingDelta, ...]
    chart_deltas: Tuple[ChartDelta, ...]
    notes: Tuple[str, ...]

    def lines(self) -> List[str]:
        out: List[str] = []
        out.extend(e.to_line() for e in self.events)
        out.extend(b.to_line() for b in self.binding_deltas)
        out.extend(c.to_line() for c in self.commands)
        out.extend(f"note {n}" for n in self.notes)
        out.extend(d.to_line() for d in self.chart_deltas)
        return out

    @property
    def empty(self) -> bool:
        return not (
            self.events or self.commands or self.binding_deltas or self.chart_deltas or self.notes
        )


@dataclass
class _ViewState:
    """Session-wide view transforms; reset only by a new session."""

    granularity: int = 0  # years per bin; 0 means source granularity
    window_lo: int = 0  # bin index window into the (re-binned) time axis
    window_hi: int = -1  # -1 means last bin
    space_lo: int = 0
    space_hi: int = 10**6
    flatten_axis: Optional[str] = None
    chop: Optional[Tuple[str, int]] = None
    sort_key: Optional[str] = None
    overlay: Optional[str] = None  # "add" | "subtract"
    extremes_on: bool = False
    vis_type: str = "bar"
    detail: bool = False
    zoom: float = 1.0
    pan: Tuple[float, float] = (0.0, 0.0)
    process_state: str = "idle"  # "idle" | "active" | "terminated"

    def to_line(self) -> str:
        chop = f"{self.chop[0]}:{self.chop[1]}" if self.chop else "-"
        return (
            f"view granularity={self.granularity} window={self.window_lo},{self.window_hi}"
            f" space={self.space_lo},{self.space_hi}"
            f" flatten={self.flatten_axis or '-'} chop={chop} sort={self.sort_key or '-'}"
            f" overlay={self.overlay or '-'} extremes={'true' if self.extremes_on else 'false'}"
            f" vis={self.vis_type} detail={'true' if self.detail else 'false'}"
            f" zoom={fmt_float(self.zoom)} pan={fmt_float(self.pan[0])},{fmt_float(self.pan[1])}"
            f" process={self.process_state}"
        )


class Session:
    """Single-writer state machine; steps are strictly serialized."""

    def __init__(
        self,
        dataset: SpaceTimeCube,
        rulebook: RuleBook,
        layout: Optional[SessionLayout] = None,
        recognizer_params: Optional[RecognizerParams] = None,
        spatial_params: Optional[SpatialParams] = None,
        dataset_name: str = "inline",
    ):
        self.dataset = dataset
        self.rulebook = rulebook
        self.layout = layout or SessionLayout()
        self.layout.validate(dataset.regions)
        self.rparams = recognizer_params or RecognizerParams()
        self.sparams = spatial_params or SpatialParams()
        self.dataset_name = dataset_name
        self.recognizer: RecognizerState = rec.new_state(self.rparams, self.sparams)
        self.prev_t = -math.inf
        self.bindings: Dict[str, Binding] = {}
        self.slot_owner: Dict[str, str] = {}
        self.dwell: Dict[str, Tuple[str, float]] = {}
        self.series: Dict[str, _SeriesState] = {}
        self.anchored_order: List[str] = []
        self.anchored_copy: Dict[str, _SeriesState] = {}
        self.anchored_structure: str = "neighbored"
        self.combined_groups: Dict[str, str] = {}  # component id -> combine mode
        self.view = _ViewState()
        self._charts: Dict[str, ChartSpec] = {}

    # ---------------------------------------------------------------- step

    def step(self, sample: InputSample) -> StepReport:
        sample = validate_sample(sample, self.prev_t)
        self.prev_t = sample.t
        events = rec.ingest(self.recognizer, sample)
        binding_deltas: List[BindingDelta] = []
        if isinstance(sample, PoseSample):
            binding = self.check_binding(sample.cube_id, sample.t)
            if binding is not None:
                binding_deltas.append(
                    BindingDelta("bound", binding.cube_id, binding.region_id, binding.color)
                )
        commands: List[VisualizationCommand] = []
        notes: List[str] = []
        for event in events:
            if self._gated_by_map_region(event):
                continue
            command = dispatch(self.rulebook, event, self)
            if command is None:
                continue
            commands.append(command)
            deltas, command_notes = self.apply_command(command)
            binding_deltas.extend(deltas)
            notes.extend(command_notes)
        self._prune_groups()
        self._refresh_anchored()
        chart_deltas = self._recompose()
        return StepReport(
            sample.t,
            tuple(events),
            tuple(commands),
            tuple(binding_deltas),
            tuple(chart_deltas),
            tuple(notes),
        )

    def flush(self, t_end: float) -> StepReport:
        """End-of-stream: resolve pending recognizer timers."""
        events = rec.flush(self.recognizer, t_end)
        commands: List[VisualizationCommand] = []
        notes: List[str] = []
        binding_deltas: List[BindingDelta] = []
        for event in events:
            if self._gated_by_map_region(event):
                continue
            command = dispatch(self.rulebook, event, self)
            if command is None:
                continue
            commands.append(command)
            deltas, command_notes = self.apply_command(command)
            binding_deltas.extend(deltas)
            notes.extend(command_notes)
        self._prune_groups()
        self._refresh_anchored()
        chart_deltas = self._recompose()
        return StepReport(
            t_end,
            tuple(events),
            tuple(commands),
            tuple(binding_deltas),
            tuple(chart_deltas),
            tuple(notes),
        )

    # ------------------------------------------------------------- binding

    def check_binding(self, cube_id: str, t: float) -> Optional[Binding]:
        """Dwell-based slot binding for one tracked cube.

        A binding forms once an unbound cube rests (bottom within the
        resting band of the table) with its center within half an edge of a
        free slot center, continuously for the dwell time.
        """
        cube = self.recognizer.cubes.get(cube_id)
        if cube is None or cube_id in self.bindings:
            self.dwell.pop(cube_id, None)
            return None
        resting = cube.bottom_z() <= self.rparams.resting_band
        slot = self._slot_under(cube.pose.position) if resting else None
        if slot is None or slot in self.slot_owner:
            self.dwell.pop(cube_id, None)
            return None
        started = self.dwell.get(cube_id)
        if started is None or started[0] != slot:
            self.dwell[cube_id] = (slot, t)
            return None
        if t - started[1] < BINDING_DWELL:
            return None
        del self.dwell[cube_id]
        used = {b.color for b in self.bindings.values()}
        color = next(i for i in range(len(PALETTE)) if i not in used)
        binding = Binding(cube_id, slot, color, t)
        self.bindings[cube_id] = binding
        self.slot_owner[slot] = cube_id
        self.series[cube_id] = _SeriesState(slot, color)
        return binding

    def _slot_under(self, position: Tuple[float, float, float]) -> Optional[str]:
        x, y = position[0], position[1]
        best: Optional[Tuple[float, str]] = None
        for region in self.dataset.regions:
            cx, cy = self.layout.slot_center(region)
            d = math.hypot(x - cx, y - cy)
            if d <= self.sparams.edge_length / 2.0:
                if best is None or (d, region.region_id) < best:
                    best = (d, region.region_id)
        return best[1] if best else None

    def _gated_by_map_region(self, event: InteractionEvent) -> bool:
        """Events on cubes resting inside the map region drive binding only."""
        for member in _event_cubes(event):
            cube = self.recognizer.cubes.get(member)
            if cube is None:
                continue
            x, y, _ = cube.pose.position
            if cube.supported and self.layout.map_region.contains(x, y):
                return True
        return False

    # -------------------------------------------------- dispatch context

    def is_bound(self, cube_id: str) -> bool:
        return cube_id in self.bindings

    @property
    def detail_mode(self) -> bool:
        return self.view.detail

    def rescale_granularity(self, direction: str) -> int:
        bins = self._current_bins()
        span = bins[0].span if bins else 10
        if direction == "coarsen":
            return bins[-1].end_year - bins[0].start_year
        return max(1, span // 2)

    # ----------------------------------------------------------- commands

    def apply_command(
        self, command: VisualizationCommand
    ) -> Tuple[List[BindingDelta], List[str]]:
        """Apply one command; stale targets and impossible data requests
        drop with a note, leaving the session intact."""
        try:
            return self._apply(command)
        except (
            StaleTargetError,
            InsufficientResolutionError,
            InvalidPartitionError,
            EmptySelectionError,
        ) as exc:
            return [], [f"dropped command={command.kind.value} reason={exc}"]

    def _apply(self, command: VisualizationCommand) -> Tuple[List[BindingDelta], List[str]]:
        kind = command.kind
        view = self.view
        if kind is CommandKind.RECOLOR:
            series = self._series_of(command.target)
            series.color = (series.color + 1) % len(PALETTE)
        elif kind is CommandKind.HIDE:
            self._series_of(command.target).hidden = True
        elif kind is CommandKind.SHOW:
            self._series_of(command.target).hidden = False
        elif kind is CommandKind.RESET:
            return self._reset_cube(command.target)
        elif kind is CommandKind.COMBINE:
            mode = command.get("mode")
            self.combined_groups[command.target] = mode
            self.anchored_structure = "stacked" if mode == "stacked" else "neighbored"
        elif kind is CommandKind.UNGROUP:
            for cid in list(self.combined_groups):
                if command.target == cid or command.target in cid.split("+"):
                    del self.combined_groups[cid]
            self.anchored_structure = "neighbored"
        elif kind is CommandKind.RESCALE:
            granularity = command.get("granularity")
            datacube.rescale(self._anchored_slice_raw(), granularity)  # validates
            view.granularity = granularity
            view.window_lo, view.window_hi = 0, -1
        elif kind is CommandKind.ADJUST_RANGE:
            self._adjust_range(command.get("axis"), command.get("direction"))
        elif kind is CommandKind.FLATTEN:
            view.flatten_axis = command.get("axis")
        elif kind is CommandKind.CHOP:
            axis, parts = command.get("axis"), command.get("parts")
            extent = len(self._current_bins()) if axis == "time" else max(len(self.anchored_order), 1)
            if parts < 1 or parts > extent:
                raise StaleTargetError(f"cannot chop {extent} {axis} cells into {parts} parts")
            view.chop = (axis, parts)
        elif kind is CommandKind.SORT:
            view.sort_key = command.get("key")
        elif kind is CommandKind.OVERVIEW:
            view.detail = False
            view.chop = None
            view.extremes_on = False
        elif kind is CommandKind.DETAIL:
            view.detail = True
        elif kind is CommandKind.IDENTIFY_EXTREMES:
            view.extremes_on = True
        elif kind is CommandKind.ADD:
            view.overlay = "add"
        elif kind is CommandKind.SUBTRACT:
            view.overlay = "subtract"
        elif kind is CommandKind.SWITCH_VIS_TYPE:
            vis = command.get("vis")
            if vis == "cycle" or vis not in VIS_TYPES:
                view.vis_type = VIS_TYPES[(VIS_TYPES.index(view.vis_type) + 1) % len(VIS_TYPES)]
            else:
                view.vis_type = vis
        elif kind is CommandKind.ZOOM:
            factor = command.get("factor")
            if factor <= 0:
                raise StaleTargetError(f"non-positive zoom factor {factor}")
            view.zoom = min(max(view.zoom * factor, 0.25), 4.0)
        elif kind is CommandKind.PAN:
            dx, dy = command.get("delta")
            view.pan = (view.pan[0] + dx, view.pan[1] + dy)
        elif kind is CommandKind.INITIATE:
            view.process_state = "active"
        elif kind is CommandKind.TERMINATE:
            view.process_state = "terminated"
        return [], []

    def _series_of(self, target: str) -> _SeriesState:
        series = self.series.get(target)
        if series is None:
            raise StaleTargetError(f"no data bound to {target}")
        return series

    def _reset_cube(self, cube_id: str) -> Tuple[List[BindingDelta], List[str]]:
        binding = self.bindings.get(cube_id)
        if binding is None:
            raise StaleTargetError(f"cube {cube_id} is not bound")
        del self.bindings[cube_id]
        del self.slot_owner[binding.region_id]
        self.series.pop(cube_id, None)
        self.anchored_copy.pop(cube_id, None)
        if cube_id in self.anchored_order:
            self.anchored_order.remove(cube_id)
        for cid in list(self.combined_groups):
            if cube_id in cid.split("+"):
                del self.combined_groups[cid]
        self.dwell.pop(cube_id, None)
        return [BindingDelta("unbound", cube_id, binding.region_id, binding.color)], []

    def _adjust_range(self, axis: str, direction: int) -> None:
        view = self.view
        if axis == "time":
            nbins = len(self._current_bins())
            hi = view.window_hi if view.window_hi >= 0 else nbins - 1
            lo = view.window_lo
            if direction > 0 and lo < hi:
                lo += 1
            elif direction < 0 and lo > 0:
                lo -= 1
            view.window_lo, view.window_hi = lo, hi
        else:
            count = len(self.anchored_order)
            hi = min(view.space_hi, max(count - 1, 0))
            lo = view.space_lo
            if direction > 0 and lo < hi:
                lo += 1
            elif direction < 0 and lo > 0:
                lo -= 1
            view.space_lo, view.space_hi = lo, hi

    def reset_all(self) -> None:
        """Service-level verb: detach every cube and clear charts."""
        for cube_id in sorted(self.bindings):
            try:
                self._reset_cube(cube_id)
            except StaleTargetError:
                pass
        self.view = _ViewState()
        self._refresh_anchored()
        self._recompose()

    # ------------------------------------------------------- composition

    def _prune_groups(self) -> None:
        summary = rec.current_summary(self.recognizer)
        alive = set()
        if summary is not None:
            for comp in summary.components:
                if len(comp.member_ids) >= 2 and all(m in self.bindings for m in comp.member_ids):
                    alive.add(comp.component_id)
        for cid in list(self.combined_groups):
            if cid not in alive:
                del self.combined_groups[cid]
        if not any(mode == "stacked" for mode in self.combined_groups.values()):
            if self.anchored_structure == "stacked":
                self.anchored_structure = "neighbored"

    def _refresh_anchored(self) -> None:
        """Bound cubes resting in the interaction region push their live
        series state onto the anchored chart; lifted cubes stay frozen."""
        for cube_id in sorted(self.bindings):
            cube = self.recognizer.cubes.get(cube_id)
            if cube is None or not cube.supported:
                continue
            x, y, _ = cube.pose.position
            if not self.layout.interaction_region.contains(x, y):
                continue
            live = self.series[cube_id]
            self.anchored_copy[cube_id] = _SeriesState(live.region_id, live.color, live.hidden)
            if cube_id not in self.anchored_order:
                self.anchored_order.append(cube_id)

    def _current_bins(self) -> Tuple[TimeBin, ...]:
        bins = self.dataset.bins
        if self.view.granularity:
            try:
                probe = datacube.rescale(datacube.full_slice(self.dataset), self.view.granularity)
                bins = probe.bins
            except Exception:
                pass
        return bins

    def _row_slice(self, states: Sequence[Tuple[str, _SeriesState]]) -> DataSlice:
        """Build a slice whose regions follow the given (cube, series) order."""
        by_id = {r.region_id: i for i, r in enumerate(self.dataset.regions)}
        regions = []
        values = []
        hidden = []
        for _, s in states:
            idx = by_id[s.region_id]
            regions.append(self.dataset.regions[idx])
            values.append(self.dataset.values[idx])
            hidden.append(tuple(s.hidden for _ in self.dataset.bins))
        return DataSlice(tuple(regions), self.dataset.bins, tuple(values), tuple(hidden), self.dataset.unit)

    def _anchored_slice_raw(self) -> DataSlice:
        entries = [(cid, self.anchored_copy[cid]) for cid in self.anchored_order]
        if not entries:
            return datacube.full_slice(self.dataset)
        return self._row_slice(entries)

    def _apply_view(self, slice_: DataSlice, anchored: bool) -> List[DataSlice]:
        """Granularity, windows, flatten for all charts; chop/sort/overlay
        only shape the anchored chart."""
        view = self.view
        out = slice_
        if view.granularity:
            try:
                out = datacube.rescale(out, view.granularity)
            except Exception:
                pass
        nbins = len(out.bins)
        hi = view.window_hi if 0 <= view.window_hi < nbins else nbins - 1
        lo = min(view.window_lo, hi)
        if (lo, hi) != (0, nbins - 1):
            bounds = (out.bins[lo].start_year, out.bins[hi].end_year)
            out = datacube.filter_range(out, "time", bounds)
        if anchored and (view.space_lo, view.space_hi) != (0, 10**6):
            try:
                out = datacube.filter_range(out, "space", (view.space_lo, view.space_hi))
            except Exception:
                pass
        if view.flatten_axis:
            out = datacube.flatten(out, view.flatten_axis, "sum")
        if anchored and view.sort_key:
            order = datacube.sort_series(out, view.sort_key)
            index = {rid: i for i, rid in enumerate(order)}
            perm = sorted(range(len(out.regions)), key=lambda i: index[out.regions[i].region_id])
            out = DataSlice(
                tuple(out.regions[i] for i in perm),
                out.bins,
                tuple(out.values[i] for i in perm),
                tuple(out.hidden[i] for i in perm),
                out.unit,
            )
        if anchored and view.chop:
            axis, parts = view.chop
            try:
                return datacube.chop(out, axis, parts)
            except Exception:
                return [out]
        return [out]

    def _series_specs(
        self,
        slice_: DataSlice,
        states: Sequence[Tuple[str, _SeriesState]],
        columns: Optional[Dict[str, int]],
        structure: str,
    ) -> List[SeriesSpec]:
        """Columns come from the explicit per-cube map (lattice layouts) or
        fall back to display order (neighbored) / a single stack (stacked)."""
        specs: List[SeriesSpec] = []
        state_by_region = {s.region_id: (cid, s) for cid, s in states}
        for i, region in enumerate(slice_.regions):
            default_col = 0 if structure == "stacked" else i
            if region.region_id in state_by_region:
                cid, s = state_by_region[region.region_id]
                color, hidden = s.color, s.hidden
                column = columns.get(cid, default_col) if columns else default_col
            else:  # synthetic series from flatten(space)
                color, hidden, column = len(PALETTE) - 1, False, default_col
            specs.append(SeriesSpec(region.region_id, color, hidden, column, slice_.values[i]))
        return specs

    def _with_overlay(self, slice_: DataSlice, specs: List[SeriesSpec]) -> List[SeriesSpec]:
        view = self.view
        if view.overlay is None:
            return specs
        visible = [i for i, s in enumerate(specs) if not s.hidden]
        if len(visible) < 2:
            return specs
        op = "add" if view.overlay == "add" else "subtract"
        acc = _single_region_slice(slice_, visible[0])
        for i in visible[1:]:
            acc = datacube.arith(acc, _single_region_slice(slice_, i), op)
        specs = list(specs)
        specs.append(
            SeriesSpec(
                acc.regions[0].region_id,
                len(PALETTE) - 1,
                False,
                len(specs),
                acc.values[0],
            )
        )
        return specs

    def _compose_chart(
        self,
        chart_id: str,
        placement: str,
        subject: str,
        structure: str,
        states: Sequence[Tuple[str, _SeriesState]],
        columns: Optional[Dict[str, int]],
        anchored: bool,
    ) -> List[ChartSpec]:
        if not states:
            return []
        base = self._row_slice(states)
        views = self._apply_view(base, anchored)
        charts: List[ChartSpec] = []
        for part_idx, part in enumerate(views):
            cid = chart_id if len(views) == 1 else f"{chart_id}:{part_idx}"
            specs = self._series_specs(part, states, columns, structure)
            specs = self._with_overlay(part, specs)
            highlights: Tuple[str, ...] = ()
            if anchored and self.view.extremes_on:
                try:
                    report = datacube.extremes(part)
                    highlights = tuple(
                        sorted(
                            {
                                f"{report.min_cell.region_id}@{report.min_cell.bin.label}",
                                f"{report.max_cell.region_id}@{report.max_cell.bin.label}",
                            }
                        )
                    )
                except Exception:
                    highlights = ()
            visible_values = [
                v for s in specs if not s.hidden for v in s.values
            ]
            extent = (0.0, max(visible_values) if visible_values else 0.0)
            charts.append(
                ChartSpec(
                    cid,
                    placement,
                    subject,
                    structure,
                    self.view.vis_type,
                    self.view.detail,
                    self.view.zoom,
                    self.view.pan,
                    part.bins,
                    tuple(specs),
                    highlights,
                    extent,
                )
            )
        return charts

    def compose_charts(self) -> Dict[str, ChartSpec]:
        """Current chart specs as a pure function of session state."""
        charts: Dict[str, ChartSpec] = {}
        # Anchored chart(s); columns follow display order after sorting.
        entries = [(cid, self.anchored_copy[cid]) for cid in self.anchored_order]
        for spec in self._compose_chart(
            "anchored", "anchored", "-", self.anchored_structure, entries, None, True
        ):
            charts[spec.chart_id] = spec

        summary = rec.current_summary(self.recognizer)
        grouped: set[str] = set()
        if summary is not None:
            for comp in summary.components:
                mode = self.combined_groups.get(comp.component_id)
                if mode is None:
                    continue
                members = [m for m in comp.member_ids if m in self.series]
                if len(members) < 2:
                    continue
                grouped.update(members)
                columns: Dict[str, int] = {}
                if mode == "stacked":
                    columns = {m: 0 for m in members}
                    structure = "stacked"
                elif mode == "neighbored":
                    columns = {m: i for i, m in enumerate(members)}
                    structure = "neighbored"
                else:  # lattice layout: vertical neighbors stack, lateral group
                    cells = sorted(
                        {(comp.coords_of(m)[0], comp.coords_of(m)[1]) for m in members}
                    )
                    col_of = {cell: i for i, cell in enumerate(cells)}
                    columns = {
                        m: col_of[(comp.coords_of(m)[0], comp.coords_of(m)[1])] for m in members
                    }
                    structure = "stacked" if len(cells) < len(members) else "neighbored"
                states = [(m, self.series[m]) for m in members]
                for spec in self._compose_chart(
                    f"grp:{comp.component_id}",
                    "dynamic",
                    comp.component_id,
                    structure,
                    states,
                    columns,
                    False,
                ):
                    charts[spec.chart_id] = spec

        # Individual dynamic charts for lifted bound cubes outside any group.
        for cube_id in sorted(self.bindings):
            if cube_id in grouped:
                continue
            cube = self.recognizer.cubes.get(cube_id)
            if cube is None or cube.supported:
                continue
            for spec in self._compose_chart(
                f"dyn:{cube_id}",
                "dynamic",
                cube_id,
                "neighbored",
                [(cube_id, self.series[cube_id])],
                {cube_id: 0},
                False,
            ):
                charts[spec.chart_id] = spec
        return charts

    def _recompose(self) -> List[ChartDelta]:
        new = self.compose_charts()
        deltas: List[ChartDelta] = []
        for cid in sorted(set(self._charts) | set(new)):
            old_spec = self._charts.get(cid)
            new_spec = new.get(cid)
            if old_spec is None and new_spec is not None:
                deltas.append(ChartDelta("created", cid, new_spec))
            elif old_spec is not None and new_spec is None:
                deltas.append(ChartDelta("removed", cid, None))
            elif old_spec != new_spec:
                deltas.append(ChartDelta("updated", cid, new_spec))
        self._charts = new
        return deltas

    # ---------------------------------------------------------- snapshot

    def snapshot(self) -> str:
        """Canonical, byte-stable serialization of the whole session state."""
        lines = [SNAPSHOT_HEADER]
        lines.append(f"meta dataset={self.dataset_name} rulebook={self.rulebook.name}")
        for cube_id in sorted(self.bindings):
            lines.append(self.bindings[cube_id].to_line())
        summary = rec.current_summary(self.recognizer)
        if summary is not None:
            for comp in summary.components:
                coords = ";".join(
                    f"{cid}:{c[0]},{c[1]},{c[2]}" for cid, c in comp.lattice_coords
                )
                lines.append(
                    f"component id={comp.component_id} kind={comp.kind}"
                    f" members={','.join(comp.member_ids)} lattice={coords}"
                )
        for cid in sorted(self._charts):
            lines.append(self._charts[cid].to_line())
        lines.append(
            "anchored structure=%s order=%s"
            % (self.anchored_structure, ",".join(self.anchored_order) or "-")
        )
        groups = ";".join(f"{cid}:{mode}" for cid, mode in sorted(self.combined_groups.items()))
        lines.append(f"groups {groups or '-'}")
        lines.append(self.view.to_line())
        dwell = ";".join(
            f"{cid}:{slot}:{fmt_float(start)}" for cid, (slot, start) in sorted(self.dwell.items())
        )
        lines.append(f"dwell {dwell or '-'}")
        digest_src = "\n".join(self.recognizer.digest_lines())
        digest = hashlib.sha256(digest_src.encode()).hexdigest()[:16]
        lines.append(f"recognizer digest={digest}")
        return "\n".join(lines) + "\n"


def _event_cubes(event: InteractionEvent) -> Tuple[str, ...]:
    kind = event.kind
    if kind is InteractionKind.NEIGHBORED or kind is InteractionKind.COLLIDE:
        return (event.subject, event.get("other"))
    if kind is InteractionKind.STACKED:
        return tuple(event.get("below")) + (event.subject,)
    if kind in (InteractionKind.ASSEMBLED, InteractionKind.DISASSEMBLED):
        return tuple(event.get("members"))
    if "+" in event.subject:
        return tuple(event.subject.split("+"))
    return (event.subject,)


def _single_region_slice(slice_: DataSlice, index: int) -> DataSlice:
    return DataSlice(
        (slice_.regions[index],),
        slice_.bins,
        (slice_.values[index],),
        (slice_.hidden[index],),
        slice_.unit,
    )


def new_session(
    dataset: SpaceTimeCube,
    rulebook: RuleBook,
    layout: Optional[SessionLayout] = None,
    recognizer_params: Optional[RecognizerParams] = None,
    spatial_params: Optional[SpatialParams] = None,
    dataset_name: str = "inline",
) -> Session:
    return Session(dataset, rulebook, layout, recognizer_params, spatial_params, dataset_name)
