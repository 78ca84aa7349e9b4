"""Deterministic recognition of gestures, manipulations, and configuration
changes from validated sample streams.

One ``RecognizerState`` per session, single writer.  ``ingest`` consumes one
sample at a time and returns every event whose recognition completes at that
sample, in a fixed order: touch events, hand events, motion events, then
configuration events, ties by subject id.  ``flush`` resolves pending
multi-tap timers at end of stream.

All thresholds live in ``RecognizerParams``; gesture vocabularies are only
ever defined qualitatively, so these defaults are sized for 3.3 cm cubes
sampled at 30 Hz or faster and can be overridden from the engine
configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .errors import (
    InsufficientHistoryError,
    MalformedSampleError,
    MismatchedUniverseError,
    UnknownSubjectError,
)
from .model import (
    Face,
    HandSample,
    HandShape,
    InputSample,
    InteractionEvent,
    InteractionKind,
    Pose,
    PoseSample,
    TouchPhase,
    TouchSample,
    Vec3,
    fmt_float,
    quat_conjugate,
    quat_from_axis_angle,
    quat_multiply,
)
from .spatial import (
    Component,
    ConfigurationSummary,
    ContactGraph,
    CubeState,
    SpatialParams,
    build_contact_graph,
    classify_components,
    relative_approach_speed,
)


@dataclass(frozen=True)
class RecognizerParams:
    """Numeric thresholds for every recognizer state machine."""

    tap_max_duration: float = 0.3
    tap_max_travel: float = 0.005
    multi_tap_gap: float = 0.4
    press_min_pressure: float = 0.5
    press_min_duration: float = 0.2
    hold_min_duration: float = 0.8
    swipe_min_travel: float = 0.02
    path_chord_deviation: float = 0.2  # fraction of chord length
    pinch_edge_band: float = 0.2  # uv distance from a shared cube edge
    hover_band_low: float = 0.03  # abuts cover_max_height; cover wins at the boundary
    hover_band_high: float = 0.15
    cover_max_height: float = 0.03
    pickup_height: float = 0.02
    resting_band: float = 0.003
    translate_min: float = 0.01
    shake_min_reversals: int = 3
    shake_window: float = 1.0
    shake_min_amplitude: float = 0.02
    rotate_snap_deg: float = 90.0
    rotate_hysteresis_deg: float = 20.0
    collide_min_speed: float = 0.3
    collide_window: float = 0.2
    motion_eps: float = 1e-4  # below this per-sample planar travel a cube is still

    def to_lines(self) -> List[str]:
        out = []
        for name in (
            "tap_max_duration", "tap_max_travel", "multi_tap_gap", "press_min_pressure",
            "press_min_duration", "hold_min_duration", "swipe_min_travel",
            "path_chord_deviation", "pinch_edge_band", "hover_band_low", "hover_band_high",
            "cover_max_height", "pickup_height", "resting_band", "translate_min",
            "shake_min_reversals", "shake_window", "shake_min_amplitude", "rotate_snap_deg",
            "rotate_hysteresis_deg", "collide_min_speed", "collide_window", "motion_eps",
        ):
            value = getattr(self, name)
            text = str(value) if isinstance(value, int) else fmt_float(value)
            out.append(f"recognizer {name}={text}")
        return out


# uv -> cube-local 3D, and face borders -> adjacent faces (u0, u1, v0, v1).
_FACE_BORDERS: Dict[Face, Tuple[Face, Face, Face, Face]] = {
    Face.PZ: (Face.NX, Face.PX, Face.NY, Face.PY),
    Face.NZ: (Face.NX, Face.PX, Face.NY, Face.PY),
    Face.PX: (Face.NY, Face.PY, Face.NZ, Face.PZ),
    Face.NX: (Face.NY, Face.PY, Face.NZ, Face.PZ),
    Face.PY: (Face.NX, Face.PX, Face.NZ, Face.PZ),
    Face.NY: (Face.NX, Face.PX, Face.NZ, Face.PZ),
}


def _touch_local(face: Face, u: float, v: float, edge: float) -> Vec3:
    a = (u - 0.5) * edge
    b = (v - 0.5) * edge
    h = edge / 2.0
    if face is Face.PZ:
        return (a, b, h)
    if face is Face.NZ:
        return (a, b, -h)
    if face is Face.PX:
        return (h, a, b)
    if face is Face.NX:
        return (-h, a, b)
    if face is Face.PY:
        return (a, h, b)
    return (a, -h, b)


def _edges_within_band(face: Face, u: float, v: float, band: float) -> Set[frozenset]:
    borders = _FACE_BORDERS[face]
    out: Set[frozenset] = set()
    for dist, adjacent in ((u, borders[0]), (1.0 - u, borders[1]), (v, borders[2]), (1.0 - v, borders[3])):
        if dist <= band:
            out.add(frozenset((face, adjacent)))
    return out


def _dist3(a: Vec3, b: Vec3) -> float:
    return math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2)


@dataclass
class _Contact:
    contact_id: str
    cube_id: str
    start_t: float
    faces: List[Face]
    points: List[Tuple[Face, float, float]]  # traversal polyline in uv
    local_points: List[Vec3]
    travel: float = 0.0
    max_pressure: float = 0.0
    press_run_start: Optional[float] = None
    best_press_run: float = 0.0
    last_t: float = 0.0
    partner: Optional[str] = None  # contact id of the pinch mate
    pinch_initial_sep: Optional[float] = None
    pinch_start_points: Optional[Tuple[Tuple[Face, float, float], Tuple[Face, float, float]]] = None
    consumed: bool = False

    def update_pressure(self, t: float, pressure: float, threshold: float) -> None:
        self.max_pressure = max(self.max_pressure, pressure)
        if pressure >= threshold:
            if self.press_run_start is None:
                self.press_run_start = t
            self.best_press_run = max(self.best_press_run, t - self.press_run_start)
        else:
            self.press_run_start = None


@dataclass
class _TapChain:
    cube_id: str
    count: int
    last_up_t: float
    deadline: float
    waiting_contact: Optional[str] = None


@dataclass
class _AxisTrack:
    last_dir: int = 0
    extreme: float = 0.0
    reversal_times: List[float] = field(default_factory=list)


@dataclass
class _CubeMotion:
    cube_id: str
    edge: float
    pose: Pose
    history: List[Tuple[float, Vec3]] = field(default_factory=list)
    supported: bool = True
    episode_anchor: Optional[Vec3] = None
    episode_shaken: bool = False
    axis_tracks: Tuple[_AxisTrack, _AxisTrack, _AxisTrack] = field(
        default_factory=lambda: (_AxisTrack(), _AxisTrack(), _AxisTrack())
    )
    shaking: bool = False
    last_reversal_t: float = -math.inf
    rotate_ref: Tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    _zs: Optional[Tuple[float, float]] = None  # cached (bottom, top) for the pose

    def set_pose(self, pose: Pose) -> None:
        self.pose = pose
        self._zs = None

    def _corner_zs(self) -> Tuple[float, float]:
        if self._zs is None:
            h = self.edge / 2.0
            lo, hi = math.inf, -math.inf
            for sx in (-h, h):
                for sy in (-h, h):
                    for sz in (-h, h):
                        z = self.pose.transform((sx, sy, sz))[2]
                        lo = min(lo, z)
                        hi = max(hi, z)
            self._zs = (lo, hi)
        return self._zs

    def bottom_z(self) -> float:
        return self._corner_zs()[0]

    def top_z(self) -> float:
        return self._corner_zs()[1]


@dataclass
class _HandState:
    hand_id: str
    mode: str = "idle"  # "idle" | "hover" | "cover"
    cube_id: Optional[str] = None
    shape: Optional[HandShape] = None


class RecognizerState:
    """All per-session recognition state; mutate only through ingest/flush."""

    def __init__(self, params: RecognizerParams, spatial_params: SpatialParams):
        self.params = params
        self.spatial = spatial_params
        self.cubes: Dict[str, _CubeMotion] = {}
        self.contacts: Dict[Tuple[str, str], _Contact] = {}
        self.tap_chains: Dict[str, _TapChain] = {}
        self.hands: Dict[str, _HandState] = {}
        self.prev_summary: Optional[ConfigurationSummary] = None
        self.prev_edges: Set[frozenset] = set()
        self.last_t: float = -math.inf

    def cube_states(self) -> List[CubeState]:
        return [
            CubeState(m.cube_id, m.edge, m.pose) for _, m in sorted(self.cubes.items())
        ]

    def digest_lines(self) -> List[str]:
        """Canonical one-line summary of recognizer-visible state."""
        parts = []
        for cid, m in sorted(self.cubes.items()):
            parts.append(
                f"{cid}:{'sup' if m.supported else 'lift'}{':shake' if m.shaking else ''}"
            )
        chains = ",".join(
            f"{cid}:{c.count}" for cid, c in sorted(self.tap_chains.items())
        )
        hands = ",".join(
            f"{hid}:{h.mode}:{h.cube_id or '-'}" for hid, h in sorted(self.hands.items())
        )
        contacts = ",".join(f"{c}:{k}" for (c, k) in sorted(self.contacts))
        return [
            f"recognizer cubes={';'.join(parts) or '-'} contacts={contacts or '-'}"
            f" chains={chains or '-'} hands={hands or '-'}"
        ]


def new_state(params: RecognizerParams, spatial_params: SpatialParams) -> RecognizerState:
    return RecognizerState(params, spatial_params)


def ingest(state: RecognizerState, sample: InputSample) -> List[InteractionEvent]:
    """Advance every state machine by one validated sample."""
    if sample.t < state.last_t:
        raise MalformedSampleError(f"ingest saw time regression {sample.t} < {state.last_t}")
    events: List[InteractionEvent] = []
    events.extend(_expire_tap_timers(state, sample.t))
    if isinstance(sample, TouchSample):
        events.extend(step_touch(state, sample))
    elif isinstance(sample, HandSample):
        events.extend(step_hand(state, sample))
    elif isinstance(sample, PoseSample):
        motion_events, config_events = _step_pose(state, sample)
        events.extend(motion_events)
        events.extend(config_events)
    state.last_t = sample.t
    return events


def flush(state: RecognizerState, t_end: float) -> List[InteractionEvent]:
    """Resolve pending multi-tap timers; leaves no timers behind."""
    if t_end < state.last_t:
        raise MalformedSampleError(f"flush time {t_end} precedes last sample {state.last_t}")
    events: List[InteractionEvent] = []
    for cube_id in sorted(state.tap_chains):
        chain = state.tap_chains[cube_id]
        events.append(_chain_event(chain, chain.deadline))
    state.tap_chains.clear()
    events.sort(key=lambda e: (e.t, e.subject))
    return events


# ---------------------------------------------------------------------------
# Touch gestures


def _chain_event(chain: _TapChain, t: float) -> InteractionEvent:
    kind = InteractionKind.TAP if chain.count == 1 else InteractionKind.DOUBLE_TAP
    return InteractionEvent.make(t, kind, chain.cube_id)


def _expire_tap_timers(state: RecognizerState, now: float) -> List[InteractionEvent]:
    events = []
    for cube_id in sorted(state.tap_chains):
        chain = state.tap_chains[cube_id]
        if chain.waiting_contact is None and chain.deadline <= now:
            events.append(_chain_event(chain, chain.deadline))
            del state.tap_chains[cube_id]
    return events


def _resolve_chain_as_non_tap(state: RecognizerState, cube_id: str, now: float) -> List[InteractionEvent]:
    chain = state.tap_chains.pop(cube_id, None)
    if chain is None:
        return []
    return [_chain_event(chain, min(chain.deadline, now))]


def step_touch(state: RecognizerState, sample: TouchSample) -> List[InteractionEvent]:
    """Touch FSM: contact lifecycle plus tap-chain and pinch pairing."""
    params = state.params
    if sample.cube_id not in state.cubes:
        raise UnknownSubjectError(f"touch sample for unknown cube {sample.cube_id!r}")
    key = (sample.cube_id, sample.contact_id)
    edge = state.cubes[sample.cube_id].edge
    local = _touch_local(sample.face, sample.uv[0], sample.uv[1], edge)
    events: List[InteractionEvent] = []

    if sample.phase is TouchPhase.DOWN:
        if key in state.contacts:
            raise MalformedSampleError(f"contact {key} went down twice")
        contact = _Contact(
            contact_id=sample.contact_id,
            cube_id=sample.cube_id,
            start_t=sample.t,
            faces=[sample.face],
            points=[(sample.face, sample.uv[0], sample.uv[1])],
            local_points=[local],
            last_t=sample.t,
        )
        contact.update_pressure(sample.t, sample.pressure, params.press_min_pressure)
        state.contacts[key] = contact
        # Pinch pairing: the earliest unpaired live contact on the same cube.
        for other_key in sorted(state.contacts):
            other = state.contacts[other_key]
            if other_key == key or other.cube_id != sample.cube_id:
                continue
            if other.partner is None and not other.consumed:
                other.partner = sample.contact_id
                contact.partner = other.contact_id
                sep = _dist3(other.local_points[-1], local)
                contact.pinch_initial_sep = other.pinch_initial_sep = sep
                pair_points = (other.points[-1], contact.points[0])
                contact.pinch_start_points = other.pinch_start_points = pair_points
                # A paired contact can no longer extend a tap chain.
                events.extend(_resolve_chain_as_non_tap(state, sample.cube_id, sample.t))
                break
        else:
            chain = state.tap_chains.get(sample.cube_id)
            if chain is not None and chain.waiting_contact is None:
                if sample.t < chain.deadline:
                    chain.waiting_contact = sample.contact_id
                # A down exactly at/after the deadline was already expired above.
        return events

    contact = state.contacts.get(key)
    if contact is None:
        raise MalformedSampleError(f"{sample.phase.value} for unknown contact {key}")
    step = _dist3(contact.local_points[-1], local)
    contact.travel += step
    if sample.face is not contact.faces[-1]:
        contact.faces.append(sample.face)
    contact.points.append((sample.face, sample.uv[0], sample.uv[1]))
    contact.local_points.append(local)
    contact.update_pressure(sample.t, sample.pressure, params.press_min_pressure)
    contact.last_t = sample.t

    if sample.phase is TouchPhase.MOVE:
        return events

    # Phase UP: classify this lifetime.
    del state.contacts[key]
    if contact.consumed:
        return events  # attributed to a pinch already
    if contact.partner is not None:
        mate = state.contacts.get((sample.cube_id, contact.partner))
        if mate is not None and not mate.consumed:
            events.append(_classify_pinch(state, contact, mate, sample.t, edge))
            mate.consumed = True
            return events
    gesture = _classify_single(state, contact, sample.t)
    # If this contact was holding a tap chain open and did not extend it,
    # the withheld tap(s) must come out now.
    chain = state.tap_chains.get(sample.cube_id)
    if chain is not None and chain.waiting_contact == contact.contact_id:
        events.extend(_resolve_chain_as_non_tap(state, sample.cube_id, sample.t))
    if gesture is not None:
        events.append(gesture)
    events.sort(key=lambda e: (e.t, e.subject))
    return events


def _classify_pinch(
    state: RecognizerState, ended: _Contact, live: _Contact, t: float, edge: float
) -> InteractionEvent:
    params = state.params
    final_sep = _dist3(ended.local_points[-1], live.local_points[-1])
    initial = ended.pinch_initial_sep or 0.0
    ratio = final_sep / initial if initial > 1e-9 else 1.0
    site = "surface"
    if ended.pinch_start_points is not None:
        (fa, ua, va), (fb, ub, vb) = ended.pinch_start_points
        shared = _edges_within_band(fa, ua, va, params.pinch_edge_band) & _edges_within_band(
            fb, ub, vb, params.pinch_edge_band
        )
        if shared:
            site = "edge"
    return InteractionEvent.make(
        t, InteractionKind.PINCH, ended.cube_id, site=site, scale_ratio=ratio
    )


def _classify_single(
    state: RecognizerState, contact: _Contact, now: float
) -> Optional[InteractionEvent]:
    """Precedence on ambiguity: Path > Swipe > Press > Hold > taps."""
    params = state.params
    duration = contact.last_t - contact.start_t
    multi_face = len(contact.faces) >= 2
    chord = _dist3(contact.local_points[0], contact.local_points[-1])
    deviation = _max_chord_deviation(contact.local_points)
    curved = chord > 1e-9 and deviation > params.path_chord_deviation * chord

    if contact.travel >= params.swipe_min_travel and (multi_face or curved):
        faces = tuple(f.value for f in contact.faces)
        poly = tuple((u, v) for _, u, v in contact.points)
        return InteractionEvent.make(
            contact.last_t, InteractionKind.PATH, contact.cube_id, faces=faces, poly=poly
        )
    if contact.travel >= params.swipe_min_travel and not multi_face:
        du = contact.points[-1][1] - contact.points[0][1]
        dv = contact.points[-1][2] - contact.points[0][2]
        if abs(du) >= abs(dv):
            direction = "+u" if du >= 0 else "-u"
        else:
            direction = "+v" if dv >= 0 else "-v"
        return InteractionEvent.make(
            contact.last_t,
            InteractionKind.SWIPE,
            contact.cube_id,
            face=contact.faces[0].value,
            direction=direction,
        )
    if contact.best_press_run >= params.press_min_duration:
        return InteractionEvent.make(
            contact.last_t, InteractionKind.PRESS, contact.cube_id, pressure=contact.max_pressure
        )
    if duration >= params.hold_min_duration:
        return InteractionEvent.make(
            contact.last_t, InteractionKind.HOLD, contact.cube_id, duration=duration
        )
    if duration <= params.tap_max_duration and contact.travel <= params.tap_max_travel:
        return _feed_tap_chain(state, contact, now)
    return None  # inconclusive lifetime: too long for a tap, too still for a swipe


def _feed_tap_chain(
    state: RecognizerState, contact: _Contact, now: float
) -> Optional[InteractionEvent]:
    params = state.params
    chain = state.tap_chains.get(contact.cube_id)
    if chain is not None and chain.waiting_contact == contact.contact_id:
        chain.count += 1
        chain.waiting_contact = None
        if chain.count >= 3:
            del state.tap_chains[contact.cube_id]
            return InteractionEvent.make(now, InteractionKind.TRIPLE_TAP, contact.cube_id)
        chain.last_up_t = contact.last_t
        chain.deadline = contact.last_t + params.multi_tap_gap
        return None
    # A fresh chain; any unrelated previous chain has already expired.
    state.tap_chains[contact.cube_id] = _TapChain(
        cube_id=contact.cube_id,
        count=1,
        last_up_t=contact.last_t,
        deadline=contact.last_t + params.multi_tap_gap,
    )
    return None


def _max_chord_deviation(points: Sequence[Vec3]) -> float:
    if len(points) < 3:
        return 0.0
    a, b = points[0], points[-1]
    ab = (b[0] - a[0], b[1] - a[1], b[2] - a[2])
    ab_len = math.sqrt(ab[0] ** 2 + ab[1] ** 2 + ab[2] ** 2)
    worst = 0.0
    for p in points[1:-1]:
        ap = (p[0] - a[0], p[1] - a[1], p[2] - a[2])
        if ab_len < 1e-12:
            d = math.sqrt(ap[0] ** 2 + ap[1] ** 2 + ap[2] ** 2)
        else:
            cx = ap[1] * ab[2] - ap[2] * ab[1]
            cy = ap[2] * ab[0] - ap[0] * ab[2]
            cz = ap[0] * ab[1] - ap[1] * ab[0]
            d = math.sqrt(cx * cx + cy * cy + cz * cz) / ab_len
        worst = max(worst, d)
    return worst


# ---------------------------------------------------------------------------
# Hand gestures


def step_hand(state: RecognizerState, sample: HandSample) -> List[InteractionEvent]:
    """Hand FSM: cover/uncover and hover entry events; nearest cube wins."""
    params = state.params
    hand = state.hands.setdefault(sample.hand_id, _HandState(sample.hand_id))
    px, py, pz = sample.palm_position

    target: Optional[Tuple[float, str, str]] = None  # (lateral, cube_id, mode)
    if sample.shape is not HandShape.NONE:
        for cube_id in sorted(state.cubes):
            cube = state.cubes[cube_id]
            cx, cy, _ = cube.pose.position
            lateral = math.hypot(px - cx, py - cy)
            if lateral > cube.edge / 2.0:
                continue
            height = pz - cube.top_z()
            if height < -params.resting_band:
                continue
            has_contacts = any(k[0] == cube_id for k in state.contacts)
            if height <= params.cover_max_height:
                if has_contacts:
                    continue  # cover needs hand occlusion without firm contact
                mode = "cover"
            elif height <= params.hover_band_high:
                mode = "hover"
            else:
                continue
            if target is None or (lateral, cube_id) < (target[0], target[1]):
                target = (lateral, cube_id, mode)

    events: List[InteractionEvent] = []
    new_mode = target[2] if target else "idle"
    new_cube = target[1] if target else None
    if hand.mode == "cover" and (new_mode != "cover" or new_cube != hand.cube_id):
        events.append(
            InteractionEvent.make(
                sample.t, InteractionKind.UNCOVER, hand.cube_id, hand=hand.hand_id
            )
        )
    if new_mode == "cover" and (hand.mode != "cover" or hand.cube_id != new_cube):
        events.append(
            InteractionEvent.make(sample.t, InteractionKind.COVER, new_cube, hand=hand.hand_id)
        )
    if new_mode == "hover":
        changed = hand.mode != "hover" or hand.cube_id != new_cube or hand.shape != sample.shape
        if changed:
            kind = (
                InteractionKind.HOVER_OPEN
                if sample.shape is HandShape.OPEN
                else InteractionKind.HOVER_FIST
            )
            events.append(InteractionEvent.make(sample.t, kind, new_cube, hand=hand.hand_id))
    hand.mode = new_mode
    hand.cube_id = new_cube
    hand.shape = sample.shape if new_mode == "hover" else None
    return events


# ---------------------------------------------------------------------------
# Motion and configuration


def _support_set(state: RecognizerState, graph: ContactGraph) -> Set[str]:
    """Cubes resting on the table or stacked (transitively) on one that is."""
    params = state.params
    supported = {
        cid for cid, m in state.cubes.items() if m.bottom_z() <= params.resting_band
    }
    changed = True
    while changed:
        changed = False
        for e in graph.edges:
            if e.kind != "stacked" or e.below is None:
                continue
            upper = e.b if e.below == e.a else e.a
            if e.below in supported and upper not in supported:
                supported.add(upper)
                changed = True
    return supported


def _support_plane(state: RecognizerState, cube: _CubeMotion) -> float:
    """Height of the surface this cube would rest on: table or a cube top."""
    plane = 0.0
    bottom = cube.bottom_z()
    cx, cy, _ = cube.pose.position
    for other_id in sorted(state.cubes):
        if other_id == cube.cube_id:
            continue
        other = state.cubes[other_id]
        ox, oy, _ = other.pose.position
        if abs(ox - cx) >= cube.edge or abs(oy - cy) >= cube.edge:
            continue
        top = other.top_z()
        if top <= bottom + 2.0 * state.spatial.contact_gap_max:
            plane = max(plane, top)
    return plane


def _step_pose(
    state: RecognizerState, sample: PoseSample
) -> Tuple[List[InteractionEvent], List[InteractionEvent]]:
    params = state.params
    is_new = sample.cube_id not in state.cubes
    if is_new:
        cube = _CubeMotion(sample.cube_id, state.spatial.edge_length, sample.pose)
        state.cubes[sample.cube_id] = cube
    else:
        cube = state.cubes[sample.cube_id]
    prev_pos = cube.pose.position
    cube.set_pose(sample.pose)
    cube.history.append((sample.t, sample.pose.position))
    horizon = sample.t - max(params.shake_window, params.collide_window) - 1.0
    while len(cube.history) > 2 and cube.history[0][0] < horizon:
        cube.history.pop(0)

    states = state.cube_states()
    graph = build_contact_graph(states, state.spatial)
    supported_set = _support_set(state, graph)

    motion_events: List[InteractionEvent] = []
    if is_new:
        clearance = cube.bottom_z() - _support_plane(state, cube)
        cube.supported = (sample.cube_id in supported_set) or clearance < params.pickup_height
    else:
        motion_events.extend(_motion_transitions(state, cube, sample.t, supported_set, prev_pos))

    config_events = _configuration_events(state, graph, states, sample.t, is_new)
    return motion_events, config_events


def step_motion(state: RecognizerState, sample: PoseSample) -> List[InteractionEvent]:
    """Motion FSM only (pick up / put down / translate / rotate / shake)."""
    motion_events, _ = _step_pose(state, sample)
    return motion_events


def _motion_transitions(
    state: RecognizerState,
    cube: _CubeMotion,
    t: float,
    supported_set: Set[str],
    prev_pos: Vec3,
) -> List[InteractionEvent]:
    params = state.params
    events: List[InteractionEvent] = []

    shake_events = _track_shake(state, cube, t, prev_pos)

    supported_now = cube.cube_id in supported_set
    clearance = cube.bottom_z() - _support_plane(state, cube)
    if not cube.shaking:  # shake swallows lift/settle transitions until it ends
        if supported_now:
            if not cube.supported:
                cube.supported = True
                events.append(InteractionEvent.make(t, InteractionKind.PUT_DOWN, cube.cube_id))
        elif clearance >= params.pickup_height:
            if cube.supported:
                cube.supported = False
                cube.episode_anchor = None  # a lift absorbs any drag in progress
                events.append(InteractionEvent.make(t, InteractionKind.PICK_UP, cube.cube_id))
        # Between the resting band and the pickup height the previous state holds.

    if cube.supported:
        planar_step = math.hypot(prev_pos[0] - cube.pose.position[0], prev_pos[1] - cube.pose.position[1])
        moving = planar_step > params.motion_eps
        if moving and cube.episode_anchor is None:
            cube.episode_anchor = prev_pos
            cube.episode_shaken = cube.shaking
        elif not moving and cube.episode_anchor is not None:
            ax, ay, az = cube.episode_anchor
            dx = cube.pose.position[0] - ax
            dy = cube.pose.position[1] - ay
            dz = cube.pose.position[2] - az
            if not cube.episode_shaken and math.hypot(dx, dy) >= params.translate_min:
                events.append(
                    InteractionEvent.make(
                        t,
                        InteractionKind.TRANSLATE,
                        cube.cube_id,
                        displacement=(dx, dy, dz),
                    )
                )
            cube.episode_anchor = None
            cube.episode_shaken = False

    events.extend(shake_events)
    if not cube.shaking:
        events.extend(_track_rotation(state, cube, t))
    events.sort(key=lambda e: (e.t, e.subject))
    return events


def _track_shake(
    state: RecognizerState, cube: _CubeMotion, t: float, prev_pos: Vec3
) -> List[InteractionEvent]:
    """A shake is repeated oscillation along one axis: at least
    ``shake_min_reversals`` qualifying direction reversals of that axis
    inside the window.  Transport arcs reverse each axis at most once, so
    they never qualify."""
    params = state.params
    pos = cube.pose.position
    triggered = False
    for axis in range(3):
        track = cube.axis_tracks[axis]
        delta = pos[axis] - prev_pos[axis]
        direction = 0 if abs(delta) <= 1e-9 else (1 if delta > 0 else -1)
        if direction != 0:
            if track.last_dir == 0:
                track.last_dir = direction
                track.extreme = prev_pos[axis]
            elif direction != track.last_dir:
                swing = abs(prev_pos[axis] - track.extreme)
                track.extreme = prev_pos[axis]
                track.last_dir = direction
                if swing >= params.shake_min_amplitude:
                    track.reversal_times.append(t)
                    cube.last_reversal_t = t
        track.reversal_times = [
            rt for rt in track.reversal_times if rt >= t - params.shake_window
        ]
        if len(track.reversal_times) >= params.shake_min_reversals:
            triggered = True

    events: List[InteractionEvent] = []
    if cube.shaking:
        if t - cube.last_reversal_t > params.shake_window:
            cube.shaking = False
            for track in cube.axis_tracks:
                track.reversal_times.clear()
            cube.rotate_ref = cube.pose.orientation  # re-baseline: shake swallows rotation
    elif triggered:
        cube.shaking = True
        cube.episode_shaken = True
        for track in cube.axis_tracks:
            track.reversal_times.clear()
        events.append(InteractionEvent.make(t, InteractionKind.SHAKE, cube.cube_id))
    return events


_AXIS_NAMES = ("x", "y", "z")
_AXIS_VECTORS: Tuple[Vec3, Vec3, Vec3] = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


def _track_rotation(state: RecognizerState, cube: _CubeMotion, t: float) -> List[InteractionEvent]:
    params = state.params
    threshold = math.radians(params.rotate_snap_deg - params.rotate_hysteresis_deg)
    events: List[InteractionEvent] = []
    for _ in range(4):
        q_rel = quat_multiply(cube.pose.orientation, quat_conjugate(cube.rotate_ref))
        w, x, y, z = q_rel
        if w < 0:
            w, x, y, z = -w, -x, -y, -z
        v_norm = math.sqrt(x * x + y * y + z * z)
        angle = 2.0 * math.atan2(v_norm, w)
        if angle < threshold or v_norm < 1e-12:
            break
        comps = (x, y, z)
        axis = max(range(3), key=lambda i: abs(comps[i]))
        sign = 1 if comps[axis] > 0 else -1
        events.append(
            InteractionEvent.make(
                t,
                InteractionKind.ROTATE,
                cube.cube_id,
                axis=_AXIS_NAMES[axis],
                quarter_turns=sign,
            )
        )
        snap = quat_from_axis_angle(_AXIS_VECTORS[axis], sign * math.radians(params.rotate_snap_deg))
        cube.rotate_ref = quat_multiply(snap, cube.rotate_ref)
    return events


def diff_configurations(
    prev: ConfigurationSummary, next_: ConfigurationSummary
) -> List[InteractionEvent]:
    """Structural transitions between two summaries over one cube universe.

    Returns Disassembled events for components that split, then formation
    events (Neighbored / Stacked / Assembled) for components that grew or
    changed kind.  Timestamps are set by the caller via retime().
    """
    if prev.universe != next_.universe:
        raise MismatchedUniverseError(f"{prev.universe} vs {next_.universe}")
    prev_of: Dict[str, Component] = {}
    for comp in prev.components:
        for cid in comp.member_ids:
            prev_of[cid] = comp

    events: List[InteractionEvent] = []
    for comp in prev.components:
        if len(comp.member_ids) < 2:
            continue
        next_comps = {next_.component_of(cid).component_id for cid in comp.member_ids}
        if len(next_comps) > 1:
            events.append(
                InteractionEvent.make(
                    0.0,
                    InteractionKind.DISASSEMBLED,
                    comp.component_id,
                    members=comp.member_ids,
                )
            )
    events.sort(key=lambda e: e.subject)

    formations: List[InteractionEvent] = []
    for comp in next_.components:
        if len(comp.member_ids) < 2:
            continue
        sources = {prev_of[cid].component_id for cid in comp.member_ids}
        same_members = len(sources) == 1 and set(
            prev_of[comp.member_ids[0]].member_ids
        ) == set(comp.member_ids)
        if same_members and prev_of[comp.member_ids[0]].kind == comp.kind:
            continue
        formations.append(_formation_event(comp))
    formations.sort(key=lambda e: e.subject)
    events.extend(formations)
    return events


def _formation_event(comp: Component) -> InteractionEvent:
    if comp.kind == "pair_neighbor":
        a, b = sorted(comp.member_ids)
        return InteractionEvent.make(0.0, InteractionKind.NEIGHBORED, a, other=b)
    if comp.kind == "column_stack":
        ordered = comp.member_ids  # canonical order is bottom-to-top
        return InteractionEvent.make(
            0.0, InteractionKind.STACKED, ordered[-1], below=ordered[:-1]
        )
    return InteractionEvent.make(
        0.0, InteractionKind.ASSEMBLED, comp.component_id, members=comp.member_ids
    )


def detect_collide(
    state: RecognizerState, a: str, b: str, t: float
) -> Optional[InteractionEvent]:
    """Collision test for a contact that just formed between cubes a and b.

    Missing history counts as a gentle placement, not an error.
    """
    params = state.params
    try:
        speed = relative_approach_speed(
            state.cubes[a].history, state.cubes[b].history, params.collide_window
        )
    except InsufficientHistoryError:
        return None
    if speed >= params.collide_min_speed:
        lo, hi = sorted((a, b))
        return InteractionEvent.make(t, InteractionKind.COLLIDE, lo, other=hi, speed=speed)
    return None


def _configuration_events(
    state: RecognizerState,
    graph: ContactGraph,
    states: List[CubeState],
    t: float,
    universe_grew: bool,
) -> List[InteractionEvent]:
    summary = classify_components(graph, states, state.spatial)
    edges_now = {frozenset((e.a, e.b)) for e in graph.edges}
    if state.prev_summary is None or universe_grew:
        # New cubes join as pre-existing structure; no transition events.
        state.prev_summary = summary
        state.prev_edges = edges_now
        return []
    raw = diff_configurations(state.prev_summary, summary)
    events: List[InteractionEvent] = []
    for event in raw:
        event = replace(event, t=t)
        if event.kind in (InteractionKind.NEIGHBORED, InteractionKind.STACKED):
            if event.kind is InteractionKind.NEIGHBORED:
                pair = (event.subject, event.get("other"))
            else:
                below = event.get("below")
                pair = (below[-1], event.subject) if len(below) == 1 else None
            if pair is not None and frozenset(pair) not in state.prev_edges:
                collide = detect_collide(state, pair[0], pair[1], t)
                if collide is not None:
                    event = collide  # momentum wins over the placement event
        events.append(event)
    state.prev_summary = summary
    state.prev_edges = edges_now
    return events


def current_summary(state: RecognizerState) -> Optional[ConfigurationSummary]:
    return state.prev_summary
