"""Shared vocabulary: poses, input samples, events, commands, size classes.

Everything here is immutable and carries a canonical one-line text form
(fields in fixed declaration order) shared by trace files, snapshots, and
the wire protocol.  Floats are rendered with ``repr`` so round-trips are
byte-exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence, Tuple, Union

from .errors import MalformedSampleError, OrderingError

Vec3 = Tuple[float, float, float]
Quat = Tuple[float, float, float, float]  # (w, x, y, z)

QUAT_NORM_BAND = 1e-3
_ID_CHARS = set("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_.+-")


def is_valid_id(s: str) -> bool:
    return bool(s) and all(c in _ID_CHARS for c in s)


def _check_id(s: str, what: str) -> str:
    if not is_valid_id(s):
        raise MalformedSampleError(f"invalid {what} identifier: {s!r}")
    return s


def fmt_float(x: float) -> str:
    return repr(float(x))


def _finite(x: float) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


class Face(Enum):
    """Cube face, named by its outward normal in the cube's local frame."""

    PX = "+X"
    NX = "-X"
    PY = "+Y"
    NY = "-Y"
    PZ = "+Z"
    NZ = "-Z"

    @classmethod
    def parse(cls, token: str) -> "Face":
        for f in cls:
            if f.value == token:
                return f
        raise MalformedSampleError(f"unknown face token: {token!r}")


# Tie-break order for dominant-face queries.
FACE_ORDER = (Face.PZ, Face.NZ, Face.PX, Face.NX, Face.PY, Face.NY)

FACE_NORMALS: dict[Face, Vec3] = {
    Face.PX: (1.0, 0.0, 0.0),
    Face.NX: (-1.0, 0.0, 0.0),
    Face.PY: (0.0, 1.0, 0.0),
    Face.NY: (0.0, -1.0, 0.0),
    Face.PZ: (0.0, 0.0, 1.0),
    Face.NZ: (0.0, 0.0, -1.0),
}


@dataclass(frozen=True)
class Pose:
    """Rigid pose: position in meters (z-up, tabletop at z=0) and a unit
    quaternion (w, x, y, z)."""

    position: Vec3
    orientation: Quat = (1.0, 0.0, 0.0, 0.0)

    def validate(self) -> "Pose":
        if not all(_finite(c) for c in self.position):
            raise MalformedSampleError("pose position has non-finite component")
        if not all(_finite(c) for c in self.orientation):
            raise MalformedSampleError("pose quaternion has non-finite component")
        n = math.sqrt(sum(c * c for c in self.orientation))
        if abs(n - 1.0) > QUAT_NORM_BAND:
            raise MalformedSampleError(f"quaternion norm {n} outside normalization band")
        if abs(n - 1.0) <= 1e-12:
            return self
        w, x, y, z = self.orientation
        return Pose(self.position, (w / n, x / n, y / n, z / n))

    def rotate(self, v: Vec3) -> Vec3:
        """Rotate a local-frame vector into the world frame."""
        w, x, y, z = self.orientation
        vx, vy, vz = v
        # q * v * q^-1 expanded via the cross-product form.
        tx = 2.0 * (y * vz - z * vy)
        ty = 2.0 * (z * vx - x * vz)
        tz = 2.0 * (x * vy - y * vx)
        return (
            vx + w * tx + (y * tz - z * ty),
            vy + w * ty + (z * tx - x * tz),
            vz + w * tz + (x * ty - y * tx),
        )

    def transform(self, v: Vec3) -> Vec3:
        rx, ry, rz = self.rotate(v)
        px, py, pz = self.position
        return (px + rx, py + ry, pz + rz)


def quat_multiply(a: Quat, b: Quat) -> Quat:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def quat_conjugate(q: Quat) -> Quat:
    w, x, y, z = q
    return (w, -x, -y, -z)


def quat_from_axis_angle(axis: Vec3, angle: float) -> Quat:
    n = math.sqrt(sum(c * c for c in axis))
    if n == 0:
        return (1.0, 0.0, 0.0, 0.0)
    s = math.sin(angle / 2.0) / n
    return (math.cos(angle / 2.0), axis[0] * s, axis[1] * s, axis[2] * s)


class SizeClassName(Enum):
    SMALL = "small"
    MEDIUM = "medium"
    LARGE = "large"


_SIZE_RANK = {SizeClassName.SMALL: 0, SizeClassName.MEDIUM: 1, SizeClassName.LARGE: 2}

SMALL_MAX_EDGE = 0.05
MEDIUM_MAX_EDGE = 0.15


@dataclass(frozen=True)
class SizeClass:
    name: SizeClassName
    edge_length: float

    @property
    def rank(self) -> int:
        return _SIZE_RANK[self.name]


def classify_size(edge_length: float) -> SizeClass:
    """Classify a cube edge length; boundary values belong to the smaller class."""
    if not _finite(edge_length) or edge_length <= 0:
        raise MalformedSampleError(f"edge length must be positive and finite: {edge_length!r}")
    if edge_length <= SMALL_MAX_EDGE:
        name = SizeClassName.SMALL
    elif edge_length <= MEDIUM_MAX_EDGE:
        name = SizeClassName.MEDIUM
    else:
        name = SizeClassName.LARGE
    return SizeClass(name, edge_length)


class TouchPhase(Enum):
    DOWN = "down"
    MOVE = "move"
    UP = "up"


class HandShape(Enum):
    OPEN = "open"
    FIST = "fist"
    NONE = "none"


@dataclass(frozen=True)
class PoseSample:
    t: float
    cube_id: str
    pose: Pose


@dataclass(frozen=True)
class TouchSample:
    t: float
    cube_id: str
    contact_id: str
    face: Face
    uv: Tuple[float, float]
    pressure: float
    phase: TouchPhase


@dataclass(frozen=True)
class HandSample:
    t: float
    hand_id: str
    palm_position: Vec3
    shape: HandShape


InputSample = Union[PoseSample, TouchSample, HandSample]


def validate_sample(sample: InputSample, prev_t: float) -> InputSample:
    """Check type invariants and time ordering; returns the (possibly
    quaternion-normalized) sample.

    Raises OrderingError on time regression and MalformedSampleError on any
    out-of-range or non-finite field.
    """
    if not _finite(sample.t):
        raise MalformedSampleError("sample timestamp is not finite")
    if sample.t < prev_t:
        raise OrderingError(f"timestamp {sample.t} precedes previous sample {prev_t}")
    if isinstance(sample, PoseSample):
        _check_id(sample.cube_id, "cube")
        pose = sample.pose.validate()
        if pose is sample.pose:
            return sample
        return PoseSample(sample.t, sample.cube_id, pose)
    if isinstance(sample, TouchSample):
        _check_id(sample.cube_id, "cube")
        _check_id(sample.contact_id, "contact")
        u, v = sample.uv
        if not (_finite(u) and _finite(v) and 0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
            raise MalformedSampleError(f"touch uv {sample.uv} outside unit square")
        if not (_finite(sample.pressure) and 0.0 <= sample.pressure <= 1.0):
            raise MalformedSampleError(f"touch pressure {sample.pressure} outside [0, 1]")
        return sample
    if isinstance(sample, HandSample):
        _check_id(sample.hand_id, "hand")
        if not all(_finite(c) for c in sample.palm_position):
            raise MalformedSampleError("palm position has non-finite component")
        return sample
    raise MalformedSampleError(f"unknown sample type: {type(sample).__name__}")


class InteractionKind(Enum):
    """Recognized interaction vocabulary: gestures, manipulations, and
    configuration transitions."""

    TAP = "tap"
    DOUBLE_TAP = "double_tap"
    TRIPLE_TAP = "triple_tap"
    PRESS = "press"
    HOLD = "hold"
    PINCH = "pinch"
    SWIPE = "swipe"
    PATH = "path"
    HOVER_OPEN = "hover_open"
    HOVER_FIST = "hover_fist"
    COVER = "cover"
    UNCOVER = "uncover"
    PICK_UP = "pick_up"
    PUT_DOWN = "put_down"
    TRANSLATE = "translate"
    ROTATE = "rotate"
    SHAKE = "shake"
    COLLIDE = "collide"
    NEIGHBORED = "neighbored"
    STACKED = "stacked"
    ASSEMBLED = "assembled"
    DISASSEMBLED = "disassembled"


# Gesture vocabulary rows (hover has open/fist sub-forms) and manipulation rows.
GESTURE_KINDS = (
    InteractionKind.TAP,
    InteractionKind.DOUBLE_TAP,
    InteractionKind.TRIPLE_TAP,
    InteractionKind.PRESS,
    InteractionKind.HOLD,
    InteractionKind.PINCH,
    InteractionKind.SWIPE,
    InteractionKind.PATH,
    InteractionKind.HOVER_OPEN,
    InteractionKind.HOVER_FIST,
    InteractionKind.COVER,
)
MANIPULATION_KINDS = (
    InteractionKind.PICK_UP,
    InteractionKind.ROTATE,
    InteractionKind.TRANSLATE,
    InteractionKind.SHAKE,
    InteractionKind.NEIGHBORED,
    InteractionKind.STACKED,
    InteractionKind.ASSEMBLED,
    InteractionKind.COLLIDE,
)
# Complements of vocabulary rows: emitted on leaving the paired state.
TRANSITION_KINDS = (
    InteractionKind.UNCOVER,
    InteractionKind.PUT_DOWN,
    InteractionKind.DISASSEMBLED,
)


class CommandKind(Enum):
    """Visualization command vocabulary: data transformation, visual
    transformation, and process control."""

    ADD = "add"
    SUBTRACT = "subtract"
    RESCALE = "rescale"
    RECOLOR = "recolor"
    SWITCH_VIS_TYPE = "switch_vis_type"
    COMBINE = "combine"
    UNGROUP = "ungroup"
    SORT = "sort"
    FLATTEN = "flatten"
    OVERVIEW = "overview"
    DETAIL = "detail"
    CHOP = "chop"
    ADJUST_RANGE = "adjust_range"
    IDENTIFY_EXTREMES = "identify_extremes"
    HIDE = "hide"
    SHOW = "show"
    ZOOM = "zoom"
    PAN = "pan"
    INITIATE = "initiate"
    TERMINATE = "terminate"
    RESET = "reset"


# Param codecs: f float, i int, s token, ids comma list, fv comma float tuple,
# poly '/'-joined 'u:v' pairs.
_EVENT_PARAMS: dict[InteractionKind, Tuple[Tuple[str, str], ...]] = {
    InteractionKind.TAP: (),
    InteractionKind.DOUBLE_TAP: (),
    InteractionKind.TRIPLE_TAP: (),
    InteractionKind.PRESS: (("pressure", "f"),),
    InteractionKind.HOLD: (("duration", "f"),),
    InteractionKind.PINCH: (("site", "s"), ("scale_ratio", "f")),
    InteractionKind.SWIPE: (("face", "s"), ("direction", "s")),
    InteractionKind.PATH: (("faces", "ids"), ("poly", "poly")),
    InteractionKind.HOVER_OPEN: (("hand", "s"),),
    InteractionKind.HOVER_FIST: (("hand", "s"),),
    InteractionKind.COVER: (("hand", "s"),),
    InteractionKind.UNCOVER: (("hand", "s"),),
    InteractionKind.PICK_UP: (),
    InteractionKind.PUT_DOWN: (),
    InteractionKind.TRANSLATE: (("displacement", "fv"),),
    InteractionKind.ROTATE: (("axis", "s"), ("quarter_turns", "i")),
    InteractionKind.SHAKE: (),
    InteractionKind.COLLIDE: (("other", "s"), ("speed", "f")),
    InteractionKind.NEIGHBORED: (("other", "s"),),
    InteractionKind.STACKED: (("below", "ids"),),
    InteractionKind.ASSEMBLED: (("members", "ids"),),
    InteractionKind.DISASSEMBLED: (("members", "ids"),),
}

_COMMAND_PARAMS: dict[CommandKind, Tuple[Tuple[str, str], ...]] = {
    CommandKind.ADD: (),
    CommandKind.SUBTRACT: (),
    CommandKind.RESCALE: (("granularity", "i"),),
    CommandKind.RECOLOR: (),
    CommandKind.SWITCH_VIS_TYPE: (("vis", "s"),),
    CommandKind.COMBINE: (("mode", "s"), ("members", "ids")),
    CommandKind.UNGROUP: (),
    CommandKind.SORT: (("key", "s"),),
    CommandKind.FLATTEN: (("axis", "s"),),
    CommandKind.OVERVIEW: (),
    CommandKind.DETAIL: (),
    CommandKind.CHOP: (("axis", "s"), ("parts", "i")),
    CommandKind.ADJUST_RANGE: (("axis", "s"), ("direction", "i")),
    CommandKind.IDENTIFY_EXTREMES: (),
    CommandKind.HIDE: (),
    CommandKind.SHOW: (),
    CommandKind.ZOOM: (("factor", "f"),),
    CommandKind.PAN: (("delta", "fv"),),
    CommandKind.INITIATE: (),
    CommandKind.TERMINATE: (),
    CommandKind.RESET: (),
}


def _encode_value(codec: str, value) -> str:
    if codec == "f":
        return fmt_float(value)
    if codec == "i":
        return str(int(value))
    if codec == "s":
        return str(value)
    if codec == "ids":
        return ",".join(value)
    if codec == "fv":
        return ",".join(fmt_float(c) for c in value)
    if codec == "poly":
        return "/".join(f"{fmt_float(u)}:{fmt_float(v)}" for u, v in value)
    raise ValueError(f"unknown codec {codec}")


def _decode_value(codec: str, text: str):
    if codec == "f":
        return float(text)
    if codec == "i":
        return int(text)
    if codec == "s":
        return text
    if codec == "ids":
        return tuple(text.split(",")) if text else ()
    if codec == "fv":
        return tuple(float(c) for c in text.split(","))
    if codec == "poly":
        if not text:
            return ()
        pairs = []
        for item in text.split("/"):
            u, v = item.split(":")
            pairs.append((float(u), float(v)))
        return tuple(pairs)
    raise ValueError(f"unknown codec {codec}")


def _freeze_params(schema, params: Mapping) -> Tuple[Tuple[str, object], ...]:
    names = [name for name, _ in schema]
    unknown = set(params) - set(names)
    if unknown:
        raise MalformedSampleError(f"unknown params {sorted(unknown)}; expected {names}")
    missing = set(names) - set(params)
    if missing:
        raise MalformedSampleError(f"missing params {sorted(missing)}")
    frozen = []
    for name, codec in schema:
        value = params[name]
        if codec == "poly":
            value = tuple((float(u), float(v)) for u, v in value)
        elif codec in ("ids", "fv"):
            value = tuple(value)
        frozen.append((name, value))
    return tuple(frozen)


@dataclass(frozen=True)
class InteractionEvent:
    """A recognized gesture, manipulation, or configuration-change event."""

    t: float
    kind: InteractionKind
    subject: str
    params: Tuple[Tuple[str, object], ...] = ()

    @classmethod
    def make(cls, t: float, kind: InteractionKind, subject: str, **params) -> "InteractionEvent":
        return cls(t, kind, subject, _freeze_params(_EVENT_PARAMS[kind], params))

    def get(self, name: str):
        for key, value in self.params:
            if key == name:
                return value
        raise KeyError(name)

    def to_line(self) -> str:
        parts = [f"event t={fmt_float(self.t)}", f"kind={self.kind.value}", f"subject={self.subject}"]
        for (name, codec), (_, value) in zip(_EVENT_PARAMS[self.kind], self.params):
            parts.append(f"{name}={_encode_value(codec, value)}")
        return " ".join(parts)


@dataclass(frozen=True)
class VisualizationCommand:
    """A typed command from the visualization vocabulary, bound to a target."""

    kind: CommandKind
    target: str
    params: Tuple[Tuple[str, object], ...] = ()

    @classmethod
    def make(cls, kind: CommandKind, target: str, **params) -> "VisualizationCommand":
        if not target:
            raise MalformedSampleError("command target must be non-empty")
        return cls(kind, target, _freeze_params(_COMMAND_PARAMS[kind], params))

    def get(self, name: str):
        for key, value in self.params:
            if key == name:
                return value
        raise KeyError(name)

    def to_line(self) -> str:
        parts = [f"command kind={self.kind.value}", f"target={self.target}"]
        for (name, codec), (_, value) in zip(_COMMAND_PARAMS[self.kind], self.params):
            parts.append(f"{name}={_encode_value(codec, value)}")
        return " ".join(parts)


def sample_to_line(sample: InputSample) -> str:
    if isinstance(sample, PoseSample):
        p = sample.pose
        return (
            f"pose t={fmt_float(sample.t)} cube={sample.cube_id}"
            f" p={_encode_value('fv', p.position)} q={_encode_value('fv', p.orientation)}"
        )
    if isinstance(sample, TouchSample):
        return (
            f"touch t={fmt_float(sample.t)} cube={sample.cube_id} contact={sample.contact_id}"
            f" face={sample.face.value} uv={_encode_value('fv', sample.uv)}"
            f" pressure={fmt_float(sample.pressure)} phase={sample.phase.value}"
        )
    if isinstance(sample, HandSample):
        return (
            f"hand t={fmt_float(sample.t)} hand={sample.hand_id}"
            f" palm={_encode_value('fv', sample.palm_position)} shape={sample.shape.value}"
        )
    raise MalformedSampleError(f"unknown sample type: {type(sample).__name__}")


def _field(token: str, name: str) -> str:
    key, _, value = token.partition("=")
    if key != name:
        raise MalformedSampleError(f"expected field {name!r}, got {key!r}")
    return value


def _split_fields(line: str, expected: Sequence[str], what: str) -> list[str]:
    tokens = line.split(" ")
    body = tokens[1:]
    if len(body) != len(expected):
        raise MalformedSampleError(f"{what} line needs fields {list(expected)}: {line!r}")
    values = []
    for token, name in zip(body, expected):
        if "=" not in token:
            raise MalformedSampleError(f"malformed field {token!r} in {what} line")
        key, _, value = token.partition("=")
        if key != name:
            raise MalformedSampleError(f"expected field {name!r}, got {key!r} in {what} line")
        values.append(value)
    return values


def sample_from_line(line: str) -> InputSample:
    """Parse the canonical one-line form of an input sample."""
    head = line.split(" ", 1)[0]
    try:
        if head == "pose":
            t, cube, p, q = _split_fields(line, ("t", "cube", "p", "q"), "pose")
            pos = _decode_value("fv", p)
            quat = _decode_value("fv", q)
            if len(pos) != 3 or len(quat) != 4:
                raise MalformedSampleError(f"pose vectors have wrong arity: {line!r}")
            return PoseSample(float(t), cube, Pose(pos, quat))
        if head == "touch":
            t, cube, contact, face, uv, pressure, phase = _split_fields(
                line, ("t", "cube", "contact", "face", "uv", "pressure", "phase"), "touch"
            )
            uv_t = _decode_value("fv", uv)
            if len(uv_t) != 2:
                raise MalformedSampleError(f"touch uv has wrong arity: {line!r}")
            return TouchSample(
                float(t), cube, contact, Face.parse(face), uv_t, float(pressure), TouchPhase(phase)
            )
        if head == "hand":
            t, hand, palm, shape = _split_fields(line, ("t", "hand", "palm", "shape"), "hand")
            palm_t = _decode_value("fv", palm)
            if len(palm_t) != 3:
                raise MalformedSampleError(f"hand palm has wrong arity: {line!r}")
            return HandSample(float(t), hand, palm_t, HandShape(shape))
    except (ValueError, MalformedSampleError) as exc:
        if isinstance(exc, MalformedSampleError):
            raise
        raise MalformedSampleError(f"unparseable sample line: {line!r} ({exc})") from exc
    raise MalformedSampleError(f"unknown sample head {head!r}")


def event_from_line(line: str) -> InteractionEvent:
    tokens = line.split(" ")
    if not tokens or tokens[0] != "event" or len(tokens) < 3:
        raise MalformedSampleError(f"not an event line: {line!r}")
    try:
        t = float(_field(tokens[1], "t"))
        kind = InteractionKind(_field(tokens[2], "kind"))
        subject = _field(tokens[3], "subject")
        schema = _EVENT_PARAMS[kind]
        values = {}
        for token, (name, codec) in zip(tokens[4:], schema):
            key, _, raw = token.partition("=")
            if key != name:
                raise MalformedSampleError(f"expected param {name!r}, got {key!r}")
            values[name] = _decode_value(codec, raw)
        if len(tokens) - 4 != len(schema):
            raise MalformedSampleError(f"event params do not match schema for {kind.value}")
        return InteractionEvent.make(t, kind, subject, **values)
    except (ValueError, IndexError) as exc:
        raise MalformedSampleError(f"unparseable event line: {line!r} ({exc})") from exc


def command_from_line(line: str) -> VisualizationCommand:
    tokens = line.split(" ")
    if not tokens or tokens[0] != "command" or len(tokens) < 3:
        raise MalformedSampleError(f"not a command line: {line!r}")
    try:
        kind = CommandKind(_field(tokens[1], "kind"))
        target = _field(tokens[2], "target")
        schema = _COMMAND_PARAMS[kind]
        values = {}
        for token, (name, codec) in zip(tokens[3:], schema):
            key, _, raw = token.partition("=")
            if key != name:
                raise MalformedSampleError(f"expected param {name!r}, got {key!r}")
            values[name] = _decode_value(codec, raw)
        if len(tokens) - 3 != len(schema):
            raise MalformedSampleError(f"command params do not match schema for {kind.value}")
        return VisualizationCommand.make(kind, target, **values)
    except (ValueError, IndexError) as exc:
        raise MalformedSampleError(f"unparseable command line: {line!r} ({exc})") from exc
