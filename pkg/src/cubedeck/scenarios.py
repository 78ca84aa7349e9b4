"""Synthetic scenario traces: the scripted interaction sequences the engine
is verified against.

Every generator is deterministic in (scenario, seed): the seed only nudges
staging positions within safe margins, never the gesture geometry itself.
Samples run at 30 Hz.  Cubes and hands teleport into place at the start of
their segment; a cube's first pose sample registers it as pre-existing
structure, so staging never emits events of its own.
"""

from __future__ import annotations

import math
import random
from typing import List, Optional, Tuple

from .datacube import Region
from .model import (
    Face,
    HandSample,
    HandShape,
    InputSample,
    Pose,
    PoseSample,
    TouchPhase,
    TouchSample,
)
from .session import SessionLayout
from .trace import TraceFile, TraceHeader

HZ = 30
DT = 1.0 / HZ
EDGE = 0.033
HALF = EDGE / 2.0
REST_Z = HALF  # center height of a cube resting on the tabletop

SCENARIOS = (
    "bind_two_neighbor",
    "stack_two",
    "cover_hide",
    "shake_reset",
    "assemble_2x2x2",
    "gesture_corpus",
)

# Region ids in the shipped health dataset, used for slot targets.
_SLOT_IDS = ("CAN", "USA", "JPN", "BOL", "RUS", "FRA", "EGY", "CHN", "AUS")
_SLOT_ANCHORS = {
    "CAN": (0.2056, 0.8111),
    "USA": (0.2278, 0.7167),
    "JPN": (0.8833, 0.7),
    "BOL": (0.3222, 0.4056),
    "RUS": (0.7639, 0.8389),
    "FRA": (0.5056, 0.7556),
    "EGY": (0.5833, 0.6444),
    "CHN": (0.7889, 0.6944),
    "AUS": (0.8722, 0.3611),
}


def _slot_center(region_id: str) -> Tuple[float, float]:
    layout = SessionLayout()
    u, v = _SLOT_ANCHORS[region_id]
    return layout.slot_center(Region(region_id, region_id, (u, v)))


class _Script:
    """Accumulates samples under a single global clock."""

    def __init__(self) -> None:
        self.samples: List[InputSample] = []
        self.t = 0.0

    def pose(self, cube: str, x: float, y: float, z: float, q=(1.0, 0.0, 0.0, 0.0)) -> None:
        self.samples.append(PoseSample(self.t, cube, Pose((x, y, z), q)))

    def advance(self, dt: float = DT) -> None:
        self.t += dt

    def rest(self, cube: str, x: float, y: float, z: float, duration: float) -> None:
        steps = max(1, round(duration * HZ))
        for _ in range(steps):
            self.pose(cube, x, y, z)
            self.advance()

    def move(
        self,
        cube: str,
        start: Tuple[float, float, float],
        end: Tuple[float, float, float],
        duration: float,
        q=(1.0, 0.0, 0.0, 0.0),
    ) -> None:
        """Linear motion sampled at 30 Hz; emits the end point, not the start."""
        steps = max(1, round(duration * HZ))
        for k in range(1, steps + 1):
            f = k / steps
            self.pose(
                cube,
                start[0] + (end[0] - start[0]) * f,
                start[1] + (end[1] - start[1]) * f,
                start[2] + (end[2] - start[2]) * f,
                q,
            )
            self.advance()

    def touch(
        self,
        cube: str,
        contact: str,
        face: Face,
        uv: Tuple[float, float],
        pressure: float,
        phase: TouchPhase,
    ) -> None:
        self.samples.append(TouchSample(self.t, cube, contact, face, uv, pressure, phase))

    def hand(self, hand_id: str, palm: Tuple[float, float, float], shape: HandShape) -> None:
        self.samples.append(HandSample(self.t, hand_id, palm, shape))

    def touch_stroke(
        self,
        cube: str,
        contact: str,
        face: Face,
        path: List[Tuple[float, float]],
        pressure: float,
        duration: float,
    ) -> None:
        """down, interpolated moves along path vertices, up."""
        self.touch(cube, contact, face, path[0], pressure, TouchPhase.DOWN)
        self.advance()
        steps = max(len(path) - 1, 1)
        per = duration / max(steps, 1)
        for uv in path[1:-1] if len(path) > 2 else []:
            self.touch(cube, contact, face, uv, pressure, TouchPhase.MOVE)
            self.advance(per)
        self.touch(cube, contact, face, path[-1], pressure, TouchPhase.UP)
        self.advance()


def _bind(script: _Script, cube: str, region_id: str) -> Tuple[float, float]:
    """Rest the cube on a slot long enough to bind; returns the slot center."""
    x, y = _slot_center(region_id)
    script.rest(cube, x, y, REST_Z, 0.6)
    return (x, y)


def _slide(script: _Script, cube: str, start, end, duration: float) -> None:
    script.move(cube, (start[0], start[1], REST_Z), (end[0], end[1], REST_Z), duration)


def generate_bind_two_neighbor(seed: int) -> List[InputSample]:
    rng = random.Random(seed)
    jx = rng.uniform(-0.003, 0.003)
    jy = rng.uniform(-0.003, 0.003)
    ax, ay = 0.55 + jx, 0.20 + jy
    s = _Script()
    slot_a = _bind(s, "A", "CHN")
    _slide(s, "A", slot_a, (ax, ay), 0.5)
    s.rest("A", ax, ay, REST_Z, 0.3)
    slot_b = _bind(s, "B", "JPN")
    _slide(s, "B", slot_b, (0.62 + jx, slot_b[1]), 0.5)
    s.rest("B", 0.62 + jx, slot_b[1], REST_Z, 0.2)
    _slide(s, "B", (0.62 + jx, slot_b[1]), (0.62 + jx, ay), 0.4)
    s.rest("B", 0.62 + jx, ay, REST_Z, 0.2)
    # Final gentle approach: 37 mm at ~0.1 m/s, well under the collide speed.
    _slide(s, "B", (0.62 + jx, ay), (ax + EDGE, ay), 0.37)
    s.rest("B", ax + EDGE, ay, REST_Z, 0.3)
    return s.samples


def generate_stack_two(seed: int) -> List[InputSample]:
    rng = random.Random(seed)
    jx = rng.uniform(-0.003, 0.003)
    ax, ay = 0.55 + jx, 0.20
    s = _Script()
    slot_a = _bind(s, "A", "CHN")
    _slide(s, "A", slot_a, (ax, ay), 0.5)
    s.rest("A", ax, ay, REST_Z, 0.3)
    slot_b = _bind(s, "B", "JPN")
    _slide(s, "B", slot_b, (0.65, 0.30), 0.5)
    s.rest("B", 0.65, 0.30, REST_Z, 0.2)
    s.move("B", (0.65, 0.30, REST_Z), (0.65, 0.30, 0.08), 0.3)  # pick up
    s.move("B", (0.65, 0.30, 0.08), (ax, ay, 0.08), 0.3)
    s.move("B", (ax, ay, 0.08), (ax, ay, REST_Z + EDGE), 0.4)  # settle on A
    s.rest("B", ax, ay, REST_Z + EDGE, 0.3)
    return s.samples


def generate_cover_hide(seed: int) -> List[InputSample]:
    samples = generate_bind_two_neighbor(seed)
    s = _Script()
    s.samples = list(samples)
    s.t = samples[-1].t + DT
    ax = next(sm.pose.position[0] for sm in reversed(samples) if isinstance(sm, PoseSample) and sm.cube_id == "A")
    ay = next(sm.pose.position[1] for sm in reversed(samples) if isinstance(sm, PoseSample) and sm.cube_id == "A")
    cover_z = EDGE + 0.02  # 2 cm above the top face
    for _ in range(round(0.5 * HZ)):
        s.hand("H1", (ax, ay, cover_z), HandShape.OPEN)
        s.advance()
    # Leave sideways at low height so no hover band is crossed.
    steps = round(0.2 * HZ)
    for k in range(1, steps + 1):
        s.hand("H1", (ax, ay - 0.1 * k / steps, cover_z), HandShape.OPEN)
        s.advance()
    s.rest("A", ax, ay, REST_Z, 0.2)
    return s.samples


def generate_shake_reset(seed: int) -> List[InputSample]:
    rng = random.Random(seed)
    jx = rng.uniform(-0.003, 0.003)
    ax, ay = 0.55 + jx, 0.20
    s = _Script()
    slot_a = _bind(s, "A", "CHN")
    _slide(s, "A", slot_a, (ax, ay), 0.5)
    s.rest("A", ax, ay, REST_Z, 0.3)
    # Horizontal shake: swings of 3-6 cm, four reversals inside one second.
    for target in (ax + 0.03, ax - 0.03, ax + 0.03, ax - 0.03, ax):
        here = s.samples[-1].pose.position[0]
        s.move("A", (here, ay, REST_Z), (target, ay, REST_Z), 0.1)
    s.rest("A", ax, ay, REST_Z, 0.3)
    # The cube is detached now: this tap must dispatch to nothing.
    s.touch("A", "c1", Face.PZ, (0.5, 0.5), 0.3, TouchPhase.DOWN)
    s.advance(0.1)
    s.touch("A", "c1", Face.PZ, (0.5, 0.5), 0.0, TouchPhase.UP)
    s.advance()
    s.rest("A", ax, ay, REST_Z, 0.2)
    return s.samples


def generate_assemble_2x2x2(seed: int) -> List[InputSample]:
    rng = random.Random(seed)
    bx = 0.60 + rng.uniform(-0.003, 0.003)
    by = 0.20 + rng.uniform(-0.003, 0.003)
    cubes = ("A", "B", "C", "D", "E", "F", "G", "H")
    slots = ("CAN", "USA", "JPN", "BOL", "RUS", "FRA", "EGY", "CHN")
    # Lattice targets: bottom layer then top layer, row-major.
    offsets = [
        (0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0),
        (0, 0, 1), (1, 0, 1), (0, 1, 1), (1, 1, 1),
    ]
    fly_z = 0.12
    s = _Script()
    for cube, slot, (ix, iy, iz) in zip(cubes, slots, offsets):
        tx, ty, tz = bx + ix * EDGE, by + iy * EDGE, REST_Z + iz * EDGE
        sx, sy = _bind(s, cube, slot)
        s.move(cube, (sx, sy, REST_Z), (sx, sy, fly_z), 0.3)
        s.move(cube, (sx, sy, fly_z), (tx, ty, fly_z), 0.4)
        s.move(cube, (tx, ty, fly_z), (tx, ty, tz), 0.4)
        s.rest(cube, tx, ty, tz, 0.2)
    return s.samples


def generate_gesture_corpus(seed: int) -> List[InputSample]:
    """One canonical instance per gesture row and per manipulation row.

    Replaying this trace yields exactly one event per row and nothing else:
    tap, double tap, triple tap, press, hold, pinch, swipe, path, hover
    (open-palm form), cover; pick up, rotate, translate, shake, neighbor,
    stack, assemble, collide.
    """
    rng = random.Random(seed)
    s = _Script()
    block = 0

    def base() -> Tuple[float, float]:
        x = 1.0 + 0.25 * (block % 5) + rng.uniform(-0.005, 0.005)
        y = 1.0 + 0.25 * (block // 5) + rng.uniform(-0.005, 0.005)
        return x, y

    def begin(cube: Optional[str] = None) -> Tuple[float, float]:
        nonlocal block
        bx, by = base()
        block += 1
        s.t = max(s.t, (block - 1) * 1.5)
        if cube is not None:
            s.pose(cube, bx, by, REST_Z)
            s.advance()
        return bx, by

    # --- Gestures -----------------------------------------------------
    begin("g01")  # tap
    s.advance(0.1)
    s.touch_stroke("g01", "c", Face.PZ, [(0.5, 0.5), (0.5, 0.5)], 0.3, 0.12)

    begin("g02")  # double tap
    s.advance(0.1)
    s.touch_stroke("g02", "c1", Face.PZ, [(0.5, 0.5), (0.5, 0.5)], 0.3, 0.1)
    s.advance(0.1)
    s.touch_stroke("g02", "c2", Face.PZ, [(0.5, 0.5), (0.5, 0.5)], 0.3, 0.1)

    begin("g03")  # triple tap
    s.advance(0.1)
    for i in range(3):
        s.touch_stroke("g03", f"c{i}", Face.PZ, [(0.5, 0.5), (0.5, 0.5)], 0.3, 0.1)
        s.advance(0.08)

    begin("g04")  # press: firm pressure for a quarter second
    s.advance(0.1)
    s.touch("g04", "c", Face.PZ, (0.5, 0.5), 0.8, TouchPhase.DOWN)
    for _ in range(7):
        s.advance()
        s.touch("g04", "c", Face.PZ, (0.5, 0.5), 0.8, TouchPhase.MOVE)
    s.advance()
    s.touch("g04", "c", Face.PZ, (0.5, 0.5), 0.8, TouchPhase.UP)

    begin("g05")  # hold: light contact for a full second
    s.advance(0.1)
    s.touch("g05", "c", Face.PZ, (0.5, 0.5), 0.1, TouchPhase.DOWN)
    for _ in range(5):
        s.advance(0.2)
        s.touch("g05", "c", Face.PZ, (0.5, 0.5), 0.1, TouchPhase.MOVE)
    s.advance(DT)
    s.touch("g05", "c", Face.PZ, (0.5, 0.5), 0.1, TouchPhase.UP)

    begin("g06")  # pinch on the surface, spreading to triple the separation
    s.advance(0.1)
    s.touch("g06", "p1", Face.PZ, (0.45, 0.5), 0.4, TouchPhase.DOWN)
    s.advance()
    s.touch("g06", "p2", Face.PZ, (0.55, 0.5), 0.4, TouchPhase.DOWN)
    for k in range(1, 7):
        s.advance()
        s.touch("g06", "p1", Face.PZ, (0.45 - k * 0.0167, 0.5), 0.4, TouchPhase.MOVE)
        s.touch("g06", "p2", Face.PZ, (0.55 + k * 0.0167, 0.5), 0.4, TouchPhase.MOVE)
    s.advance()
    s.touch("g06", "p1", Face.PZ, (0.35, 0.5), 0.4, TouchPhase.UP)
    s.advance()
    s.touch("g06", "p2", Face.PZ, (0.65, 0.5), 0.4, TouchPhase.UP)

    begin("g07")  # swipe across the top face
    s.advance(0.1)
    swipe_path = [(0.15 + k * 0.07, 0.5) for k in range(11)]
    s.touch_stroke("g07", "c", Face.PZ, swipe_path, 0.4, 0.3)

    begin("g08")  # path over the +Z then +X faces
    s.advance(0.1)
    s.touch("g08", "c", Face.PZ, (0.5, 0.5), 0.4, TouchPhase.DOWN)
    for k in range(1, 6):
        s.advance()
        s.touch("g08", "c", Face.PZ, (0.5 + k * 0.1, 0.5), 0.4, TouchPhase.MOVE)
    for k in range(1, 6):
        s.advance()
        s.touch("g08", "c", Face.PX, (0.5, 1.0 - k * 0.14), 0.4, TouchPhase.MOVE)
    s.advance()
    s.touch("g08", "c", Face.PX, (0.5, 0.3), 0.4, TouchPhase.UP)

    bx, by = begin("g09")  # open-palm hover
    s.advance(0.1)
    for _ in range(6):
        s.hand("hov", (bx, by, EDGE + 0.10), HandShape.OPEN)
        s.advance()
    s.hand("hov", (bx, by, EDGE + 0.40), HandShape.OPEN)  # leave upward, out of band
    s.advance()

    bx, by = begin("g10")  # cover, held to the end of the block
    s.advance(0.1)
    for _ in range(9):
        s.hand("cov", (bx, by, EDGE + 0.02), HandShape.OPEN)
        s.advance()

    # --- Manipulations ------------------------------------------------
    bx, by = begin("g11")  # pick up, kept aloft
    s.advance(0.1)
    s.move("g11", (bx, by, REST_Z), (bx, by, 0.08), 0.3)

    bx, by = begin("g12")  # rotate a quarter turn about z
    s.advance(0.1)
    steps = 12
    for k in range(1, steps + 1):
        half = math.radians(95.0 * k / steps) / 2.0
        s.pose("g12", bx, by, REST_Z, (math.cos(half), 0.0, 0.0, math.sin(half)))
        s.advance()

    bx, by = begin("g13")  # translate 15 mm and stop
    s.advance(0.1)
    s.move("g13", (bx, by, REST_Z), (bx + 0.015, by, REST_Z), 0.3)
    s.rest("g13", bx + 0.015, by, REST_Z, 0.1)

    bx, by = begin("g14")  # horizontal shake, ending where it began
    s.advance(0.1)
    x = bx
    for target in (bx + 0.025, bx - 0.025, bx + 0.025, bx - 0.025, bx):
        s.move("g14", (x, by, REST_Z), (target, by, REST_Z), 0.1)
        x = target
    s.rest("g14", bx, by, REST_Z, 0.1)

    bx, by = begin("g15a")  # neighbor: 2 mm nudge closes a 6 mm gap
    s.pose("g15b", bx + EDGE + 0.006, by, REST_Z)
    s.advance()
    s.advance(0.1)
    s.move("g15b", (bx + EDGE + 0.006, by, REST_Z), (bx + EDGE + 0.004, by, REST_Z), 0.1)
    s.rest("g15b", bx + EDGE + 0.004, by, REST_Z, 0.1)

    bx, by = begin("g16a")  # stack: slow 2 mm settle from just above
    s.pose("g16b", bx, by, REST_Z + EDGE + 0.006)
    s.advance()
    s.advance(0.1)
    s.move("g16b", (bx, by, REST_Z + EDGE + 0.006), (bx, by, REST_Z + EDGE + 0.004), 0.1)
    s.rest("g16b", bx, by, REST_Z + EDGE + 0.004, 0.1)

    bx, by = begin("g17a")  # assemble: third cube joins a resting pair
    s.pose("g17b", bx + EDGE, by, REST_Z)
    s.advance()
    s.advance(0.1)
    s.pose("g17c", bx - EDGE - 0.006, by, REST_Z)
    s.advance()
    s.move("g17c", (bx - EDGE - 0.006, by, REST_Z), (bx - EDGE - 0.004, by, REST_Z), 0.1)
    s.rest("g17c", bx - EDGE - 0.004, by, REST_Z, 0.1)

    bx, by = begin("g18a")  # collide: fast approach ends the trace on contact
    s.pose("g18b", bx + 0.15, by, REST_Z)
    s.advance()
    s.advance(0.1)
    step = 0.5 / HZ
    gap = 0.15
    while gap - step > EDGE + 0.004:
        gap -= step
        s.pose("g18a", bx, by, REST_Z)
        s.pose("g18b", bx + gap, by, REST_Z)
        s.advance()
    s.pose("g18a", bx, by, REST_Z)
    s.pose("g18b", bx + EDGE + 0.0003, by, REST_Z)
    return s.samples


_GENERATORS = {
    "bind_two_neighbor": generate_bind_two_neighbor,
    "stack_two": generate_stack_two,
    "cover_hide": generate_cover_hide,
    "shake_reset": generate_shake_reset,
    "assemble_2x2x2": generate_assemble_2x2x2,
    "gesture_corpus": generate_gesture_corpus,
}


def generate(scenario: str, seed: int) -> TraceFile:
    """Build a deterministic scenario trace; unknown names raise KeyError."""
    if scenario not in _GENERATORS:
        raise KeyError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}")
    samples = _GENERATORS[scenario](seed)
    return TraceFile(TraceHeader("health", "default"), tuple(samples))
