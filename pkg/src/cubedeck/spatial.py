"""Pose mathematics and multi-cube configuration analysis.

All functions here are pure: they take immutable cube states and return
relations, graphs, and component summaries.  Tolerances live in
``SpatialParams`` and are sized for magnetic snap cubes a few centimeters
on a side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import (
    DegenerateConfigurationError,
    InsufficientHistoryError,
    UnsupportedConfigurationError,
)
from .model import FACE_NORMALS, FACE_ORDER, Face, Pose, Vec3, quat_conjugate


@dataclass(frozen=True)
class SpatialParams:
    """Geometric tolerances for contact and lattice analysis."""

    edge_length: float = 0.033
    contact_gap_max: float = 0.005
    lateral_offset_max: float = 0.25  # fraction of edge
    antiparallel_max_deg: float = 15.0
    lattice_tol: float = 0.30  # fraction of edge, per axis

    def to_lines(self) -> List[str]:
        from .model import fmt_float

        return [
            f"spatial {name}={fmt_float(getattr(self, name))}"
            for name in (
                "edge_length",
                "contact_gap_max",
                "lateral_offset_max",
                "antiparallel_max_deg",
                "lattice_tol",
            )
        ]


@dataclass(frozen=True)
class CubeState:
    """Tracked cube: identifier, physical edge length, and current pose."""

    cube_id: str
    edge: float
    pose: Pose


@dataclass(frozen=True)
class ContactRelation:
    """Face contact between cubes a and b (a < b lexicographically)."""

    a: str
    b: str
    kind: str  # "neighbor" | "stacked"
    below: Optional[str]  # set iff kind == "stacked"
    gap: float
    lateral_offset: float  # fraction of edge

    def swapped(self) -> "ContactRelation":
        return ContactRelation(self.b, self.a, self.kind, self.below, self.gap, self.lateral_offset)


@dataclass(frozen=True)
class ContactGraph:
    nodes: Tuple[str, ...]
    edges: Tuple[ContactRelation, ...]

    def neighbors(self, cube_id: str) -> List[str]:
        out = []
        for e in self.edges:
            if e.a == cube_id:
                out.append(e.b)
            elif e.b == cube_id:
                out.append(e.a)
        return out


@dataclass(frozen=True)
class Component:
    """One connected group of cubes with integer lattice coordinates."""

    member_ids: Tuple[str, ...]  # canonical order: lattice (z, y, x), then id
    kind: str  # "single" | "pair_neighbor" | "column_stack" | "assembly"
    lattice_coords: Tuple[Tuple[str, Tuple[int, int, int]], ...]

    @property
    def component_id(self) -> str:
        return "+".join(sorted(self.member_ids))

    def coords_of(self, cube_id: str) -> Tuple[int, int, int]:
        for cid, coords in self.lattice_coords:
            if cid == cube_id:
                return coords
        raise KeyError(cube_id)


@dataclass(frozen=True)
class ConfigurationSummary:
    components: Tuple[Component, ...]

    def component_of(self, cube_id: str) -> Component:
        for comp in self.components:
            if cube_id in comp.member_ids:
                return comp
        raise KeyError(cube_id)

    @property
    def universe(self) -> Tuple[str, ...]:
        ids: List[str] = []
        for comp in self.components:
            ids.extend(comp.member_ids)
        return tuple(sorted(ids))


def _dot(a: Vec3, b: Vec3) -> float:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _sub(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def _norm(a: Vec3) -> float:
    return math.sqrt(_dot(a, a))


def dominant_face(pose: Pose) -> Face:
    """Face whose outward normal points most upward in the world frame.

    Ties (within 1e-9) resolve in the declared face order +Z,-Z,+X,-X,+Y,-Y.
    """
    best: Optional[Face] = None
    best_z = -math.inf
    for face in FACE_ORDER:
        z = pose.rotate(FACE_NORMALS[face])[2]
        if z > best_z + 1e-9:
            best = face
            best_z = z
    assert best is not None
    return best


def _world_normal(state: CubeState, face: Face) -> Vec3:
    return state.pose.rotate(FACE_NORMALS[face])


def _face_center(state: CubeState, face: Face) -> Vec3:
    n = FACE_NORMALS[face]
    half = state.edge / 2.0
    return state.pose.transform((n[0] * half, n[1] * half, n[2] * half))


def _face_frames(state: CubeState) -> List[Tuple[Vec3, Vec3]]:
    """World-frame (normal, center) for all six faces of one cube."""
    frames = []
    for face in FACE_ORDER:
        frames.append((_world_normal(state, face), _face_center(state, face)))
    return frames


def _relation_from_frames(
    a: CubeState,
    b: CubeState,
    frames_a: List[Tuple[Vec3, Vec3]],
    frames_b: List[Tuple[Vec3, Vec3]],
    params: SpatialParams,
) -> Optional[ContactRelation]:
    edge = a.edge
    cos_anti = math.cos(math.radians(params.antiparallel_max_deg))
    sin_anti = math.sin(math.radians(params.antiparallel_max_deg))
    best: Optional[Tuple[float, float, int, int, Vec3]] = None
    for ia, (na, ca) in enumerate(frames_a):
        for ib, (nb, cb) in enumerate(frames_b):
            if _dot(na, nb) > -cos_anti:
                continue
            d = _sub(cb, ca)
            gap = _dot(d, na)
            if gap < -params.contact_gap_max or gap > params.contact_gap_max:
                continue
            lat_vec = (d[0] - gap * na[0], d[1] - gap * na[1], d[2] - gap * na[2])
            lateral = _norm(lat_vec) / edge
            if lateral > params.lateral_offset_max:
                continue
            key = (lateral, abs(gap), ia, ib)
            if best is None or key < (best[0], best[1], best[2], best[3]):
                best = (lateral, abs(gap), ia, ib, na)
    if best is None:
        return None
    lateral, gap_abs, _, _, na = best
    nz = na[2]
    if abs(nz) >= cos_anti:
        below = a.cube_id if nz > 0 else b.cube_id
        kind = "stacked"
    elif abs(nz) <= sin_anti:
        below = None
        kind = "neighbor"
    else:
        return None  # tilted contact: neither a clean neighbor nor a stack
    lo, hi = sorted((a.cube_id, b.cube_id))
    return ContactRelation(lo, hi, kind, below, max(gap_abs, 0.0), lateral)


def contact_relation(a: CubeState, b: CubeState, params: SpatialParams) -> Optional[ContactRelation]:
    """Detect a face contact between two equal-size cubes.

    Returns a neighbor or stacked relation when some face pair is
    anti-parallel within tolerance, with face gap at most ``contact_gap_max``
    and lateral offset at most ``lateral_offset_max`` of the edge.  Tilted
    contacts (shared faces neither near-vertical nor near-horizontal) are
    not classified.
    """
    if abs(a.edge - b.edge) > 1e-9:
        raise UnsupportedConfigurationError(
            f"mismatched edge lengths: {a.cube_id}={a.edge}, {b.cube_id}={b.edge}"
        )
    return _relation_from_frames(a, b, _face_frames(a), _face_frames(b), params)


def build_contact_graph(states: Sequence[CubeState], params: SpatialParams) -> ContactGraph:
    """All pairwise contact relations, edges ordered by (min id, max id).

    Face frames are computed once per cube, and pairs whose centers are
    farther apart than any possible contact are skipped outright.
    """
    ordered = sorted(states, key=lambda s: s.cube_id)
    frames = [_face_frames(s) for s in ordered]
    edges: List[ContactRelation] = []
    for i in range(len(ordered)):
        a = ordered[i]
        reach = 1.5 * a.edge + params.contact_gap_max
        for j in range(i + 1, len(ordered)):
            b = ordered[j]
            if abs(a.edge - b.edge) > 1e-9:
                raise UnsupportedConfigurationError(
                    f"mismatched edge lengths: {a.cube_id}={a.edge}, {b.cube_id}={b.edge}"
                )
            d = _sub(a.pose.position, b.pose.position)
            if _dot(d, d) > reach * reach:
                continue
            rel = _relation_from_frames(a, b, frames[i], frames[j], params)
            if rel is not None:
                edges.append(rel)
    return ContactGraph(tuple(s.cube_id for s in ordered), tuple(edges))


def _connected_components(graph: ContactGraph) -> List[List[str]]:
    adj: Dict[str, List[str]] = {n: [] for n in graph.nodes}
    for e in graph.edges:
        adj[e.a].append(e.b)
        adj[e.b].append(e.a)
    seen: set[str] = set()
    components: List[List[str]] = []
    for node in graph.nodes:  # nodes are sorted, so components come out sorted
        if node in seen:
            continue
        stack = [node]
        members: List[str] = []
        while stack:
            cur = stack.pop()
            if cur in seen:
                continue
            seen.add(cur)
            members.append(cur)
            stack.extend(sorted(adj[cur], reverse=True))
        components.append(sorted(members))
    return components


def classify_components(
    graph: ContactGraph, states: Sequence[CubeState], params: SpatialParams
) -> ConfigurationSummary:
    """Label connected components and assign integer lattice coordinates.

    Coordinates are computed in the reference frame of each component's
    lexicographically smallest member, so a global rigid motion leaves them
    unchanged.  Raises DegenerateConfigurationError when a member strays
    more than ``lattice_tol`` of an edge from its rounded lattice point, or
    when two members round to the same point.
    """
    by_id = {s.cube_id: s for s in states}
    comps: List[Component] = []
    for members in _connected_components(graph):
        ref = by_id[members[0]]
        inv = quat_conjugate(ref.pose.orientation)
        inv_pose = Pose((0.0, 0.0, 0.0), inv)
        coords: Dict[str, Tuple[int, int, int]] = {}
        for cid in members:
            st = by_id[cid]
            rel = inv_pose.rotate(_sub(st.pose.position, ref.pose.position))
            point = []
            for axis in range(3):
                scaled = rel[axis] / ref.edge
                nearest = math.floor(scaled + 0.5)
                if abs(scaled - nearest) > params.lattice_tol:
                    raise DegenerateConfigurationError(
                        f"cube {cid} is {abs(scaled - nearest):.2f} edges off lattice on axis {axis}"
                    )
                point.append(int(nearest))
            coords[cid] = (point[0], point[1], point[2])
        if len(set(coords.values())) != len(members):
            raise DegenerateConfigurationError(
                f"members {members} collapse onto shared lattice points"
            )

        edges_in = [e for e in graph.edges if e.a in coords and e.b in coords]
        if len(members) == 1:
            kind = "single"
        elif all(e.kind == "stacked" for e in edges_in) and _is_vertical_chain(members, coords, edges_in):
            kind = "column_stack"
        elif len(members) == 2:
            kind = "pair_neighbor"
        else:
            kind = "assembly"

        order = sorted(members, key=lambda c: (coords[c][2], coords[c][1], coords[c][0], c))
        comps.append(
            Component(
                tuple(order),
                kind,
                tuple((c, coords[c]) for c in order),
            )
        )
    comps.sort(key=lambda c: c.member_ids[0] if c.member_ids else "")
    return ConfigurationSummary(tuple(comps))


def _is_vertical_chain(
    members: List[str],
    coords: Dict[str, Tuple[int, int, int]],
    edges: List[ContactRelation],
) -> bool:
    if len(edges) != len(members) - 1:
        return False
    ordered = sorted(members, key=lambda c: coords[c][2])
    pairs = {frozenset((e.a, e.b)) for e in edges}
    for lower, upper in zip(ordered, ordered[1:]):
        if coords[upper][2] != coords[lower][2] + 1:
            return False
        if frozenset((lower, upper)) not in pairs:
            return False
    return True


PoseHistory = Sequence[Tuple[float, Vec3]]  # (t, center position)


def relative_approach_speed(hist_a: PoseHistory, hist_b: PoseHistory, window: float) -> float:
    """Rate of closure between two cube centers, in m/s; positive means
    approaching.

    Fits a least-squares line to center distance over every sample time in
    the window, holding the other cube at its latest known position.
    Raises InsufficientHistoryError with fewer than two samples per cube
    inside the window.
    """
    if not hist_a or not hist_b:
        raise InsufficientHistoryError("empty pose history")
    t_end = max(hist_a[-1][0], hist_b[-1][0])
    t_start = t_end - window
    in_a = [s for s in hist_a if s[0] >= t_start]
    in_b = [s for s in hist_b if s[0] >= t_start]
    if len(in_a) < 2 or len(in_b) < 2:
        raise InsufficientHistoryError(
            f"need >=2 samples per cube in window, got {len(in_a)} and {len(in_b)}"
        )

    def hold(hist: PoseHistory, t: float) -> Optional[Vec3]:
        pos = None
        for ts, p in hist:
            if ts <= t:
                pos = p
            else:
                break
        return pos

    times = sorted({s[0] for s in in_a} | {s[0] for s in in_b})
    points: List[Tuple[float, float]] = []
    for t in times:
        pa = hold(hist_a, t)
        pb = hold(hist_b, t)
        if pa is None or pb is None:
            continue
        points.append((t, _norm(_sub(pa, pb))))
    if len(points) < 2:
        raise InsufficientHistoryError("fewer than two aligned distance points in window")
    mean_t = sum(p[0] for p in points) / len(points)
    mean_d = sum(p[1] for p in points) / len(points)
    denom = sum((p[0] - mean_t) ** 2 for p in points)
    if denom == 0.0:
        raise InsufficientHistoryError("all samples share one timestamp")
    slope = sum((p[0] - mean_t) * (p[1] - mean_d) for p in points) / denom
    return -slope
