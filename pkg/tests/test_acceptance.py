"""Acceptance suite: one test per acceptance criterion, each printing a
pass/fail line with its runtime against the stated budget.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines as they complete.
"""

import os
import random
import time
from collections import Counter

import pytest

from cubedeck.datacube import TimeBin, arith, chop, flatten, full_slice, rescale
from cubedeck.errors import RulebookError
from cubedeck.model import (
    Face,
    HandSample,
    HandShape,
    Pose,
    PoseSample,
    TouchPhase,
    TouchSample,
    VisualizationCommand,
    CommandKind,
)
from cubedeck.rulebook import (
    RULEBOOK_HEADER,
    default_rulebook,
    extended_rulebook,
    parse_rulebook,
    validate,
)
from cubedeck.scenarios import EDGE, REST_Z, generate, _slot_center
from cubedeck.session import Session, SessionLayout
from cubedeck.spatial import SpatialParams, build_contact_graph, classify_components, contact_relation
from cubedeck.trace import TraceFile, TraceHeader, parse_trace, replay_trace, resolve_dataset

from test_datacube import random_slice, tiny_cube
from test_spatial import make_scene

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "goldens")
DT = 1.0 / 30.0


class _Budget:
    def __init__(self, name: str, seconds: float):
        self.name = name
        self.seconds = seconds

    def __enter__(self):
        self.start = time.monotonic()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.monotonic() - self.start
        status = "PASS" if exc_type is None and elapsed < self.seconds else "FAIL"
        print(f"ACCEPTANCE {self.name}: {status} ({elapsed:.2f}s, budget {self.seconds:.0f}s)")
        if exc_type is None:
            assert elapsed < self.seconds, f"{self.name} exceeded budget: {elapsed:.2f}s"


GESTURE_ROWS = {
    "tap", "double_tap", "triple_tap", "press", "hold",
    "pinch", "swipe", "path", "hover_open", "cover",
}
MANIPULATION_ROWS = {
    "pick_up", "rotate", "translate", "shake",
    "neighbored", "stacked", "assembled", "collide",
}


def test_vocabulary_coverage():
    """Replaying gesture_corpus yields exactly one event per vocabulary row."""
    with _Budget("vocabulary-coverage", 5.0):
        trace = generate("gesture_corpus", 0)
        result = replay_trace(trace)
        counts = Counter()
        for line in result.log_lines:
            if line.startswith("event "):
                counts[line.split(" ")[2].split("=")[1]] += 1
        expected = {row: 1 for row in GESTURE_ROWS | MANIPULATION_ROWS}
        assert dict(counts) == expected, f"corpus event counts diverge: {dict(counts)}"
        assert len(GESTURE_ROWS) == 10 and len(MANIPULATION_ROWS) == 8


def test_spatial_oracle():
    """1000 seeded scenes: graph equals pairwise re-check; components
    partition the nodes on every scene."""
    with _Budget("spatial-oracle", 10.0):
        params = SpatialParams()
        rng = random.Random(513513)
        for _ in range(1000):
            cubes = make_scene(rng)
            graph = build_contact_graph(cubes, params)
            recheck = set()
            for i in range(len(cubes)):
                for j in range(i + 1, len(cubes)):
                    rel = contact_relation(cubes[i], cubes[j], params)
                    if rel is not None:
                        recheck.add((rel.a, rel.b, rel.kind, rel.below))
            assert {(e.a, e.b, e.kind, e.below) for e in graph.edges} == recheck
            summary = classify_components(graph, cubes, params)
            members = [m for comp in summary.components for m in comp.member_ids]
            assert sorted(members) == sorted(c.cube_id for c in cubes)
            assert len(members) == len(set(members))


def test_scenario_goldens():
    """The five interaction scenarios replay to byte-identical snapshots
    exhibiting the promised structures."""
    with _Budget("scenario-goldens", 5.0):
        results = {}
        for name in ("bind_two_neighbor", "stack_two", "cover_hide", "shake_reset", "assemble_2x2x2"):
            result = replay_trace(generate(name, 0))
            with open(os.path.join(GOLDEN_DIR, f"{name}.snapshot")) as fh:
                assert result.snapshot == fh.read(), f"{name} diverged from golden"
            results[name] = result

        snap = results["bind_two_neighbor"].snapshot
        anchored = next(l for l in snap.splitlines() if l.startswith("chart id=anchored"))
        assert "structure=neighbored" in anchored and "CHN:" in anchored and "JPN:" in anchored

        snap = results["stack_two"].snapshot
        anchored = next(l for l in snap.splitlines() if l.startswith("chart id=anchored"))
        assert "structure=stacked" in anchored

        log = results["cover_hide"].log_lines
        assert any("CHN:0:true" in l for l in log)
        snap = results["cover_hide"].snapshot
        assert "CHN:0:false" in next(
            l for l in snap.splitlines() if l.startswith("chart id=anchored")
        )

        snap = results["shake_reset"].snapshot
        assert not any(l.startswith("binding ") for l in snap.splitlines())

        snap = results["assemble_2x2x2"].snapshot
        comps = [l for l in snap.splitlines() if l.startswith("component ")]
        assert len(comps) == 1 and "kind=assembly" in comps[0]
        assert comps[0].count(",") >= 7  # eight members


def test_data_algebra():
    """Conservation, partition, inverse, and rescale checks over 200
    randomized slices each, at 1e-9 relative tolerance."""
    with _Budget("data-algebra", 5.0):
        rng = random.Random(321321)
        for _ in range(200):
            s = random_slice(rng)
            for axis in ("time", "space"):
                assert flatten(s, axis, "sum").total() == pytest.approx(
                    s.total(), rel=1e-9, abs=1e-9
                )
            axis = rng.choice(("time", "space"))
            extent = len(s.bins) if axis == "time" else len(s.regions)
            parts = chop(s, axis, rng.randint(1, extent))
            if axis == "time":
                for ri in range(len(s.regions)):
                    assert tuple(v for p in parts for v in p.values[ri]) == s.values[ri]
            else:
                assert tuple(v for p in parts for v in p.values) == s.values
            other = full_slice(
                tiny_cube(
                    [[rng.uniform(-500, 500) for _ in s.bins] for _ in s.regions],
                    bins=s.bins,
                    ids=[f"O{i}" for i in range(len(s.regions))],
                )
            )
            back = arith(arith(s, other, "subtract"), other, "add")
            for ra, rb in zip(s.values, back.values):
                for va, vb in zip(ra, rb):
                    assert vb == pytest.approx(va, rel=1e-9, abs=1e-9)
            k = rng.randint(2, 4)
            if len(s.bins) % k == 0:
                coarse = rescale(s, s.bins[0].span * k)
                assert coarse.total() == pytest.approx(s.total(), rel=1e-9, abs=1e-9)


def test_rulebook_discipline():
    """Shipped rulebooks are conflict-free; duplicates are caught; 10k
    fuzzed lines never crash the parser."""
    with _Budget("rulebook-discipline", 10.0):
        assert validate(default_rulebook()) == []
        assert validate(extended_rulebook()) == []
        with pytest.raises(RulebookError):
            parse_rulebook(RULEBOOK_HEADER + "\ntap -> recolor\ntap -> hide\n")
        conflicts = validate(
            parse_rulebook(RULEBOOK_HEADER + "\npinch -> rescale\npinch.surface -> zoom\n")
        )
        assert len(conflicts) == 1
        rng = random.Random(606)
        tokens = [
            "tap", "press", "pinch", "swipe", "shake", "wiggle", "->", "recolor",
            "combine", "{", "}", "mode=neighbored", "mode=x", "=", ".", "@", "edge",
            "pinch.edge", "tap@component", '"', "#", "combine{mode=auto}",
            "chop{axis=time,parts=2}", "zoom{factor=2.0}", "name", "description",
        ]
        for _ in range(10_000):
            line = " ".join(rng.choice(tokens) for _ in range(rng.randint(0, 6)))
            try:
                parse_rulebook(RULEBOOK_HEADER + "\n" + line + "\n")
            except RulebookError:
                pass


def _random_trace(seed: int) -> TraceFile:
    """A valid random trace over the health session geometry."""
    rng = random.Random(seed)
    samples = []
    t = 0.0
    cubes = [f"r{i}" for i in range(rng.randint(1, 3))]
    positions = {}
    for i, cube in enumerate(cubes):
        slot = rng.choice(("CHN", "JPN", "CAN"))
        x, y = _slot_center(slot) if rng.random() < 0.5 else (0.5 + 0.1 * i, rng.uniform(0.05, 0.35))
        positions[cube] = (x, y)
        samples.append(PoseSample(t, cube, Pose((x, y, REST_Z))))
        t += DT
    contact_n = 0
    for _ in range(rng.randint(20, 60)):
        t += rng.choice((DT, DT, 0.1))
        roll = rng.random()
        cube = rng.choice(cubes)
        x, y = positions[cube]
        if roll < 0.5:
            x += rng.uniform(-0.01, 0.01)
            y += rng.uniform(-0.01, 0.01)
            positions[cube] = (x, y)
            z = REST_Z + rng.choice((0.0, 0.0, 0.05))
            samples.append(PoseSample(t, cube, Pose((x, y, z))))
        elif roll < 0.8:
            contact_n += 1
            cid = f"c{contact_n}"
            samples.append(
                TouchSample(t, cube, cid, Face.PZ, (rng.random(), rng.random()),
                            rng.random(), TouchPhase.DOWN)
            )
            hold = rng.choice((0.05, 0.2, 0.9))
            samples.append(
                TouchSample(t + hold, cube, cid, Face.PZ, (rng.random(), rng.random()),
                            rng.random(), TouchPhase.UP)
            )
            t += hold
        else:
            samples.append(
                HandSample(t, "h", (x + rng.uniform(-0.01, 0.01), y, rng.uniform(0.03, 0.18)),
                           rng.choice((HandShape.OPEN, HandShape.FIST)))
            )
    return TraceFile(TraceHeader("health", "default"), tuple(samples))


def test_determinism_and_chunking():
    """50 traces: two replays agree byte-for-byte, and feeding the same
    samples through a session in random chunk sizes agrees too."""
    with _Budget("determinism-chunking", 20.0):
        scenario_traces = [generate(n, 0) for n in ("shake_reset", "cover_hide")]
        traces = scenario_traces + [_random_trace(seed) for seed in range(48)]
        assert len(traces) == 50
        for idx, trace in enumerate(traces):
            first = replay_trace(trace)
            second = replay_trace(trace)
            assert first.log_lines == second.log_lines, f"trace {idx} log diverged"
            assert first.snapshot == second.snapshot, f"trace {idx} snapshot diverged"

            rng = random.Random(idx)
            session = Session(
                resolve_dataset("health"), default_rulebook(), SessionLayout(),
                dataset_name="health",
            )
            log = []
            remaining = list(trace.samples)
            while remaining:
                chunk = [remaining.pop(0) for _ in range(min(len(remaining), rng.randint(1, 7)))]
                for sample in chunk:
                    log.extend(session.step(sample).lines())
            t_end = trace.samples[-1].t if trace.samples else 0.0
            log.extend(session.flush(t_end).lines())
            assert log == first.log_lines, f"trace {idx} chunked log diverged"
            assert session.snapshot() == first.snapshot, f"trace {idx} chunked snapshot diverged"


def _fresh_session():
    return Session(
        resolve_dataset("health"), default_rulebook(), SessionLayout(), dataset_name="health"
    )


def _bind(session, cube, region, t0):
    x, y = _slot_center(region)
    t = t0
    for _ in range(20):
        report = session.step(PoseSample(t, cube, Pose((x, y, REST_Z))))
        if report.binding_deltas:
            return t
        t += DT
    raise AssertionError("binding failed")


def _park(session, cube, region, target):
    x, y = _slot_center(region)
    t = session.prev_t
    for k in range(1, 13):
        f = k / 12
        session.step(
            PoseSample(t + k * DT, cube, Pose((x + (target[0] - x) * f, y + (target[1] - y) * f, REST_Z)))
        )
    t += 13 * DT
    session.step(PoseSample(t, cube, Pose((target[0], target[1], REST_Z))))
    return t


def test_hide_show_and_reset_identities():
    """Cover/uncover restores chart specs exactly; bind, mutate, reset
    restores the slot and charts; 200 randomized cases."""
    with _Budget("hide-show-reset-identities", 10.0):
        per_cube = [CommandKind.RECOLOR, CommandKind.HIDE, CommandKind.SHOW]
        for case in range(100):
            rng = random.Random(1000 + case)
            session = _fresh_session()
            _bind(session, "A", "CHN", 0.0)
            t = _park(session, "A", "CHN", (0.55, 0.2))
            has_b = rng.random() < 0.5
            if has_b:
                _bind(session, "B", "JPN", session.prev_t + DT)
                t = _park(session, "B", "JPN", (0.55 + EDGE, 0.2))
            for _ in range(rng.randint(0, 5)):
                # The covered cube starts visible (the pipeline guarantees
                # this: only a cover hides it, and covers pair with uncovers);
                # the other cube may be in any state.
                cube = rng.choice(("A", "B")) if has_b else "A"
                kind = rng.choice(per_cube if cube == "B" else [CommandKind.RECOLOR])
                session.apply_command(VisualizationCommand.make(kind, cube))
            session._refresh_anchored()
            before = {c: s.to_line() for c, s in session.compose_charts().items()}
            session.step(HandSample(t + DT, "h", (0.55, 0.2, EDGE + 0.02), HandShape.OPEN))
            session.step(HandSample(t + 0.2, "h", (0.55, 0.6, EDGE + 0.02), HandShape.OPEN))
            after = {c: s.to_line() for c, s in session.compose_charts().items()}
            assert after == before, f"hide/show case {case} did not restore"

        for case in range(100):
            rng = random.Random(5000 + case)
            session = _fresh_session()
            pre = {c: s.to_line() for c, s in session.compose_charts().items()}
            assert "CHN" not in session.slot_owner
            _bind(session, "A", "CHN", 0.0)
            _park(session, "A", "CHN", (0.55, 0.2))
            for _ in range(rng.randint(0, 6)):
                session.apply_command(
                    VisualizationCommand.make(rng.choice(per_cube), "A")
                )
            session._refresh_anchored()
            session.apply_command(VisualizationCommand.make(CommandKind.RESET, "A"))
            session._recompose()
            assert "CHN" not in session.slot_owner, f"reset case {case} left the slot taken"
            post = {c: s.to_line() for c, s in session.compose_charts().items()}
            assert post == pre, f"reset case {case} did not restore charts"
