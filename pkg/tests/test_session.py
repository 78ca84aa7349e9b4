import random

import pytest

from cubedeck.datacube import Region
from cubedeck.errors import LayoutError
from cubedeck.model import (
    CommandKind,
    Face,
    HandSample,
    HandShape,
    Pose,
    PoseSample,
    TouchPhase,
    TouchSample,
    VisualizationCommand,
)
from cubedeck.rulebook import default_rulebook, extended_rulebook
from cubedeck.scenarios import EDGE, REST_Z, _Script, _slot_center
from cubedeck.session import PALETTE, Rect, Session, SessionLayout
from cubedeck.trace import resolve_dataset

DT = 1.0 / 30.0


def make_session(rulebook=None, dataset="health"):
    return Session(resolve_dataset(dataset), rulebook or default_rulebook(), dataset_name=dataset)


def run(session, samples):
    return [session.step(s) for s in samples]


def bind_cube(session, cube, region_id, t0=None):
    """Rest the cube on its slot until the binding forms; returns end time."""
    x, y = _slot_center(region_id)
    t = session.prev_t + DT if t0 is None else t0
    if t == -float("inf") + DT or t < 0:
        t = 0.0
    for k in range(20):
        report = session.step(PoseSample(t, cube, Pose((x, y, REST_Z))))
        if any(d.op == "bound" for d in report.binding_deltas):
            return t
        t += DT
    raise AssertionError(f"cube {cube} failed to bind")


def slide(session, cube, start, end, t, duration=0.4):
    steps = max(1, round(duration / DT))
    for k in range(1, steps + 1):
        f = k / steps
        x = start[0] + (end[0] - start[0]) * f
        y = start[1] + (end[1] - start[1]) * f
        session.step(PoseSample(t + k * DT, cube, Pose((x, y, REST_Z))))
    return t + steps * DT


def to_interaction(session, cube, region_id, target):
    t = slide(session, cube, _slot_center(region_id), target, session.prev_t)
    session.step(PoseSample(t + DT, cube, Pose((target[0], target[1], REST_Z))))
    session.step(PoseSample(t + 2 * DT, cube, Pose((target[0], target[1], REST_Z))))
    return t + 2 * DT


class TestNewSession:
    def test_default_fixture_has_nine_slots(self):
        session = make_session()
        assert len(session.dataset.regions) == 9
        assert session.slot_owner == {}
        assert session.compose_charts() == {}

    def test_three_region_dataset_has_three_slots(self):
        session = make_session(dataset="demographic")
        assert len(session.dataset.regions) == 3

    def test_overlapping_regions_rejected(self):
        layout = SessionLayout(
            map_region=Rect(0, 0, 0.5, 0.5), interaction_region=Rect(0.4, 0, 0.9, 0.5)
        )
        with pytest.raises(LayoutError):
            Session(resolve_dataset("health"), default_rulebook(), layout)

    def test_empty_region_rejected(self):
        layout = SessionLayout(map_region=Rect(0.2, 0.2, 0.2, 0.2))
        with pytest.raises(LayoutError):
            Session(resolve_dataset("health"), default_rulebook(), layout)


class TestBinding:
    def test_dwell_produces_binding(self):
        session = make_session()
        t = bind_cube(session, "A", "CHN", t0=0.0)
        assert t == pytest.approx(0.5, abs=DT)
        binding = session.bindings["A"]
        assert binding.region_id == "CHN"
        assert binding.color == 0

    def test_second_cube_gets_next_color(self):
        session = make_session()
        bind_cube(session, "A", "CHN", t0=0.0)
        bind_cube(session, "B", "JPN")
        assert session.bindings["B"].color == 1
        assert PALETTE[1] == "purple"

    def test_hovering_cube_does_not_bind(self):
        session = make_session()
        x, y = _slot_center("CHN")
        for k in range(25):
            report = session.step(PoseSample(k * DT, "A", Pose((x, y, 0.05))))
            assert not report.binding_deltas

    def test_occupied_slot_refuses_second_cube(self):
        session = make_session()
        bind_cube(session, "A", "CHN", t0=0.0)
        x, y = _slot_center("CHN")
        t = session.prev_t
        for k in range(25):
            t += DT
            report = session.step(PoseSample(t, "B", Pose((x + 0.004, y, REST_Z))))
            assert not report.binding_deltas

    def test_interrupted_dwell_restarts(self):
        session = make_session()
        x, y = _slot_center("CHN")
        for k in range(8):
            session.step(PoseSample(k * DT, "A", Pose((x, y, REST_Z))))
        session.step(PoseSample(9 * DT, "A", Pose((x + 0.05, y, REST_Z))))  # slide away
        report = session.step(PoseSample(0.5, "A", Pose((x + 0.05, y, REST_Z))))
        assert not report.binding_deltas


class TestChartLifecycle:
    def test_lift_creates_dynamic_chart(self):
        session = make_session()
        bind_cube(session, "A", "CHN", t0=0.0)
        x, y = _slot_center("CHN")
        t = session.prev_t
        created = []
        for k in range(1, 12):
            report = session.step(PoseSample(t + k * DT, "A", Pose((x, y, REST_Z + 0.04 * k / 11))))
            created += [d for d in report.chart_deltas if d.op == "created"]
        assert any(d.chart_id == "dyn:A" for d in created)

    def test_return_to_interaction_region_refreshes_anchored(self):
        session = make_session()
        bind_cube(session, "A", "CHN", t0=0.0)
        to_interaction(session, "A", "CHN", (0.55, 0.2))
        charts = session.compose_charts()
        assert "anchored" in charts
        series = charts["anchored"].series
        assert [s.region_id for s in series] == ["CHN"]
        row = resolve_dataset("health").values[7]  # CHN row
        assert series[0].values == row

    def test_tap_on_map_slot_is_gated(self):
        session = make_session()
        bind_cube(session, "A", "CHN", t0=0.0)
        t = session.prev_t
        session.step(TouchSample(t + DT, "A", "c", Face.PZ, (0.5, 0.5), 0.3, TouchPhase.DOWN))
        report = session.step(
            TouchSample(t + DT + 0.1, "A", "c", Face.PZ, (0.5, 0.5), 0.0, TouchPhase.UP)
        )
        flush_report = session.flush(t + 2.0)
        assert not report.commands and not flush_report.commands

    def test_tap_in_interaction_region_recolors(self):
        session = make_session()
        bind_cube(session, "A", "CHN", t0=0.0)
        t = to_interaction(session, "A", "CHN", (0.55, 0.2))
        session.step(TouchSample(t + DT, "A", "c", Face.PZ, (0.5, 0.5), 0.3, TouchPhase.DOWN))
        session.step(TouchSample(t + DT + 0.1, "A", "c", Face.PZ, (0.5, 0.5), 0.0, TouchPhase.UP))
        report = session.flush(t + 1.0)
        assert [c.kind for c in report.commands] == [CommandKind.RECOLOR]
        assert session.series["A"].color == 1


class TestApplyCommand:
    def test_recolor_cycles_palette(self):
        session = make_session()
        bind_cube(session, "A", "CHN", t0=0.0)
        assert session.series["A"].color == 0
        session.apply_command(VisualizationCommand.make(CommandKind.RECOLOR, "A"))
        assert session.series["A"].color == 1  # yellow -> purple
        for _ in range(7):
            session.apply_command(VisualizationCommand.make(CommandKind.RECOLOR, "A"))
        assert session.series["A"].color == 0  # full cycle

    def test_hide_one_of_two_combined_series(self):
        session = make_session()
        bind_cube(session, "A", "CHN", t0=0.0)
        to_interaction(session, "A", "CHN", (0.55, 0.2))
        bind_cube(session, "B", "JPN")
        to_interaction(session, "B", "JPN", (0.55 + EDGE, 0.2))
        assert "grp:A+B" in session.compose_charts()
        session.apply_command(VisualizationCommand.make(CommandKind.HIDE, "A"))
        session._refresh_anchored()
        charts = session.compose_charts()
        flags = {s.region_id: s.hidden for s in charts["grp:A+B"].series}
        assert flags == {"CHN": True, "JPN": False}

    def test_reset_frees_slot_and_series(self):
        session = make_session()
        bind_cube(session, "A", "CHN", t0=0.0)
        to_interaction(session, "A", "CHN", (0.55, 0.2))
        deltas, notes = session.apply_command(VisualizationCommand.make(CommandKind.RESET, "A"))
        assert [d.op for d in deltas] == ["unbound"]
        assert "A" not in session.bindings
        assert "CHN" not in session.slot_owner
        assert session.compose_charts() == {}
        # A new cube can take the slot again.
        bind_cube(session, "B", "CHN")
        assert session.bindings["B"].region_id == "CHN"

    def test_stale_target_drops_with_note(self):
        session = make_session()
        deltas, notes = session.apply_command(VisualizationCommand.make(CommandKind.RECOLOR, "ghost"))
        assert deltas == []
        assert len(notes) == 1 and "ghost" in notes[0]

    def test_rescale_and_window(self):
        session = make_session()
        bind_cube(session, "A", "CHN", t0=0.0)
        to_interaction(session, "A", "CHN", (0.55, 0.2))
        session.apply_command(
            VisualizationCommand.make(CommandKind.RESCALE, "A", granularity=30)
        )
        session._refresh_anchored()
        chart = session.compose_charts()["anchored"]
        assert len(chart.bins) == 1
        row = resolve_dataset("health").values[7]
        assert chart.series[0].values[0] == pytest.approx(sum(row))

    def test_refinement_request_dropped_with_note(self):
        session = make_session()
        bind_cube(session, "A", "CHN", t0=0.0)
        _, notes = session.apply_command(
            VisualizationCommand.make(CommandKind.RESCALE, "A", granularity=5)
        )
        assert notes and "rescale" in notes[0]

    def test_adjust_range_narrows_time_window(self):
        session = make_session()
        bind_cube(session, "A", "CHN", t0=0.0)
        to_interaction(session, "A", "CHN", (0.55, 0.2))
        session.apply_command(
            VisualizationCommand.make(CommandKind.ADJUST_RANGE, "A", axis="time", direction=1)
        )
        session._refresh_anchored()
        chart = session.compose_charts()["anchored"]
        assert [b.label for b in chart.bins] == ["2000-2010", "2010-2020"]

    def test_flatten_time(self):
        session = make_session()
        bind_cube(session, "A", "CHN", t0=0.0)
        to_interaction(session, "A", "CHN", (0.55, 0.2))
        session.apply_command(VisualizationCommand.make(CommandKind.FLATTEN, "A", axis="time"))
        session._refresh_anchored()
        chart = session.compose_charts()["anchored"]
        assert len(chart.bins) == 1

    def test_switch_vis_type_cycles(self):
        session = make_session()
        bind_cube(session, "A", "CHN", t0=0.0)
        session.apply_command(
            VisualizationCommand.make(CommandKind.SWITCH_VIS_TYPE, "A", vis="cycle")
        )
        assert session.view.vis_type == "line"
        session.apply_command(
            VisualizationCommand.make(CommandKind.SWITCH_VIS_TYPE, "A", vis="cycle")
        )
        assert session.view.vis_type == "pictogram"


class TestSnapshot:
    def test_fresh_sessions_identical(self):
        assert make_session().snapshot() == make_session().snapshot()

    def test_replay_reproduces_snapshot(self):
        def drive(session):
            bind_cube(session, "A", "CHN", t0=0.0)
            to_interaction(session, "A", "CHN", (0.55, 0.2))
            session.flush(session.prev_t + 1.0)
            return session.snapshot()

        assert drive(make_session()) == drive(make_session())

    def test_snapshot_differs_after_binding(self):
        s1 = make_session()
        before = s1.snapshot()
        bind_cube(s1, "A", "CHN", t0=0.0)
        assert s1.snapshot() != before


class TestSessionInvariants:
    def test_hide_show_identity_via_cover(self):
        session = make_session()
        bind_cube(session, "A", "CHN", t0=0.0)
        t = to_interaction(session, "A", "CHN", (0.55, 0.2))
        before = {cid: spec.to_line() for cid, spec in session.compose_charts().items()}
        session.step(HandSample(t + DT, "h", (0.55, 0.2, EDGE + 0.02), HandShape.OPEN))
        covered = {cid: spec.to_line() for cid, spec in session.compose_charts().items()}
        assert covered != before
        session.step(HandSample(t + 0.3, "h", (0.85, 0.2, EDGE + 0.02), HandShape.OPEN))
        after = {cid: spec.to_line() for cid, spec in session.compose_charts().items()}
        assert after == before

    def test_reset_round_trip_restores_slot_and_charts(self):
        rng = random.Random(7)
        per_cube = [CommandKind.RECOLOR, CommandKind.HIDE, CommandKind.SHOW]
        for trial in range(20):
            session = make_session()
            pre_bind_charts = {c: s.to_line() for c, s in session.compose_charts().items()}
            assert "CHN" not in session.slot_owner
            bind_cube(session, "A", "CHN", t0=0.0)
            to_interaction(session, "A", "CHN", (0.55, 0.2))
            for _ in range(rng.randint(0, 8)):
                kind = rng.choice(per_cube)
                session.apply_command(VisualizationCommand.make(kind, "A"))
            session._refresh_anchored()
            session._recompose()
            session.apply_command(VisualizationCommand.make(CommandKind.RESET, "A"))
            session._recompose()
            assert "CHN" not in session.slot_owner
            assert {c: s.to_line() for c, s in session.compose_charts().items()} == pre_bind_charts

    def test_combine_consistency_member_series_order(self):
        session = make_session()
        bind_cube(session, "A", "CHN", t0=0.0)
        to_interaction(session, "A", "CHN", (0.55, 0.2))
        bind_cube(session, "B", "JPN")
        to_interaction(session, "B", "JPN", (0.55 + EDGE, 0.2))
        charts = session.compose_charts()
        grp = charts["grp:A+B"]
        bound_regions = [session.bindings[m].region_id for m in ("A", "B")]
        assert [s.region_id for s in grp.series] == bound_regions

    def test_dynamic_anchored_coherence_after_putdown(self):
        session = make_session()
        bind_cube(session, "A", "CHN", t0=0.0)
        t = to_interaction(session, "A", "CHN", (0.55, 0.2))
        # Lift, recolor mid-air, then put down in the interaction region.
        for k in range(1, 12):
            session.step(PoseSample(t + k * DT, "A", Pose((0.55, 0.2, REST_Z + 0.05 * k / 11))))
        session.apply_command(VisualizationCommand.make(CommandKind.RECOLOR, "A"))
        session._recompose()
        dyn = session.compose_charts()["dyn:A"]
        anchored_mid_air = session.compose_charts()["anchored"]
        assert anchored_mid_air.series[0].color == 0  # frozen while lifted
        t = t + 12 * DT
        for k in range(1, 12):
            session.step(
                PoseSample(t + k * DT, "A", Pose((0.55, 0.2, REST_Z + 0.05 * (11 - k) / 11)))
            )
        anchored = session.compose_charts()["anchored"]
        assert anchored.series[0].values == dyn.series[0].values
        assert anchored.series[0].color == 1  # refresh on return

    def test_random_command_storm_never_corrupts_charts(self):
        rng = random.Random(11)
        session = make_session(rulebook=extended_rulebook())
        bind_cube(session, "A", "CHN", t0=0.0)
        to_interaction(session, "A", "CHN", (0.55, 0.2))
        bind_cube(session, "B", "JPN")
        to_interaction(session, "B", "JPN", (0.55 + EDGE, 0.2))
        pool = [
            VisualizationCommand.make(CommandKind.RECOLOR, "A"),
            VisualizationCommand.make(CommandKind.HIDE, "A"),
            VisualizationCommand.make(CommandKind.SHOW, "A"),
            VisualizationCommand.make(CommandKind.FLATTEN, "A", axis="time"),
            VisualizationCommand.make(CommandKind.ADJUST_RANGE, "A", axis="time", direction=1),
            VisualizationCommand.make(CommandKind.ADJUST_RANGE, "A", axis="time", direction=-1),
            VisualizationCommand.make(CommandKind.ZOOM, "A", factor=2.0),
            VisualizationCommand.make(CommandKind.ZOOM, "A", factor=0.5),
            VisualizationCommand.make(CommandKind.SORT, "A", key="value_desc"),
            VisualizationCommand.make(CommandKind.CHOP, "A", axis="time", parts=2),
            VisualizationCommand.make(CommandKind.OVERVIEW, "A"),
            VisualizationCommand.make(CommandKind.DETAIL, "A"),
            VisualizationCommand.make(CommandKind.IDENTIFY_EXTREMES, "A"),
            VisualizationCommand.make(CommandKind.ADD, "A"),
            VisualizationCommand.make(CommandKind.SUBTRACT, "A"),
            VisualizationCommand.make(CommandKind.RESCALE, "A", granularity=30),
            VisualizationCommand.make(CommandKind.RECOLOR, "ghost"),
        ]
        for _ in range(200):
            session.apply_command(rng.choice(pool))
            session._refresh_anchored()
            charts = session.compose_charts()
            for spec in charts.values():
                assert spec.structure in ("neighbored", "stacked")
                visible = [v for s in spec.series if not s.hidden for v in s.values]
                if visible:
                    assert spec.value_extent[1] == max(visible)
                assert spec.value_extent[0] == 0.0
                for s in spec.series:
                    assert len(s.values) == len(spec.bins)
