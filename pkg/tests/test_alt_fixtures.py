"""The demographic and weather configurations drive full sessions: same
engine, different dataset and rulebook fixtures."""

import math

from cubedeck.model import Pose, PoseSample, quat_from_axis_angle
from cubedeck.rulebook import builtin_rulebook
from cubedeck.scenarios import EDGE, REST_Z
from cubedeck.session import Session, SessionLayout
from cubedeck.trace import resolve_dataset

DT = 1.0 / 30.0


def bind_at_slot(session, cube, region_id, t0=0.0):
    region = next(r for r in session.dataset.regions if r.region_id == region_id)
    x, y = session.layout.slot_center(region)
    t = t0
    for _ in range(20):
        report = session.step(PoseSample(t, cube, Pose((x, y, REST_Z))))
        if report.binding_deltas:
            return t, (x, y)
        t += DT
    raise AssertionError("binding failed")


def park(session, cube, start, target):
    t = session.prev_t
    for k in range(1, 13):
        f = k / 12
        x = start[0] + (target[0] - start[0]) * f
        y = start[1] + (target[1] - start[1]) * f
        session.step(PoseSample(t + k * DT, cube, Pose((x, y, REST_Z))))
    session.step(PoseSample(t + 13 * DT, cube, Pose((target[0], target[1], REST_Z))))


class TestDemographicScenario:
    def test_neighboring_three_zones_makes_small_multiples(self):
        session = Session(
            resolve_dataset("demographic"),
            builtin_rulebook("demographic"),
            SessionLayout(),
            dataset_name="demographic",
        )
        targets = {"A": (0.55, 0.2), "B": (0.55 + EDGE, 0.2), "C": (0.55 + 2 * EDGE, 0.2)}
        for cube, region in (("A", "DTN"), ("B", "URB"), ("C", "RUR")):
            _, slot = bind_at_slot(session, cube, region, session.prev_t + DT if cube != "A" else 0.0)
            park(session, cube, slot, targets[cube])
        session.flush(session.prev_t + 1.0)
        charts = session.compose_charts()
        grp = charts["grp:A+B+C"]
        assert [s.region_id for s in grp.series] == ["DTN", "URB", "RUR"]
        assert session.combined_groups["A+B+C"] == "small_multiples"


class TestWeatherScenario:
    def test_rotating_switches_chart_forms(self):
        session = Session(
            resolve_dataset("weather"),
            builtin_rulebook("weather"),
            SessionLayout(),
            dataset_name="weather",
        )
        _, slot = bind_at_slot(session, "A", "CTL")
        park(session, "A", slot, (0.55, 0.2))
        assert session.view.vis_type == "bar"
        t = session.prev_t
        for i in range(1, 13):
            q = quat_from_axis_angle((1.0, 0.0, 0.0), math.radians(95 * i / 12))
            report = session.step(PoseSample(t + i * DT, "A", Pose((0.55, 0.2, REST_Z), q)))
        assert session.view.vis_type == "line"
        chart = session.compose_charts()["anchored"]
        assert chart.vis_type == "line"
        assert len(chart.bins) == 7  # one bin per day of the week
