import os

import pytest

from cubedeck.cli import main
from cubedeck.errors import TraceFormatError
from cubedeck.scenarios import SCENARIOS, generate
from cubedeck.trace import TRACE_HEADER, parse_trace, replay_trace


class TestTraceFormat:
    def test_round_trip(self):
        trace = generate("shake_reset", 3)
        assert parse_trace(trace.to_text()) == trace

    def test_missing_header_rejected(self):
        with pytest.raises(TraceFormatError):
            parse_trace("pose t=0.0 cube=A p=0,0,0 q=1,0,0,0\n")

    def test_time_regression_carries_line_number(self):
        text = "\n".join(
            [
                TRACE_HEADER,
                "pose t=1.0 cube=A p=0.0,0.0,0.0165 q=1.0,0.0,0.0,0.0",
                "pose t=0.5 cube=A p=0.0,0.0,0.0165 q=1.0,0.0,0.0,0.0",
            ]
        )
        with pytest.raises(TraceFormatError) as err:
            parse_trace(text)
        assert err.value.line == 3

    def test_malformed_sample_carries_line_number(self):
        text = "\n".join([TRACE_HEADER, "pose t=zero cube=A p=0,0,0 q=1,0,0,0"])
        with pytest.raises(TraceFormatError) as err:
            parse_trace(text)
        assert err.value.line == 2

    def test_param_overrides_applied(self):
        text = "\n".join(
            [
                TRACE_HEADER,
                "#! param recognizer tap_max_duration 0.25",
                "#! param spatial contact_gap_max 0.01",
            ]
        )
        trace = parse_trace(text)
        from cubedeck.trace import session_for_trace

        session = session_for_trace(trace)
        assert session.rparams.tap_max_duration == 0.25
        assert session.sparams.contact_gap_max == 0.01

    def test_empty_body_replay_is_fresh_session(self):
        trace = parse_trace(TRACE_HEADER + "\n")
        result = replay_trace(trace)
        assert result.log_lines == []
        from cubedeck.session import Session, SessionLayout
        from cubedeck.rulebook import default_rulebook
        from cubedeck.trace import resolve_dataset

        fresh = Session(
            resolve_dataset("health"), default_rulebook(), SessionLayout(), dataset_name="health"
        )
        fresh.flush(0.0)
        assert result.snapshot == fresh.snapshot()


class TestGenerate:
    def test_same_seed_byte_identical(self):
        assert generate("shake_reset", 7).to_text() == generate("shake_reset", 7).to_text()

    def test_all_scenarios_generate_and_replay(self):
        for name in SCENARIOS:
            trace = generate(name, 1)
            assert len(trace.samples) > 0
            replay_trace(trace)

    def test_unknown_scenario_raises(self):
        with pytest.raises(KeyError):
            generate("moonwalk", 0)


class TestCli:
    def test_generate_then_replay(self, tmp_path, capsys):
        trace_path = tmp_path / "t.trace"
        snap_path = tmp_path / "t.snapshot"
        assert main(["generate", "shake_reset", "--seed", "7", "--out", str(trace_path)]) == 0
        assert main(["replay", str(trace_path), "--snapshot-out", str(snap_path)]) == 0
        out = capsys.readouterr().out
        assert "command kind=reset target=A" in out
        assert snap_path.read_text().startswith("#! cubedeck-snapshot v1")

    def test_replay_missing_trace_exits_3(self, capsys):
        with pytest.raises(SystemExit) as err:
            main(["replay", "/nonexistent/x.trace"])
        assert err.value.code == 3

    def test_replay_malformed_trace_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.trace"
        bad.write_text(TRACE_HEADER + "\npose t=1.0 cube=A p=0,0\n")
        with pytest.raises(SystemExit) as err:
            main(["replay", str(bad)])
        assert err.value.code == 2

    def test_replay_unknown_dataset_exits_3(self, tmp_path, capsys):
        path = tmp_path / "t.trace"
        path.write_text(TRACE_HEADER + "\n#! dataset nosuch\n")
        with pytest.raises(SystemExit) as err:
            main(["replay", str(path)])
        assert err.value.code == 3

    def test_unknown_scenario_exits_2(self, capsys):
        assert main(["generate", "moonwalk"]) == 2

    def test_verify_against_own_snapshot(self, tmp_path, capsys):
        trace_path = tmp_path / "t.trace"
        snap_path = tmp_path / "t.snapshot"
        main(["generate", "cover_hide", "--out", str(trace_path)])
        main(["replay", str(trace_path), "--snapshot-out", str(snap_path)])
        capsys.readouterr()
        assert main(["verify", str(trace_path), str(snap_path)]) == 0
        assert "verify: OK" in capsys.readouterr().out

    def test_verify_detects_divergence(self, tmp_path, capsys):
        trace_path = tmp_path / "t.trace"
        snap_path = tmp_path / "t.snapshot"
        main(["generate", "cover_hide", "--out", str(trace_path)])
        main(["replay", str(trace_path), "--snapshot-out", str(snap_path)])
        mutated = snap_path.read_text().replace("color=0", "color=5")
        snap_path.write_text(mutated)
        capsys.readouterr()
        assert main(["verify", str(trace_path), str(snap_path)]) == 1
        assert "color=5" in capsys.readouterr().out

    def test_verify_missing_golden_exits_3(self, tmp_path, capsys):
        trace_path = tmp_path / "t.trace"
        main(["generate", "cover_hide", "--out", str(trace_path)])
        assert main(["verify", str(trace_path), str(tmp_path / "none.snapshot")]) == 3

    def test_print_defaults(self, capsys):
        assert main(["print-defaults"]) == 0
        out = capsys.readouterr().out
        assert "recognizer tap_max_duration=0.3" in out
        assert "spatial edge_length=0.033" in out
        assert "tap -> recolor" in out

    def test_custom_rulebook_from_catalog_dir(self, tmp_path, capsys):
        rules = tmp_path / "mine.rules"
        rules.write_text(
            "#! cubedeck-rulebook v1\nname mine\ntap -> hide\n"
        )
        trace_path = tmp_path / "t.trace"
        main(["generate", "shake_reset", "--out", str(trace_path)])
        capsys.readouterr()
        assert (
            main(
                [
                    "replay",
                    str(trace_path),
                    "--rulebook",
                    "mine",
                    "--catalog-dir",
                    str(tmp_path),
                    "--snapshot-out",
                    str(tmp_path / "s.snapshot"),
                ]
            )
            == 0
        )
        out = capsys.readouterr().out
        assert "command kind=reset" not in out  # shake unmapped in this book
