"""Command-line entry point: argument handling, replay mode, exit codes."""

from __future__ import annotations

import json
from pathlib import Path

from boardengine.cli import build_parser, main

from tests.harness import FIXTURES_DIR


def write_script(tmp_path, steps=None) -> Path:
    doc = {
        "formatVersion": 1,
        "workspace": "ws_c",
        "seed": 5,
        "steps": steps
        if steps is not None
        else [
            {"action": "join", "client": "amy", "user": "Amy"},
            {
                "action": "send",
                "client": "amy",
                "message": {
                    "type": "submitMutation",
                    "proto": 1,
                    "clientSeq": 1,
                    "mutation": {
                        "kind": "CreateNote",
                        "actor": "Amy",
                        "payload": {"text": "hello", "x": 0.0, "y": 0.0},
                    },
                },
            },
        ],
    }
    path = tmp_path / "session.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


class TestParser:
    def test_defaults(self):
        """Defaults: port 8787, ./data, info logging, no fixtures or replay."""
        args = build_parser().parse_args([])
        assert args.port == 8787
        assert args.data_dir == Path("data")
        assert args.log_level == "info"
        assert args.mock_fixtures is None
        assert args.replay is None

    def test_flags_parse(self):
        """Every documented flag is accepted and typed."""
        args = build_parser().parse_args(
            [
                "--port", "9000",
                "--data-dir", "/tmp/d",
                "--mock-fixtures", "/tmp/f",
                "--hint-interval-ms", "5000",
                "--replay", "/tmp/s.json",
                "--log-level", "debug",
            ]
        )
        assert args.port == 9000
        assert args.data_dir == Path("/tmp/d")
        assert args.mock_fixtures == Path("/tmp/f")
        assert args.hint_interval_ms == 5000
        assert args.replay == Path("/tmp/s.json")
        assert args.log_level == "debug"


class TestReplayMode:
    def test_prints_report_and_exits_zero(self, tmp_path, capsys):
        """A clean replay prints the canonical report document and returns 0."""
        script = write_script(tmp_path)
        code = main(["--replay", str(script), "--mock-fixtures", str(FIXTURES_DIR)])
        assert code == 0
        out = capsys.readouterr().out.strip()
        doc = json.loads(out)
        assert doc["workspace"] == "ws_c"
        assert doc["revision"] == 1
        assert "digest" in doc

    def test_replay_is_deterministic_at_the_cli(self, tmp_path, capsys):
        """Two CLI invocations of the same script print identical bytes."""
        script = write_script(tmp_path)
        main(["--replay", str(script), "--mock-fixtures", str(FIXTURES_DIR)])
        first = capsys.readouterr().out
        main(["--replay", str(script), "--mock-fixtures", str(FIXTURES_DIR)])
        second = capsys.readouterr().out
        assert first == second

    def test_replay_requires_fixtures(self, tmp_path, capsys):
        """Replay without a fixtures directory is refused with exit code 2."""
        script = write_script(tmp_path)
        assert main(["--replay", str(script)]) == 2
        assert "--mock-fixtures" in capsys.readouterr().err

    def test_missing_script_is_a_config_error(self, tmp_path, capsys):
        """A nonexistent script path exits 2 with a readable message."""
        code = main(
            ["--replay", str(tmp_path / "nope.json"), "--mock-fixtures", str(FIXTURES_DIR)]
        )
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_bad_step_is_a_config_error(self, tmp_path, capsys):
        """A script with an invalid step exits 2, not with a traceback."""
        script = write_script(tmp_path, steps=[{"action": "dance", "client": "amy"}])
        code = main(["--replay", str(script), "--mock-fixtures", str(FIXTURES_DIR)])
        assert code == 2


class TestServeMode:
    def test_bad_fixture_dir_is_a_config_error(self, tmp_path, capsys):
        """Serving with a missing fixture directory exits 2 before binding."""
        code = main(["--mock-fixtures", str(tmp_path / "nope")])
        assert code == 2
        assert "fixtures" in capsys.readouterr().err
