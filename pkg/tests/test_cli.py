from __future__ import annotations

import json

import pytest

from drivewatch.cli import main
from drivewatch.model import load_model
from drivewatch.telemetry import load_session


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    sessions = root / "sessions"
    assert (
        main(["synth", "--out", str(sessions), "--nc", "2", "--pd", "2", "--duration-s", "60", "--seed", "9"])
        == 0
    )
    model = root / "model.json"
    assert main(["train", "--sessions", str(sessions), "--out", str(model), "--seed", "4"]) == 0
    return root, sessions, model


def test_synth_sessions_load(workspace):
    _, sessions, _ = workspace
    dirs = sorted(p.name for p in sessions.iterdir())
    assert dirs == ["nc01", "nc02", "pd01", "pd02"]
    record = load_session(sessions / "pd01")
    assert record.group == "pd"
    assert set(record.channels) == {"steering", "pedals", "gaze"}


def test_train_writes_loadable_model(workspace):
    _, _, model = workspace
    artifact = load_model(model)
    assert set(artifact.variants) == {"eye", "eyeless"}


def test_train_empty_dir_fails(tmp_path):
    empty = tmp_path / "none"
    empty.mkdir()
    assert main(["train", "--sessions", str(empty), "--out", str(tmp_path / "m.json")]) == 2


def test_eval_report_and_feature_dump(workspace, tmp_path):
    root, sessions, model = workspace
    report = tmp_path / "report.json"
    dump = tmp_path / "features.ndjson"
    assert (
        main(
            [
                "eval",
                "--model",
                str(model),
                "--sessions",
                str(sessions),
                "--report",
                str(report),
                "--dump-features",
                str(dump),
            ]
        )
        == 0
    )
    data = json.loads(report.read_text())
    assert data["separation_rate"] >= 0.9
    lines = dump.read_text().splitlines()
    assert len(lines) == data["n_labeled_windows"]
    first = json.loads(lines[0])
    assert first["buffer_statuses"]["steering"] == "ok"


def test_replay_deterministic_log(workspace, tmp_path):
    _, sessions, model = workspace
    logs = []
    for name in ("a.ndjson", "b.ndjson"):
        out = tmp_path / name
        assert (
            main(
                [
                    "replay",
                    "--session",
                    str(sessions / "pd01"),
                    "--model",
                    str(model),
                    "--emit",
                    str(out),
                ]
            )
            == 0
        )
        logs.append(out.read_bytes())
    assert logs[0] == logs[1]
    lines = logs[0].decode().splitlines()
    assert lines, "impaired session should alert"
    parsed = json.loads(lines[0])
    assert set(parsed) == {
        "t_ms",
        "content",
        "visual_position",
        "visual_form",
        "audio_form",
        "audio_text",
        "scenario",
        "suppressed",
        "margin",
    }


def test_replay_privacy_script(workspace, tmp_path):
    _, sessions, model = workspace
    script = tmp_path / "script.json"
    script.write_text(json.dumps([{"t_ms": 0, "on": True}]))
    out = tmp_path / "suppressed.ndjson"
    assert (
        main(
            [
                "replay",
                "--session",
                str(sessions / "pd01"),
                "--model",
                str(model),
                "--emit",
                str(out),
                "--privacy-script",
                str(script),
            ]
        )
        == 0
    )
    for line in out.read_text().splitlines():
        assert json.loads(line)["suppressed"] is True


def test_sweep_report(workspace, tmp_path):
    _, sessions, _ = workspace
    report = tmp_path / "sweep.json"
    assert (
        main(
            [
                "sweep",
                "--sessions",
                str(sessions),
                "--lengths",
                "5000,10000",
                "--report",
                str(report),
            ]
        )
        == 0
    )
    data = json.loads(report.read_text())
    assert [row["length_ms"] for row in data["lengths"]] == [5000, 10000]
    assert data["ranking"]


def test_missing_model_is_clean_error(workspace, tmp_path):
    _, sessions, _ = workspace
    rc = main(
        [
            "replay",
            "--session",
            str(sessions / "nc01"),
            "--model",
            str(tmp_path / "missing.json"),
            "--emit",
            str(tmp_path / "x.ndjson"),
        ]
    )
    assert rc == 2
