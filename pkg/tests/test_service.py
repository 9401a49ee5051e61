from __future__ import annotations

import json
import socket
import threading

import numpy as np
import pytest

from drivewatch.alerts import ScenarioTag, alert_json
from drivewatch.pipeline import PipelineConfig, replay_session, train_from_sessions
from drivewatch.service import (
    DriveWatchServer,
    WireClient,
    alert_lines_from_replies,
    stream_session_over_wire,
    wire_message,
)
from drivewatch.synth import make_corpus, make_session


@pytest.fixture(scope="module")
def artifact():
    corpus = make_corpus(n_nc=3, n_pd=2, duration_ms=90_000, seed=21)
    art, _ = train_from_sessions(corpus, rng_seed=5)
    return art


@pytest.fixture()
def server(artifact):
    srv = DriveWatchServer(host="127.0.0.1", port=0, artifact=artifact, config=PipelineConfig())
    srv.start()
    yield srv
    srv.shutdown()


def _raw_client(server) -> socket.socket:
    return socket.create_connection(("127.0.0.1", server.port))


class TestProtocol:
    def test_hello_ack_carries_schema(self, server):
        client = WireClient(port=server.port, session_id="t1")
        try:
            client.hello()
            reply = client.read_message()
            assert reply["type"] == "hello"
            assert reply["payload"]["version"] == 1
            assert reply["payload"]["schema"]["eye_included"] is True
        finally:
            client.close()

    def test_telemetry_before_hello_is_striked(self, server):
        client = WireClient(port=server.port, session_id="t2")
        try:
            client.send("telemetry", 0, {"channel": "steering", "angle_raw": 0.0})
            reply = client.read_message()
            assert reply["type"] == "error"
            assert "hello" in reply["payload"]["message"]
        finally:
            client.close()

    def test_unknown_type_error_keeps_connection(self, server):
        client = WireClient(port=server.port, session_id="t3")
        try:
            client.hello()
            assert client.read_message()["type"] == "hello"
            client.send("bogus", 1, {})
            err = client.read_message()
            assert err["type"] == "error"
            # Connection still usable afterwards.
            client.send("privacy", 2, {"on": True})
            ack = client.read_message()
            assert ack["type"] == "privacy" and ack["payload"]["on"] is True
        finally:
            client.close()

    def test_three_strikes_closes(self, server):
        client = WireClient(port=server.port, session_id="t4")
        try:
            client.hello()
            assert client.read_message()["type"] == "hello"
            for i in range(3):
                client.send("nope", i, {})
            replies = client.read_all()
            assert replies[-1]["payload"]["code"] == "protocol_violation_final"
        finally:
            client.close()

    def test_malformed_frame_answered_not_fatal(self, server):
        client = WireClient(port=server.port, session_id="t5")
        try:
            client.hello()
            assert client.read_message()["type"] == "hello"
            client.send("telemetry", 5, {"channel": "steering"})  # missing angle_raw
            err = client.read_message()
            assert err["type"] == "error" and err["payload"]["code"] == "bad_frame"
            client.send("telemetry", 10, {"channel": "steering", "angle_raw": 100.0})
            client.send("privacy", 11, {"on": False})
            ack = client.read_message()
            assert ack["type"] == "privacy"
        finally:
            client.close()

    def test_bad_scenario_tag_rejected(self, server):
        client = WireClient(port=server.port, session_id="t6")
        try:
            client.hello()
            assert client.read_message()["type"] == "hello"
            client.send("scenario", 1, {"tag": "juggling"})
            err = client.read_message()
            assert err["payload"]["code"] == "bad_scenario"
            client.send("scenario", 2, {"tag": "parking"})
            ack = client.read_message()
            assert ack["type"] == "scenario" and ack["payload"]["tag"] == "parking"
        finally:
            client.close()

    def test_fuzzed_lines_never_crash_server(self, server):
        rng = np.random.default_rng(7)
        for trial in range(20):
            sock = _raw_client(server)
            try:
                n_lines = int(rng.integers(1, 6))
                for _ in range(n_lines):
                    kind = rng.integers(0, 4)
                    if kind == 0:
                        payload = bytes(rng.integers(32, 127, size=rng.integers(1, 80)).tolist())
                    elif kind == 1:
                        payload = json.dumps(rng.integers(0, 100).item()).encode()
                    elif kind == 2:
                        payload = json.dumps({"type": "telemetry"}).encode()
                    else:
                        payload = json.dumps(
                            {"type": "hello", "session_id": "f", "t_ms": 0, "payload": {}}
                        ).encode()
                    try:
                        sock.sendall(payload + b"\n")
                    except (BrokenPipeError, ConnectionResetError):
                        break
            finally:
                sock.close()
        # Server survived: a clean session still works end to end.
        client = WireClient(port=server.port, session_id="after-fuzz")
        try:
            client.hello()
            assert client.read_message()["type"] == "hello"
        finally:
            client.close()


class TestLiveBatchEquivalence:
    def test_single_session_equivalence(self, server, artifact):
        record = make_session(
            "wire1",
            "pd",
            duration_ms=60_000,
            seed=31,
            scenario_tags=[ScenarioTag("speed_control", 0, 30_000)],
        )
        replies = stream_session_over_wire(record, "127.0.0.1", server.port, seed=0)
        live_lines = alert_lines_from_replies(replies)
        batch_alerts, _ = replay_session(record, artifact, PipelineConfig())
        batch_lines = [alert_json(a) for a in batch_alerts]
        assert live_lines == batch_lines
        assert any(r["type"] == "buffer_report" for r in replies)

    def test_privacy_script_equivalence(self, server, artifact):
        record = make_session("wire2", "pd", duration_ms=60_000, seed=32)
        script = [(20_000, True), (40_000, False)]
        replies = stream_session_over_wire(record, "127.0.0.1", server.port, privacy_script=script)
        live_lines = alert_lines_from_replies(replies)
        batch_alerts, _ = replay_session(record, artifact, PipelineConfig(), privacy_script=script)
        assert live_lines == [alert_json(a) for a in batch_alerts]

    def test_concurrent_clients_are_isolated(self, server, artifact):
        records = [
            make_session("conc-a", "pd", duration_ms=45_000, seed=41),
            make_session("conc-b", "nc", duration_ms=45_000, seed=42),
        ]
        results: dict[str, list[dict]] = {}
        errors: list[Exception] = []

        def run(record):
            try:
                results[record.session_id] = stream_session_over_wire(
                    record, "127.0.0.1", server.port
                )
            except Exception as exc:  # pragma: no cover - surfaced via assertion
                errors.append(exc)

        threads = [threading.Thread(target=run, args=(r,)) for r in records]
        for t in threads:
            t.start()
        for t in threads:
            t.join(timeout=60)
        assert not errors
        for record in records:
            replies = results[record.session_id]
            assert replies and all(msg["session_id"] == record.session_id for msg in replies)
            live_lines = alert_lines_from_replies(replies)
            batch_alerts, _ = replay_session(record, artifact, PipelineConfig())
            assert live_lines == [alert_json(a) for a in batch_alerts]

    def test_visual_test_mode_over_wire(self, server):
        record = make_session("vt", "nc", duration_ms=65_000, seed=51)
        replies = stream_session_over_wire(record, "127.0.0.1", server.port, mode="visual_test", seed=3)
        alerts = [r["payload"] for r in replies if r["type"] == "alert"]
        assert [a["t_ms"] for a in alerts] == [30_000, 60_000]
        assert all(a["visual_form"] == "triangle_icon" for a in alerts)


def test_wire_message_shape():
    line = wire_message("error", "s", 5, {"code": "x"})
    msg = json.loads(line)
    assert msg == {"type": "error", "session_id": "s", "t_ms": 5, "payload": {"code": "x"}}
