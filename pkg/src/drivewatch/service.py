"""Line-delimited JSON wire service binding ingestion -> features -> model
-> alerts, one engine per connection, plus a client helper for scripted use."""

from __future__ import annotations

import json
import logging
import socket
import socketserver
import threading
from dataclasses import dataclass, replace

from .alerts import OPERATING_MODES, SCENARIO_TAGS
from .errors import DriveWatchError
from .model import ModelArtifact
from .pipeline import EngineEvent, PipelineConfig, SessionEngine, session_event_stream
from .telemetry import CHANNELS, SessionRecord, default_channel_specs

log = logging.getLogger(__name__)

WIRE_VERSION = 1
MAX_STRIKES = 3
MESSAGE_TYPES = ("hello", "telemetry", "scenario", "privacy", "mode", "alert", "buffer_report", "error")


def wire_message(type_: str, session_id: str, t_ms: int, payload: dict) -> bytes:
    return (
        json.dumps(
            {"type": type_, "session_id": session_id, "t_ms": t_ms, "payload": payload},
            separators=(",", ":"),
        )
        + "\n"
    ).encode()


class _ConnectionHandler(socketserver.StreamRequestHandler):
    """One live session per connection; hello first, telemetry in,
    alerts and buffer reports out, three structural strikes allowed.

    self.server carries the shared artifact and config (read-only)."""

    def handle(self) -> None:  # noqa: C901 - protocol dispatch
        self.session_id = "?"
        self.engine: SessionEngine | None = None
        self.strikes = 0
        self.data_t = 0
        while True:
            try:
                line = self.rfile.readline()
            except (ConnectionResetError, OSError):
                return
            if not line:
                break
            line = line.strip()
            if not line:
                continue
            try:
                msg = json.loads(line)
                if not isinstance(msg, dict):
                    raise ValueError("message must be a JSON object")
                mtype = msg["type"]
                self.session_id = str(msg.get("session_id", self.session_id))
                t_ms = int(msg["t_ms"])
            except (ValueError, KeyError, TypeError) as exc:
                if self._strike(f"unparseable message: {exc}"):
                    return
                continue
            self.data_t = max(self.data_t, t_ms)
            if mtype not in MESSAGE_TYPES:
                if self._strike(f"unknown message type {mtype!r}"):
                    return
                continue
            if self.engine is None and mtype != "hello":
                if self._strike("first message must be hello"):
                    return
                continue
            try:
                stop = self._dispatch(mtype, t_ms, msg.get("payload") or {})
            except ConnectionError:
                return
            if stop:
                return
        self._flush()

    # -- dispatch ---------------------------------------------------------

    def _dispatch(self, mtype: str, t_ms: int, payload: dict) -> bool:
        if mtype == "hello":
            return self._on_hello(t_ms, payload)
        assert self.engine is not None
        if mtype == "telemetry":
            self._on_telemetry(t_ms, payload)
        elif mtype == "scenario":
            tag = payload.get("tag")
            if tag is not None and tag not in SCENARIO_TAGS:
                self._error("bad_scenario", f"unknown scenario tag {tag!r}")
                return False
            self._emit(self.engine.feed_scenario(tag, t_ms))
            self._ack("scenario", t_ms, {"tag": tag})
        elif mtype == "privacy":
            enabled = bool(payload.get("on"))
            self._emit(self.engine.feed_privacy(enabled, t_ms))
            self._ack("privacy", t_ms, {"on": enabled})
        elif mtype == "mode":
            mode = payload.get("mode")
            if mode not in OPERATING_MODES:
                self._error("bad_mode", f"unknown mode {mode!r}")
                return False
            if mode == "experience" and self.server.artifact is None:
                self._error("model_missing", "experience mode requires a loaded model")
                return False
            self._emit(self.engine.feed_mode(mode, t_ms))
            self._ack("mode", t_ms, {"mode": mode})
        else:
            # alert / buffer_report / error are server-to-client only.
            return self._strike(f"client may not send {mtype!r}")
        return False

    def _on_hello(self, t_ms: int, payload: dict) -> bool:
        if self.engine is not None:
            return self._strike("duplicate hello")
        version = payload.get("version", WIRE_VERSION)
        if version != WIRE_VERSION:
            self._error("bad_version", f"unsupported wire version {version!r}")
            return True
        channels = payload.get("channels") or list(CHANNELS)
        specs = default_channel_specs(
            float(payload.get("full_scale", {}).get("steering", 32767.0)),
            float(payload.get("full_scale", {}).get("pedal", 35000.0)),
        )
        config = replace(
            self.server.config,
            seed=int(payload.get("seed", self.server.config.seed)),
        )
        mode = payload.get("mode", config.mode)
        if mode not in OPERATING_MODES:
            self._error("bad_mode", f"unknown mode {mode!r}")
            return True
        self.engine = SessionEngine(
            self.server.artifact,
            config,
            session_id=self.session_id,
            specs={name: specs[name] for name in channels if name in specs},
            screen_w=int(payload.get("screen_w", 1920)),
            screen_h=int(payload.get("screen_h", 1080)),
            expected_channels=channels,
        )
        self._send(
            "hello",
            t_ms,
            {
                "version": WIRE_VERSION,
                "server": "drivewatch",
                "mode": mode,
                "schema": self.server.artifact.primary.schema.to_dict()
                if self.server.artifact
                else None,
            },
        )
        self._emit(self.engine.feed_mode(mode, t_ms))
        return False

    def _on_telemetry(self, t_ms: int, payload: dict) -> None:
        assert self.engine is not None
        try:
            self._emit(self.engine.feed_frame({**payload, "t_ms": t_ms}))
        except (KeyError, TypeError, ValueError) as exc:
            # Malformed frame: answered, never fatal for the session.
            self._error("bad_frame", str(exc))

    # -- plumbing -----------------------------------------------------------

    def _flush(self) -> None:
        if self.engine is None:
            return
        try:
            self._emit(self.engine.finish())
        except ConnectionError:
            pass

    def _emit(self, events: list[EngineEvent]) -> None:
        for event in events:
            if event.kind == "alert" and event.alert is not None:
                self._send("alert", event.t_ms, event.alert.to_dict())
            elif event.kind == "buffer_report" and event.report is not None:
                payload = event.report.to_dict()
                payload["window"] = list(event.window) if event.window else None
                self._send("buffer_report", event.t_ms, payload)

    def _send(self, type_: str, t_ms: int, payload: dict) -> None:
        self.wfile.write(wire_message(type_, self.session_id, t_ms, payload))
        self.wfile.flush()

    def _ack(self, type_: str, t_ms: int, payload: dict) -> None:
        self._send(type_, t_ms, payload)

    def _error(self, code: str, message: str) -> None:
        log.debug("session %s error %s: %s", self.session_id, code, message)
        try:
            self._send("error", self.data_t, {"code": code, "message": message, "strikes": self.strikes})
        except ConnectionError:
            pass

    def _strike(self, message: str) -> bool:
        self.strikes += 1
        final = self.strikes >= MAX_STRIKES
        code = "protocol_violation_final" if final else "protocol_violation"
        self._error(code, message)
        return final


class DriveWatchServer:
    """Threaded TCP server; the model artifact is immutable shared state."""

    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = 8772,
        artifact: ModelArtifact | None = None,
        config: PipelineConfig | None = None,
    ) -> None:
        self.artifact = artifact
        self.config = config or PipelineConfig()

        class _Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

            def handle_error(self, request, client_address):  # noqa: N802
                log.warning("connection %s aborted", client_address, exc_info=True)

        self._tcp = _Server((host, port), _ConnectionHandler)
        # Handlers reach shared read-only state via self.server.
        self._tcp.artifact = artifact  # type: ignore[attr-defined]
        self._tcp.config = self.config  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._tcp.server_address[1]

    def start(self) -> None:
        self._thread = threading.Thread(target=self._tcp.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        self._tcp.serve_forever()

    def shutdown(self) -> None:
        self._tcp.shutdown()
        self._tcp.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)


# --- scripted client ----------------------------------------------------------


@dataclass
class WireClient:
    """Minimal blocking client speaking the line-delimited JSON protocol."""

    host: str = "127.0.0.1"
    port: int = 8772
    session_id: str = "client"

    def __post_init__(self) -> None:
        self._sock = socket.create_connection((self.host, self.port))
        self._rfile = self._sock.makefile("rb")

    def send(self, type_: str, t_ms: int, payload: dict) -> None:
        self._sock.sendall(wire_message(type_, self.session_id, t_ms, payload))

    def hello(self, t_ms: int = 0, **payload) -> None:
        payload.setdefault("version", WIRE_VERSION)
        self.send("hello", t_ms, payload)

    def finish_sending(self) -> None:
        self._sock.shutdown(socket.SHUT_WR)

    def read_message(self) -> dict | None:
        line = self._rfile.readline()
        if not line:
            return None
        return json.loads(line)

    def read_all(self) -> list[dict]:
        out = []
        while True:
            msg = self.read_message()
            if msg is None:
                return out
            out.append(msg)

    def close(self) -> None:
        try:
            self._rfile.close()
        finally:
            self._sock.close()


def stream_session_over_wire(
    record: SessionRecord,
    host: str,
    port: int,
    privacy_script: list[tuple[int, bool]] | None = None,
    mode: str = "experience",
    seed: int = 0,
) -> list[dict]:
    """Send a recorded session through a live server; returns all replies.

    Uses the same merged event ordering as batch replay, so for equal seeds
    the alert payloads received here serialize byte-identically to the
    replay log.
    """
    client = WireClient(host=host, port=port, session_id=record.session_id)
    replies: list[dict] = []
    # Read concurrently with sending so neither side stalls on TCP buffers.
    reader = threading.Thread(target=lambda: replies.extend(client.read_all()), daemon=True)
    try:
        reader.start()
        client.hello(
            t_ms=0,
            screen_w=record.screen_w,
            screen_h=record.screen_h,
            channels=list(record.channels),
            full_scale={"steering": record.steering_full_scale, "pedal": record.pedal_full_scale},
            seed=seed,
            mode=mode,
        )
        for t_ms, kind, payload in session_event_stream(record, privacy_script, mode=None):
            if kind == "telemetry":
                client.send("telemetry", t_ms, payload)
            elif kind == "scenario":
                client.send("scenario", t_ms, {"tag": payload["tag"]})
            elif kind == "privacy":
                client.send("privacy", t_ms, {"on": payload["on"]})
        client.finish_sending()
        reader.join(timeout=120)
        if reader.is_alive():
            raise DriveWatchError("timed out waiting for server to finish the session")
    finally:
        client.close()
    for reply in replies:
        if reply["type"] == "error" and "final" in reply["payload"].get("code", ""):
            raise DriveWatchError(f"server closed session: {reply['payload']}")
    return replies


def alert_lines_from_replies(replies: list[dict]) -> list[str]:
    """Re-serialize alert payloads exactly as the replay NDJSON writer does."""
    return [
        json.dumps(msg["payload"], separators=(",", ":"))
        for msg in replies
        if msg["type"] == "alert"
    ]
