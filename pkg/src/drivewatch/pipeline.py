"""Session orchestration: the incremental window engine shared by the live
service and batch replay, plus training, evaluation, and the window sweep."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import alerts as alerts_mod
from .alerts import Alert, AlertPolicy, AlertState, ModeRunner, PresentationConfig
from .errors import EmptyTrainingSet, TooFewSamples
from .features import (
    WindowFeatures,
    WindowGroup,
    WindowSpec,
    extract,
    schema_for,
    slice_windows,
)
from .model import (
    LABEL_IRREGULAR,
    LABEL_REGULAR,
    MinMaxScaler,
    ModelArtifact,
    Prediction,
    assign_labels,
    kmeans_fit,
    silhouette_score,
    train_artifact,
)
from .telemetry import (
    CHANNELS,
    GAZE,
    STATUS_FAILED,
    STATUS_OK,
    BufferReport,
    ChannelSpec,
    SessionRecord,
    default_channel_specs,
    make_sample,
    verify_samples,
)

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    window: WindowSpec = field(default_factory=WindowSpec)
    policy: AlertPolicy = field(default_factory=AlertPolicy)
    presentation: PresentationConfig = field(default_factory=PresentationConfig)
    mode: str = alerts_mod.MODE_EXPERIENCE
    seed: int = 0
    hysteresis: float = 0.005
    engage_threshold: float = 0.02
    ratio_cap: float = 100.0


@dataclass
class WindowResult:
    group: WindowGroup
    reports: dict[str, BufferReport]
    features: WindowFeatures | None
    dropped_reason: str | None = None

    @property
    def statuses(self) -> dict[str, str]:
        return {ch: r.status for ch, r in self.reports.items()}


def evaluate_window(
    group: WindowGroup,
    specs: dict[str, ChannelSpec],
    screen_w: int,
    screen_h: int,
    config: PipelineConfig,
) -> WindowResult:
    """Verify every channel buffer, then extract features.

    A degraded or failed gaze buffer drops the eye block (eye-less schema);
    unusable steering or pedal data drops the whole window with a reason.
    """
    reports = {
        name: verify_samples(specs[name], group.channels.get(name, []), config.window.length_ms)
        for name in group.channels
        if name in specs
    }
    gaze_ok = GAZE in reports and reports[GAZE].status == STATUS_OK
    for required in ("steering", "pedals"):
        if required not in group.channels or reports.get(required) is None:
            return WindowResult(group, reports, None, f"missing {required} channel")
        if reports[required].status == STATUS_FAILED:
            return WindowResult(group, reports, None, f"{required} buffer failed")
    try:
        wf = extract(
            group,
            eye_ok=gaze_ok,
            screen_w=screen_w,
            screen_h=screen_h,
            hysteresis=config.hysteresis,
            engage_threshold=config.engage_threshold,
            ratio_cap=config.ratio_cap,
        )
    except TooFewSamples as exc:
        log.info("window [%d, %d) dropped: %s", group.start_ms, group.end_ms, exc)
        return WindowResult(group, reports, None, str(exc))
    return WindowResult(group, reports, wf)


def session_window_results(record: SessionRecord, config: PipelineConfig) -> list[WindowResult]:
    """Batch path: slice the whole session and evaluate every window."""
    specs = record.specs()
    groups = slice_windows(record.channels, config.window)
    return [evaluate_window(g, specs, record.screen_w, record.screen_h, config) for g in groups]


# --- live/batch engine -------------------------------------------------------


@dataclass
class EngineEvent:
    kind: str  # "alert" | "buffer_report" | "prediction"
    t_ms: int
    alert: Alert | None = None
    report: BufferReport | None = None
    window: tuple[int, int] | None = None
    prediction: Prediction | None = None


class SessionEngine:
    """Incremental pipeline: frames in, buffer reports and alerts out.

    Windows close on telemetry timestamps (data time, never wall clock), so
    feeding the same frame/control stream always produces the same events;
    the live service and batch replay share this engine.
    """

    def __init__(
        self,
        artifact: ModelArtifact | None,
        config: PipelineConfig | None = None,
        session_id: str = "live",
        specs: dict[str, ChannelSpec] | None = None,
        screen_w: int = 1920,
        screen_h: int = 1080,
        expected_channels: Iterable[str] = CHANNELS,
    ) -> None:
        self.artifact = artifact
        self.config = config or PipelineConfig()
        if self.config.policy.min_gap_ms < self.config.window.hop_ms:
            raise ValueError("alert min_gap_ms must be >= the window hop")
        self.session_id = session_id
        self.specs = specs or default_channel_specs()
        self.screen_w = screen_w
        self.screen_h = screen_h
        self.expected = [ch for ch in expected_channels if ch in self.specs]
        self.alert_state = AlertState(privacy_on=self.config.presentation.privacy_on)
        self.mode_runner = ModeRunner(
            mode=self.config.mode, seed=self.config.seed, config=self.config.presentation
        )
        self.scenario: str | None = None
        self.speed_kmh: float | None = None
        self.data_t_ms = 0
        self.windows_closed = 0
        self.windows_dropped = 0
        self._store: dict[str, list] = {ch: [] for ch in self.expected}
        self._last_t: dict[str, int | None] = {ch: None for ch in self.expected}
        self._dropped_frames: dict[str, int] = {ch: 0 for ch in self.expected}
        self._next_start_ms = 0
        self._finished = False

    # -- feeding -----------------------------------------------------------

    def feed_frame(self, raw_frame: dict) -> list[EngineEvent]:
        """Ingest one telemetry frame; returns any events it unlocked."""
        channel = raw_frame.get("channel")
        if channel not in self.expected:
            raise KeyError(f"unexpected channel {channel!r}")
        t_ms = int(raw_frame["t_ms"])
        last = self._last_t[channel]
        if last is not None and t_ms <= last:
            self._dropped_frames[channel] += 1
            return []
        sample = make_sample(channel, t_ms, raw_frame, self.specs[channel])
        self._last_t[channel] = t_ms
        if sample is not None:
            self._store[channel].append(sample)
        if "speed_kmh" in raw_frame and raw_frame["speed_kmh"] is not None:
            self.speed_kmh = float(raw_frame["speed_kmh"])
        return self._advance(t_ms)

    def feed_scenario(self, tag: str | None, t_ms: int) -> list[EngineEvent]:
        events = self._advance(t_ms)
        self.scenario = tag
        self.mode_runner.enter_scenario(tag, t_ms)
        events.extend(self._drain_mode_alerts(self.data_t_ms))
        return events

    def feed_privacy(self, enabled: bool, t_ms: int) -> list[EngineEvent]:
        events = self._advance(t_ms)
        alerts_mod.set_privacy(self.alert_state, enabled)
        return events

    def feed_mode(self, mode: str, t_ms: int) -> list[EngineEvent]:
        events = self._advance(t_ms)
        self.mode_runner.set_mode(mode, t_ms)
        self.config.mode = mode
        return events

    def finish(self) -> list[EngineEvent]:
        """Flush every window fully contained in the observed session span."""
        if self._finished:
            return []
        self._finished = True
        events: list[EngineEvent] = []
        span = max((t for t in self._last_t.values() if t is not None), default=0)
        while self._next_start_ms + self.config.window.length_ms <= span:
            events.extend(self._close_next_window())
        events.extend(self._drain_mode_alerts(span))
        return events

    # -- internals -----------------------------------------------------------

    def _advance(self, t_ms: int) -> list[EngineEvent]:
        self.data_t_ms = max(self.data_t_ms, t_ms)
        events: list[EngineEvent] = []
        while self._window_closable():
            events.extend(self._close_next_window())
        events.extend(self._drain_mode_alerts(self.data_t_ms))
        return events

    def _window_closable(self) -> bool:
        end = self._next_start_ms + self.config.window.length_ms
        for ch in self.expected:
            last = self._last_t[ch]
            if last is None or last < end:
                return False
        return True

    def _drain_mode_alerts(self, t_ms: int) -> list[EngineEvent]:
        out = []
        for alert in self.mode_runner.advance(t_ms, privacy_on=self.alert_state.privacy_on):
            out.append(EngineEvent("alert", alert.t_ms, alert=alert))
        return out

    def _close_next_window(self) -> list[EngineEvent]:
        start = self._next_start_ms
        end = start + self.config.window.length_ms
        group = WindowGroup(start, end)
        for ch in self.expected:
            group.channels[ch] = [s for s in self._store[ch] if start <= s.t_ms < end]
        self._next_start_ms += self.config.window.hop_ms
        for ch in self.expected:
            keep_from = self._next_start_ms
            self._store[ch] = [s for s in self._store[ch] if s.t_ms >= keep_from]

        result = evaluate_window(group, self.specs, self.screen_w, self.screen_h, self.config)
        events: list[EngineEvent] = [
            EngineEvent("buffer_report", end, report=r, window=(start, end))
            for r in result.reports.values()
        ]
        self.windows_closed += 1
        if result.features is None:
            self.windows_dropped += 1
            return events
        if self.config.mode != alerts_mod.MODE_EXPERIENCE or self.artifact is None:
            return events
        prediction = self.artifact.predict(result.features)
        events.append(EngineEvent("prediction", end, prediction=prediction, window=(start, end)))
        alert = alerts_mod.decide(
            prediction,
            end,
            self.scenario,
            self.config.policy,
            self.config.presentation,
            self.alert_state,
            speed_kmh=self.speed_kmh,
        )
        if alert is not None:
            events.append(EngineEvent("alert", alert.t_ms, alert=alert))
        return events


# --- replay -------------------------------------------------------------------


@dataclass
class ReplayClock:
    """Pacing for replays: emitted frame spacing = recorded spacing / speed."""

    speed_factor: float = 1.0
    paused: bool = False

    def __post_init__(self) -> None:
        if self.speed_factor <= 0:
            raise ValueError("speed_factor must be > 0")


_EVENT_RANK = {"mode": 0, "privacy": 1, "scenario": 2, "telemetry": 3}


def session_event_stream(
    record: SessionRecord,
    privacy_script: list[tuple[int, bool]] | None = None,
    mode: str | None = None,
) -> list[tuple[int, str, dict]]:
    """Merge a session's frames and control changes into one ordered stream.

    Controls sort before telemetry at equal timestamps so a scenario or
    privacy change at t applies to the window closing at t. The live test
    client and batch replay both consume this stream, keeping their
    decision sequences identical.
    """
    events: list[tuple[int, str, int, dict]] = []
    seq = 0
    if mode is not None:
        events.append((0, "mode", seq, {"mode": mode}))
        seq += 1
    for interval in record.scenario_tags:
        events.append((interval.t0_ms, "scenario", seq, {"tag": interval.tag}))
        seq += 1
        events.append((interval.t1_ms, "scenario", seq, {"tag": None}))
        seq += 1
    for t_ms, enabled in privacy_script or []:
        events.append((t_ms, "privacy", seq, {"on": bool(enabled)}))
        seq += 1
    for channel, samples in record.channels.items():
        for s in samples:
            if channel == "steering":
                payload = {"channel": channel, "t_ms": s.t_ms, "angle_raw": s.raw}
            elif channel == "pedals":
                payload = {
                    "channel": channel,
                    "t_ms": s.t_ms,
                    "throttle_raw": s.throttle_raw,
                    "brake_raw": s.brake_raw,
                }
            else:
                payload = {
                    "channel": channel,
                    "t_ms": s.t_ms,
                    "x_px": s.x_px,
                    "y_px": s.y_px,
                    "valid": s.valid,
                }
            events.append((s.t_ms, "telemetry", seq, payload))
            seq += 1
    events.sort(key=lambda e: (e[0], _EVENT_RANK[e[1]], e[2]))
    return [(t, kind, payload) for t, kind, _, payload in events]


def replay_session(
    record: SessionRecord,
    artifact: ModelArtifact,
    config: PipelineConfig | None = None,
    privacy_script: list[tuple[int, bool]] | None = None,
    clock: ReplayClock | None = None,
    sleep_fn: Callable[[float], None] = time.sleep,
) -> tuple[list[Alert], SessionEngine]:
    """Feed a recorded session through the engine, optionally paced.

    The clock only spaces wall-time emission; decisions depend solely on
    data timestamps, so any speed factor yields the same alert log.
    """
    config = config or PipelineConfig()
    engine = SessionEngine(
        artifact,
        config,
        session_id=record.session_id,
        specs=record.specs(),
        screen_w=record.screen_w,
        screen_h=record.screen_h,
        expected_channels=list(record.channels),
    )
    out: list[Alert] = []
    prev_t: int | None = None
    pending_sleep = 0.0
    for t_ms, kind, payload in session_event_stream(record, privacy_script, mode=config.mode):
        if clock is not None and prev_t is not None and t_ms > prev_t:
            pending_sleep += (t_ms - prev_t) / 1000.0 / clock.speed_factor
            if pending_sleep > 0.002:
                sleep_fn(pending_sleep)
                pending_sleep = 0.0
        prev_t = t_ms
        if kind == "telemetry":
            events = engine.feed_frame(payload)
        elif kind == "scenario":
            events = engine.feed_scenario(payload["tag"], t_ms)
        elif kind == "privacy":
            events = engine.feed_privacy(payload["on"], t_ms)
        else:
            events = engine.feed_mode(payload["mode"], t_ms)
        out.extend(e.alert for e in events if e.kind == "alert")
    out.extend(e.alert for e in engine.finish() if e.kind == "alert")
    return out, engine


# --- training / evaluation -----------------------------------------------------


def collect_feature_windows(
    sessions: Iterable[SessionRecord],
    config: PipelineConfig,
    baseline_group: str = "non_pd",
) -> tuple[list[WindowFeatures], list[bool], list[str], list[dict[str, str]]]:
    """Extract usable windows from sessions, flagging baseline membership."""
    windows: list[WindowFeatures] = []
    baseline: list[bool] = []
    groups: list[str] = []
    statuses: list[dict[str, str]] = []
    for record in sessions:
        for result in session_window_results(record, config):
            if result.features is None:
                continue
            windows.append(result.features)
            baseline.append(record.group == baseline_group)
            groups.append(record.group)
            statuses.append(result.statuses)
    return windows, baseline, groups, statuses


def train_from_sessions(
    sessions: list[SessionRecord],
    baseline_group: str = "non_pd",
    config: PipelineConfig | None = None,
    rng_seed: int = 0,
) -> tuple[ModelArtifact, dict]:
    config = config or PipelineConfig()
    windows, baseline, groups, _ = collect_feature_windows(sessions, config, baseline_group)
    if not windows:
        raise EmptyTrainingSet("no usable windows in the training sessions")
    artifact = train_artifact(windows, baseline, rng_seed=rng_seed)
    report = {
        "n_sessions": len(sessions),
        "n_windows": len(windows),
        "n_baseline_windows": int(sum(baseline)),
        "baseline_group": baseline_group,
        "window_ms": config.window.length_ms,
        "overlap": config.window.overlap_frac,
        "rng_seed": rng_seed,
        "variants": {name: v.train_meta for name, v in artifact.variants.items()},
    }
    return artifact, report


def evaluate_sessions(
    sessions: list[SessionRecord],
    artifact: ModelArtifact,
    config: PipelineConfig | None = None,
) -> dict:
    """Batch prediction over sessions, with group-level separation stats."""
    config = config or PipelineConfig()
    per_session: list[dict] = []
    correct = 0
    labeled = 0
    for record in sessions:
        results = session_window_results(record, config)
        preds = [artifact.predict(r.features) for r in results if r.features is not None]
        n_irregular = sum(1 for p in preds if p.label == LABEL_IRREGULAR)
        expected = (
            LABEL_IRREGULAR
            if record.group == "pd"
            else LABEL_REGULAR
            if record.group == "non_pd"
            else None
        )
        if expected is not None:
            labeled += len(preds)
            correct += sum(1 for p in preds if p.label == expected)
        per_session.append(
            {
                "session_id": record.session_id,
                "group": record.group,
                "n_windows": len(results),
                "n_scored": len(preds),
                "n_irregular": n_irregular,
                "irregular_rate": n_irregular / len(preds) if preds else None,
                "mean_margin": float(np.mean([p.margin for p in preds])) if preds else None,
            }
        )
    return {
        "sessions": per_session,
        "separation_rate": correct / labeled if labeled else None,
        "n_labeled_windows": labeled,
    }


def window_sweep(
    sessions: list[SessionRecord],
    lengths_ms: Iterable[int] = (1000, 3000, 5000, 10000),
    baseline_group: str = "non_pd",
    rng_seed: int = 0,
    silhouette_cap: int = 2000,
) -> dict:
    """Per-window-length clustering report: silhouette + separation rate.

    Lengths the corpus cannot fill are marked not evaluable. The ranking is
    empirical for the given corpus, not a universal claim.
    """
    rows = []
    for length in lengths_ms:
        config = PipelineConfig(window=WindowSpec(length_ms=int(length), overlap_frac=0.5))
        windows, baseline, groups, _ = collect_feature_windows(sessions, config, baseline_group)
        eye_rows = [i for i, w in enumerate(windows) if w.eye is not None]
        use_eye = len(windows) > 0 and len(eye_rows) >= 0.95 * len(windows)
        if use_eye:
            idx = eye_rows
            matrix = np.array([windows[i].vector() for i in idx])
        else:
            idx = list(range(len(windows)))
            d = len(schema_for(False))
            matrix = np.array([windows[i].vector()[:d] for i in idx]) if idx else np.empty((0, d))
        n_baseline = sum(baseline[i] for i in idx)
        if matrix.shape[0] < 4 or n_baseline == 0 or n_baseline == matrix.shape[0]:
            rows.append({"length_ms": int(length), "evaluable": False, "n_windows": int(matrix.shape[0])})
            continue
        scaler = MinMaxScaler.fit(matrix)
        scaled = scaler.transform(matrix)
        result = kmeans_fit(scaled, k=2, rng_seed=rng_seed)
        label_map, _ = assign_labels(
            result.centroids, scaled[[i for i, j in enumerate(idx) if baseline[j]]]
        )
        labels = [label_map[int(c)] for c in result.assignments]
        correct = 0
        total = 0
        for row_i, j in enumerate(idx):
            if groups[j] == "pd":
                total += 1
                correct += labels[row_i] == LABEL_IRREGULAR
            elif groups[j] == baseline_group:
                total += 1
                correct += labels[row_i] == LABEL_REGULAR
        rng = np.random.default_rng(rng_seed)
        if scaled.shape[0] > silhouette_cap:
            pick = rng.choice(scaled.shape[0], silhouette_cap, replace=False)
            sil = silhouette_score(scaled[pick], result.assignments[pick])
        else:
            sil = silhouette_score(scaled, result.assignments)
        rows.append(
            {
                "length_ms": int(length),
                "evaluable": True,
                "n_windows": int(matrix.shape[0]),
                "eye_features": use_eye,
                "silhouette": sil,
                "separation_rate": correct / total if total else None,
                "inertia": result.inertia,
            }
        )
    ranked = sorted(
        (r for r in rows if r.get("evaluable")),
        key=lambda r: (-(r["separation_rate"] or 0.0), -(r["silhouette"] or 0.0)),
    )
    for rank, row in enumerate(ranked, start=1):
        row["rank"] = rank
    return {"lengths": rows, "ranking": [r["length_ms"] for r in ranked]}
