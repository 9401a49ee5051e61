from __future__ import annotations

import numpy as np
import pytest

from drivewatch.alerts import alert_json
from drivewatch.errors import EmptyTrainingSet
from drivewatch.features import WindowSpec
from drivewatch.pipeline import (
    PipelineConfig,
    ReplayClock,
    SessionEngine,
    collect_feature_windows,
    evaluate_sessions,
    replay_session,
    session_event_stream,
    session_window_results,
    train_from_sessions,
    window_sweep,
)
from drivewatch.synth import make_corpus, make_session
from drivewatch.telemetry import GAZE, PEDALS, STEERING, PedalSample, SessionRecord, SteeringSample


@pytest.fixture(scope="module")
def corpus():
    return make_corpus(n_nc=4, n_pd=3, duration_ms=120_000, seed=11)


@pytest.fixture(scope="module")
def trained(corpus):
    artifact, report = train_from_sessions(corpus, rng_seed=5)
    return artifact, report


class TestEngineBatchAgreement:
    def test_engine_windows_match_batch(self, corpus, trained):
        artifact, _ = trained
        record = corpus[0]
        config = PipelineConfig()
        batch = [r for r in session_window_results(record, config) if r.features is not None]
        batch_preds = [artifact.predict(r.features) for r in batch]

        engine = SessionEngine(
            artifact,
            PipelineConfig(),
            specs=record.specs(),
            screen_w=record.screen_w,
            screen_h=record.screen_h,
            expected_channels=list(record.channels),
        )
        live_preds = []
        for t_ms, kind, payload in session_event_stream(record, mode=None):
            if kind == "telemetry":
                for event in engine.feed_frame(payload):
                    if event.kind == "prediction":
                        live_preds.append(event.prediction)
        for event in engine.finish():
            if event.kind == "prediction":
                live_preds.append(event.prediction)

        assert len(live_preds) == len(batch_preds)
        for a, b in zip(live_preds, batch_preds):
            assert a == b

    def test_engine_counts_out_of_order_frames(self):
        engine = SessionEngine(None, expected_channels=[STEERING])
        engine.feed_frame({"channel": STEERING, "t_ms": 100, "angle_raw": 0.0})
        engine.feed_frame({"channel": STEERING, "t_ms": 50, "angle_raw": 0.0})
        assert engine._dropped_frames[STEERING] == 1


class TestReplay:
    def test_deterministic_and_pacing_independent(self, corpus, trained):
        artifact, _ = trained
        record = corpus[-1]  # a pd session: alerts fire
        logs = []
        sleeps = []
        for speed in (100.0, 10_000.0):
            slept = []
            alerts, _ = replay_session(
                record,
                artifact,
                PipelineConfig(),
                clock=ReplayClock(speed_factor=speed),
                sleep_fn=slept.append,
            )
            logs.append("\n".join(alert_json(a) for a in alerts))
            sleeps.append(sum(slept))
        assert logs[0] == logs[1]
        assert sleeps[0] > sleeps[1]

    def test_replay_emits_alerts_for_impaired_profile(self, corpus, trained):
        artifact, _ = trained
        alerts, engine = replay_session(corpus[-1], artifact, PipelineConfig())
        assert engine.windows_closed == 23
        assert len(alerts) >= 1

    def test_privacy_script_suppresses_after_toggle(self, corpus, trained):
        artifact, _ = trained
        record = corpus[-1]
        alerts, _ = replay_session(
            record, artifact, PipelineConfig(), privacy_script=[(60_000, True)]
        )
        for alert in alerts:
            if alert.t_ms >= 60_000:
                assert alert.suppressed
            else:
                assert not alert.suppressed

    def test_privacy_toggle_off_resumes(self, corpus, trained):
        artifact, _ = trained
        record = corpus[-1]
        scripted, _ = replay_session(
            record, artifact, PipelineConfig(), privacy_script=[(30_000, True), (70_000, False)]
        )
        plain, _ = replay_session(record, artifact, PipelineConfig())
        assert [a.t_ms for a in scripted] == [a.t_ms for a in plain]
        for a in scripted:
            expected = 30_000 <= a.t_ms < 70_000
            assert a.suppressed == expected

    def test_scenario_intervals_tag_alerts(self, trained):
        artifact, _ = trained
        from drivewatch.alerts import ScenarioTag

        record = make_session(
            "pdtag",
            "pd",
            duration_ms=120_000,
            seed=77,
            scenario_tags=[ScenarioTag("speed_control", 0, 60_000), ScenarioTag("parking", 60_000, 120_000)],
        )
        alerts, _ = replay_session(record, artifact, PipelineConfig())
        assert alerts, "expected alerts from the impaired profile"
        for a in alerts:
            # Intervals are half-open: parking covers [60s, 120s), nothing after.
            if a.t_ms < 60_000:
                assert a.scenario == "speed_control"
            elif a.t_ms < 120_000:
                assert a.scenario == "parking"
            else:
                assert a.scenario is None


class TestTraining:
    def test_report_shape(self, trained):
        _, report = trained
        assert report["n_sessions"] == 7
        assert report["n_windows"] == 7 * 23
        assert set(report["variants"]) == {"eye", "eyeless"}

    def test_separation_on_training_corpus(self, corpus, trained):
        artifact, _ = trained
        result = evaluate_sessions(corpus, artifact)
        assert result["separation_rate"] >= 0.9

    def test_holdout_separation(self, trained):
        artifact, _ = trained
        holdout = make_corpus(n_nc=2, n_pd=2, duration_ms=120_000, seed=321)
        result = evaluate_sessions(holdout, artifact)
        assert result["separation_rate"] >= 0.9
        for row in result["sessions"]:
            if row["group"] == "pd":
                assert row["irregular_rate"] >= 0.9
            else:
                assert row["irregular_rate"] <= 0.1

    def test_two_clusters_beat_one_on_generator_windows(self, corpus):
        from drivewatch.model import MinMaxScaler, kmeans_fit, partition_inertia

        config = PipelineConfig(window=WindowSpec(length_ms=10_000, overlap_frac=0.97))
        windows, _, _, _ = collect_feature_windows(corpus, config)
        assert len(windows) >= 2000
        matrix = np.array([w.vector() for w in windows if w.eye is not None])
        scaled = MinMaxScaler.fit(matrix).transform(matrix)
        two = kmeans_fit(scaled, k=2, rng_seed=0)
        one = partition_inertia(scaled, np.zeros(len(scaled), dtype=int), k=1)
        assert two.inertia < one
        assert not np.allclose(two.centroids[0], two.centroids[1])

    def test_session_too_short_is_empty_training_set(self):
        record = make_session("tiny", "nc", duration_ms=8_000, seed=1)
        with pytest.raises(EmptyTrainingSet):
            train_from_sessions([record])

    def test_degenerate_corpus_warns_but_trains(self):
        const = SessionRecord(session_id="const", group="non_pd")
        const.channels[STEERING] = [SteeringSample(t, 0.1, 0.1 * 32767) for t in range(0, 40_001, 50)]
        const.channels[PEDALS] = [
            PedalSample(t, 0.5, 0.0, 0.0, 35000.0) for t in range(0, 40_001, 50)
        ]
        with pytest.warns(Warning):
            artifact, report = train_from_sessions([const])
        assert report["n_windows"] == 7
        assert set(artifact.variants) == {"eyeless"}

    def test_degraded_gaze_falls_back_to_eyeless(self, trained):
        artifact, _ = trained
        lossy = make_session("lossy", "nc", duration_ms=60_000, seed=9, gaze_loss_frac=0.35)
        results = session_window_results(lossy, PipelineConfig())
        assert results, "expected windows"
        for r in results:
            assert r.statuses[GAZE] == "degraded"
            assert r.features is not None and r.features.eye is None
            pred = artifact.predict(r.features)
            assert not pred.eye_included


class TestSweep:
    def test_sweep_report(self, corpus):
        report = window_sweep(corpus[:4] + corpus[4:6], lengths_ms=(1000, 10_000), rng_seed=3)
        rows = {r["length_ms"]: r for r in report["lengths"]}
        assert rows[1000]["evaluable"] and rows[10_000]["evaluable"]
        assert report["ranking"]
        assert all("silhouette" in r for r in report["lengths"] if r["evaluable"])

    def test_single_length(self, corpus):
        report = window_sweep(corpus[:2] + corpus[-2:], lengths_ms=(10_000,))
        assert len(report["lengths"]) == 1
        assert report["lengths"][0]["evaluable"]

    def test_too_short_marked_not_evaluable(self):
        sessions = [
            make_session("a", "nc", duration_ms=6_000, seed=2),
            make_session("b", "pd", duration_ms=6_000, seed=3),
        ]
        report = window_sweep(sessions, lengths_ms=(10_000,))
        assert report["lengths"][0]["evaluable"] is False

    def test_ten_second_window_ranks_first_on_synthetic_corpus(self, corpus):
        # Empirical on these generators (multi-second patterns), not universal.
        report = window_sweep(corpus, lengths_ms=(1000, 3000, 5000, 10_000), rng_seed=3)
        assert report["ranking"][0] == 10_000


def test_study_shaped_corpus_trains_with_nonpd_baseline():
    # 13 baseline + 9 impaired sessions, baseline drawn from the non-PD group.
    sessions = make_corpus(n_nc=13, n_pd=9, duration_ms=60_000, seed=77)
    artifact, report = train_from_sessions(sessions)
    assert report["n_sessions"] == 22
    assert report["baseline_group"] == "non_pd"
    assert report["n_baseline_windows"] == 13 * 11
    assert set(artifact.variants) == {"eye", "eyeless"}


def test_collect_feature_windows_alignment(corpus):
    windows, baseline, groups, statuses = collect_feature_windows(corpus, PipelineConfig())
    assert len(windows) == len(baseline) == len(groups) == len(statuses)
    assert sum(baseline) == 4 * 23
    assert all(s["steering"] == "ok" for s in statuses)


def test_event_stream_orders_controls_before_frames():
    record = make_session("ord", "nc", duration_ms=15_000, seed=4)
    events = session_event_stream(record, privacy_script=[(1000, True)], mode="experience")
    kinds = [kind for t, kind, _ in events if t == 1000]
    frame_positions = [i for i, (t, kind, _) in enumerate(events) if t == 1000 and kind == "telemetry"]
    privacy_positions = [i for i, (t, kind, _) in enumerate(events) if t == 1000 and kind == "privacy"]
    if privacy_positions and frame_positions:
        assert max(privacy_positions) < min(frame_positions)
    assert events[0][1] == "mode"
