"""drivewatch: real-time driving-state monitoring.

Sliding-window features over steering/pedal/gaze telemetry, a 2-cluster
irregularity model, and scenario-aware multi-modal alerts, usable offline
(train/eval/replay CLI) and live (line-delimited JSON wire service).
"""

from .alerts import (
    Alert,
    AlertPolicy,
    AlertState,
    PresentationConfig,
    ScenarioTag,
    decide,
    render_audio_text,
    run_mode,
    set_privacy,
)
from .errors import DriveWatchError
from .features import (
    FeatureSchema,
    WindowFeatures,
    WindowSpec,
    extract,
    eye_features,
    pedal_features,
    slice_windows,
    steering_features,
)
from .model import (
    IrregularityModel,
    MinMaxScaler,
    ModelArtifact,
    Prediction,
    assign_labels,
    kmeans_fit,
    load_model,
    predict,
    save_model,
    train_artifact,
)
from .pipeline import (
    PipelineConfig,
    ReplayClock,
    SessionEngine,
    replay_session,
    train_from_sessions,
    window_sweep,
)
from .telemetry import (
    BufferReport,
    ChannelSpec,
    GazeSample,
    PedalSample,
    SessionRecord,
    SteeringSample,
    StreamState,
    close_buffer,
    ingest_sample,
    load_session,
    save_session,
    verify_samples,
)

__version__ = "0.1.0"

__all__ = [
    "Alert",
    "AlertPolicy",
    "AlertState",
    "BufferReport",
    "ChannelSpec",
    "DriveWatchError",
    "FeatureSchema",
    "GazeSample",
    "IrregularityModel",
    "MinMaxScaler",
    "ModelArtifact",
    "PedalSample",
    "PipelineConfig",
    "Prediction",
    "PresentationConfig",
    "ReplayClock",
    "ScenarioTag",
    "SessionEngine",
    "SessionRecord",
    "SteeringSample",
    "StreamState",
    "WindowFeatures",
    "WindowSpec",
    "assign_labels",
    "close_buffer",
    "decide",
    "extract",
    "eye_features",
    "ingest_sample",
    "kmeans_fit",
    "load_model",
    "load_session",
    "pedal_features",
    "predict",
    "render_audio_text",
    "replay_session",
    "run_mode",
    "save_model",
    "save_session",
    "set_privacy",
    "slice_windows",
    "steering_features",
    "train_artifact",
    "train_from_sessions",
    "verify_samples",
    "window_sweep",
]
