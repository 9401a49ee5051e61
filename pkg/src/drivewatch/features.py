"""Sliding-window slicing and the per-window feature vector (steering,
pedal, and optional eye blocks; 19 features, or 12 without gaze)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InsufficientGaze, TooFewSamples

SWEEP_LENGTHS_MS = (1000, 3000, 5000, 10000)

STEERING_FEATURES = (
    "steer_sum",
    "steer_abs_sum",
    "steer_fluct_times",
    "steer_volume_per_fluct",
    "steer_max_fluct",
    "steer_fluct_speed_mean",
    "steer_fluct_speed_max",
)
PEDAL_FEATURES = (
    "throttle_duration_s",
    "brake_duration_s",
    "throttle_brake_ratio",
    "brake_times",
    "throttle_auc",
)
EYE_FEATURES = (
    "eye_avg_speed_x",
    "eye_avg_speed_y",
    "eye_avg_speed_traj",
    "eye_max_speed_x",
    "eye_max_speed_y",
    "eye_max_speed_traj",
    "gaze_area_ratio",
)

FEATURE_NAMES_EYE = STEERING_FEATURES + PEDAL_FEATURES + EYE_FEATURES
FEATURE_NAMES_EYELESS = STEERING_FEATURES + PEDAL_FEATURES

# Scaled-space coordinate ranges per body-part group, for alert attribution.
GROUP_SLICES = {"hand": (0, 7), "foot": (7, 12), "eye": (12, 19)}

DEFAULT_HYSTERESIS = 0.005
DEFAULT_ENGAGE_THRESHOLD = 0.02
DEFAULT_RATIO_CAP = 100.0
GAZE_CELL_PX = 32


@dataclass(frozen=True)
class FeatureSchema:
    names: tuple[str, ...]
    eye_included: bool
    version: int = 1

    def __len__(self) -> int:
        return len(self.names)

    def to_dict(self) -> dict:
        return {"version": self.version, "eye_included": self.eye_included, "names": list(self.names)}

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureSchema":
        return cls(tuple(data["names"]), bool(data["eye_included"]), int(data["version"]))


EYE_SCHEMA = FeatureSchema(FEATURE_NAMES_EYE, eye_included=True)
EYELESS_SCHEMA = FeatureSchema(FEATURE_NAMES_EYELESS, eye_included=False)


def schema_for(eye_included: bool) -> FeatureSchema:
    return EYE_SCHEMA if eye_included else EYELESS_SCHEMA


@dataclass
class WindowSpec:
    length_ms: int = 10_000
    overlap_frac: float = 0.5

    def __post_init__(self) -> None:
        if self.length_ms <= 0:
            raise ValueError("length_ms must be > 0")
        if not 0 <= self.overlap_frac < 1:
            raise ValueError("overlap_frac must be in [0, 1)")

    @property
    def hop_ms(self) -> int:
        return max(1, round(self.length_ms * (1.0 - self.overlap_frac)))


@dataclass
class WindowGroup:
    """Samples of one window, per channel, with [start, end) bounds."""

    start_ms: int
    end_ms: int
    channels: dict[str, list] = field(default_factory=dict)


def window_count(span_ms: int, spec: WindowSpec) -> int:
    if span_ms < spec.length_ms:
        return 0
    return (span_ms - spec.length_ms) // spec.hop_ms + 1


def slice_windows(session_channels: dict[str, Sequence], spec: WindowSpec) -> list[WindowGroup]:
    """Cut time-aligned channels into overlapping windows.

    Windows start at multiples of the hop and are emitted only when fully
    contained in the session span (latest sample timestamp, origin 0).
    Samples are assigned by t_ms in [start, end). A session shorter than
    one window yields an empty list.
    """
    span = 0
    times: dict[str, np.ndarray] = {}
    for name, samples in session_channels.items():
        if samples:
            times[name] = np.fromiter((s.t_ms for s in samples), dtype=np.int64, count=len(samples))
            span = max(span, int(times[name][-1]))
    count = window_count(span, spec)
    windows: list[WindowGroup] = []
    for k in range(count):
        start = k * spec.hop_ms
        end = start + spec.length_ms
        group = WindowGroup(start, end)
        for name, samples in session_channels.items():
            if not samples:
                group.channels[name] = []
                continue
            lo = int(np.searchsorted(times[name], start, side="left"))
            hi = int(np.searchsorted(times[name], end, side="left"))
            group.channels[name] = list(samples[lo:hi])
        windows.append(group)
    return windows


@dataclass
class SteeringBlock:
    sum: float
    abs_sum: float
    fluct_times: int
    volume_per_fluct: float
    max_fluct: float
    fluct_speed_mean: float
    fluct_speed_max: float
    zero_crossings: int  # aux diagnostic, not a model feature

    def as_tuple(self) -> tuple[float, ...]:
        return (
            self.sum,
            self.abs_sum,
            float(self.fluct_times),
            self.volume_per_fluct,
            self.max_fluct,
            self.fluct_speed_mean,
            self.fluct_speed_max,
        )


@dataclass
class PedalBlock:
    throttle_duration_s: float
    brake_duration_s: float
    throttle_brake_ratio: float
    brake_times: int
    throttle_auc: float
    ratio_capped: bool  # aux: ratio hit the zero-brake convention

    def as_tuple(self) -> tuple[float, ...]:
        return (
            self.throttle_duration_s,
            self.brake_duration_s,
            self.throttle_brake_ratio,
            float(self.brake_times),
            self.throttle_auc,
        )


@dataclass
class EyeBlock:
    avg_speed_x: float
    avg_speed_y: float
    avg_speed_traj: float
    max_speed_x: float
    max_speed_y: float
    max_speed_traj: float
    gaze_area_ratio: float

    def as_tuple(self) -> tuple[float, ...]:
        return (
            self.avg_speed_x,
            self.avg_speed_y,
            self.avg_speed_traj,
            self.max_speed_x,
            self.max_speed_y,
            self.max_speed_traj,
            self.gaze_area_ratio,
        )


@dataclass
class WindowFeatures:
    window_start_ms: int
    window_end_ms: int
    steering: SteeringBlock
    pedal: PedalBlock
    eye: EyeBlock | None

    @property
    def schema(self) -> FeatureSchema:
        return schema_for(self.eye is not None)

    def vector(self) -> np.ndarray:
        parts = self.steering.as_tuple() + self.pedal.as_tuple()
        if self.eye is not None:
            parts = parts + self.eye.as_tuple()
        return np.array(parts, dtype=float)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.schema.names, self.vector().tolist()))


def steering_features(samples: Sequence, hysteresis: float = DEFAULT_HYSTERESIS) -> SteeringBlock:
    """Steering block over one window.

    Fluctuations are direction reversals: sign changes of consecutive
    angle deltas after suppressing |delta| below the hysteresis (exact
    zeros never count). Speeds are |delta|/dt in units of 1/s.
    """
    if len(samples) < 2:
        raise TooFewSamples(f"steering window has {len(samples)} samples, need >= 2")
    a = np.fromiter((s.angle for s in samples), dtype=float, count=len(samples))
    t = np.fromiter((s.t_ms for s in samples), dtype=float, count=len(samples)) / 1000.0
    d = np.diff(a)
    dt = np.diff(t)
    total = float(a[-1] - a[0])
    abs_sum = float(np.sum(np.abs(d)))
    significant = d[(d != 0.0) & (np.abs(d) >= hysteresis)]
    signs = np.sign(significant)
    fluct_times = int(np.count_nonzero(signs[1:] != signs[:-1]))
    volume_per_fluct = abs_sum / fluct_times if fluct_times > 0 else 0.0
    max_fluct = float(np.max(np.abs(d)))
    speeds = np.abs(d) / dt
    angle_signs = np.sign(a)
    nz = angle_signs[angle_signs != 0.0]
    zero_crossings = int(np.count_nonzero(nz[1:] != nz[:-1]))
    return SteeringBlock(
        sum=total,
        abs_sum=abs_sum,
        fluct_times=fluct_times,
        volume_per_fluct=volume_per_fluct,
        max_fluct=max_fluct,
        fluct_speed_mean=float(np.mean(speeds)),
        fluct_speed_max=float(np.max(speeds)),
        zero_crossings=zero_crossings,
    )


def pedal_features(
    samples: Sequence,
    window_end_ms: int | None = None,
    engage_threshold: float = DEFAULT_ENGAGE_THRESHOLD,
    ratio_cap: float = DEFAULT_RATIO_CAP,
) -> PedalBlock:
    """Pedal block over one window.

    Each sample's depth holds until the next sample, or until window_end_ms
    for the last one (left-rectangle integration). A pedal is engaged while
    its depth exceeds the engagement threshold; brake events are maximal
    engaged runs. Zero brake duration maps the ratio to ratio_cap.
    """
    if len(samples) < 2:
        raise TooFewSamples(f"pedal window has {len(samples)} samples, need >= 2")
    thr = np.fromiter((s.throttle for s in samples), dtype=float, count=len(samples))
    brk = np.fromiter((s.brake for s in samples), dtype=float, count=len(samples))
    t = np.fromiter((s.t_ms for s in samples), dtype=float, count=len(samples)) / 1000.0
    end_s = (window_end_ms / 1000.0) if window_end_ms is not None else float(t[-1])
    dt = np.diff(np.append(t, max(end_s, float(t[-1]))))

    thr_engaged = thr > engage_threshold
    brk_engaged = brk > engage_threshold
    throttle_duration = float(np.sum(dt[thr_engaged]))
    brake_duration = float(np.sum(dt[brk_engaged]))
    rises = int(np.count_nonzero(brk_engaged[1:] & ~brk_engaged[:-1]))
    brake_times = rises + (1 if brk_engaged[0] else 0)
    auc = float(np.sum(thr * dt))
    if brake_duration == 0.0:
        ratio, capped = ratio_cap, True
    else:
        ratio, capped = throttle_duration / brake_duration, False
    return PedalBlock(
        throttle_duration_s=throttle_duration,
        brake_duration_s=brake_duration,
        throttle_brake_ratio=ratio,
        brake_times=brake_times,
        throttle_auc=auc,
        ratio_capped=capped,
    )


def eye_features(
    samples: Sequence,
    screen_w: int,
    screen_h: int,
    cell_px: int = GAZE_CELL_PX,
) -> EyeBlock:
    """Eye block over one window, from valid fixes only.

    Speeds use consecutive sample pairs where both fixes are valid. Gaze
    area is grid-cell occupancy (cell edges clipped to the screen), so full
    coverage is exactly 1.0.
    """
    valid = [s for s in samples if s.valid]
    if len(valid) < 2:
        raise InsufficientGaze(f"{len(valid)} valid gaze samples, need >= 2")
    pair_dx: list[float] = []
    pair_dy: list[float] = []
    pair_dt: list[float] = []
    for a, b in zip(samples, samples[1:]):
        if a.valid and b.valid:
            pair_dx.append(abs(b.x_px - a.x_px))
            pair_dy.append(abs(b.y_px - a.y_px))
            pair_dt.append((b.t_ms - a.t_ms) / 1000.0)
    if not pair_dt:
        raise InsufficientGaze("no consecutive valid gaze pairs")
    dx = np.array(pair_dx)
    dy = np.array(pair_dy)
    dt = np.array(pair_dt)
    sx = dx / dt
    sy = dy / dt
    straj = np.sqrt(dx * dx + dy * dy) / dt

    ncols = math.ceil(screen_w / cell_px)
    nrows = math.ceil(screen_h / cell_px)
    cells = set()
    for s in valid:
        cx = min(int(s.x_px // cell_px), ncols - 1)
        cy = min(int(s.y_px // cell_px), nrows - 1)
        cells.add((max(cx, 0), max(cy, 0)))
    area = 0.0
    for cx, cy in cells:
        w = min(cell_px, screen_w - cx * cell_px)
        h = min(cell_px, screen_h - cy * cell_px)
        area += w * h
    ratio = area / float(screen_w * screen_h)
    return EyeBlock(
        avg_speed_x=float(np.mean(sx)),
        avg_speed_y=float(np.mean(sy)),
        avg_speed_traj=float(np.mean(straj)),
        max_speed_x=float(np.max(sx)),
        max_speed_y=float(np.max(sy)),
        max_speed_traj=float(np.max(straj)),
        gaze_area_ratio=ratio,
    )


def _check_internal_consistency(wf: WindowFeatures) -> None:
    s = wf.steering
    slack = 1e-9 * (1.0 + abs(s.abs_sum))
    assert s.abs_sum + slack >= abs(s.sum), "abs_sum < |sum|"
    assert s.max_fluct <= s.abs_sum + slack, "max_fluct > abs_sum"
    assert s.fluct_speed_mean <= s.fluct_speed_max * (1 + 1e-12) + 1e-12, "mean speed > max speed"
    if wf.eye is not None:
        e = wf.eye
        eps = 1e-9
        assert e.avg_speed_x <= e.max_speed_x * (1 + eps) + eps
        assert e.avg_speed_y <= e.max_speed_y * (1 + eps) + eps
        assert e.avg_speed_traj <= e.max_speed_traj * (1 + eps) + eps
        assert 0.0 <= e.gaze_area_ratio <= 1.0


def extract(
    window: WindowGroup,
    eye_ok: bool,
    screen_w: int,
    screen_h: int,
    hysteresis: float = DEFAULT_HYSTERESIS,
    engage_threshold: float = DEFAULT_ENGAGE_THRESHOLD,
    ratio_cap: float = DEFAULT_RATIO_CAP,
) -> WindowFeatures:
    """Compose the block extractors for one window.

    eye_ok gates the eye block (gaze buffer verified ok); a gaze dropout
    inside an otherwise-ok window also falls back to the eye-less schema.
    Deterministic for identical input.
    """
    steering = steering_features(window.channels.get("steering", ()), hysteresis)
    pedal = pedal_features(
        window.channels.get("pedals", ()),
        window_end_ms=window.end_ms,
        engage_threshold=engage_threshold,
        ratio_cap=ratio_cap,
    )
    eye = None
    if eye_ok:
        try:
            eye = eye_features(window.channels.get("gaze", ()), screen_w, screen_h)
        except InsufficientGaze:
            eye = None
    wf = WindowFeatures(window.start_ms, window.end_ms, steering, pedal, eye)
    _check_internal_consistency(wf)
    return wf


def feature_dump_line(wf: WindowFeatures, buffer_statuses: dict[str, str]) -> str:
    """One NDJSON line per window: schema version, features, buffer statuses."""
    payload = {
        "schema_version": wf.schema.version,
        "eye_included": wf.schema.eye_included,
        "window_start_ms": wf.window_start_ms,
        "window_end_ms": wf.window_end_ms,
        "features": wf.as_dict(),
        "buffer_statuses": buffer_statuses,
    }
    return json.dumps(payload, separators=(",", ":"))
