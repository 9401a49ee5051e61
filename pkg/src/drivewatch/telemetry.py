"""Channel sample types, ingestion with normalization, 10-second integrity
buffers, and the on-disk session format (one CSV per channel + meta.json)."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from .alerts import SCENARIO_TAGS, ScenarioTag
from .errors import MalformedRow, MalformedSession, SchemaMismatch, UnknownChannel

log = logging.getLogger(__name__)

STEERING = "steering"
PEDALS = "pedals"
GAZE = "gaze"
CHANNELS = (STEERING, PEDALS, GAZE)

DEFAULT_BUFFER_SPAN_MS = 10_000
DEFAULT_STEERING_FULL_SCALE = 32767.0
DEFAULT_PEDAL_FULL_SCALE = 35000.0

STATUS_OK = "ok"
STATUS_DEGRADED = "degraded"
STATUS_FAILED = "failed"

GROUPS = ("pd", "non_pd", "unknown")


@dataclass
class SteeringSample:
    """Normalized steering position in [-1, +1]; negative = left.

    ``raw`` keeps the device value so session files round-trip exactly.
    """

    t_ms: int
    angle: float
    raw: float

    @property
    def values(self) -> tuple[float, ...]:
        return (self.angle,)


@dataclass
class PedalSample:
    """Throttle/brake depth in [0, 1]; 0 = released, 1 = fully pressed.

    Raw device polarity (highest = released) is inverted at ingestion.
    """

    t_ms: int
    throttle: float
    brake: float
    throttle_raw: float
    brake_raw: float

    @property
    def values(self) -> tuple[float, ...]:
        return (self.throttle, self.brake)


@dataclass
class GazeSample:
    t_ms: int
    x_px: float
    y_px: float
    valid: bool

    @property
    def values(self) -> tuple[float, ...]:
        return (self.x_px, self.y_px)


@dataclass
class ChannelSpec:
    name: str
    nominal_rate_hz: float
    rate_tolerance_frac: float = 0.25
    full_scale_raw: float = 1.0

    def __post_init__(self) -> None:
        if self.nominal_rate_hz <= 0:
            raise ValueError("nominal_rate_hz must be > 0")
        if not 0 < self.rate_tolerance_frac < 1:
            raise ValueError("rate_tolerance_frac must be in (0, 1)")


def default_channel_specs(
    steering_full_scale: float = DEFAULT_STEERING_FULL_SCALE,
    pedal_full_scale: float = DEFAULT_PEDAL_FULL_SCALE,
) -> dict[str, ChannelSpec]:
    return {
        STEERING: ChannelSpec(STEERING, 20.0, full_scale_raw=steering_full_scale),
        PEDALS: ChannelSpec(PEDALS, 20.0, full_scale_raw=pedal_full_scale),
        GAZE: ChannelSpec(GAZE, 120.0),
    }


@dataclass
class BufferReport:
    channel: str
    span_ms: int
    sample_count: int
    observed_rate_hz: float
    monotonic: bool
    null_count: int
    status: str

    def to_dict(self) -> dict:
        return {
            "channel": self.channel,
            "span_ms": self.span_ms,
            "sample_count": self.sample_count,
            "observed_rate_hz": self.observed_rate_hz,
            "monotonic": self.monotonic,
            "null_count": self.null_count,
            "status": self.status,
        }


def normalize_steering(raw: float, full_scale: float) -> float:
    return max(-1.0, min(1.0, raw / full_scale))


def normalize_pedal(raw: float, full_scale: float) -> float:
    # Raw convention: +full_scale = fully released, -full_scale = fully pressed.
    return max(0.0, min(1.0, (full_scale - raw) / (2.0 * full_scale)))


def pedal_release_raw(full_scale: float) -> float:
    """Raw value a fully released pedal reports."""
    return full_scale


def make_sample(channel: str, t_ms: int, frame: dict, spec: ChannelSpec):
    """Build a normalized sample from a raw frame payload.

    Returns None when the frame carries non-finite values (counted as a null
    by the caller); raises UnknownChannel for unrecognized channels.
    """
    if channel == STEERING:
        raw = float(frame["angle_raw"])
        if not math.isfinite(raw):
            return None
        return SteeringSample(t_ms, normalize_steering(raw, spec.full_scale_raw), raw)
    if channel == PEDALS:
        thr_raw = float(frame["throttle_raw"])
        brk_raw = float(frame["brake_raw"])
        if not (math.isfinite(thr_raw) and math.isfinite(brk_raw)):
            return None
        return PedalSample(
            t_ms,
            normalize_pedal(thr_raw, spec.full_scale_raw),
            normalize_pedal(brk_raw, spec.full_scale_raw),
            thr_raw,
            brk_raw,
        )
    if channel == GAZE:
        x = float(frame["x_px"])
        y = float(frame["y_px"])
        valid = bool(frame.get("valid", True))
        if not (math.isfinite(x) and math.isfinite(y)):
            return GazeSample(t_ms, 0.0, 0.0, False)
        return GazeSample(t_ms, x, y, valid)
    raise UnknownChannel(channel)


@dataclass
class _ChannelState:
    spec: ChannelSpec
    pending: list = field(default_factory=list)
    buffer_start_ms: int = 0
    last_t_ms: int | None = None
    dropped_non_monotonic: int = 0
    dropped_null: int = 0


class StreamState:
    """Per-session ingestion state: one active buffer per channel.

    Not safe for concurrent writers; the engine owns one StreamState per
    live session. Closed buffers are plain immutable lists.
    """

    def __init__(
        self,
        session_id: str,
        specs: dict[str, ChannelSpec] | None = None,
        buffer_span_ms: int = DEFAULT_BUFFER_SPAN_MS,
    ) -> None:
        self.session_id = session_id
        self.buffer_span_ms = buffer_span_ms
        self.channels: dict[str, _ChannelState] = {
            name: _ChannelState(spec) for name, spec in (specs or default_channel_specs()).items()
        }

    def channel(self, name: str) -> _ChannelState:
        try:
            return self.channels[name]
        except KeyError:
            raise UnknownChannel(name) from None


def ingest_sample(state: StreamState, raw_frame: dict):
    """Normalize one raw frame and append it to its channel's active buffer.

    Out-of-order frames (t_ms not strictly increasing) are dropped and
    counted; non-finite steering/pedal values are dropped and counted as
    nulls. Returns the stored sample, or None when the frame was dropped.
    """
    channel = raw_frame["channel"]
    ch = state.channel(channel)
    t_ms = int(raw_frame["t_ms"])
    if t_ms < 0:
        raise ValueError(f"t_ms must be >= 0, got {t_ms}")
    if ch.last_t_ms is not None and t_ms <= ch.last_t_ms:
        ch.dropped_non_monotonic += 1
        return None
    sample = make_sample(channel, t_ms, raw_frame, ch.spec)
    if sample is None:
        ch.dropped_null += 1
        ch.last_t_ms = t_ms
        return None
    ch.last_t_ms = t_ms
    ch.pending.append(sample)
    return sample


def buffer_ready(state: StreamState, channel: str) -> bool:
    ch = state.channel(channel)
    if ch.last_t_ms is None:
        return False
    return ch.last_t_ms >= ch.buffer_start_ms + state.buffer_span_ms


def close_buffer(state: StreamState, channel: str) -> tuple[list, BufferReport]:
    """Close the channel's current integrity buffer and start the next one.

    Returns the buffered samples plus their BufferReport. An empty buffer
    reports status=failed. Nulls dropped at ingestion within this buffer's
    lifetime count toward null_count.
    """
    ch = state.channel(channel)
    span = state.buffer_span_ms
    end = ch.buffer_start_ms + span
    taken = [s for s in ch.pending if s.t_ms < end]
    ch.pending = [s for s in ch.pending if s.t_ms >= end]
    report = verify_samples(ch.spec, taken, span, extra_nulls=ch.dropped_null)
    ch.dropped_null = 0
    ch.buffer_start_ms = end
    return taken, report


def verify_samples(spec: ChannelSpec, samples: list, span_ms: int, extra_nulls: int = 0) -> BufferReport:
    """Integrity verification: timestamps monotonic, non-null values, rate.

    Status rules: empty or non-monotonic (or gaze with zero valid fixes)
    buffers fail and are excluded; any null or an observed rate outside
    nominal*(1 +/- tolerance) degrades; otherwise ok.
    """
    n = len(samples)
    monotonic = all(b.t_ms > a.t_ms for a, b in zip(samples, samples[1:]))
    nulls = extra_nulls
    valid_count = n
    for s in samples:
        if isinstance(s, GazeSample):
            if not s.valid or not all(math.isfinite(v) for v in s.values):
                nulls += 1
                valid_count -= 1
        elif not all(math.isfinite(v) for v in s.values):
            nulls += 1
    rate = n * 1000.0 / span_ms if span_ms > 0 else 0.0

    if n == 0:
        status = STATUS_FAILED
    elif not monotonic:
        status = STATUS_FAILED
    elif spec.name == GAZE and valid_count == 0:
        status = STATUS_FAILED
    elif nulls > 0 or abs(rate - spec.nominal_rate_hz) > spec.rate_tolerance_frac * spec.nominal_rate_hz:
        status = STATUS_DEGRADED
    else:
        status = STATUS_OK
    return BufferReport(spec.name, span_ms, n, rate, monotonic, nulls, status)


# --- session persistence -------------------------------------------------

_CSV_HEADERS = {
    STEERING: ["t_ms", "angle_raw"],
    PEDALS: ["t_ms", "throttle_raw", "brake_raw"],
    GAZE: ["t_ms", "x_px", "y_px", "valid"],
}


@dataclass
class SessionRecord:
    """A recorded multi-channel drive plus its metadata."""

    session_id: str
    group: str = "unknown"
    scenario_tags: list[ScenarioTag] = field(default_factory=list)
    screen_w: int = 1920
    screen_h: int = 1080
    steering_full_scale: float = DEFAULT_STEERING_FULL_SCALE
    pedal_full_scale: float = DEFAULT_PEDAL_FULL_SCALE
    channels: dict[str, list] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.group not in GROUPS:
            raise ValueError(f"group must be one of {GROUPS}, got {self.group!r}")
        for tag in self.scenario_tags:
            if tag.tag not in SCENARIO_TAGS:
                raise ValueError(f"unknown scenario tag {tag.tag!r}")

    def specs(self) -> dict[str, ChannelSpec]:
        return default_channel_specs(self.steering_full_scale, self.pedal_full_scale)

    def span_ms(self) -> int:
        """Session span: latest sample timestamp across channels (origin 0)."""
        last = [ch[-1].t_ms for ch in self.channels.values() if ch]
        return max(last) if last else 0


def _fmt(value: float) -> str:
    """Shortest decimal text that round-trips the float exactly."""
    return repr(float(value))


def save_session(record: SessionRecord, path: str | Path) -> None:
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    meta = {
        "session_id": record.session_id,
        "group": record.group,
        "screen_w": record.screen_w,
        "screen_h": record.screen_h,
        "full_scale": {
            "steering": record.steering_full_scale,
            "pedal": record.pedal_full_scale,
        },
        "scenario_tags": [
            {"tag": t.tag, "t0_ms": t.t0_ms, "t1_ms": t.t1_ms} for t in record.scenario_tags
        ],
    }
    (directory / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    for channel, samples in record.channels.items():
        if channel not in _CSV_HEADERS:
            raise UnknownChannel(channel)
        with open(directory / f"{channel}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_CSV_HEADERS[channel])
            for s in samples:
                if channel == STEERING:
                    writer.writerow([s.t_ms, _fmt(s.raw)])
                elif channel == PEDALS:
                    writer.writerow([s.t_ms, _fmt(s.throttle_raw), _fmt(s.brake_raw)])
                else:
                    writer.writerow([s.t_ms, _fmt(s.x_px), _fmt(s.y_px), 1 if s.valid else 0])


def _parse_cell(path: str, line_no: int, name: str, text: str) -> float:
    if text is None or text.strip() == "":
        raise MalformedRow(path, line_no, f"empty {name} cell")
    try:
        return float(text)
    except ValueError:
        raise MalformedRow(path, line_no, f"bad {name} value {text!r}") from None


def _load_channel(directory: Path, channel: str, spec: ChannelSpec) -> list:
    path = directory / f"{channel}.csv"
    samples: list = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _CSV_HEADERS[channel]:
            raise SchemaMismatch(f"{path}: expected columns {_CSV_HEADERS[channel]}, got {header}")
        last_t: int | None = None
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(_CSV_HEADERS[channel]):
                raise MalformedRow(str(path), line_no, f"expected {len(_CSV_HEADERS[channel])} cells")
            t_raw = row[0].strip()
            if t_raw == "":
                raise MalformedRow(str(path), line_no, "empty t_ms cell")
            try:
                t_ms = int(t_raw)
            except ValueError:
                raise MalformedRow(str(path), line_no, f"bad t_ms value {t_raw!r}") from None
            if t_ms < 0:
                raise MalformedRow(str(path), line_no, f"negative t_ms {t_ms}")
            if last_t is not None and t_ms <= last_t:
                raise MalformedRow(str(path), line_no, f"non-monotonic t_ms {t_ms} after {last_t}")
            last_t = t_ms
            if channel == STEERING:
                raw = _parse_cell(str(path), line_no, "angle_raw", row[1])
                samples.append(SteeringSample(t_ms, normalize_steering(raw, spec.full_scale_raw), raw))
            elif channel == PEDALS:
                thr = _parse_cell(str(path), line_no, "throttle_raw", row[1])
                brk = _parse_cell(str(path), line_no, "brake_raw", row[2])
                samples.append(
                    PedalSample(
                        t_ms,
                        normalize_pedal(thr, spec.full_scale_raw),
                        normalize_pedal(brk, spec.full_scale_raw),
                        thr,
                        brk,
                    )
                )
            else:
                x = _parse_cell(str(path), line_no, "x_px", row[1])
                y = _parse_cell(str(path), line_no, "y_px", row[2])
                valid_text = row[3].strip().lower()
                if valid_text in ("1", "true"):
                    valid = True
                elif valid_text in ("0", "false"):
                    valid = False
                else:
                    raise MalformedRow(str(path), line_no, f"bad valid value {row[3]!r}")
                samples.append(GazeSample(t_ms, x, y, valid))
    return samples


def load_session(path: str | Path) -> SessionRecord:
    directory = Path(path)
    meta_path = directory / "meta.json"
    if not meta_path.exists():
        raise MalformedSession(f"{directory}: missing meta.json")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise MalformedSession(f"{meta_path}: {exc}") from exc
    try:
        record = SessionRecord(
            session_id=meta["session_id"],
            group=meta.get("group", "unknown"),
            scenario_tags=[
                ScenarioTag(t["tag"], int(t["t0_ms"]), int(t["t1_ms"]))
                for t in meta.get("scenario_tags", [])
            ],
            screen_w=int(meta.get("screen_w", 1920)),
            screen_h=int(meta.get("screen_h", 1080)),
            steering_full_scale=float(meta.get("full_scale", {}).get("steering", DEFAULT_STEERING_FULL_SCALE)),
            pedal_full_scale=float(meta.get("full_scale", {}).get("pedal", DEFAULT_PEDAL_FULL_SCALE)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedSession(f"{meta_path}: {exc}") from exc
    specs = record.specs()
    found = False
    for channel in CHANNELS:
        if (directory / f"{channel}.csv").exists():
            record.channels[channel] = _load_channel(directory, channel, specs[channel])
            found = True
    if not found:
        raise MalformedSession(f"{directory}: no channel CSV files")
    return record
