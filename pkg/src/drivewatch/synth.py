"""Synthetic drive generators for calibration and testing.

Two profiles: a baseline driver (frequent small steering corrections,
modulated throttle, regular braking, wide gaze scanning) and an impaired
profile (sustained shallow-to-deep throttle press, at most one brake event
per four minutes, large steering over-corrections, narrowed gaze).
"""

from __future__ import annotations

import math

import numpy as np

from .alerts import ScenarioTag
from .telemetry import (
    GAZE,
    PEDALS,
    STEERING,
    GazeSample,
    PedalSample,
    SessionRecord,
    SteeringSample,
    normalize_pedal,
    normalize_steering,
)

PEDAL_RATE_HZ = 20
STEER_RATE_HZ = 20
GAZE_RATE_HZ = 120


def _steering_samples(duration_ms: int, full_scale: float, rng: np.random.Generator, profile: str) -> list:
    step = 1000 // STEER_RATE_HZ
    ts = np.arange(0, duration_ms + 1, step)
    if profile == "nc":
        # Mean-reverting jitter around lane center.
        a = 0.0
        angles = np.empty(len(ts))
        for i in range(len(ts)):
            a = 0.92 * a + rng.normal(0.0, 0.008)
            angles[i] = a
        angles = np.clip(angles, -0.25, 0.25)
    else:
        # Slow large over-correction swings plus tremor jitter.
        amp = rng.uniform(0.35, 0.55)
        period_s = rng.uniform(2.5, 4.0)
        phase = rng.uniform(0, 2 * math.pi)
        t_s = ts / 1000.0
        angles = amp * np.sin(2 * math.pi * t_s / period_s + phase)
        angles += rng.normal(0.0, 0.015, size=len(ts))
        angles = np.clip(angles, -0.95, 0.95)
    out = []
    for t, a in zip(ts, angles):
        raw = float(a) * full_scale
        out.append(SteeringSample(int(t), normalize_steering(raw, full_scale), raw))
    return out


def _nc_pedal_profile(duration_ms: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    step = 1000 // PEDAL_RATE_HZ
    ts = np.arange(0, duration_ms + 1, step)
    throttle = np.zeros(len(ts))
    brake = np.zeros(len(ts))
    t = 0.0
    i = 0
    end_s = duration_ms / 1000.0
    while t < end_s:
        press = rng.uniform(1.0, 3.0)
        depth = rng.uniform(0.25, 0.5)
        release = rng.uniform(0.5, 2.0)
        j = np.searchsorted(ts, (t + press) * 1000)
        throttle[i:j] = depth
        t += press + release
        i = np.searchsorted(ts, t * 1000)
    t = rng.uniform(2.0, 6.0)
    while t < end_s:
        width = rng.uniform(0.4, 1.2)
        depth = rng.uniform(0.3, 0.7)
        lo = np.searchsorted(ts, t * 1000)
        hi = np.searchsorted(ts, (t + width) * 1000)
        brake[lo:hi] = depth
        throttle[lo:hi] = 0.0
        t += width + rng.uniform(5.0, 12.0)
    return ts, throttle, brake


def _pd_pedal_profile(duration_ms: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    step = 1000 // PEDAL_RATE_HZ
    ts = np.arange(0, duration_ms + 1, step)
    t_s = ts / 1000.0
    # Sustained press ramping shallow -> deep over long cycles.
    cycle = rng.uniform(60.0, 120.0)
    phase = rng.uniform(0, cycle)
    frac = ((t_s + phase) % cycle) / cycle
    throttle = 0.15 + 0.75 * frac
    throttle += rng.normal(0.0, 0.01, size=len(ts))
    throttle = np.clip(throttle, 0.05, 1.0)
    brake = np.zeros(len(ts))
    # At most one brake event per ~4 minutes.
    t = rng.uniform(30.0, 240.0)
    while t < duration_ms / 1000.0:
        width = rng.uniform(0.5, 1.0)
        lo = np.searchsorted(ts, t * 1000)
        hi = np.searchsorted(ts, (t + width) * 1000)
        brake[lo:hi] = rng.uniform(0.4, 0.8)
        t += rng.uniform(240.0, 300.0)
    return ts, throttle, brake


def _pedal_samples(duration_ms: int, full_scale: float, rng: np.random.Generator, profile: str) -> list:
    if profile == "nc":
        ts, throttle, brake = _nc_pedal_profile(duration_ms, rng)
    else:
        ts, throttle, brake = _pd_pedal_profile(duration_ms, rng)
    out = []
    for t, thr, brk in zip(ts, throttle, brake):
        thr_raw = full_scale * (1.0 - 2.0 * float(thr))
        brk_raw = full_scale * (1.0 - 2.0 * float(brk))
        out.append(
            PedalSample(
                int(t),
                normalize_pedal(thr_raw, full_scale),
                normalize_pedal(brk_raw, full_scale),
                thr_raw,
                brk_raw,
            )
        )
    return out


def _gaze_samples(
    duration_ms: int,
    screen_w: int,
    screen_h: int,
    rng: np.random.Generator,
    profile: str,
    loss_frac: float = 0.0,
) -> list:
    n = duration_ms * GAZE_RATE_HZ // 1000 + 1
    ts = np.array([round(k * 1000 / GAZE_RATE_HZ) for k in range(n)], dtype=np.int64)
    if profile == "nc":
        dwell_range = (0.3, 0.8)
        cx, cy = screen_w / 2, screen_h / 2
        spread_x, spread_y = screen_w * 0.42, screen_h * 0.42
        jitter = 3.0
    else:
        dwell_range = (1.0, 2.5)
        cx, cy = screen_w / 2, screen_h * 0.45
        spread_x, spread_y = screen_w * 0.05, screen_h * 0.05
        jitter = 1.5
    xs = np.empty(n)
    ys = np.empty(n)
    i = 0
    while i < n:
        fx = np.clip(cx + rng.uniform(-spread_x, spread_x), 2, screen_w - 2)
        fy = np.clip(cy + rng.uniform(-spread_y, spread_y), 2, screen_h - 2)
        dwell = int(rng.uniform(*dwell_range) * GAZE_RATE_HZ)
        j = min(n, i + max(dwell, 1))
        xs[i:j] = np.clip(fx + rng.normal(0, jitter, j - i), 0, screen_w)
        ys[i:j] = np.clip(fy + rng.normal(0, jitter, j - i), 0, screen_h)
        i = j
    keep = np.ones(n, dtype=bool)
    if loss_frac > 0:
        keep = rng.random(n) >= loss_frac
        keep[0] = keep[-1] = True
    return [
        GazeSample(int(t), float(x), float(y), True)
        for t, x, y, k in zip(ts, xs, ys, keep)
        if k
    ]


def make_session(
    session_id: str,
    profile: str,
    duration_ms: int = 300_000,
    seed: int = 0,
    screen_w: int = 1920,
    screen_h: int = 1080,
    with_gaze: bool = True,
    gaze_loss_frac: float = 0.0,
    scenario_tags: list[ScenarioTag] | None = None,
) -> SessionRecord:
    """Build one synthetic SessionRecord ('nc' or 'pd' profile)."""
    if profile not in ("nc", "pd"):
        raise ValueError(f"profile must be 'nc' or 'pd', got {profile!r}")
    rng = np.random.default_rng(seed)
    record = SessionRecord(
        session_id=session_id,
        group="non_pd" if profile == "nc" else "pd",
        scenario_tags=list(scenario_tags or []),
        screen_w=screen_w,
        screen_h=screen_h,
    )
    record.channels[STEERING] = _steering_samples(duration_ms, record.steering_full_scale, rng, profile)
    record.channels[PEDALS] = _pedal_samples(duration_ms, record.pedal_full_scale, rng, profile)
    if with_gaze:
        record.channels[GAZE] = _gaze_samples(duration_ms, screen_w, screen_h, rng, profile, gaze_loss_frac)
    return record


def make_corpus(
    n_nc: int = 13,
    n_pd: int = 9,
    duration_ms: int = 300_000,
    seed: int = 0,
    **kwargs,
) -> list[SessionRecord]:
    """A study-shaped corpus: n_nc baseline sessions plus n_pd impaired ones."""
    sessions = []
    for i in range(n_nc):
        sessions.append(make_session(f"nc{i + 1:02d}", "nc", duration_ms, seed=seed * 1000 + i, **kwargs))
    for i in range(n_pd):
        sessions.append(make_session(f"pd{i + 1:02d}", "pd", duration_ms, seed=seed * 1000 + 500 + i, **kwargs))
    return sessions
