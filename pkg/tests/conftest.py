from __future__ import annotations

import numpy as np
import pytest

from drivewatch.features import WindowGroup
from drivewatch.telemetry import GazeSample, PedalSample, SteeringSample


def steering_series(pairs):
    """[(t_ms, angle), ...] -> samples (raw mirrors the normalized value)."""
    return [SteeringSample(int(t), float(a), float(a) * 32767.0) for t, a in pairs]


def pedal_series(triples):
    return [
        PedalSample(int(t), float(thr), float(brk), 35000.0 * (1 - 2 * thr), 35000.0 * (1 - 2 * brk))
        for t, thr, brk in triples
    ]


def gaze_series(rows):
    """[(t_ms, x, y, valid), ...] -> gaze samples."""
    return [GazeSample(int(t), float(x), float(y), bool(v)) for t, x, y, v in rows]


def random_window(
    rng: np.random.Generator,
    start_ms: int = 0,
    length_ms: int = 10_000,
    screen=(1920, 1080),
    gaze_valid_frac: float = 0.9,
) -> WindowGroup:
    """A randomized window exercising edge cases: repeated values (zero
    deltas), deltas straddling the hysteresis, invalid gaze runs."""
    end_ms = start_ms + length_ms
    w, h = screen

    n_steer = int(rng.integers(5, 210))
    ts = np.sort(rng.choice(np.arange(start_ms, end_ms), size=n_steer, replace=False))
    angles = rng.uniform(-1, 1, n_steer)
    if rng.random() < 0.5:
        angles = np.round(angles / 0.004) * 0.004  # quantize near the hysteresis
    if rng.random() < 0.3:
        hold = rng.integers(0, n_steer - 1)
        angles[hold + 1 :] = angles[hold]  # constant tail -> zero deltas
    steering = [SteeringSample(int(t), float(a), float(a) * 32767.0) for t, a in zip(ts, angles)]

    n_ped = int(rng.integers(5, 210))
    tp = np.sort(rng.choice(np.arange(start_ms, end_ms), size=n_ped, replace=False))
    thr = rng.uniform(0, 1, n_ped)
    brk = np.where(rng.random(n_ped) < 0.6, 0.0, rng.uniform(0, 1, n_ped))
    if rng.random() < 0.3:
        thr[:] = 0.0
    pedals = [
        PedalSample(int(t), float(a), float(b), 35000 * (1 - 2 * a), 35000 * (1 - 2 * b))
        for t, a, b in zip(tp, thr, brk)
    ]

    n_gaze = int(rng.integers(6, 400))
    tg = np.sort(rng.choice(np.arange(start_ms, end_ms), size=n_gaze, replace=False))
    xs = rng.uniform(0, w, n_gaze)
    ys = rng.uniform(0, h, n_gaze)
    valid = rng.random(n_gaze) < gaze_valid_frac
    valid[:2] = True  # guarantee one adjacent valid pair
    gaze = [
        GazeSample(int(t), float(x), float(y), bool(v)) for t, x, y, v in zip(tg, xs, ys, valid)
    ]
    return WindowGroup(start_ms, end_ms, {"steering": steering, "pedals": pedals, "gaze": gaze})


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
