"""Scenario-weighted alert policy, privacy gating, operating modes, and the
visual/audio alert design space (positions, forms, contents, templates)."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Iterator

from .errors import ModelMissing

if TYPE_CHECKING:  # pragma: no cover
    from .model import Prediction

# The eleven on-road situations; closed set.
SCENARIO_TAGS = frozenset(
    {
        "starting",
        "traffic_signals",
        "turns",
        "lane_observance",
        "overtaking",
        "speed_control",
        "backing_up",
        "curving",
        "lane_changes_merging",
        "traffic_signs",
        "parking",
    }
)

TIER_HIGH = "high"
TIER_NEUTRAL = "neutral"
TIER_LOW = "low"

DEFAULT_TIERS = {
    "speed_control": TIER_HIGH,
    "traffic_signs": TIER_HIGH,
    "overtaking": TIER_HIGH,
    "turns": TIER_HIGH,
    "lane_observance": TIER_NEUTRAL,
    "lane_changes_merging": TIER_NEUTRAL,
    "parking": TIER_LOW,
    "traffic_signals": TIER_LOW,
    "starting": TIER_LOW,
    "curving": TIER_LOW,
    "backing_up": TIER_LOW,
}

CONTENTS = ("hand", "foot", "eye")
POSITIONS = ("hud", "dashboard", "center_screen")
VISUAL_FORMS = ("triangle_icon", "text_only", "triangle_text")
AUDIO_FORMS = ("sound_only", "what_to_do", "what_and_why")

MODE_VISUAL_TEST = "visual_test"
MODE_AUDIO_TEST = "audio_test"
MODE_EXPERIENCE = "experience"
OPERATING_MODES = (MODE_VISUAL_TEST, MODE_AUDIO_TEST, MODE_EXPERIENCE)

VISUAL_TEST_INTERVAL_MS = 30_000
AUDIO_TEST_STEP_MS = 4_000


@dataclass(frozen=True)
class ScenarioTag:
    """One of the eleven driving situations, active over [t0_ms, t1_ms)."""

    tag: str
    t0_ms: int
    t1_ms: int


@dataclass
class AlertPolicy:
    base_threshold: float = 0.05
    tier_multiplier: dict[str, float] = field(
        default_factory=lambda: {TIER_HIGH: 0.8, TIER_NEUTRAL: 1.0, TIER_LOW: 1.3}
    )
    priority_tier: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_TIERS))
    min_gap_ms: int = 10_000
    confirm_windows: int = 1

    def tier_for(self, scenario: str | None) -> str:
        if scenario is None:
            return TIER_NEUTRAL
        return self.priority_tier.get(scenario, TIER_NEUTRAL)

    def effective_threshold(self, scenario: str | None) -> float:
        return self.base_threshold * self.tier_multiplier[self.tier_for(scenario)]


@dataclass
class PresentationConfig:
    default_visual_position: str = "hud"
    default_visual_form: str = "triangle_icon"
    default_audio_form: str = "what_and_why"
    terse_audio_speed_kmh: float = 80.0
    privacy_on: bool = False


@dataclass
class Alert:
    t_ms: int
    content: str
    visual_position: str
    visual_form: str
    audio_form: str
    audio_text: str
    scenario: str | None
    suppressed: bool
    margin: float | None

    def to_dict(self) -> dict:
        return {
            "t_ms": self.t_ms,
            "content": self.content,
            "visual_position": self.visual_position,
            "visual_form": self.visual_form,
            "audio_form": self.audio_form,
            "audio_text": self.audio_text,
            "scenario": self.scenario,
            "suppressed": self.suppressed,
            "margin": self.margin,
        }


def alert_json(alert: Alert) -> str:
    """Canonical one-line JSON used for alert logs and wire payloads."""
    return json.dumps(alert.to_dict(), separators=(",", ":"))


# --- audio text templates ------------------------------------------------

_WHY = {
    "hand": "your steering is unsteady",
    "foot": "your pedal control has drifted",
    "eye": "your gaze has narrowed",
}

_GENERIC_IMPERATIVE = {
    "hand": "Steady your hands on the wheel",
    "foot": "Ease your pedal inputs",
    "eye": "Keep your eyes scanning the road",
}

_SCENARIO_IMPERATIVE = {
    ("foot", "speed_control"): "Check your speed",
    ("hand", "turns"): "Steady the wheel through the turn",
    ("hand", "curving"): "Ease the wheel through the curve",
    ("hand", "lane_observance"): "Center the car in your lane",
    ("hand", "lane_changes_merging"): "Signal and steer smoothly while merging",
    ("hand", "overtaking"): "Hold a firm line while overtaking",
    ("foot", "starting"): "Ease onto the throttle",
    ("foot", "backing_up"): "Cover the brake while backing up",
    ("foot", "parking"): "Brake gently while parking",
    ("eye", "traffic_signs"): "Scan the road signs",
    ("eye", "traffic_signals"): "Watch the signal ahead",
    ("eye", "backing_up"): "Check behind you",
}


def render_audio_text(content: str, audio_form: str, scenario: str | None = None) -> str:
    """Template text for an audio prompt; sound_only carries no text."""
    if audio_form == "sound_only":
        return ""
    imperative = _SCENARIO_IMPERATIVE.get((content, scenario), _GENERIC_IMPERATIVE[content])
    if audio_form == "what_to_do":
        return f"{imperative}."
    if audio_form == "what_and_why":
        return f"{imperative} — {_WHY[content]}."
    raise ValueError(f"unknown audio form {audio_form!r}")


# --- alert decision state machine ----------------------------------------


@dataclass
class AlertState:
    last_alert_t_ms: int | None = None
    consecutive_irregular: int = 0
    privacy_on: bool = False


def set_privacy(state: AlertState, enabled: bool) -> AlertState:
    """Toggle privacy; takes effect on the next decision."""
    state.privacy_on = enabled
    return state


def _pick_content(group_deviation: dict[str, float]) -> str:
    # Ties resolve hand > foot > eye (channel reliability ordering).
    best = None
    best_v = float("-inf")
    for c in CONTENTS:
        v = group_deviation.get(c)
        if v is not None and v > best_v:
            best, best_v = c, v
    return best or "hand"


def decide(
    prediction: "Prediction",
    t_ms: int,
    scenario: str | None,
    policy: AlertPolicy,
    config: PresentationConfig,
    state: AlertState,
    speed_kmh: float | None = None,
) -> Alert | None:
    """Turn one window prediction into at most one alert.

    Fires only on an irregular label whose margin clears the scenario tier's
    threshold, after confirm_windows consecutive irregular windows, and no
    sooner than min_gap_ms after the previous alert. With privacy on the
    alert is still produced (and rate-limits the next one) but is flagged
    suppressed so it is logged, never presented.
    """
    if prediction.label != "irregular":
        state.consecutive_irregular = 0
        return None
    state.consecutive_irregular += 1
    if prediction.margin < policy.effective_threshold(scenario):
        return None
    if state.consecutive_irregular < policy.confirm_windows:
        return None
    if state.last_alert_t_ms is not None and t_ms - state.last_alert_t_ms < policy.min_gap_ms:
        return None

    content = _pick_content(prediction.group_deviation)
    audio_form = config.default_audio_form
    if (
        audio_form == "what_and_why"
        and speed_kmh is not None
        and speed_kmh > config.terse_audio_speed_kmh
    ):
        audio_form = "what_to_do"
    state.last_alert_t_ms = t_ms
    return Alert(
        t_ms=t_ms,
        content=content,
        visual_position=config.default_visual_position,
        visual_form=config.default_visual_form,
        audio_form=audio_form,
        audio_text=render_audio_text(content, audio_form, scenario),
        scenario=scenario,
        suppressed=state.privacy_on,
        margin=prediction.margin,
    )


# --- operating modes ------------------------------------------------------


class ModeRunner:
    """Scripted alert emission for the visual/audio test modes.

    visual_test: one of the nine position x content variants (form fixed to
    triangle_icon) every 30 s of session-clock time, uniformly at random
    from a seeded RNG. audio_test: on each scenario entry, the three audio
    forms play in Latin-square order (row = entry index mod 3).
    """

    def __init__(
        self,
        mode: str = MODE_EXPERIENCE,
        seed: int = 0,
        config: PresentationConfig | None = None,
        visual_interval_ms: int = VISUAL_TEST_INTERVAL_MS,
        audio_step_ms: int = AUDIO_TEST_STEP_MS,
    ) -> None:
        if mode not in OPERATING_MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self.config = config or PresentationConfig()
        self.visual_interval_ms = visual_interval_ms
        self.audio_step_ms = audio_step_ms
        self._rng = random.Random(seed)
        self._next_visual_ms = visual_interval_ms
        self._audio_queue: list[tuple[int, str, str | None]] = []
        self._scenario_entries = 0

    def set_mode(self, mode: str, t_ms: int = 0) -> None:
        if mode not in OPERATING_MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        # Keep the visual cadence on session-clock multiples of the interval.
        self._next_visual_ms = (t_ms // self.visual_interval_ms + 1) * self.visual_interval_ms
        self._audio_queue.clear()

    def enter_scenario(self, tag: str | None, t_ms: int) -> None:
        if self.mode != MODE_AUDIO_TEST or tag is None:
            return
        row = self._scenario_entries % 3
        self._scenario_entries += 1
        for j in range(3):
            form = AUDIO_FORMS[(row + j) % 3]
            self._audio_queue.append((t_ms + j * self.audio_step_ms, form, tag))
        self._audio_queue.sort(key=lambda item: item[0])

    def advance(self, t_ms: int, privacy_on: bool = False) -> list[Alert]:
        """Emit all test-mode alerts due at or before session time t_ms."""
        out: list[Alert] = []
        if self.mode == MODE_VISUAL_TEST:
            while self._next_visual_ms <= t_ms:
                position = self._rng.choice(POSITIONS)
                content = self._rng.choice(CONTENTS)
                out.append(
                    Alert(
                        t_ms=self._next_visual_ms,
                        content=content,
                        visual_position=position,
                        visual_form="triangle_icon",
                        audio_form="sound_only",
                        audio_text="",
                        scenario=None,
                        suppressed=privacy_on,
                        margin=None,
                    )
                )
                self._next_visual_ms += self.visual_interval_ms
        elif self.mode == MODE_AUDIO_TEST:
            while self._audio_queue and self._audio_queue[0][0] <= t_ms:
                due, form, tag = self._audio_queue.pop(0)
                content = _default_content_for(tag)
                out.append(
                    Alert(
                        t_ms=due,
                        content=content,
                        visual_position=self.config.default_visual_position,
                        visual_form=self.config.default_visual_form,
                        audio_form=form,
                        audio_text=render_audio_text(content, form, tag),
                        scenario=tag,
                        suppressed=privacy_on,
                        margin=None,
                    )
                )
        return out


def _default_content_for(scenario: str | None) -> str:
    if scenario in ("speed_control", "starting", "parking", "backing_up"):
        return "foot"
    if scenario in ("traffic_signs", "traffic_signals"):
        return "eye"
    return "hand"


def run_mode(
    mode: str,
    clock_ms: Iterable[int],
    config: PresentationConfig | None = None,
    model=None,
    seed: int = 0,
    scenario_entries: Iterable[tuple[int, str]] = (),
) -> Iterator[Alert]:
    """Drive a test mode over a session clock, yielding alerts in order.

    experience mode is model-driven and requires a loaded model; it is
    realized by the session engine, so here it only validates the model's
    presence for parity with the mode contract.
    """
    if mode == MODE_EXPERIENCE and model is None:
        raise ModelMissing("experience mode requires a loaded model")
    runner = ModeRunner(mode=mode, seed=seed, config=config)
    entries = sorted(scenario_entries, key=lambda e: e[0])
    idx = 0
    for t in clock_ms:
        while idx < len(entries) and entries[idx][0] <= t:
            runner.enter_scenario(entries[idx][1], entries[idx][0])
            idx += 1
        yield from runner.advance(t)
