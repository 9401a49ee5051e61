// Pure rendering: CockpitState -> RenderModel. The DOM layer only paints
// what this returns, so the whole presentation is snapshot-testable
// headlessly; suppressed alerts can never reach the screen because they
// never enter the model.

import { Controls } from './input.js';
import {
    AlertContent,
    AlertPayload,
    AudioForm,
    VisualForm,
    VisualPosition,
} from './protocol.js';
import { CockpitState } from './state.js';

export const ALERT_DISPLAY_MS = 3000;

export interface RenderConfig {
    positionOverride: VisualPosition | null;
    formOverride: VisualForm | null;
}

export function defaultRenderConfig(): RenderConfig {
    return { positionOverride: null, formOverride: null };
}

export interface AlertBox {
    position: VisualPosition;
    form: VisualForm;
    content: AlertContent;
    showTriangle: boolean;
    showGlyph: boolean;
    label: string; // text component, empty for pure icon form
    audioForm: AudioForm;
    audioText: string;
    scenario: string | null;
    ageMs: number;
    alertTMs: number;
}

export interface RenderModel {
    alertBox: AlertBox | null;
    banners: string[];
    status: {
        connection: string;
        mode: string;
        privacyOn: boolean;
        scenario: string | null;
        bufferStatuses: Record<string, string>;
    };
    gauges: { angle: number; throttle: number; brake: number };
    pose: { laneOffsetM: number; headingRad: number; speedKmh: number; distanceM: number };
}

const CONTENT_LABEL: Record<AlertContent, string> = {
    hand: 'HAND',
    foot: 'FOOT',
    eye: 'EYE',
};

function alertLabel(form: VisualForm, content: AlertContent): string {
    if (form === 'triangle_icon') return '';
    if (form === 'triangle_text') return CONTENT_LABEL[content];
    return `Watch ${content} control`;
}

function activeAlert(state: CockpitState, nowMs: number): { alert: AlertPayload; ageMs: number } | null {
    for (let i = state.alerts.length - 1; i >= 0; i -= 1) {
        const entry = state.alerts[i];
        if (entry.alert.suppressed) continue; // logged, never presented
        const age = nowMs - entry.receivedAtMs;
        if (age <= ALERT_DISPLAY_MS) return { alert: entry.alert, ageMs: age };
        return null; // newest non-suppressed alert already expired
    }
    return null;
}

export function render(
    state: CockpitState,
    controls: Controls,
    config: RenderConfig,
    nowMs: number,
): RenderModel {
    const banners: string[] = [];
    if (state.connection !== 'connected') {
        banners.push(state.connection === 'connecting' ? 'Connecting…' : 'Disconnected — buffering input');
    }
    for (const err of state.errors.slice(-2)) {
        banners.push(`Server error [${err.code}]: ${err.message}`);
    }

    let alertBox: AlertBox | null = null;
    const active = activeAlert(state, nowMs);
    if (active) {
        const form = config.formOverride ?? active.alert.visual_form;
        alertBox = {
            position: config.positionOverride ?? active.alert.visual_position,
            form,
            content: active.alert.content,
            showTriangle: form !== 'text_only',
            showGlyph: form === 'triangle_icon',
            label: alertLabel(form, active.alert.content),
            audioForm: active.alert.audio_form,
            audioText: active.alert.audio_text,
            scenario: active.alert.scenario,
            ageMs: active.ageMs,
            alertTMs: active.alert.t_ms,
        };
    }

    return {
        alertBox,
        banners,
        status: {
            connection: state.connection,
            mode: state.mode,
            privacyOn: state.privacyOn,
            scenario: state.scenario,
            bufferStatuses: state.bufferStatuses,
        },
        gauges: { angle: controls.angle, throttle: controls.throttle, brake: controls.brake },
        pose: state.pose,
    };
}
