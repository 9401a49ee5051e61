// Wire protocol types and encoders. The cockpit speaks the service's
// line-delimited JSON protocol verbatim: every message carries a type,
// session_id, and a client-monotonic t_ms.

export const WIRE_VERSION = 1;

export type MessageType =
    | 'hello'
    | 'telemetry'
    | 'scenario'
    | 'privacy'
    | 'mode'
    | 'alert'
    | 'buffer_report'
    | 'error';

export type OperatingMode = 'visual_test' | 'audio_test' | 'experience';
export type AlertContent = 'hand' | 'foot' | 'eye';
export type VisualPosition = 'hud' | 'dashboard' | 'center_screen';
export type VisualForm = 'triangle_icon' | 'text_only' | 'triangle_text';
export type AudioForm = 'sound_only' | 'what_to_do' | 'what_and_why';

export const SCENARIO_TAGS = [
    'starting',
    'traffic_signals',
    'turns',
    'lane_observance',
    'overtaking',
    'speed_control',
    'backing_up',
    'curving',
    'lane_changes_merging',
    'traffic_signs',
    'parking',
] as const;
export type ScenarioTag = (typeof SCENARIO_TAGS)[number];

export interface WireMessage {
    type: MessageType;
    session_id: string;
    t_ms: number;
    payload: Record<string, unknown>;
}

export interface AlertPayload {
    t_ms: number;
    content: AlertContent;
    visual_position: VisualPosition;
    visual_form: VisualForm;
    audio_form: AudioForm;
    audio_text: string;
    scenario: string | null;
    suppressed: boolean;
    margin: number | null;
}

export interface BufferReportPayload {
    channel: string;
    span_ms: number;
    sample_count: number;
    observed_rate_hz: number;
    monotonic: boolean;
    null_count: number;
    status: 'ok' | 'degraded' | 'failed';
    window: [number, number] | null;
}

export function encode(msg: WireMessage): string {
    return JSON.stringify(msg) + '\n';
}

export function decodeLine(line: string): WireMessage | null {
    const trimmed = line.trim();
    if (!trimmed) return null;
    try {
        const parsed = JSON.parse(trimmed);
        if (parsed && typeof parsed.type === 'string') return parsed as WireMessage;
    } catch {
        // Malformed server line; callers surface connection trouble elsewhere.
    }
    return null;
}

export interface HelloOptions {
    screenW: number;
    screenH: number;
    steeringFullScale: number;
    pedalFullScale: number;
    seed: number;
    mode: OperatingMode;
    channels?: string[];
}

export function helloMessage(sessionId: string, opts: HelloOptions): WireMessage {
    return {
        type: 'hello',
        session_id: sessionId,
        t_ms: 0,
        payload: {
            version: WIRE_VERSION,
            screen_w: opts.screenW,
            screen_h: opts.screenH,
            channels: opts.channels ?? ['steering', 'pedals', 'gaze'],
            full_scale: { steering: opts.steeringFullScale, pedal: opts.pedalFullScale },
            seed: opts.seed,
            mode: opts.mode,
        },
    };
}

export function steeringFrame(sessionId: string, tMs: number, angleRaw: number): WireMessage {
    return {
        type: 'telemetry',
        session_id: sessionId,
        t_ms: tMs,
        payload: { channel: 'steering', angle_raw: angleRaw },
    };
}

export function pedalsFrame(
    sessionId: string,
    tMs: number,
    throttleRaw: number,
    brakeRaw: number,
    speedKmh?: number,
): WireMessage {
    const payload: Record<string, unknown> = {
        channel: 'pedals',
        throttle_raw: throttleRaw,
        brake_raw: brakeRaw,
    };
    if (speedKmh !== undefined) payload.speed_kmh = speedKmh;
    return { type: 'telemetry', session_id: sessionId, t_ms: tMs, payload };
}

export function gazeFrame(
    sessionId: string,
    tMs: number,
    xPx: number,
    yPx: number,
    valid = true,
): WireMessage {
    return {
        type: 'telemetry',
        session_id: sessionId,
        t_ms: tMs,
        payload: { channel: 'gaze', x_px: xPx, y_px: yPx, valid },
    };
}

export function privacyMessage(sessionId: string, tMs: number, on: boolean): WireMessage {
    return { type: 'privacy', session_id: sessionId, t_ms: tMs, payload: { on } };
}

export function modeMessage(sessionId: string, tMs: number, mode: OperatingMode): WireMessage {
    return { type: 'mode', session_id: sessionId, t_ms: tMs, payload: { mode } };
}

export function scenarioMessage(
    sessionId: string,
    tMs: number,
    tag: ScenarioTag | null,
): WireMessage {
    return { type: 'scenario', session_id: sessionId, t_ms: tMs, payload: { tag } };
}
