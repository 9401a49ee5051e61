// Input capture: keyboard state integrates into continuous steering and
// pedal depths (saturating ramps), the cursor stands in for gaze, and two
// fixed-rate samplers (20 Hz motor, 60 Hz gaze) turn the current state
// into telemetry frames with client-monotonic timestamps.

import { WireMessage, gazeFrame, pedalsFrame, steeringFrame } from './protocol.js';

export const MOTOR_HZ = 20;
export const GAZE_HZ = 60;

const STEER_RATE_PER_S = 1.2; // full lock in ~0.83 s of held key
const STEER_RETURN_PER_S = 1.5; // self-centering when released
const PEDAL_ATTACK_PER_S = 1.5;
const PEDAL_RELEASE_PER_S = 2.0;

export interface KeySnapshot {
    left: boolean;
    right: boolean;
    throttle: boolean;
    brake: boolean;
}

export interface Controls {
    angle: number; // [-1, 1], negative = left
    throttle: number; // [0, 1]
    brake: number; // [0, 1]
}

const KEY_BINDINGS: Record<string, keyof KeySnapshot> = {
    arrowleft: 'left',
    keya: 'left',
    arrowright: 'right',
    keyd: 'right',
    arrowup: 'throttle',
    keyw: 'throttle',
    arrowdown: 'brake',
    keys: 'brake',
    space: 'brake',
};

function clamp(v: number, lo: number, hi: number): number {
    return Math.min(hi, Math.max(lo, v));
}

export function integrateControls(controls: Controls, keys: KeySnapshot, dtMs: number): void {
    const dt = dtMs / 1000;
    const direction = (keys.left ? -1 : 0) + (keys.right ? 1 : 0);
    if (direction !== 0) {
        controls.angle = clamp(controls.angle + direction * STEER_RATE_PER_S * dt, -1, 1);
    } else {
        const decay = Math.min(Math.abs(controls.angle), STEER_RETURN_PER_S * dt);
        controls.angle -= Math.sign(controls.angle) * decay;
    }
    controls.throttle = keys.throttle
        ? clamp(controls.throttle + PEDAL_ATTACK_PER_S * dt, 0, 1)
        : clamp(controls.throttle - PEDAL_RELEASE_PER_S * dt, 0, 1);
    controls.brake = keys.brake
        ? clamp(controls.brake + PEDAL_ATTACK_PER_S * dt, 0, 1)
        : clamp(controls.brake - PEDAL_RELEASE_PER_S * dt, 0, 1);
}

export interface InputCaptureOptions {
    sessionId: string;
    steeringFullScale?: number;
    pedalFullScale?: number;
    screenW?: number;
    screenH?: number;
}

export class InputCapture {
    readonly sessionId: string;
    readonly steeringFullScale: number;
    readonly pedalFullScale: number;
    readonly screenW: number;
    readonly screenH: number;

    keys: KeySnapshot = { left: false, right: false, throttle: false, brake: false };
    controls: Controls = { angle: 0, throttle: 0, brake: 0 };
    cursorX = 0;
    cursorY = 0;

    framesSent: Record<'steering' | 'pedals' | 'gaze', number> = {
        steering: 0,
        pedals: 0,
        gaze: 0,
    };

    private motorIndex = 1;
    private gazeIndex = 1;
    private lastIntegratedMs = 0;

    constructor(opts: InputCaptureOptions) {
        this.sessionId = opts.sessionId;
        this.steeringFullScale = opts.steeringFullScale ?? 32767;
        this.pedalFullScale = opts.pedalFullScale ?? 35000;
        this.screenW = opts.screenW ?? 1920;
        this.screenH = opts.screenH ?? 1080;
    }

    handleKey(code: string, down: boolean): boolean {
        const bound = KEY_BINDINGS[code.toLowerCase()];
        if (!bound) return false;
        this.keys[bound] = down;
        return true;
    }

    setCursor(x: number, y: number): void {
        this.cursorX = clamp(x, 0, this.screenW);
        this.cursorY = clamp(y, 0, this.screenH);
    }

    private motorDueAt(index: number): number {
        return index * (1000 / MOTOR_HZ);
    }

    private gazeDueAt(index: number): number {
        return Math.round((index * 1000) / GAZE_HZ);
    }

    /**
     * Advance the session clock to nowMs, emitting every frame whose grid
     * instant has passed. Zero-input states still produce frames (heartbeat);
     * missed render frames are caught up so emission rates stay nominal.
     */
    tick(nowMs: number, speedKmh?: number): WireMessage[] {
        const out: WireMessage[] = [];
        for (;;) {
            const motorDue = this.motorDueAt(this.motorIndex);
            const gazeDue = this.gazeDueAt(this.gazeIndex);
            const next = Math.min(motorDue, gazeDue);
            if (next > nowMs) break;
            integrateControls(this.controls, this.keys, next - this.lastIntegratedMs);
            this.lastIntegratedMs = next;
            if (motorDue === next) {
                out.push(
                    steeringFrame(this.sessionId, next, this.controls.angle * this.steeringFullScale),
                );
                out.push(
                    pedalsFrame(
                        this.sessionId,
                        next,
                        this.pedalFullScale * (1 - 2 * this.controls.throttle),
                        this.pedalFullScale * (1 - 2 * this.controls.brake),
                        speedKmh,
                    ),
                );
                this.framesSent.steering += 1;
                this.framesSent.pedals += 1;
                this.motorIndex += 1;
            }
            if (gazeDue === next) {
                out.push(gazeFrame(this.sessionId, next, this.cursorX, this.cursorY, true));
                this.framesSent.gaze += 1;
                this.gazeIndex += 1;
            }
        }
        if (nowMs > this.lastIntegratedMs) {
            integrateControls(this.controls, this.keys, nowMs - this.lastIntegratedMs);
            this.lastIntegratedMs = nowMs;
        }
        return out;
    }
}
