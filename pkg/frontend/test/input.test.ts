import { describe, expect, it } from 'vitest';

import { InputCapture, integrateControls } from '../src/input.js';
import { WireMessage } from '../src/protocol.js';

function capture(): InputCapture {
    return new InputCapture({ sessionId: 'test' });
}

function framesByChannel(messages: WireMessage[]): Record<string, WireMessage[]> {
    const out: Record<string, WireMessage[]> = { steering: [], pedals: [], gaze: [] };
    for (const msg of messages) {
        out[msg.payload.channel as string].push(msg);
    }
    return out;
}

describe('telemetry sampling', () => {
    it('holds nominal rates under jittery 60 fps ticking', () => {
        const input = capture();
        const all: WireMessage[] = [];
        // Simulated render loop: ~16.7 ms frames with up to ±6 ms of jitter.
        let t = 0;
        let k = 0;
        while (t < 10_000) {
            t = Math.min(10_000, t + 16.7 + 6 * Math.sin(k * 1.7));
            k += 1;
            all.push(...input.tick(Math.round(t)));
        }
        const channels = framesByChannel(all);
        expect(Math.abs(channels.steering.length - 200)).toBeLessThanOrEqual(20); // 20 Hz ±10 %
        expect(Math.abs(channels.pedals.length - 200)).toBeLessThanOrEqual(20);
        expect(Math.abs(channels.gaze.length - 600)).toBeLessThanOrEqual(60); // 60 Hz ±10 %
    });

    it('catches up after a long stall so rates stay nominal', () => {
        const input = capture();
        const first = input.tick(480); // stalled render loop
        const channels = framesByChannel(first);
        expect(channels.steering.length).toBe(9); // grid instants 50..450
        expect(channels.gaze.length).toBe(28);
    });

    it('timestamps are client-monotonic and strictly increasing per channel', () => {
        const input = capture();
        const all: WireMessage[] = [];
        for (let t = 13; t < 3000; t += 13) {
            all.push(...input.tick(t));
        }
        for (let i = 1; i < all.length; i += 1) {
            expect(all[i].t_ms).toBeGreaterThanOrEqual(all[i - 1].t_ms);
        }
        const channels = framesByChannel(all);
        for (const frames of Object.values(channels)) {
            for (let i = 1; i < frames.length; i += 1) {
                expect(frames[i].t_ms).toBeGreaterThan(frames[i - 1].t_ms);
            }
        }
    });

    it('emits zero-valued heartbeat frames with no input', () => {
        const input = capture();
        const channels = framesByChannel(input.tick(1000));
        expect(channels.steering.length).toBeGreaterThan(0);
        for (const frame of channels.steering) {
            expect(frame.payload.angle_raw).toBe(0);
        }
        for (const frame of channels.pedals) {
            expect(frame.payload.throttle_raw).toBe(35000); // raw full-release
            expect(frame.payload.brake_raw).toBe(35000);
        }
    });

    it('held wheel key produces a saturating angle ramp', () => {
        const input = capture();
        expect(input.handleKey('ArrowRight', true)).toBe(true);
        const frames = framesByChannel(input.tick(2000)).steering;
        const angles = frames.map((f) => (f.payload.angle_raw as number) / 32767);
        for (let i = 1; i < angles.length; i += 1) {
            expect(angles[i]).toBeGreaterThanOrEqual(angles[i - 1]);
        }
        expect(angles[angles.length - 1]).toBe(1); // saturated at full lock
        expect(angles[3]).toBeLessThan(0.5); // ramped, not stepped
    });

    it('cursor at the screen corner yields a valid (0, 0) gaze frame', () => {
        const input = capture();
        input.setCursor(0, 0);
        const gaze = framesByChannel(input.tick(100)).gaze;
        expect(gaze.length).toBeGreaterThan(0);
        expect(gaze[0].payload).toMatchObject({ x_px: 0, y_px: 0, valid: true });
    });

    it('cursor is clamped to the screen', () => {
        const input = capture();
        input.setCursor(99_999, -50);
        expect(input.cursorX).toBe(1920);
        expect(input.cursorY).toBe(0);
    });

    it('unbound keys are ignored', () => {
        const input = capture();
        expect(input.handleKey('KeyQ', true)).toBe(false);
    });
});

describe('control integration', () => {
    it('steering returns to center when released', () => {
        const controls = { angle: 0.9, throttle: 0, brake: 0 };
        integrateControls(controls, { left: false, right: false, throttle: false, brake: false }, 1000);
        expect(controls.angle).toBe(0);
    });

    it('pedals attack and release at different rates', () => {
        const controls = { angle: 0, throttle: 0, brake: 0 };
        const keys = { left: false, right: false, throttle: true, brake: false };
        integrateControls(controls, keys, 400);
        expect(controls.throttle).toBeCloseTo(0.6, 5);
        keys.throttle = false;
        integrateControls(controls, keys, 200);
        expect(controls.throttle).toBeCloseTo(0.2, 5);
    });
});
