// Minimal top-down vehicle model. Cosmetic: it gives the cockpit a lane
// offset, heading, and speed to draw, and the speed feeds the telemetry
// speed hint. No attempt at realistic dynamics.

import { Controls } from './input.js';

export interface VehiclePose {
    laneOffsetM: number; // negative = left of lane center
    headingRad: number; // 0 = straight ahead
    speedKmh: number;
    distanceM: number;
}

export function initialPose(): VehiclePose {
    return { laneOffsetM: 0, headingRad: 0, speedKmh: 0, distanceM: 0 };
}

const ACCEL_KMH_PER_S = 9;
const BRAKE_KMH_PER_S = 18;
const DRAG_KMH_PER_S = 1.2;
const MAX_SPEED_KMH = 130;
const STEER_GAIN_RAD_PER_S = 0.8;
const HEADING_RETURN_PER_S = 0.4;
const MAX_LANE_OFFSET_M = 5;

export function stepVehicle(pose: VehiclePose, controls: Controls, dtMs: number): VehiclePose {
    const dt = dtMs / 1000;
    let speed =
        pose.speedKmh +
        (controls.throttle * ACCEL_KMH_PER_S - controls.brake * BRAKE_KMH_PER_S - DRAG_KMH_PER_S) * dt;
    speed = Math.min(MAX_SPEED_KMH, Math.max(0, speed));
    const speedFactor = Math.min(1, speed / 40);
    let heading =
        pose.headingRad + controls.angle * STEER_GAIN_RAD_PER_S * speedFactor * dt;
    if (controls.angle === 0) {
        const decay = Math.min(Math.abs(heading), HEADING_RETURN_PER_S * dt);
        heading -= Math.sign(heading) * decay;
    }
    const mps = speed / 3.6;
    const laneOffset = Math.min(
        MAX_LANE_OFFSET_M,
        Math.max(-MAX_LANE_OFFSET_M, pose.laneOffsetM + Math.sin(heading) * mps * dt),
    );
    return {
        laneOffsetM: laneOffset,
        headingRad: heading,
        speedKmh: speed,
        distanceM: pose.distanceM + mps * dt,
    };
}
