// Cockpit state store. applyMessage is a pure reducer over server
// messages; the render loop reads the store, nothing else mutates it.

import {
    AlertPayload,
    BufferReportPayload,
    OperatingMode,
    WireMessage,
} from './protocol.js';
import { VehiclePose, initialPose } from './vehicle.js';

export type ConnectionStatus = 'connecting' | 'connected' | 'disconnected';

export interface ReceivedAlert {
    alert: AlertPayload;
    receivedAtMs: number; // local clock, for the 3 s display window
}

export interface InlineError {
    code: string;
    message: string;
    atMs: number;
}

export interface CockpitState {
    connection: ConnectionStatus;
    helloAcked: boolean;
    mode: OperatingMode;
    privacyOn: boolean;
    scenario: string | null;
    alerts: ReceivedAlert[]; // newest last, suppressed ones included (for logs)
    errors: InlineError[];
    bufferStatuses: Record<string, string>;
    pose: VehiclePose;
}

const MAX_ALERTS = 20;
const MAX_ERRORS = 5;

export function initialState(): CockpitState {
    return {
        connection: 'connecting',
        helloAcked: false,
        mode: 'experience',
        privacyOn: false,
        scenario: null,
        alerts: [],
        errors: [],
        bufferStatuses: {},
        pose: initialPose(),
    };
}

export function applyMessage(state: CockpitState, msg: WireMessage, nowMs: number): CockpitState {
    switch (msg.type) {
        case 'hello': {
            const mode = (msg.payload.mode as OperatingMode) ?? state.mode;
            return { ...state, helloAcked: true, connection: 'connected', mode };
        }
        case 'alert': {
            const alert = msg.payload as unknown as AlertPayload;
            const alerts = [...state.alerts, { alert, receivedAtMs: nowMs }].slice(-MAX_ALERTS);
            return { ...state, alerts };
        }
        case 'privacy':
            return { ...state, privacyOn: Boolean(msg.payload.on) };
        case 'mode':
            return { ...state, mode: msg.payload.mode as OperatingMode };
        case 'scenario':
            return { ...state, scenario: (msg.payload.tag as string | null) ?? null };
        case 'buffer_report': {
            const report = msg.payload as unknown as BufferReportPayload;
            return {
                ...state,
                bufferStatuses: { ...state.bufferStatuses, [report.channel]: report.status },
            };
        }
        case 'error': {
            const entry: InlineError = {
                code: String(msg.payload.code ?? 'error'),
                message: String(msg.payload.message ?? ''),
                atMs: nowMs,
            };
            return { ...state, errors: [...state.errors, entry].slice(-MAX_ERRORS) };
        }
        default:
            return state;
    }
}

export function setConnection(state: CockpitState, status: ConnectionStatus): CockpitState {
    return { ...state, connection: status, helloAcked: status === 'connected' && state.helloAcked };
}

export function setPose(state: CockpitState, pose: VehiclePose): CockpitState {
    return { ...state, pose };
}
