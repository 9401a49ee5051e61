// Browser entry point. Query parameters: server (ws bridge URL), session,
// seed, mode, position/form (presentation overrides).

import { CockpitDom } from './dom.js';
import { InputCapture } from './input.js';
import { CockpitSocket, webSocketTransport } from './net.js';
import {
    OperatingMode,
    ScenarioTag,
    VisualForm,
    VisualPosition,
    helloMessage,
    modeMessage,
    privacyMessage,
    scenarioMessage,
} from './protocol.js';
import { RenderConfig, render } from './render.js';
import { applyMessage, initialState, setConnection, setPose } from './state.js';
import { stepVehicle } from './vehicle.js';

const params = new URLSearchParams(window.location.search);
const serverUrl = params.get('server') ?? 'ws://127.0.0.1:8773';
const sessionId = params.get('session') ?? `cockpit-${Math.random().toString(36).slice(2, 8)}`;
const seed = Number(params.get('seed') ?? '0');
const startMode = (params.get('mode') ?? 'experience') as OperatingMode;
const renderConfig: RenderConfig = {
    positionOverride: params.get('position') as VisualPosition | null,
    formOverride: params.get('form') as VisualForm | null,
};

const input = new InputCapture({
    sessionId,
    screenW: window.innerWidth,
    screenH: window.innerHeight,
});
let state = initialState();
let dataClockMs = 0;

const socket = new CockpitSocket(() => webSocketTransport(serverUrl));
socket.onMessage = (msg) => {
    state = applyMessage(state, msg, performance.now());
};
socket.onStatus = (connected) => {
    state = setConnection(state, connected ? 'connected' : 'disconnected');
    if (connected) {
        socket.send(
            helloMessage(sessionId, {
                screenW: input.screenW,
                screenH: input.screenH,
                steeringFullScale: input.steeringFullScale,
                pedalFullScale: input.pedalFullScale,
                seed,
                mode: startMode,
            }),
        );
    }
};

const dom = new CockpitDom(document.getElementById('app')!, {
    onPrivacy: (on) => socket.send(privacyMessage(sessionId, dataClockMs, on)),
    onMode: (mode) => socket.send(modeMessage(sessionId, dataClockMs, mode)),
    onScenario: (tag: ScenarioTag | null) => socket.send(scenarioMessage(sessionId, dataClockMs, tag)),
});

window.addEventListener('keydown', (event) => {
    if (input.handleKey(event.code, true)) event.preventDefault();
});
window.addEventListener('keyup', (event) => {
    if (input.handleKey(event.code, false)) event.preventDefault();
});
window.addEventListener('pointermove', (event) => {
    input.setCursor(event.clientX, event.clientY);
});

socket.connect();

const startedAt = performance.now();
let lastFrameAt = startedAt;

function frame(now: number): void {
    const dtMs = now - lastFrameAt;
    lastFrameAt = now;
    dataClockMs = Math.round(now - startedAt);
    state = setPose(state, stepVehicle(state.pose, input.controls, dtMs));
    for (const msg of input.tick(dataClockMs, state.pose.speedKmh)) {
        socket.send(msg);
    }
    dom.applyRender(render(state, input.controls, renderConfig, now));
    requestAnimationFrame(frame);
}

requestAnimationFrame(frame);
