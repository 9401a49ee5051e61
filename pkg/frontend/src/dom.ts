// DOM/canvas painter for the render model, plus audio prompts. Everything
// visual flows through applyRender(model); no other code touches the DOM.

import { RenderModel } from './render.js';
import { OperatingMode, SCENARIO_TAGS, ScenarioTag } from './protocol.js';

const GLYPH: Record<string, string> = { hand: '✋', foot: '🦶', eye: '👁' };

export interface OperatorHandlers {
    onPrivacy(on: boolean): void;
    onMode(mode: OperatingMode): void;
    onScenario(tag: ScenarioTag | null): void;
}

export class CockpitDom {
    private canvas: HTMLCanvasElement;
    private ctx: CanvasRenderingContext2D;
    private hudBox: HTMLDivElement;
    private dashboardBox: HTMLDivElement;
    private centerBox: HTMLDivElement;
    private bannerBar: HTMLDivElement;
    private statusBar: HTMLDivElement;
    private privacyToggle: HTMLInputElement;
    private modeSelect: HTMLSelectElement;
    private scenarioSelect: HTMLSelectElement;
    private lastSpokenAlertT: number | null = null;
    private audioCtx: AudioContext | null = null;

    constructor(root: HTMLElement, handlers: OperatorHandlers) {
        root.innerHTML = `
      <div class="cockpit">
        <div class="banners"></div>
        <div class="main">
          <div class="scene">
            <canvas width="760" height="430"></canvas>
            <div class="alert-box hud"></div>
            <div class="alert-box dashboard"></div>
          </div>
          <div class="side">
            <div class="alert-box center_screen"></div>
            <div class="controls">
              <label><input type="checkbox" class="privacy"> Privacy (suppress alerts)</label>
              <label>Mode
                <select class="mode">
                  <option value="experience">experience</option>
                  <option value="visual_test">visual test</option>
                  <option value="audio_test">audio test</option>
                </select>
              </label>
              <label>Scenario
                <select class="scenario"><option value="">(none)</option></select>
              </label>
            </div>
          </div>
        </div>
        <div class="status"></div>
      </div>`;
        this.canvas = root.querySelector('canvas')!;
        this.ctx = this.canvas.getContext('2d')!;
        this.hudBox = root.querySelector('.alert-box.hud')!;
        this.dashboardBox = root.querySelector('.alert-box.dashboard')!;
        this.centerBox = root.querySelector('.alert-box.center_screen')!;
        this.bannerBar = root.querySelector('.banners')!;
        this.statusBar = root.querySelector('.status')!;
        this.privacyToggle = root.querySelector('input.privacy')!;
        this.modeSelect = root.querySelector('select.mode')!;
        this.scenarioSelect = root.querySelector('select.scenario')!;
        for (const tag of SCENARIO_TAGS) {
            const option = document.createElement('option');
            option.value = tag;
            option.textContent = tag.replaceAll('_', ' ');
            this.scenarioSelect.appendChild(option);
        }
        this.privacyToggle.addEventListener('change', () => handlers.onPrivacy(this.privacyToggle.checked));
        this.modeSelect.addEventListener('change', () =>
            handlers.onMode(this.modeSelect.value as OperatingMode),
        );
        this.scenarioSelect.addEventListener('change', () =>
            handlers.onScenario((this.scenarioSelect.value || null) as ScenarioTag | null),
        );
    }

    applyRender(model: RenderModel): void {
        this.drawScene(model);
        this.bannerBar.textContent = model.banners.join('  ·  ');
        this.bannerBar.style.display = model.banners.length ? 'block' : 'none';

        for (const [position, box] of [
            ['hud', this.hudBox],
            ['dashboard', this.dashboardBox],
            ['center_screen', this.centerBox],
        ] as const) {
            const active = model.alertBox && model.alertBox.position === position;
            box.style.display = active ? 'flex' : 'none';
            if (active && model.alertBox) {
                const a = model.alertBox;
                box.innerHTML =
                    (a.showTriangle
                        ? `<span class="triangle">⚠<span class="glyph">${a.showGlyph ? GLYPH[a.content] : ''}</span></span>`
                        : '') + (a.label ? `<span class="label">${a.label}</span>` : '');
            }
        }

        const s = model.status;
        const buffers = Object.entries(s.bufferStatuses)
            .map(([ch, st]) => `${ch}:${st}`)
            .join(' ');
        this.statusBar.textContent =
            `${s.connection} · mode ${s.mode} · privacy ${s.privacyOn ? 'on' : 'off'}` +
            ` · scenario ${s.scenario ?? '—'} · ${Math.round(model.pose.speedKmh)} km/h · ${buffers}`;
        this.privacyToggle.checked = s.privacyOn;
        this.modeSelect.value = s.mode;
        this.scenarioSelect.value = s.scenario ?? '';

        this.playAudio(model);
    }

    private playAudio(model: RenderModel): void {
        const box = model.alertBox;
        if (!box || box.alertTMs === this.lastSpokenAlertT) return;
        this.lastSpokenAlertT = box.alertTMs;
        this.beep();
        if (box.audioForm !== 'sound_only' && box.audioText && 'speechSynthesis' in window) {
            const utterance = new SpeechSynthesisUtterance(box.audioText);
            utterance.rate = 1.1;
            window.speechSynthesis.speak(utterance);
        }
    }

    private beep(): void {
        try {
            this.audioCtx = this.audioCtx ?? new AudioContext();
            const osc = this.audioCtx.createOscillator();
            const gain = this.audioCtx.createGain();
            osc.frequency.value = 880;
            gain.gain.setValueAtTime(0.18, this.audioCtx.currentTime);
            gain.gain.exponentialRampToValueAtTime(0.001, this.audioCtx.currentTime + 0.35);
            osc.connect(gain).connect(this.audioCtx.destination);
            osc.start();
            osc.stop(this.audioCtx.currentTime + 0.4);
        } catch {
            // Audio unavailable (no user gesture yet); visual alert still shows.
        }
    }

    private drawScene(model: RenderModel): void {
        const { width, height } = this.canvas;
        const ctx = this.ctx;
        ctx.fillStyle = '#1b1f24';
        ctx.fillRect(0, 0, width, height);
        // Road: three lanes, dashes scroll with distance.
        const roadLeft = width * 0.25;
        const roadWidth = width * 0.5;
        ctx.fillStyle = '#2e343b';
        ctx.fillRect(roadLeft, 0, roadWidth, height);
        ctx.strokeStyle = '#e8e2c0';
        ctx.lineWidth = 3;
        const dashPeriod = 60;
        const scroll = (model.pose.distanceM * 8) % dashPeriod;
        for (const laneFrac of [1 / 3, 2 / 3]) {
            const x = roadLeft + roadWidth * laneFrac;
            ctx.setLineDash([28, 32]);
            ctx.lineDashOffset = -scroll;
            ctx.beginPath();
            ctx.moveTo(x, 0);
            ctx.lineTo(x, height);
            ctx.stroke();
        }
        ctx.setLineDash([]);
        ctx.strokeStyle = '#f5f5f5';
        ctx.strokeRect(roadLeft, -2, roadWidth, height + 4);
        // Vehicle: lane offset maps across the middle lane.
        const cx = width / 2 + (model.pose.laneOffsetM / 5) * roadWidth * 0.45;
        const cy = height * 0.72;
        ctx.save();
        ctx.translate(cx, cy);
        ctx.rotate(model.pose.headingRad * 0.6);
        ctx.fillStyle = '#4da3ff';
        ctx.fillRect(-14, -26, 28, 52);
        ctx.fillStyle = '#0e2a47';
        ctx.fillRect(-10, -16, 20, 14);
        ctx.restore();
        // Pedal/steering gauges.
        ctx.fillStyle = '#9aa7b4';
        ctx.fillRect(12, height - 18, 120, 6);
        ctx.fillStyle = '#4da3ff';
        ctx.fillRect(72 + model.gauges.angle * 60 - 3, height - 22, 6, 14);
        ctx.fillStyle = '#39c36b';
        ctx.fillRect(12, height - 40, 60 * model.gauges.throttle, 10);
        ctx.fillStyle = '#e05555';
        ctx.fillRect(80, height - 40, 60 * model.gauges.brake, 10);
    }
}
