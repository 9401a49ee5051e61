// Connection management: line framing, reconnect, and a bounded outbox so
// input produced during a dropout (up to 5 s) is delivered on reconnect.
// Transport-agnostic: browsers use the WebSocket bridge transport, tests
// inject a fake.

import { WireMessage, decodeLine, encode } from './protocol.js';

export interface Transport {
    send(line: string): void;
    close(): void;
    onLine: ((line: string) => void) | null;
    onOpen: (() => void) | null;
    onClose: (() => void) | null;
}

export type TransportFactory = () => Transport;

export const OUTBOX_WINDOW_MS = 5000;

interface Buffered {
    line: string;
    wallMs: number;
}

export class CockpitSocket {
    onMessage: ((msg: WireMessage) => void) | null = null;
    onStatus: ((connected: boolean) => void) | null = null;

    private transport: Transport | null = null;
    private outbox: Buffered[] = [];
    private connected = false;
    private closed = false;
    private reconnectDelayMs = 500;

    constructor(
        private readonly factory: TransportFactory,
        private readonly now: () => number = () => Date.now(),
        private readonly schedule: (fn: () => void, ms: number) => void = (fn, ms) => {
            setTimeout(fn, ms);
        },
    ) {}

    connect(): void {
        if (this.closed) return;
        const transport = this.factory();
        this.transport = transport;
        transport.onOpen = () => {
            this.connected = true;
            this.reconnectDelayMs = 500;
            this.flushOutbox();
            this.onStatus?.(true);
        };
        transport.onLine = (line) => {
            const msg = decodeLine(line);
            if (msg) this.onMessage?.(msg);
        };
        transport.onClose = () => {
            this.connected = false;
            this.transport = null;
            this.onStatus?.(false);
            if (!this.closed) {
                this.schedule(() => this.connect(), this.reconnectDelayMs);
                this.reconnectDelayMs = Math.min(5000, this.reconnectDelayMs * 2);
            }
        };
    }

    get isConnected(): boolean {
        return this.connected;
    }

    send(msg: WireMessage): void {
        const line = encode(msg);
        if (this.connected && this.transport) {
            this.transport.send(line);
            return;
        }
        // Buffer while disconnected; anything older than the window is lost.
        const wallMs = this.now();
        this.outbox.push({ line, wallMs });
        const cutoff = wallMs - OUTBOX_WINDOW_MS;
        while (this.outbox.length && this.outbox[0].wallMs < cutoff) {
            this.outbox.shift();
        }
    }

    get bufferedCount(): number {
        return this.outbox.length;
    }

    private flushOutbox(): void {
        if (!this.transport) return;
        const cutoff = this.now() - OUTBOX_WINDOW_MS;
        for (const item of this.outbox) {
            if (item.wallMs >= cutoff) this.transport.send(item.line);
        }
        this.outbox = [];
    }

    close(): void {
        this.closed = true;
        this.transport?.close();
        this.transport = null;
        this.connected = false;
    }
}

/** Browser transport: talks to the ws<->tcp bridge. */
export function webSocketTransport(url: string): Transport {
    const transport: Transport = {
        send: () => undefined,
        close: () => undefined,
        onLine: null,
        onOpen: null,
        onClose: null,
    };
    const ws = new WebSocket(url);
    let carry = '';
    ws.onopen = () => transport.onOpen?.();
    ws.onclose = () => transport.onClose?.();
    ws.onerror = () => ws.close();
    ws.onmessage = (event) => {
        carry += String(event.data);
        for (;;) {
            const idx = carry.indexOf('\n');
            if (idx < 0) break;
            const line = carry.slice(0, idx);
            carry = carry.slice(idx + 1);
            transport.onLine?.(line);
        }
    };
    transport.send = (line) => {
        if (ws.readyState === WebSocket.OPEN) ws.send(line);
    };
    transport.close = () => ws.close();
    return transport;
}
