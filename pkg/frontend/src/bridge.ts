// WebSocket <-> TCP bridge: browsers cannot open raw sockets, so the page
// connects here and this pipes newline-delimited JSON both ways.
// Usage: node dist/bridge.js [--listen 8773] [--target-host 127.0.0.1] [--target-port 8772]

import net from 'node:net';
import process from 'node:process';
import { WebSocketServer, WebSocket } from 'ws';

function arg(name: string, fallback: string): string {
    const idx = process.argv.indexOf(`--${name}`);
    return idx >= 0 && process.argv[idx + 1] ? process.argv[idx + 1] : fallback;
}

const listenPort = Number(arg('listen', '8773'));
const targetHost = arg('target-host', '127.0.0.1');
const targetPort = Number(arg('target-port', '8772'));

const wss = new WebSocketServer({ port: listenPort });
console.log(`bridge: ws://127.0.0.1:${listenPort} <-> tcp ${targetHost}:${targetPort}`);

wss.on('connection', (ws: WebSocket) => {
    const tcp = net.createConnection({ host: targetHost, port: targetPort });
    let carry = '';
    tcp.on('data', (chunk) => {
        carry += chunk.toString('utf8');
        for (;;) {
            const idx = carry.indexOf('\n');
            if (idx < 0) break;
            ws.send(carry.slice(0, idx + 1));
            carry = carry.slice(idx + 1);
        }
    });
    tcp.on('close', () => ws.close());
    tcp.on('error', () => ws.close());
    ws.on('message', (data) => {
        const text = typeof data === 'string' ? data : data.toString();
        tcp.write(text.endsWith('\n') ? text : text + '\n');
    });
    ws.on('close', () => tcp.end());
    ws.on('error', () => tcp.destroy());
});
