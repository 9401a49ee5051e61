// Tiny static file server for the cockpit page (index.html + dist/).
// Usage: node dist/static.js [--port 8080]

import fs from 'node:fs';
import http from 'node:http';
import path from 'node:path';
import process from 'node:process';
import { fileURLToPath } from 'node:url';

const root = path.resolve(path.dirname(fileURLToPath(import.meta.url)), '..');
const idx = process.argv.indexOf('--port');
const port = Number(idx >= 0 ? process.argv[idx + 1] : '8080');

const TYPES: Record<string, string> = {
    '.html': 'text/html',
    '.js': 'text/javascript',
    '.map': 'application/json',
    '.css': 'text/css',
};

http.createServer((req, res) => {
    const url = (req.url ?? '/').split('?')[0];
    const rel = url === '/' ? 'index.html' : url.slice(1);
    const file = path.join(root, rel);
    if (!file.startsWith(root) || !fs.existsSync(file) || fs.statSync(file).isDirectory()) {
        res.writeHead(404).end('not found');
        return;
    }
    res.writeHead(200, { 'content-type': TYPES[path.extname(file)] ?? 'application/octet-stream' });
    fs.createReadStream(file).pipe(res);
}).listen(port, () => console.log(`cockpit page: http://127.0.0.1:${port}/`));
