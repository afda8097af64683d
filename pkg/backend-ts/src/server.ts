/**
 * Transports: newline-delimited JSON over stdio, and HTTP POST /v1/{op}
 * with identical bodies. Replies go out in request order even though
 * training is async.
 */
import { createServer, IncomingMessage, Server, ServerResponse } from 'node:http';
import { createInterface } from 'node:readline';

import { ModelStore, Request, handleRequest } from './protocol.js';

export function serveStdio(store: ModelStore): Promise<void> {
  return new Promise((resolve) => {
    const rl = createInterface({ input: process.stdin, terminal: false });
    let queue: Promise<void> = Promise.resolve();
    rl.on('line', (line) => {
      if (!line.trim()) return;
      queue = queue.then(async () => {
        let reply;
        try {
          const message = JSON.parse(line) as Request;
          reply = await handleRequest(store, message);
        } catch {
          reply = { id: null, ok: false, error: 'request is not JSON' };
        }
        process.stdout.write(JSON.stringify(reply) + '\n');
      });
    });
    rl.on('close', () => {
      queue.then(resolve);
    });
  });
}

function readBody(req: IncomingMessage): Promise<string> {
  return new Promise((resolve, reject) => {
    const parts: Buffer[] = [];
    req.on('data', (part) => parts.push(part));
    req.on('end', () => resolve(Buffer.concat(parts).toString('utf8')));
    req.on('error', reject);
  });
}

export function serveHttp(store: ModelStore, port: number): Promise<Server> {
  const server = createServer(async (req: IncomingMessage, res: ServerResponse) => {
    let reply;
    const body = await readBody(req);
    try {
      const message = JSON.parse(body) as Request;
      if (!req.url || !req.url.startsWith('/v1/')) {
        reply = { id: message.id ?? null, ok: false, error: `bad path '${req.url}'` };
      } else {
        message.op = message.op ?? req.url.slice('/v1/'.length);
        reply = await handleRequest(store, message);
      }
    } catch {
      reply = { id: null, ok: false, error: 'request is not JSON' };
    }
    const payload = JSON.stringify(reply);
    res.writeHead(200, {
      'Content-Type': 'application/json',
      'Content-Length': Buffer.byteLength(payload),
    });
    res.end(payload);
  });
  return new Promise((resolve) => {
    server.listen(port, '127.0.0.1', () => resolve(server));
  });
}
