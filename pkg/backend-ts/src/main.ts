/**
 * Entry point: `node dist/main.js [--http PORT] [--state DIR]`.
 * Default transport is stdio; diagnostic output stays on stderr so the
 * protocol stream is never polluted.
 */
import { ModelStore } from './protocol.js';
import { serveHttp, serveStdio } from './server.js';

function parseArgs(argv: string[]): { http?: number; state?: string } {
  const out: { http?: number; state?: string } = {};
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === '--http') {
      out.http = Number(argv[++i]);
      if (!Number.isInteger(out.http) || out.http < 0) {
        throw new Error('--http needs a port number');
      }
    } else if (argv[i] === '--state') {
      out.state = argv[++i];
      if (!out.state) throw new Error('--state needs a directory');
    } else {
      throw new Error(`unknown argument '${argv[i]}'`);
    }
  }
  return out;
}

async function main(): Promise<void> {
  const args = parseArgs(process.argv.slice(2));
  const store = new ModelStore(args.state);
  if (args.http !== undefined) {
    const server = await serveHttp(store, args.http);
    const address = server.address();
    const port = typeof address === 'object' && address ? address.port : args.http;
    process.stderr.write(`backend listening on http://127.0.0.1:${port}\n`);
  } else {
    await serveStdio(store);
  }
}

main().catch((exc) => {
  process.stderr.write(`fatal: ${(exc as Error).message}\n`);
  process.exit(1);
});
