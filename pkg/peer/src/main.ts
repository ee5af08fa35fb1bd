/**
 * Reference external detector: an energy-threshold VAD speaking the harness
 * wire protocol over stdio (subprocess transport) or a TCP socket.
 *
 *   node dist/main.js --transport stdio
 *   node dist/main.js --transport tcp --port 7071
 */

import net from "node:net";
import readline from "node:readline";
import { parseArgs } from "node:util";
import { PeerSession } from "./protocol.js";
import { DEFAULT_PARAMS, EnergyVadParams } from "./vad.js";

function paramsFromArgs(values: Record<string, string | boolean | undefined>): EnergyVadParams {
  const num = (key: string, fallback: number) =>
    values[key] !== undefined ? Number(values[key]) : fallback;
  return {
    frameMs: num("frame-ms", DEFAULT_PARAMS.frameMs),
    hopMs: num("hop-ms", DEFAULT_PARAMS.hopMs),
    thresholdDbfs: num("threshold-dbfs", DEFAULT_PARAMS.thresholdDbfs),
    minSpeechMs: num("min-speech-ms", DEFAULT_PARAMS.minSpeechMs),
    hangoverMs: num("hangover-ms", DEFAULT_PARAMS.hangoverMs),
  };
}

function serveStdio(params: EnergyVadParams): void {
  const session = new PeerSession(params);
  const rl = readline.createInterface({ input: process.stdin, crlfDelay: Infinity });
  rl.on("line", (line) => {
    if (!line.trim()) return;
    const { replies, close } = session.handleLine(line);
    for (const reply of replies) process.stdout.write(reply + "\n");
    if (close) {
      rl.close();
      process.exit(0);
    }
  });
}

function serveTcp(params: EnergyVadParams, port: number, host: string): void {
  const server = net.createServer((conn) => {
    // one session per connection; the harness never multiplexes
    const session = new PeerSession(params);
    const rl = readline.createInterface({ input: conn, crlfDelay: Infinity });
    rl.on("line", (line) => {
      if (!line.trim()) return;
      const { replies, close } = session.handleLine(line);
      for (const reply of replies) conn.write(reply + "\n");
      if (close) conn.end();
    });
    conn.on("error", () => conn.destroy());
  });
  server.listen(port, host, () => {
    const addr = server.address() as net.AddressInfo;
    process.stderr.write(`listening on ${addr.address}:${addr.port}\n`);
  });
}

const { values } = parseArgs({
  options: {
    transport: { type: "string", default: "stdio" },
    port: { type: "string", default: "7071" },
    host: { type: "string", default: "127.0.0.1" },
    "threshold-dbfs": { type: "string" },
    "min-speech-ms": { type: "string" },
    "frame-ms": { type: "string" },
    "hop-ms": { type: "string" },
    "hangover-ms": { type: "string" },
  },
});

const params = paramsFromArgs(values);
if (values.transport === "stdio") {
  serveStdio(params);
} else if (values.transport === "tcp") {
  serveTcp(params, Number(values.port), String(values.host));
} else {
  process.stderr.write(`unknown transport ${String(values.transport)}\n`);
  process.exit(2);
}
