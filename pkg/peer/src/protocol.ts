/**
 * Peer-side state machine for the detector wire protocol: newline-delimited
 * JSON messages. The host speaks first (hello); every chunk must be answered
 * by exactly one decision with the matching seq, in order.
 */

import { EnergyVad, EnergyVadParams, DEFAULT_PARAMS } from "./vad.js";

export const PROTOCOL_VERSION = 1;

export interface StepResult {
  replies: string[];
  close: boolean;
}

export function base64ToPcm16(b64: string): Int16Array {
  const bytes = Buffer.from(b64, "base64");
  const samples = new Int16Array(bytes.length / 2);
  for (let i = 0; i < samples.length; i++) {
    samples[i] = bytes.readInt16LE(i * 2);
  }
  return samples;
}

export class PeerSession {
  private vad: EnergyVad | null = null;
  private greeted = false;

  constructor(private readonly params: EnergyVadParams = DEFAULT_PARAMS) {}

  handleLine(line: string): StepResult {
    let msg: Record<string, unknown>;
    try {
      msg = JSON.parse(line);
      if (typeof msg !== "object" || msg === null) throw new Error("not an object");
    } catch {
      return this.fail("malformed message");
    }

    switch (msg.type) {
      case "hello":
        return this.onHello(msg);
      case "reset":
        return this.onReset();
      case "chunk":
        return this.onChunk(msg);
      case "bye":
        return { replies: [], close: true };
      default:
        return this.fail(`unknown message type ${String(msg.type)}`);
    }
  }

  private onHello(msg: Record<string, unknown>): StepResult {
    if (msg.version !== PROTOCOL_VERSION) {
      return this.fail(`unsupported protocol version ${String(msg.version)}`);
    }
    const rate = typeof msg.sample_rate_hz === "number" ? msg.sample_rate_hz : 16000;
    this.vad = new EnergyVad(this.params, rate);
    this.greeted = true;
    return {
      replies: [JSON.stringify({ type: "hello_ok", version: PROTOCOL_VERSION })],
      close: false,
    };
  }

  private onReset(): StepResult {
    if (!this.greeted || this.vad === null) return this.fail("reset before hello");
    this.vad.reset();
    return { replies: [], close: false };
  }

  private onChunk(msg: Record<string, unknown>): StepResult {
    if (!this.greeted || this.vad === null) return this.fail("chunk before hello");
    if (typeof msg.seq !== "number" || typeof msg.pcm16le_b64 !== "string") {
      return this.fail("malformed chunk message");
    }
    const interrupt = this.vad.feed(base64ToPcm16(msg.pcm16le_b64));
    return {
      replies: [JSON.stringify({ type: "decision", seq: msg.seq, interrupt })],
      close: false,
    };
  }

  private fail(reason: string): StepResult {
    return {
      replies: [JSON.stringify({ type: "error", reason })],
      close: true,
    };
  }
}
