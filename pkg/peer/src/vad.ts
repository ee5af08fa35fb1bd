/**
 * Latched energy VAD over a cumulative PCM16 stream.
 *
 * Mirrors the harness's built-in detector exactly: frames of frameMs every
 * hopMs, a frame is "speech" when the dBFS of its RMS (full scale 32767)
 * exceeds the threshold, and the decision latches true once a run of
 * ceil(minSpeechMs / hopMs) consecutive speech frames completes. Hangover
 * lets a run survive short dips.
 */

export interface EnergyVadParams {
  frameMs: number;
  hopMs: number;
  thresholdDbfs: number;
  minSpeechMs: number;
  hangoverMs: number;
}

export const DEFAULT_PARAMS: EnergyVadParams = {
  frameMs: 25,
  hopMs: 10,
  thresholdDbfs: -40.0,
  minSpeechMs: 100,
  hangoverMs: 0,
};

const FULL_SCALE = 32767.0;

export function frameRmsDbfs(frame: Int16Array): number {
  let sum = 0;
  for (let i = 0; i < frame.length; i++) {
    sum += frame[i] * frame[i];
  }
  const rms = Math.sqrt(sum / frame.length);
  if (rms === 0) return -Infinity;
  return 20 * Math.log10(rms / FULL_SCALE);
}

export class EnergyVad {
  private buf: Int16Array = new Int16Array(0);
  private run = 0;
  private gap = 0;
  private latched = false;

  private readonly frameLen: number;
  private readonly hopLen: number;
  private readonly requiredRun: number;
  private readonly hangoverFrames: number;

  constructor(
    readonly params: EnergyVadParams = DEFAULT_PARAMS,
    readonly sampleRateHz = 16000,
  ) {
    if (!(params.frameMs >= params.hopMs && params.hopMs > 0)) {
      throw new Error("require frameMs >= hopMs > 0");
    }
    if (params.minSpeechMs < params.hopMs) {
      throw new Error("require minSpeechMs >= hopMs");
    }
    this.frameLen = Math.floor((params.frameMs * sampleRateHz) / 1000);
    this.hopLen = Math.floor((params.hopMs * sampleRateHz) / 1000);
    this.requiredRun = Math.ceil(params.minSpeechMs / params.hopMs);
    this.hangoverFrames = Math.floor(params.hangoverMs / params.hopMs);
  }

  reset(): void {
    this.buf = new Int16Array(0);
    this.run = 0;
    this.gap = 0;
    this.latched = false;
  }

  feed(chunk: Int16Array): boolean {
    if (this.latched) return true;
    if (chunk.length > 0) {
      const merged = new Int16Array(this.buf.length + chunk.length);
      merged.set(this.buf);
      merged.set(chunk, this.buf.length);
      this.buf = merged;
    }
    while (this.buf.length >= this.frameLen) {
      const frame = this.buf.subarray(0, this.frameLen);
      const above = frameRmsDbfs(frame) > this.params.thresholdDbfs;
      this.buf = this.buf.subarray(this.hopLen);
      if (above) {
        this.run += 1;
        this.gap = 0;
      } else if (this.run > 0 && this.gap < this.hangoverFrames) {
        this.gap += 1;
      } else {
        this.run = 0;
        this.gap = 0;
      }
      if (this.run >= this.requiredRun) {
        this.latched = true;
        break;
      }
    }
    return this.latched;
  }
}
