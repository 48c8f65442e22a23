// WAV decode, playback, and digesting of service responses.
// All audible output comes from service WAV bytes; nothing is synthesized here.

export function base64ToBytes(b64: string): Uint8Array {
  if (typeof atob === "function") {
    const bin = atob(b64);
    const out = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
    return out;
  }
  return new Uint8Array(Buffer.from(b64, "base64"));
}

export async function digestBytes(bytes: Uint8Array): Promise<string> {
  const buf = await crypto.subtle.digest("SHA-256", bytes.slice().buffer);
  return Array.from(new Uint8Array(buf))
    .map((b) => b.toString(16).padStart(2, "0"))
    .join("");
}

/** Parse mono 16-bit PCM WAV into float samples plus the sample rate. */
export function decodeWav(bytes: Uint8Array): { samples: Float32Array; sampleRate: number } {
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  if (view.getUint32(0, false) !== 0x52494646 || view.getUint32(8, false) !== 0x57415645) {
    throw new Error("not a RIFF/WAVE file");
  }
  let offset = 12;
  let sampleRate = 44100;
  let dataStart = -1;
  let dataLen = 0;
  let bitsPerSample = 16;
  let channels = 1;
  while (offset + 8 <= bytes.byteLength) {
    const chunkId = view.getUint32(offset, false);
    const chunkSize = view.getUint32(offset + 4, true);
    if (chunkId === 0x666d7420) {
      // "fmt "
      channels = view.getUint16(offset + 10, true);
      sampleRate = view.getUint32(offset + 12, true);
      bitsPerSample = view.getUint16(offset + 22, true);
    } else if (chunkId === 0x64617461) {
      // "data"
      dataStart = offset + 8;
      dataLen = chunkSize;
    }
    offset += 8 + chunkSize + (chunkSize % 2);
  }
  if (dataStart < 0) throw new Error("WAV has no data chunk");
  if (bitsPerSample !== 16) throw new Error(`unsupported bit depth ${bitsPerSample}`);
  const n = Math.floor(dataLen / 2 / channels);
  const samples = new Float32Array(n);
  for (let i = 0; i < n; i++) {
    samples[i] = view.getInt16(dataStart + i * channels * 2, true) / 32768;
  }
  return { samples, sampleRate };
}

export interface Player {
  play(wavBytes: Uint8Array): Promise<void>;
}

/** Browser player backed by the Web Audio API. */
export class WebAudioPlayer implements Player {
  private ctx: AudioContext | null = null;

  private context(): AudioContext {
    if (!this.ctx) {
      this.ctx = new AudioContext();
    }
    return this.ctx;
  }

  async play(wavBytes: Uint8Array): Promise<void> {
    const ctx = this.context();
    const buffer = await ctx.decodeAudioData(wavBytes.slice().buffer);
    const source = ctx.createBufferSource();
    source.buffer = buffer;
    source.connect(ctx.destination);
    source.start();
  }
}
