// Wires panel interactions to the service: generate, analyze, variation.
// At most one generate request is in flight; the latest intent wins.

import { ApiClient } from "./api.js";
import { base64ToBytes, digestBytes, Player } from "./audio.js";
import { ControlPanelState, initialState, renormalize } from "./state.js";

export interface PanelEvents {
  onAudio?(wavBytes: Uint8Array, digest: string): void;
  onSliders?(c: number[]): void;
  onError?(message: string): void;
  onBusy?(busy: boolean): void;
}

export class PanelController {
  state: ControlPanelState = initialState();
  private inFlight = false;
  private queued: (() => Promise<void>) | null = null;

  constructor(
    private api: ApiClient,
    private player: Player,
    private events: PanelEvents = {},
  ) {}

  async ensureSession(): Promise<string> {
    if (!this.state.sessionId) {
      this.state.sessionId = await this.api.createSession();
    }
    return this.state.sessionId;
  }

  currentConditions(): number[] {
    return renormalize(this.state.sliders);
  }

  private async runExclusive(task: () => Promise<void>): Promise<void> {
    if (this.inFlight) {
      this.queued = task; // queue of one: later clicks replace earlier ones
      return;
    }
    this.inFlight = true;
    this.events.onBusy?.(true);
    try {
      await task();
      while (this.queued) {
        const next = this.queued;
        this.queued = null;
        await next();
      }
    } catch (err) {
      this.events.onError?.(err instanceof Error ? err.message : String(err));
    } finally {
      this.inFlight = false;
      this.events.onBusy?.(false);
    }
  }

  private async renderAt(u: number): Promise<void> {
    const sessionId = await this.ensureSession();
    const v = this.state.mode === "2d" ? this.state.v2 : null;
    const resp = await this.api.generate(sessionId, u, v, this.currentConditions());
    const bytes = base64ToBytes(resp.wav_base64);
    const digest = await digestBytes(bytes);
    this.state.lastDigest = digest;
    await this.player.play(bytes);
    this.events.onAudio?.(bytes, digest);
  }

  /** Generate button: sample a fresh center, then render at the plane origin. */
  generate(): Promise<void> {
    return this.runExclusive(async () => {
      const sessionId = await this.ensureSession();
      await this.api.sampleCenter(sessionId, this.state.seed, this.state.mode);
      this.state.variation = 0;
      this.state.v2 = 0;
      await this.renderAt(0);
    });
  }

  /** Variation slider: re-render displaced by u along the current direction. */
  setVariation(u: number): Promise<void> {
    return this.runExclusive(async () => {
      this.state.variation = u;
      await this.renderAt(u);
    });
  }

  /** Change Variation Direction button: new directions, same center, re-render. */
  changeDirection(): Promise<void> {
    return this.runExclusive(async () => {
      const sessionId = await this.ensureSession();
      await this.api.changeDirection(sessionId, this.state.seed);
      await this.renderAt(this.state.variation);
    });
  }

  /** Analyze button: upload a WAV, adopt the returned class mix and center. */
  analyze(file: Blob, filename: string): Promise<void> {
    return this.runExclusive(async () => {
      if (!filename.toLowerCase().endsWith(".wav")) {
        throw new Error("only WAV files can be analyzed");
      }
      const head = new Uint8Array(await file.slice(0, 12).arrayBuffer());
      const riff = String.fromCharCode(...head.slice(0, 4));
      const wave = String.fromCharCode(...head.slice(8, 12));
      if (riff !== "RIFF" || wave !== "WAVE") {
        throw new Error("file is not a RIFF/WAVE audio file");
      }
      const sessionId = await this.ensureSession();
      const resp = await this.api.analyze(sessionId, file, filename);
      this.state.sliders = [resp.c[0], resp.c[1], resp.c[2]];
      this.state.variation = 0;
      this.events.onSliders?.(resp.c);
    });
  }

  setSlider(index: 0 | 1 | 2, value: number): void {
    this.state.sliders[index] = value;
  }

  setSeed(seed: number | null): void {
    this.state.seed = seed;
  }

  setMode(mode: "1d" | "2d"): void {
    this.state.mode = mode;
  }

  setV2(v: number): Promise<void> {
    return this.runExclusive(async () => {
      this.state.v2 = v;
      await this.renderAt(this.state.variation);
    });
  }
}
