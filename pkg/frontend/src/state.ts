// Control-panel state: class sliders, variation slider, session bookkeeping.

export const CLASS_NAMES = ["kick", "snare", "cymbal"] as const;

export interface ControlPanelState {
  sliders: [number, number, number]; // raw slider positions in [0, 1]
  variation: number; // [-3, 3]
  v2: number; // second plane coordinate (advanced 2D mode)
  mode: "1d" | "2d";
  seed: number | null; // optional reproducibility seed
  sessionId: string | null;
  lastDigest: string | null;
}

export function initialState(): ControlPanelState {
  return {
    sliders: [1, 0, 0],
    variation: 0,
    v2: 0,
    mode: "1d",
    seed: null,
    sessionId: null,
    lastDigest: null,
  };
}

/** Renormalize raw slider values onto the 3-simplex; uniform when all zero. */
export function renormalize(sliders: readonly number[]): number[] {
  const clipped = sliders.map((s) => Math.max(0, s));
  const sum = clipped.reduce((a, b) => a + b, 0);
  if (sum <= 0) return [1 / 3, 1 / 3, 1 / 3];
  return clipped.map((s) => s / sum);
}
