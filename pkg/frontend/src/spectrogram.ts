// Display-only spectrogram computed client-side from the returned waveform.

function fftRadix2(re: Float64Array, im: Float64Array): void {
  const n = re.length;
  for (let i = 1, j = 0; i < n; i++) {
    let bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      [re[i], re[j]] = [re[j], re[i]];
      [im[i], im[j]] = [im[j], im[i]];
    }
  }
  for (let len = 2; len <= n; len <<= 1) {
    const ang = (-2 * Math.PI) / len;
    const wRe = Math.cos(ang);
    const wIm = Math.sin(ang);
    for (let i = 0; i < n; i += len) {
      let curRe = 1;
      let curIm = 0;
      for (let k = 0; k < len / 2; k++) {
        const uRe = re[i + k];
        const uIm = im[i + k];
        const vRe = re[i + k + len / 2] * curRe - im[i + k + len / 2] * curIm;
        const vIm = re[i + k + len / 2] * curIm + im[i + k + len / 2] * curRe;
        re[i + k] = uRe + vRe;
        im[i + k] = uIm + vIm;
        re[i + k + len / 2] = uRe - vRe;
        im[i + k + len / 2] = uIm - vIm;
        const nextRe = curRe * wRe - curIm * wIm;
        curIm = curRe * wIm + curIm * wRe;
        curRe = nextRe;
      }
    }
  }
}

/** Magnitude spectrogram in dB, frames x bins, for canvas rendering. */
export function spectrogramFrames(samples: Float32Array, fftSize = 1024, hop = 256): Float64Array[] {
  const win = new Float64Array(fftSize);
  for (let i = 0; i < fftSize; i++) win[i] = 0.5 - 0.5 * Math.cos((2 * Math.PI * i) / fftSize);
  const frames: Float64Array[] = [];
  for (let start = 0; start + fftSize <= samples.length; start += hop) {
    const re = new Float64Array(fftSize);
    const im = new Float64Array(fftSize);
    for (let i = 0; i < fftSize; i++) re[i] = samples[start + i] * win[i];
    fftRadix2(re, im);
    const mags = new Float64Array(fftSize / 2);
    for (let k = 0; k < fftSize / 2; k++) {
      mags[k] = 20 * Math.log10(Math.max(Math.hypot(re[k], im[k]), 1e-5));
    }
    frames.push(mags);
  }
  return frames;
}

export function drawSpectrogram(canvas: HTMLCanvasElement, samples: Float32Array): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const frames = spectrogramFrames(samples);
  if (!frames.length) return;
  const bins = frames[0].length;
  const w = canvas.width;
  const h = canvas.height;
  ctx.fillStyle = "#10141c";
  ctx.fillRect(0, 0, w, h);
  const img = ctx.createImageData(w, h);
  for (let x = 0; x < w; x++) {
    const frame = frames[Math.floor((x / w) * frames.length)];
    for (let y = 0; y < h; y++) {
      // log-ish frequency axis, low at the bottom
      const bin = Math.min(bins - 1, Math.floor(Math.pow((h - 1 - y) / h, 2) * bins));
      const db = frame[bin];
      const t = Math.min(1, Math.max(0, (db + 60) / 120));
      const idx = (y * w + x) * 4;
      img.data[idx] = 30 + 225 * t;
      img.data[idx + 1] = 20 + 140 * t * t;
      img.data[idx + 2] = 60 + 120 * t * (1 - t) + 100 * t * t;
      img.data[idx + 3] = 255;
    }
  }
  ctx.putImageData(img, 0, 0);
}

export function drawWaveform(canvas: HTMLCanvasElement, samples: Float32Array): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const w = canvas.width;
  const h = canvas.height;
  ctx.fillStyle = "#10141c";
  ctx.fillRect(0, 0, w, h);
  ctx.strokeStyle = "#53d1b6";
  ctx.beginPath();
  for (let x = 0; x < w; x++) {
    const i = Math.floor((x / w) * samples.length);
    const y = h / 2 - samples[i] * (h / 2 - 2);
    if (x === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  }
  ctx.stroke();
}
