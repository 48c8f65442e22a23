// DOM wiring for the control panel.

import { ApiClient } from "./api.js";
import { decodeWav, WebAudioPlayer } from "./audio.js";
import { PanelController } from "./controller.js";
import { CLASS_NAMES } from "./state.js";
import { drawSpectrogram, drawWaveform } from "./spectrogram.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function showError(message: string): void {
  const banner = byId<HTMLDivElement>("error-banner");
  banner.textContent = message;
  banner.style.display = "block";
  window.setTimeout(() => (banner.style.display = "none"), 6000);
}

function main(): void {
  const controller = new PanelController(new ApiClient(), new WebAudioPlayer(), {
    onAudio(bytes, digest) {
      byId<HTMLSpanElement>("digest").textContent = digest.slice(0, 16);
      try {
        const { samples } = decodeWav(bytes);
        drawWaveform(byId<HTMLCanvasElement>("waveform"), samples);
        drawSpectrogram(byId<HTMLCanvasElement>("spectrogram"), samples);
      } catch {
        // display is best-effort; playback already happened
      }
    },
    onSliders(c) {
      CLASS_NAMES.forEach((name, i) => {
        byId<HTMLInputElement>(`slider-${name}`).value = String(c[i]);
        byId<HTMLSpanElement>(`value-${name}`).textContent = c[i].toFixed(2);
      });
      byId<HTMLInputElement>("variation").value = "0";
      byId<HTMLSpanElement>("variation-value").textContent = "0.00";
    },
    onError: showError,
    onBusy(busy) {
      byId<HTMLButtonElement>("btn-generate").disabled = busy;
      byId<HTMLButtonElement>("btn-direction").disabled = busy;
    },
  });

  CLASS_NAMES.forEach((name, i) => {
    const slider = byId<HTMLInputElement>(`slider-${name}`);
    slider.addEventListener("input", () => {
      controller.setSlider(i as 0 | 1 | 2, Number(slider.value));
      byId<HTMLSpanElement>(`value-${name}`).textContent = Number(slider.value).toFixed(2);
    });
  });

  const seedInput = byId<HTMLInputElement>("seed");
  seedInput.addEventListener("input", () => {
    controller.setSeed(seedInput.value === "" ? null : Number(seedInput.value));
  });

  byId<HTMLButtonElement>("btn-generate").addEventListener("click", () => void controller.generate());
  byId<HTMLButtonElement>("btn-direction").addEventListener("click", () => void controller.changeDirection());

  const variation = byId<HTMLInputElement>("variation");
  variation.addEventListener("change", () => {
    byId<HTMLSpanElement>("variation-value").textContent = Number(variation.value).toFixed(2);
    void controller.setVariation(Number(variation.value));
  });

  const modeToggle = byId<HTMLInputElement>("mode-2d");
  const advanced = byId<HTMLDivElement>("advanced-panel");
  modeToggle.addEventListener("change", () => {
    controller.setMode(modeToggle.checked ? "2d" : "1d");
    advanced.style.display = modeToggle.checked ? "block" : "none";
  });
  const v2 = byId<HTMLInputElement>("v2");
  v2.addEventListener("change", () => void controller.setV2(Number(v2.value)));

  const fileInput = byId<HTMLInputElement>("analyze-file");
  byId<HTMLButtonElement>("btn-analyze").addEventListener("click", () => fileInput.click());
  fileInput.addEventListener("change", () => {
    const file = fileInput.files?.[0];
    if (file) void controller.analyze(file, file.name);
    fileInput.value = "";
  });
}

document.addEventListener("DOMContentLoaded", main);
