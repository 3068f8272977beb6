/**
 * Thin bindings over the rirkit CLI for Node/TypeScript data pipelines.
 *
 * Audio crosses the boundary as Float32Array channels plus a sample rate;
 * configuration keys are exactly the CLI/config-file names. Nothing is
 * computed here: every operation shells out to the core and parses its
 * file outputs, so binding results cannot drift from core results.
 */

import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { CoreError, runCli } from "./runner.js";
import { decodeWav, encodeWavFloat32, WavData } from "./wav.js";

export { CoreError } from "./runner.js";
export { decodeWav, encodeWavFloat32 } from "./wav.js";

export interface SimulateConfig {
  /** Room dimensions in meters, e.g. [4, 5, 3]. */
  room: [number, number, number];
  /** Target reverberation time in seconds. */
  t60: number;
  source: [number, number, number];
  /** Microphone-array center; a 6-mic, 7 cm circular array is placed there. */
  array: [number, number, number];
  engine?: "image" | "gas";
  seed?: number;
  rays?: number;
  fs?: number;
  ir_length?: number;
  max_order?: number;
  scattering?: number;
  receiver_radius?: number;
}

export interface SimulatedIr {
  /** One Float32Array per microphone channel. */
  samples: Float32Array[];
  sampleRate: number;
  /** Parsed JSON sidecar (engine, seed, geometry, params). */
  metadata: Record<string, unknown>;
}

export interface AnalyzeChannel {
  channel: number;
  t60_s: number | null;
  drr_db: number | "inf" | "-inf" | null;
  direct_e?: number;
  early_e?: number;
  late_e?: number;
  edc_db?: number[];
}

export interface AnalyzeResult {
  /** Channel-0 values, for the common mono case. */
  t60_s: number | null;
  drr_db: number | "inf" | "-inf" | null;
  edc: Float64Array;
  channels: AnalyzeChannel[];
}

function withTempDir<T>(fn: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "rirkit-"));
  try {
    return fn(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

/** Simulate one multichannel RIR; bit-identical to the CLI for equal inputs. */
export function boundSimulateRir(config: SimulateConfig): SimulatedIr {
  return withTempDir((dir) => {
    const cfgPath = join(dir, "config.json");
    const outPath = join(dir, "rir.wav");
    writeFileSync(cfgPath, JSON.stringify(config));
    runCli(["simulate", "--config", cfgPath, "--out", outPath]);
    const wav: WavData = decodeWav(readFileSync(outPath));
    const metadata = JSON.parse(readFileSync(join(dir, "rir.json"), "utf-8"));
    return { samples: wav.channels, sampleRate: wav.sampleRate, metadata };
  });
}

export interface AugmentResult {
  /** Output channels ("first" gives one). */
  samples: Float32Array[];
  sampleRate: number;
  /** Per-utterance report entry (noise gain, offset, scale). */
  report: Record<string, unknown>;
}

/** Convolve one utterance with an IR and mix noise at an exact SNR. */
export function boundAugment(
  speech: Float32Array,
  ir: Float32Array[] | Float32Array,
  noise: Float32Array,
  snrDb: number,
  seed: number,
  sampleRate = 16000,
  channels: "first" | "all" = "first",
): AugmentResult {
  const irChannels = Array.isArray(ir) ? ir : [ir as Float32Array];
  return withTempDir((dir) => {
    const speechPath = join(dir, "speech.wav");
    const noisePath = join(dir, "noise.wav");
    const rirPath = join(dir, "rir_00000.wav");
    writeFileSync(speechPath, encodeWavFloat32([speech], sampleRate));
    writeFileSync(noisePath, encodeWavFloat32([noise], sampleRate));
    writeFileSync(rirPath, encodeWavFloat32(irChannels, sampleRate));
    writeFileSync(
      join(dir, "rir_00000.json"),
      JSON.stringify({ engine: "image", seed: 0, sample_rate_hz: sampleRate }),
    );
    const manifestPath = join(dir, "manifest.json");
    writeFileSync(
      manifestPath,
      JSON.stringify({
        engine: "image",
        seed: 0,
        count: 1,
        items: [{ index: 0, wav: "rir_00000.wav", config: {} }],
      }),
    );
    writeFileSync(join(dir, "speech.txt"), `${speechPath}\n`);
    writeFileSync(join(dir, "noise.txt"), `${noisePath}\n`);
    const outDir = join(dir, "out");
    runCli([
      "augment",
      "--speech-list", join(dir, "speech.txt"),
      "--rir-manifest", manifestPath,
      "--noise-list", join(dir, "noise.txt"),
      "--snr", `${snrDb}:${snrDb}`,
      "--channels", channels,
      "--seed", String(seed),
      "--out-dir", outDir,
    ]);
    const report = JSON.parse(readFileSync(join(outDir, "augment_report.json"), "utf-8"));
    const item = report.items[0] as Record<string, unknown>;
    const wav = decodeWav(readFileSync(join(outDir, item.output as string)));
    return { samples: wav.channels, sampleRate: wav.sampleRate, report: item };
  });
}

/** Schroeder analysis of an in-memory IR: T60, DRR, and the decay curve. */
export function boundAnalyze(
  ir: Float32Array[] | Float32Array,
  fs: number,
  geometry?: { source_m: number[]; mics_m: number[][] },
): AnalyzeResult {
  const irChannels = Array.isArray(ir) ? ir : [ir as Float32Array];
  return withTempDir((dir) => {
    const wavPath = join(dir, "ir.wav");
    writeFileSync(wavPath, encodeWavFloat32(irChannels, fs));
    const sidecar: Record<string, unknown> = { engine: "external", seed: 0, sample_rate_hz: fs };
    if (geometry) {
      sidecar.source_m = geometry.source_m;
      sidecar.mics_m = geometry.mics_m;
    }
    writeFileSync(join(dir, "ir.json"), JSON.stringify(sidecar));
    const stdout = runCli(["analyze", "--ir", wavPath, "--json", "--edc"]);
    const doc = JSON.parse(stdout);
    const chans = doc.items[0].channels as AnalyzeChannel[];
    const first = chans[0];
    return {
      t60_s: first.t60_s ?? null,
      drr_db: first.drr_db ?? null,
      edc: Float64Array.from(first.edc_db ?? []),
      channels: chans,
    };
  });
}
