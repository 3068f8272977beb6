"""Reverberant noisy speech synthesis.

Clean utterances are convolved with simulated RIRs and mixed with noise at a
target SNR. SNR is defined over the full wet (reverberant) utterance as
10*log10(P_signal / (g^2 * P_noise)); when the mix would clip, everything is
peak-normalized to 0.9 and the applied scale recorded. All per-utterance
randomness is keyed on (seed, utterance index), so results do not depend on
the processing schedule.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .analysis import ImpulseResponse
from .errors import RateMismatchError, SilentSignalError
from .io import dump_json, read_audio, read_ir, write_audio
from .sampler import load_manifest

_AUGMENT_STREAM = 13
CLIP_PEAK = 0.9


@dataclass
class AudioBuffer:
    """(channels, samples) float audio at a fixed sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if self.sample_rate <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]


@dataclass
class AugmentSpec:
    """Corpus-level augmentation request."""

    speech_manifest: list[str]
    rir_manifest: str
    noise_manifest: list[str]
    snr_range_db: tuple[float, float] = (0.0, 24.0)
    output_channels: str = "first"
    seed: int = 0

    def __post_init__(self):
        if not self.speech_manifest:
            raise ValueError("speech manifest is empty")
        if not self.noise_manifest:
            raise ValueError("noise manifest is empty")
        lo, hi = self.snr_range_db
        if lo > hi:
            raise ValueError(f"snr range low {lo} exceeds high {hi}")
        if self.output_channels not in ("first", "all"):
            raise ValueError(f"output_channels must be 'first' or 'all', got {self.output_channels!r}")


class MixInfo(NamedTuple):
    noise_gain: float
    noise_offset: int
    scale: float  # peak-normalization applied to the mix (1.0 when none)


def convolve(speech: AudioBuffer, ir: ImpulseResponse) -> AudioBuffer:
    """Full linear convolution of a mono utterance with every IR channel.

    Frequency-domain overlap-add with a fixed FFT size (the power of two at or
    above 4x the IR length) so outputs are bit-reproducible. Output length is
    len(speech) + len(ir) - 1.
    """
    if speech.sample_rate != ir.sample_rate:
        raise RateMismatchError(speech.sample_rate, ir.sample_rate)
    if speech.n_channels != 1:
        raise ValueError(f"expected mono speech, got {speech.n_channels} channels")
    x = speech.samples[0]
    n_out = x.size + ir.n_samples - 1
    n_fft = 1 << max(4, math.ceil(math.log2(4 * ir.n_samples)))
    block = n_fft - ir.n_samples + 1
    out = np.zeros((ir.n_channels, n_out))
    h_spec = np.fft.rfft(ir.samples, n=n_fft, axis=1)
    for start in range(0, x.size, block):
        seg = x[start : start + block]
        seg_spec = np.fft.rfft(seg, n=n_fft)
        y = np.fft.irfft(seg_spec[None, :] * h_spec, n=n_fft, axis=1)
        stop = min(start + n_fft, n_out)
        out[:, start:stop] += y[:, : stop - start]
    return AudioBuffer(samples=out, sample_rate=speech.sample_rate)


def mix_noise(
    wet: AudioBuffer,
    noise: AudioBuffer,
    snr_db: float,
    rng: np.random.Generator,
) -> tuple[AudioBuffer, MixInfo]:
    """Add noise at the requested SNR; returns the mix and what was applied.

    The noise is looped if shorter than the utterance and cropped at a random
    offset drawn from rng. Mono noise is shared across output channels.
    """
    p_signal = float(np.mean(wet.samples**2))
    if p_signal <= 0.0:
        raise SilentSignalError("wet signal has zero power; SNR is undefined")
    src = noise.samples[0]
    n = wet.n_samples
    if src.size == 0:
        raise ValueError("noise buffer is empty")
    if src.size < n:
        src = np.tile(src, int(math.ceil(n / src.size)) + 1)
    offset = int(rng.integers(0, src.size - n + 1))
    crop = src[offset : offset + n]
    p_noise = float(np.mean(crop**2))
    if p_noise <= 0.0:
        raise SilentSignalError("noise crop has zero power; SNR is undefined")
    gain = math.sqrt(p_signal / (p_noise * 10.0 ** (snr_db / 10.0)))
    mixed = wet.samples + gain * crop[None, :]
    peak = float(np.abs(mixed).max())
    scale = CLIP_PEAK / peak if peak > 1.0 else 1.0
    if scale != 1.0:
        mixed = mixed * scale
    return AudioBuffer(samples=mixed, sample_rate=wet.sample_rate), MixInfo(gain, offset, scale)


def _utterance_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([_AUGMENT_STREAM, int(seed), int(index)]))


def augment_utterance(
    spec: AugmentSpec,
    index: int,
    rir_items: list[dict],
    rir_dir: Path,
) -> tuple[AudioBuffer, dict]:
    """One utterance: pick RIR/noise/SNR from the per-index stream, render."""
    rng = _utterance_rng(spec.seed, index)
    rir_pick = int(rng.integers(0, len(rir_items)))
    noise_pick = int(rng.integers(0, len(spec.noise_manifest)))
    snr_db = float(rng.uniform(*spec.snr_range_db))

    speech_path = spec.speech_manifest[index]
    samples, fs = read_audio(speech_path)
    speech = AudioBuffer(samples=samples[:1], sample_rate=fs)

    item = rir_items[rir_pick]
    ir = read_ir(rir_dir / item["wav"])
    if spec.output_channels == "first":
        ir = ImpulseResponse(samples=ir.samples[:1], sample_rate=ir.sample_rate, metadata=ir.metadata)
    wet = convolve(speech, ir)

    noise_path = spec.noise_manifest[noise_pick]
    noise_samples, noise_fs = read_audio(noise_path)
    if noise_fs != wet.sample_rate:
        raise RateMismatchError(wet.sample_rate, noise_fs)
    mixed, info = mix_noise(wet, AudioBuffer(samples=noise_samples[:1], sample_rate=noise_fs), snr_db, rng)

    record = {
        "index": index,
        "speech": str(speech_path),
        "rir_index": int(item["index"]),
        "rir_wav": item["wav"],
        "noise": str(noise_path),
        "snr_db": snr_db,
        "noise_gain": info.noise_gain,
        "noise_offset": info.noise_offset,
        "scale": info.scale,
    }
    return mixed, record


def augment_corpus(spec: AugmentSpec, out_dir, n_workers: int = 1) -> dict:
    """Render the whole corpus; returns the report dict (also written to disk).

    Per-file failures are recorded and skipped; the report's "failures" list
    and counts reconcile exactly with the written outputs.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = load_manifest(spec.rir_manifest)
    rir_items = manifest["items"]
    rir_dir = Path(spec.rir_manifest).parent

    def run_one(index: int) -> tuple[int, Optional[dict], Optional[str]]:
        stem = Path(spec.speech_manifest[index]).stem
        out_path = out_dir / f"{index:05}_{stem}.wav"
        try:
            mixed, record = augment_utterance(spec, index, rir_items, rir_dir)
            write_audio(out_path, mixed.samples, mixed.sample_rate)
            record["output"] = out_path.name
            return index, record, None
        except Exception as exc:  # per-file isolation
            out_path.unlink(missing_ok=True)
            return index, None, f"{spec.speech_manifest[index]}: {exc}"

    indices = list(range(len(spec.speech_manifest)))
    if n_workers <= 1:
        results = [run_one(i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(run_one, indices))

    results.sort(key=lambda r: r[0])
    items = [r[1] for r in results if r[1] is not None]
    failures = [r[2] for r in results if r[2] is not None]
    report = {
        "seed": int(spec.seed),
        "snr_range_db": list(spec.snr_range_db),
        "output_channels": spec.output_channels,
        "count": len(items),
        "failure_count": len(failures),
        "failures": failures,
        "items": items,
    }
    dump_json(report, out_dir / "augment_report.json")
    return report
