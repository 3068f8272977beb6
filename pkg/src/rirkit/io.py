"""WAV and JSON-sidecar file I/O.

IRs are stored as 32-bit float WAV with a same-basename ".json" sidecar
carrying engine, seed, geometry, and simulation parameters. Audio for the
augmentation pipeline is accepted as PCM16 or float32 WAV and written as
float32.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

import numpy as np
from scipy.io import wavfile

from .analysis import ImpulseResponse, IrMetadata

PathLike = Union[str, Path]


def sidecar_path(wav_path: PathLike) -> Path:
    return Path(wav_path).with_suffix(".json")


def dump_json(obj: dict, path: PathLike) -> None:
    """Deterministic JSON serialization (sorted keys, fixed layout)."""
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_ir(ir: ImpulseResponse, wav_path: PathLike) -> Path:
    """Write an IR as float32 WAV plus its JSON sidecar; returns the WAV path."""
    wav_path = Path(wav_path)
    data = np.ascontiguousarray(ir.samples.T.astype(np.float32))
    if data.shape[1] == 1:
        data = data[:, 0]
    wavfile.write(wav_path, int(ir.sample_rate), data)
    meta = ir.metadata if ir.metadata is not None else IrMetadata()
    dump_json(meta.to_json_dict(int(ir.sample_rate)), sidecar_path(wav_path))
    return wav_path


def read_ir(wav_path: PathLike) -> ImpulseResponse:
    """Read a WAV IR and its sidecar (sidecar optional)."""
    wav_path = Path(wav_path)
    fs, data = wavfile.read(wav_path)
    samples = _to_float(data).T if data.ndim == 2 else _to_float(data)[None, :]
    meta = None
    sc = sidecar_path(wav_path)
    if sc.exists():
        meta = IrMetadata.from_json_dict(json.loads(sc.read_text()))
    return ImpulseResponse(samples=samples, sample_rate=int(fs), metadata=meta)


def _to_float(data: np.ndarray) -> np.ndarray:
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype == np.int32:
        return data.astype(np.float64) / 2147483648.0
    if data.dtype in (np.float32, np.float64):
        return data.astype(np.float64)
    raise ValueError(f"unsupported WAV sample format {data.dtype}")


def read_audio(path: PathLike) -> tuple[np.ndarray, int]:
    """Read a WAV file into (channels, samples) float64 plus its sample rate."""
    fs, data = wavfile.read(Path(path))
    samples = _to_float(data)
    if samples.ndim == 1:
        samples = samples[None, :]
    else:
        samples = samples.T
    return samples, int(fs)


def write_audio(path: PathLike, samples: np.ndarray, sample_rate: int) -> None:
    """Write (channels, samples) audio as float32 WAV."""
    samples = np.atleast_2d(np.asarray(samples))
    data = np.ascontiguousarray(samples.T.astype(np.float32))
    if data.shape[1] == 1:
        data = data[:, 0]
    wavfile.write(Path(path), int(sample_rate), data)
