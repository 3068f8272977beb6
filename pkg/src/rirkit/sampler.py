"""Randomized far-field room configurations and batch IR dataset generation.

Each configuration is a pure function of (seed, index): rooms 3-8 x 3-10 x
2.5-6 m, T60 uniform in [0.05, 0.5] s (resampled when the room cannot realize
it with absorption <= 0.99), source and 6-mic circular array (7 cm diameter,
horizontal, random in-plane rotation) at least 0.3 m from every wall and
0.5-6 m apart.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .constants import DEFAULT_MIC_RADIUS, DEFAULT_N_MICS
from .errors import SamplingFailedError
from .geometry import circular_array
from .io import dump_json, sidecar_path, write_ir
from .materials import min_achievable_t60

DIM_RANGES = ((3.0, 8.0), (3.0, 10.0), (2.5, 6.0))
T60_RANGE = (0.05, 0.5)
WALL_MARGIN = 0.3
DIST_RANGE = (0.5, 6.0)
DEFAULT_SCATTERING = 0.5
_REJECTION_CAP = 10_000
_CONFIG_STREAM = 12
_ENGINE_SEED_STREAM = 7


@dataclass
class RoomConfig:
    """One sampled far-field scenario."""

    room_dims_m: list[float]
    t60_target_s: float
    scattering: float
    source_m: list[float]
    array_center_m: list[float]
    array_axis: list[float]
    mics_m: list[list[float]]
    seed: int
    index: int

    def to_json_dict(self) -> dict:
        return {
            "room_dims_m": self.room_dims_m,
            "t60_target_s": self.t60_target_s,
            "scattering": self.scattering,
            "source_m": self.source_m,
            "array_center_m": self.array_center_m,
            "array_axis": self.array_axis,
            "mics_m": self.mics_m,
            "seed": self.seed,
            "index": self.index,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "RoomConfig":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__})


def sample_config(seed: int, index: int, scattering: Optional[float] = None) -> RoomConfig:
    """Deterministic scenario draw for (seed, index)."""
    rng = np.random.default_rng(np.random.SeedSequence([_CONFIG_STREAM, int(seed), int(index)]))

    dims = np.array([rng.uniform(lo, hi) for lo, hi in DIM_RANGES])

    t60 = rng.uniform(*T60_RANGE)
    t_min = min_achievable_t60(dims)
    attempts = 0
    while t60 < t_min:
        attempts += 1
        if attempts > _REJECTION_CAP:
            raise SamplingFailedError(f"could not sample a reachable T60 for room {dims}")
        t60 = rng.uniform(*T60_RANGE)

    # array center keeps every mic (radius 0.035 m, horizontal plane) clear of
    # the 0.3 m wall margin
    arr_margin = np.array([WALL_MARGIN + DEFAULT_MIC_RADIUS, WALL_MARGIN + DEFAULT_MIC_RADIUS, WALL_MARGIN])
    src_margin = np.full(3, WALL_MARGIN)
    attempts = 0
    while True:
        attempts += 1
        if attempts > _REJECTION_CAP:
            raise SamplingFailedError(
                f"could not place source and array {DIST_RANGE} m apart in room {dims}"
            )
        center = np.array([rng.uniform(arr_margin[i], dims[i] - arr_margin[i]) for i in range(3)])
        source = np.array([rng.uniform(src_margin[i], dims[i] - src_margin[i]) for i in range(3)])
        dist = float(np.linalg.norm(source - center))
        if DIST_RANGE[0] <= dist <= DIST_RANGE[1]:
            break

    phase = rng.uniform(0.0, 2.0 * np.pi)
    axis = np.array([0.0, 0.0, 1.0])
    mics = circular_array(center, DEFAULT_MIC_RADIUS, DEFAULT_N_MICS, axis, phase=phase)

    return RoomConfig(
        room_dims_m=[float(v) for v in dims],
        t60_target_s=float(t60),
        scattering=DEFAULT_SCATTERING if scattering is None else float(scattering),
        source_m=[float(v) for v in source],
        array_center_m=[float(v) for v in center],
        array_axis=[float(v) for v in axis],
        mics_m=[[float(v) for v in m] for m in mics],
        seed=int(seed),
        index=int(index),
    )


def engine_seed(seed: int, index: int) -> int:
    """Per-item tracer seed derived from the dataset seed and item index."""
    ss = np.random.SeedSequence([_ENGINE_SEED_STREAM, int(seed), int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


def generate_dataset(
    n: int,
    seed: int,
    engine: str,
    params,
    out_dir,
    scattering: Optional[float] = None,
    progress: Optional[Callable[[int, int, str], None]] = None,
) -> Path:
    """Write n WAV+JSON IRs plus a manifest; returns the manifest path.

    Output files are rir_{engine}_{index:05}.wav. The run is resumable:
    indices whose WAV and sidecar already exist and whose sidecar matches the
    expected configuration are skipped. Partially written files are removed
    on failure.
    """
    from .simulate import resolve_params, simulate_rir
    from .tracer import TraceParams

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if engine not in ("image", "gas"):
        raise ValueError(f"unknown engine {engine!r}")

    items = []
    for index in range(n):
        config = sample_config(seed, index, scattering=scattering)
        wav_path = out_dir / f"rir_{engine}_{index:05}.wav"
        item_params = params
        if isinstance(params, TraceParams):
            item_params = replace(params, seed=engine_seed(seed, index))
        _, params_echo = resolve_params(config, engine, item_params)
        if _output_valid(wav_path, config, engine, params_echo):
            status = "kept"
        else:
            try:
                ir = simulate_rir(config, engine, item_params)
                write_ir(ir, wav_path)
            except Exception:
                wav_path.unlink(missing_ok=True)
                sidecar_path(wav_path).unlink(missing_ok=True)
                raise
            status = "written"
        items.append({"index": index, "wav": wav_path.name, "config": config.to_json_dict()})
        if progress is not None:
            progress(index + 1, n, status)

    manifest = {"engine": engine, "seed": int(seed), "count": int(n), "items": items}
    manifest_path = out_dir / f"manifest_{engine}.json"
    dump_json(manifest, manifest_path)
    return manifest_path


def _output_valid(wav_path: Path, config: RoomConfig, engine: str, params_echo: dict) -> bool:
    sc = sidecar_path(wav_path)
    if not wav_path.exists() or not sc.exists():
        return False
    try:
        meta = json.loads(sc.read_text())
    except (OSError, json.JSONDecodeError):
        return False
    return (
        meta.get("engine") == engine
        and meta.get("room_dims_m") == config.room_dims_m
        and meta.get("source_m") == config.source_m
        and meta.get("mics_m") == config.mics_m
        and meta.get("t60_target_s") == config.t60_target_s
        and meta.get("params") == params_echo
    )


def load_manifest(path) -> dict:
    manifest = json.loads(Path(path).read_text())
    for key in ("engine", "seed", "count", "items"):
        if key not in manifest:
            raise ValueError(f"manifest {path} is missing the {key!r} field")
    return manifest
