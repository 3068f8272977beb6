"""Engine-agnostic RIR simulation from a sampled room configuration."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from .analysis import ImpulseResponse, IrMetadata
from .constants import SPEED_OF_SOUND
from .geometry import make_shoebox
from .image_source import default_max_order, render_ir_image
from .materials import Material, sabine_absorption
from .sampler import RoomConfig
from .tracer import TraceParams, histogram_to_ir, trace


@dataclass
class ImageParams:
    """Image-engine configuration; None fields resolve from the room config."""

    fs: int = 16000
    ir_length: Optional[float] = None
    max_order: Optional[int] = None
    fractional_delay: bool = True

    def to_json_dict(self) -> dict:
        return {
            "fs": self.fs,
            "ir_length": self.ir_length,
            "max_order": self.max_order,
            "fractional_delay": self.fractional_delay,
        }


EngineParams = Union[TraceParams, ImageParams]


def auto_ir_length(config: RoomConfig, fs: int) -> float:
    """Covers the direct arrival plus ~1.3 decay times, rounded up to 10 ms."""
    max_dist = max(float(np.linalg.norm(np.asarray(m) - np.asarray(config.source_m))) for m in config.mics_m)
    length = max_dist / SPEED_OF_SOUND + 1.3 * config.t60_target_s + 0.05
    return math.ceil(length * 100.0) / 100.0


def resolve_params(config: RoomConfig, engine: str, params: EngineParams) -> tuple[EngineParams, dict]:
    """Fill auto fields for one room; returns (resolved params, sidecar echo)."""
    if engine == "image":
        if not isinstance(params, ImageParams):
            raise TypeError("image engine expects ImageParams")
        resolved = replace(
            params,
            ir_length=params.ir_length if params.ir_length is not None else auto_ir_length(config, params.fs),
            max_order=params.max_order
            if params.max_order is not None
            else default_max_order(config.room_dims_m, config.t60_target_s),
        )
        return resolved, resolved.to_json_dict()
    if engine == "gas":
        if not isinstance(params, TraceParams):
            raise TypeError("gas engine expects TraceParams")
        resolved = params
        if params.ir_length is None:
            resolved = replace(params, ir_length=auto_ir_length(config, params.fs))
        return resolved, resolved.to_json_dict()
    raise ValueError(f"unknown engine {engine!r}, expected 'image' or 'gas'")


def simulate_rir(config: RoomConfig, engine: str, params: EngineParams) -> ImpulseResponse:
    """Simulate the multichannel IR of one room configuration.

    Builds a uniform-material shoebox with Sabine absorption for the config's
    T60 target and the config's scattering coefficient, then runs the selected
    engine for all microphones.
    """
    dims = np.asarray(config.room_dims_m, float)
    alpha = sabine_absorption(dims, config.t60_target_s)
    scene = make_shoebox(dims, materials=(Material(absorption=alpha, scattering=config.scattering),))
    receivers = [np.asarray(m, float) for m in config.mics_m]
    params, params_echo = resolve_params(config, engine, params)

    meta = IrMetadata(
        engine=engine,
        room_dims_m=[float(v) for v in dims],
        source_m=[float(v) for v in config.source_m],
        mics_m=[[float(v) for v in m] for m in config.mics_m],
        t60_target_s=float(config.t60_target_s),
        extras={
            "scattering": float(config.scattering),
            "absorption": float(alpha),
            "index": int(config.index),
            "params": params_echo,
        },
    )

    if engine == "image":
        meta.seed = int(config.seed)
        return render_ir_image(
            scene,
            np.asarray(config.source_m, float),
            receivers,
            max_order=params.max_order,
            fs=params.fs,
            ir_length=params.ir_length,
            fractional_delay=params.fractional_delay,
            metadata=meta,
        )
    meta.seed = int(params.seed)
    hist = trace(scene, np.asarray(config.source_m, float), receivers, params)
    return histogram_to_ir(hist, params, metadata=meta)
