"""Impulse-response container and energy-decay analysis.

T60 is estimated with the T30 method: a least-squares line through the
Schroeder decay curve between -5 dB and -35 dB, extrapolated to 60 dB.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .constants import DIRECT_WINDOW_S, EARLY_WINDOW_S, EDC_FLOOR_DB, SPEED_OF_SOUND
from .errors import (
    InsufficientDecayError,
    MetadataRequiredError,
    SilentIrError,
)


@dataclass
class IrMetadata:
    """Provenance and geometry attached to a simulated IR.

    Field names mirror the JSON sidecar schema exactly.
    """

    engine: str = ""
    seed: int = 0
    room_dims_m: Optional[list] = None
    source_m: Optional[list] = None
    mics_m: Optional[list] = None
    t60_target_s: Optional[float] = None
    extras: dict = field(default_factory=dict)

    def to_json_dict(self, sample_rate_hz: int) -> dict:
        out = dict(self.extras)
        out.update(
            engine=self.engine,
            seed=self.seed,
            room_dims_m=self.room_dims_m,
            source_m=self.source_m,
            mics_m=self.mics_m,
            t60_target_s=self.t60_target_s,
            sample_rate_hz=sample_rate_hz,
        )
        return out

    @classmethod
    def from_json_dict(cls, d: dict) -> "IrMetadata":
        known = {"engine", "seed", "room_dims_m", "source_m", "mics_m", "t60_target_s", "sample_rate_hz"}
        return cls(
            engine=d.get("engine", ""),
            seed=int(d.get("seed", 0)),
            room_dims_m=d.get("room_dims_m"),
            source_m=d.get("source_m"),
            mics_m=d.get("mics_m"),
            t60_target_s=d.get("t60_target_s"),
            extras={k: v for k, v in d.items() if k not in known},
        )


@dataclass
class ImpulseResponse:
    """Multichannel sampled pressure response; samples are (n_channels, n_samples)."""

    samples: np.ndarray
    sample_rate: int
    metadata: Optional[IrMetadata] = None

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if self.sample_rate <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")
        if self.samples.shape[1] == 0:
            raise ValueError("impulse response must contain at least one sample")

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate


@dataclass
class EnergyDecayCurve:
    """Schroeder backward-integrated decay in dB, aligned with the IR samples.

    values[0] is 0 dB and the curve is monotone non-increasing, floored at
    -120 dB.
    """

    values: np.ndarray
    sample_rate: int

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.size) / self.sample_rate


class Segmentation(NamedTuple):
    direct_end: int
    early_end: int


def schroeder_edc(ir: ImpulseResponse, channel: int = 0) -> EnergyDecayCurve:
    """Energy decay curve EDC(t) = 10 log10(sum_{tau>=t} h^2 / sum h^2)."""
    h = ir.samples[channel]
    energy = h * h
    tail = np.cumsum(energy[::-1])[::-1]
    total = float(tail[0])  # same summation as the tail: EDC[0] is exactly 0 dB
    if total <= 0.0:
        raise SilentIrError(f"channel {channel} is all zeros")
    tail = tail / total
    with np.errstate(divide="ignore"):
        values = 10.0 * np.log10(tail)
    values = np.maximum(values, EDC_FLOOR_DB)
    return EnergyDecayCurve(values=values, sample_rate=ir.sample_rate)


def estimate_t60(edc: EnergyDecayCurve, fit_range_db: tuple[float, float] = (-5.0, -35.0)) -> float:
    """T60 from a line fit over the fit range of the decay curve (T30 method).

    Raises InsufficientDecayError when the curve never reaches the lower fit
    bound.
    """
    hi, lo = fit_range_db
    v = edc.values
    below_hi = np.nonzero(v <= hi)[0]
    below_lo = np.nonzero(v <= lo)[0]
    if below_lo.size == 0 or below_hi.size == 0:
        raise InsufficientDecayError(required_db=lo, reached_db=float(v.min()))
    i0, i1 = int(below_hi[0]), int(below_lo[0])
    if i1 <= i0:
        raise InsufficientDecayError(required_db=lo, reached_db=float(v.min()))
    t = np.arange(i0, i1 + 1) / edc.sample_rate
    y = v[i0 : i1 + 1]
    slope, _ = np.polyfit(t, y, 1)
    if slope >= 0:
        raise InsufficientDecayError(required_db=lo, reached_db=float(v.min()))
    return -60.0 / float(slope)


def direct_arrival_sample(ir: ImpulseResponse, channel: int) -> int:
    """Sample index of the direct-path arrival, from IR geometry metadata."""
    md = ir.metadata
    if md is None or md.source_m is None or md.mics_m is None:
        raise MetadataRequiredError("IR metadata must carry source_m and mics_m for segmentation")
    if channel < 0 or channel >= len(md.mics_m):
        raise IndexError(f"channel {channel} out of range for {len(md.mics_m)} receivers")
    src = np.asarray(md.source_m, float)
    mic = np.asarray(md.mics_m[channel], float)
    dist = float(np.linalg.norm(src - mic))
    return int(round(dist / SPEED_OF_SOUND * ir.sample_rate))


def segment_ir(ir: ImpulseResponse, channel: int = 0) -> Segmentation:
    """Split an IR into direct / early / late regions.

    direct_end is the direct arrival plus a 2.5 ms window; early_end is the
    direct arrival plus 50 ms, both capped at the IR length. The regions
    [0, direct_end), [direct_end, early_end), [early_end, n) partition the IR.
    """
    arrival = direct_arrival_sample(ir, channel)
    n = ir.n_samples
    fs = ir.sample_rate
    direct_end = min(arrival + int(round(DIRECT_WINDOW_S * fs)), n)
    early_end = min(arrival + int(round(EARLY_WINDOW_S * fs)), n)
    return Segmentation(direct_end=direct_end, early_end=max(early_end, direct_end))


def energy_split(ir: ImpulseResponse, channel: int, seg: Segmentation) -> tuple[float, float, float]:
    """Exact energy partition (direct, early, late) under a segmentation."""
    e = ir.samples[channel] ** 2
    direct = float(e[: seg.direct_end].sum())
    early = float(e[seg.direct_end : seg.early_end].sum())
    late = float(e[seg.early_end :].sum())
    return direct, early, late


def direct_to_reverberant_ratio(ir: ImpulseResponse, channel: int, seg: Segmentation) -> float:
    """DRR in dB; +inf when there is no energy after the direct window."""
    e = ir.samples[channel] ** 2
    direct = float(e[: seg.direct_end].sum())
    reverb = float(e[seg.direct_end :].sum())
    if reverb <= 0.0:
        return math.inf
    if direct <= 0.0:
        return -math.inf
    return 10.0 * math.log10(direct / reverb)
