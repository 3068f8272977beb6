"""Stochastic ray-tracing RIR engine.

Rays are emitted uniformly over the sphere, each carrying E0/M energy per
band. At a surface the ray keeps (1 - alpha) of its energy and continues
either diffusely (cosine-weighted, with probability equal to the scattering
coefficient) or specularly. Whenever a segment crosses a receiver sphere, the
ray's current energy divided by the sphere cross-section pi*r^2 is deposited
at the bin of the closest-approach path time, which makes the histogram an
estimate of intensity 1/(4 pi d^2). The direct source-receiver term is added
analytically (one visibility cast) unless a calibration mode says otherwise.

Determinism contract: rays live in fixed chunks of 65536; each chunk
accumulates deposits in ray order into a private histogram and chunk results
are summed in chunk order, so any worker count from 1 to N produces
bit-identical output.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .analysis import ImpulseResponse, IrMetadata
from .constants import SPEED_OF_SOUND
from .errors import DegenerateGeometryError
from .geometry import Scene, Vec3, segment_blocked

RAY_CHUNK = 1 << 16
_SIGN_STREAM = 11
_CARRIER_STREAM = 14


@dataclass
class TraceParams:
    """Tracer configuration; see module docstring for semantics.

    direct_mode selects how the direct path is handled: "analytic" (default)
    casts one visibility ray and deposits 1/(4 pi d^2) deterministically while
    stochastic rays skip their source segment; "stochastic" lets rays deposit
    from the source segment with no analytic term (inverse-square calibration
    mode); "none" drops the direct term entirely.
    """

    n_rays: int
    fs: int = 16000
    ir_length: Optional[float] = None  # None resolves per room in simulate_rir
    max_bounces: int = 200
    energy_cutoff: float = 1e-6
    receiver_radius: float = 0.0875
    n_bands: int = 1
    seed: int = 0
    direct_mode: str = "analytic"
    n_workers: int = 1

    def __post_init__(self):
        if self.n_rays < 1:
            raise ValueError(f"n_rays must be >= 1, got {self.n_rays}")
        if not (0.0 < self.receiver_radius <= 0.25):
            raise ValueError(f"receiver_radius must be in (0, 0.25] m, got {self.receiver_radius}")
        if not (0.0 <= self.energy_cutoff < 1.0):
            raise ValueError(f"energy_cutoff must be in [0, 1), got {self.energy_cutoff}")
        if self.fs <= 0:
            raise ValueError("fs must be positive")
        if self.ir_length is not None and self.ir_length <= 0:
            raise ValueError("ir_length must be positive (or None for auto)")
        if self.direct_mode not in ("analytic", "stochastic", "none"):
            raise ValueError(f"unknown direct_mode {self.direct_mode!r}")

    @property
    def n_bins(self) -> int:
        if self.ir_length is None:
            raise ValueError("ir_length has not been resolved")
        return int(math.ceil(self.ir_length * self.fs))

    def to_json_dict(self) -> dict:
        return {
            "n_rays": self.n_rays,
            "fs": self.fs,
            "ir_length": self.ir_length,
            "max_bounces": self.max_bounces,
            "energy_cutoff": self.energy_cutoff,
            "receiver_radius": self.receiver_radius,
            "n_bands": self.n_bands,
            "seed": self.seed,
            "direct_mode": self.direct_mode,
        }


@dataclass
class EnergyHistogram:
    """Time-binned received energy, bins[receiver, band, bin], bin width 1/fs."""

    bins: np.ndarray
    fs: int

    @property
    def n_receivers(self) -> int:
        return self.bins.shape[0]

    @property
    def n_bands(self) -> int:
        return self.bins.shape[1]

    @property
    def n_bins(self) -> int:
        return self.bins.shape[2]


def _material_tables(scene: Scene, n_bands: int) -> tuple[np.ndarray, np.ndarray]:
    alphas = np.zeros((len(scene.materials), n_bands))
    scat = np.zeros(len(scene.materials))
    for i, m in enumerate(scene.materials):
        a = np.asarray(m.absorption, float)
        if a.size == 1:
            alphas[i, :] = a[0]
        elif a.size == n_bands:
            alphas[i, :] = a
        else:
            raise ValueError(
                f"material {i} has {a.size} bands but the trace asks for {n_bands}"
            )
        # single branching probability per bounce; bands share one path
        scat[i] = float(np.mean(np.asarray(m.scattering, float)))
    return alphas, scat


def trace(
    scene: Scene,
    source: Vec3,
    receivers: Sequence[Vec3],
    params: TraceParams,
) -> EnergyHistogram:
    """Monte Carlo energy histogram for every receiver sphere.

    Bit-reproducible for identical (scene, source, receivers, params)
    including the seed, independent of params.n_workers.
    """
    source = np.asarray(source, float)
    recs = np.ascontiguousarray([np.asarray(r, float) for r in receivers])
    if not scene.contains(source):
        raise ValueError(f"source {source} is outside the scene (or inside an obstacle)")
    for r in recs:
        if not scene.contains(r):
            raise ValueError(f"receiver {r} is outside the scene (or inside an obstacle)")
        if float(np.linalg.norm(r - source)) <= params.receiver_radius:
            raise DegenerateGeometryError(
                f"receiver sphere at {r} (radius {params.receiver_radius} m) contains the source"
            )

    alphas, scat = _material_tables(scene, params.n_bands)
    bvh = _kernels.Bvh(scene.tri_v0, scene.tri_e1, scene.tri_e2)
    n_bins = params.n_bins
    ray_energy = 1.0 / params.n_rays
    cutoff = params.energy_cutoff * ray_energy
    deposit_src = params.direct_mode == "stochastic"
    seed_u64 = np.uint64(params.seed % (1 << 64))

    starts = list(range(0, params.n_rays, RAY_CHUNK))

    def run_chunk(start: int) -> np.ndarray:
        h = np.zeros((recs.shape[0], params.n_bands, n_bins))
        _kernels.trace_chunk(
            start,
            min(start + RAY_CHUNK, params.n_rays),
            seed_u64,
            source,
            scene.tri_v0, scene.tri_e1, scene.tri_e2, scene.tri_normal, scene.tri_material,
            bvh.node_min, bvh.node_max, bvh.node_left, bvh.node_right,
            bvh.node_first, bvh.node_count, bvh.tri_order,
            alphas, scat,
            recs,
            params.receiver_radius,
            SPEED_OF_SOUND,
            float(params.fs),
            n_bins,
            params.max_bounces,
            cutoff,
            ray_energy,
            deposit_src,
            h,
        )
        return h

    if params.n_workers <= 1:
        partials = [run_chunk(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=params.n_workers) as pool:
            partials = list(pool.map(run_chunk, starts))
    hist = np.zeros((recs.shape[0], params.n_bands, n_bins))
    for p in partials:  # fixed chunk order -> bit-identical reduction
        hist += p

    if params.direct_mode == "analytic":
        for i, r in enumerate(recs):
            d = float(np.linalg.norm(r - source))
            if segment_blocked(scene, source, r):
                continue
            bin_idx = int(d / SPEED_OF_SOUND * params.fs + 0.5)
            if 0 <= bin_idx < n_bins:
                hist[i, :, bin_idx] += 1.0 / (4.0 * np.pi * d * d)
    return EnergyHistogram(bins=hist, fs=params.fs)


def trace_segment_count(
    scene: Scene,
    source: Vec3,
    params: TraceParams,
) -> int:
    """Total traced segments for a run (benchmark helper, single chunk loop)."""
    source = np.asarray(source, float)
    alphas, scat = _material_tables(scene, params.n_bands)
    bvh = _kernels.Bvh(scene.tri_v0, scene.tri_e1, scene.tri_e2)
    recs = np.zeros((0, 3))
    total = 0
    for start in range(0, params.n_rays, RAY_CHUNK):
        h = np.zeros((0, params.n_bands, params.n_bins))
        total += _kernels.trace_chunk(
            start,
            min(start + RAY_CHUNK, params.n_rays),
            np.uint64(params.seed % (1 << 64)),
            source,
            scene.tri_v0, scene.tri_e1, scene.tri_e2, scene.tri_normal, scene.tri_material,
            bvh.node_min, bvh.node_max, bvh.node_left, bvh.node_right,
            bvh.node_first, bvh.node_count, bvh.tri_order,
            alphas, scat,
            recs,
            params.receiver_radius,
            SPEED_OF_SOUND,
            float(params.fs),
            params.n_bins,
            params.max_bounces,
            params.energy_cutoff / params.n_rays,
            1.0 / params.n_rays,
            False,
            h,
        )
    return total


def _octave_band_edges(centers: Sequence[float], fs: int) -> list[tuple[float, float]]:
    nyq = fs / 2.0
    out = []
    for c in centers:
        lo = c / math.sqrt(2.0)
        hi = min(c * math.sqrt(2.0), 0.999 * nyq)
        out.append((lo, hi))
    return out


def histogram_to_ir(
    hist: EnergyHistogram,
    params: TraceParams,
    metadata: Optional[IrMetadata] = None,
) -> ImpulseResponse:
    """Pressure IR from an energy histogram.

    Broadband: p[n] = sign[n] * sqrt(E[n]) with signs from a stream seeded by
    (params.seed, receiver index); sum(p^2) equals sum(E) exactly. Multi-band:
    per-band unit-RMS noise carriers are band-passed, weighted by
    sqrt(E_band[n]), and summed (energy preserved approximately).
    """
    nr, nb, n = hist.bins.shape
    channels = np.zeros((nr, n))
    if nb == 1:
        for rec in range(nr):
            rng = np.random.default_rng(np.random.SeedSequence([_SIGN_STREAM, params.seed, rec]))
            signs = rng.integers(0, 2, size=n) * 2 - 1
            channels[rec] = signs * np.sqrt(hist.bins[rec, 0])
    else:
        from scipy.signal import butter, sosfilt

        from .materials import OCTAVE_BAND_CENTERS_HZ

        centers = OCTAVE_BAND_CENTERS_HZ[:nb] if nb <= len(OCTAVE_BAND_CENTERS_HZ) else [
            62.5 * 2**k for k in range(nb)
        ]
        edges = _octave_band_edges(centers, hist.fs)
        for rec in range(nr):
            acc = np.zeros(n)
            for b, (lo, hi) in enumerate(edges):
                rng = np.random.default_rng(
                    np.random.SeedSequence([_CARRIER_STREAM, params.seed, rec, b])
                )
                carrier = rng.standard_normal(n)
                if hi <= lo:
                    sos = butter(4, lo, btype="highpass", fs=hist.fs, output="sos")
                else:
                    sos = butter(4, [lo, hi], btype="bandpass", fs=hist.fs, output="sos")
                carrier = sosfilt(sos, carrier)
                rms = float(np.sqrt(np.mean(carrier**2)))
                if rms > 0:
                    carrier /= rms
                acc += carrier * np.sqrt(hist.bins[rec, b])
            channels[rec] = acc
    md = metadata if metadata is not None else IrMetadata(engine="gas", seed=params.seed)
    return ImpulseResponse(samples=channels, sample_rate=hist.fs, metadata=md)
