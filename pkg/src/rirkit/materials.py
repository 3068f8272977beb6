"""Acoustic surface materials and the T60 <-> absorption mapping.

The broadband default uses a single band; octave-band mode carries 8 bands
with centers 62.5 Hz .. 8 kHz. Air absorption is not modeled (rooms here are
small and decay times short, making it second-order).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Union

import numpy as np

from .errors import InfiniteT60Error, UnreachableT60Error

if TYPE_CHECKING:
    from .geometry import Scene, Vec3

SABINE_COEFF = 0.161  # s/m, T60 = 0.161 V / (alpha S)
MAX_ABSORPTION = 0.99
OCTAVE_BAND_CENTERS_HZ = (62.5, 125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0)


@dataclass(frozen=True, eq=False)
class Material:
    """Per-band energy absorption and scattering coefficients, both in [0, 1].

    Scalars describe a broadband (single-band) material; sequences give one
    value per band. scattering is the fraction of reflected energy that is
    diffuse (0 = purely specular, 1 = purely diffuse).
    """

    absorption: Union[float, np.ndarray] = 0.1
    scattering: Union[float, np.ndarray] = 0.5

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.absorption, dtype=np.float64))
        s = np.atleast_1d(np.asarray(self.scattering, dtype=np.float64))
        if a.size != s.size:
            if a.size == 1:
                a = np.full(s.size, a[0])
            elif s.size == 1:
                s = np.full(a.size, s[0])
            else:
                raise ValueError("absorption and scattering band counts differ")
        if np.any(a < 0) or np.any(a > 1):
            raise ValueError(f"absorption must be within [0, 1], got {a}")
        if np.any(s < 0) or np.any(s > 1):
            raise ValueError(f"scattering must be within [0, 1], got {s}")
        a.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "absorption", a)
        object.__setattr__(self, "scattering", s)

    @property
    def n_bands(self) -> int:
        return int(np.asarray(self.absorption).size)


def _box_volume_area(dims: "Vec3") -> tuple[float, float]:
    lx, ly, lz = (float(v) for v in np.asarray(dims, float))
    if lx <= 0 or ly <= 0 or lz <= 0:
        raise ValueError(f"room dimensions must be positive, got {dims}")
    volume = lx * ly * lz
    area = 2.0 * (lx * ly + lx * lz + ly * lz)
    return volume, area


def min_achievable_t60(dims: "Vec3") -> float:
    """Shortest Sabine T60 realizable with absorption capped at 0.99."""
    volume, area = _box_volume_area(dims)
    return SABINE_COEFF * volume / (MAX_ABSORPTION * area)


def sabine_absorption(dims: "Vec3", target_t60: float, formula: str = "sabine") -> float:
    """Uniform absorption realizing `target_t60` in a box room.

    Inverts T60 = 0.161 V / (alpha S); with formula="eyring" returns
    1 - exp(-0.161 V / (T60 S)) instead. Raises UnreachableT60Error when the
    required absorption would exceed 0.99.
    """
    volume, area = _box_volume_area(dims)
    if target_t60 <= 0:
        raise ValueError(f"target T60 must be positive, got {target_t60}")
    x = SABINE_COEFF * volume / (target_t60 * area)
    if formula == "sabine":
        alpha = x
    elif formula == "eyring":
        alpha = 1.0 - np.exp(-x)
    else:
        raise ValueError(f"unknown formula {formula!r}, expected 'sabine' or 'eyring'")
    if alpha > MAX_ABSORPTION * (1.0 + 1e-9):
        raise UnreachableT60Error(target_t60, min_achievable_t60(dims))
    return float(min(alpha, MAX_ABSORPTION))


def predicted_t60(scene: "Scene", band: int = 0) -> float:
    """Sabine T60 prediction 0.161 V / sum(alpha_i S_i) over boundary triangles."""
    areas = scene.triangle_areas()
    total = 0.0
    for tri in np.nonzero(scene.tri_boundary)[0]:
        mat = scene.materials[scene.tri_material[tri]]
        alpha = np.asarray(mat.absorption, float)
        a = float(alpha[min(band, alpha.size - 1)])
        total += a * float(areas[tri])
    if total <= 0:
        raise InfiniteT60Error("all boundary absorption is zero; predicted T60 is infinite")
    return SABINE_COEFF * scene.volume() / total
