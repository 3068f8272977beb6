"""Image-source RIR engine.

Two construction modes:

* shoebox lattice (fast path): mirrored-lattice enumeration for axis-aligned
  box rooms. In an empty box every lattice path is realizable by convexity;
  with obstacles each path is folded back into the room and occlusion-checked.
* generic planar scenes: recursive mirroring across finite walls (no immediate
  same-wall re-reflection) followed by per-path validation that every unfolded
  segment hits its generating wall within its extent and is not blocked.

Arrival amplitude is gain / (4 pi d) with gain the product of per-bounce
pressure factors sqrt(1 - alpha); arrivals are placed with an 81-tap
windowed-sinc fractional delay (nearest-sample placement behind a flag).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .analysis import ImpulseResponse, IrMetadata
from .constants import SPEED_OF_SOUND
from .errors import IrTooShortError
from .geometry import Ray, Scene, Vec3, intersect

SINC_HALF_TAPS = 40  # 81-tap kernel
_CHUNK = 1 << 16


@dataclass(frozen=True)
class ImageSource:
    """A mirrored virtual source.

    generating_surfaces lists the wall indices in mirror order (generic mode);
    lattice images leave it empty.
    """

    position: Vec3
    order: int
    gain: float
    generating_surfaces: tuple[int, ...] = ()


# ---------------------------------------------------------------------------
# Shoebox lattice
# ---------------------------------------------------------------------------


def _axis_images(length: float, coord: float, max_order: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """1-D mirror lattice along one axis.

    Returns (positions, orders, n_lo, n_hi) where n_lo / n_hi count the
    reflections on the lower / upper wall. Image index a covers all integers:
    even a -> a*L + x, odd a -> (a+1)*L - x, with |a| total reflections.
    """
    a = np.arange(-max_order, max_order + 1)
    even = a % 2 == 0
    pos = np.where(even, a * length + coord, (a + 1) * length - coord)
    orders = np.abs(a)
    # Wall split: count integers strictly between 0.5 and pos/L; plane x = k*L
    # is the lower wall for even k, the upper wall for odd k. The count is
    # independent of the receiver position anywhere inside (0, L).
    b = pos / length
    n_lo = np.zeros_like(a)
    n_hi = np.zeros_like(a)
    for i, bi in enumerate(b):
        lo, hi = (0.5, bi) if bi > 0.5 else (bi, 0.5)
        ks = np.arange(math.floor(lo) + 1, math.ceil(hi))
        n_lo[i] = int(np.sum(ks % 2 == 0))
        n_hi[i] = int(np.sum(ks % 2 == 1))
    return pos, orders, n_lo, n_hi


def _shoebox_lattice(
    dims: Vec3,
    source: Vec3,
    max_order: int,
    refl_lo: np.ndarray,
    refl_hi: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All lattice images up to max_order: (positions (n,3), orders, gains).

    refl_lo / refl_hi are per-axis pressure reflection coefficients
    sqrt(1 - alpha) for the lower / upper walls.
    """
    dims = np.asarray(dims, float)
    source = np.asarray(source, float)
    if np.any(source <= 0) or np.any(source >= dims):
        raise ValueError(f"source {source} must lie strictly inside the room {dims}")
    per_axis = [_axis_images(float(dims[i]), float(source[i]), max_order) for i in range(3)]
    ox, oy, oz = (p[1] for p in per_axis)
    order_sum = ox[:, None, None] + oy[None, :, None] + oz[None, None, :]
    ix, iy, iz = np.nonzero(order_sum <= max_order)
    positions = np.stack(
        [per_axis[0][0][ix], per_axis[1][0][iy], per_axis[2][0][iz]], axis=1
    )
    orders = order_sum[ix, iy, iz]
    gains = np.ones(len(ix))
    for axis, idx in enumerate((ix, iy, iz)):
        _, _, n_lo, n_hi = per_axis[axis]
        gains *= refl_lo[axis] ** n_lo[idx] * refl_hi[axis] ** n_hi[idx]
    return positions, orders.astype(np.int64), gains


def enumerate_images_shoebox(
    dims: Vec3,
    source: Vec3,
    max_order: int,
    absorption: float | Sequence[float] = 0.0,
) -> list[ImageSource]:
    """Lattice image sources of a box room up to max_order, order-0 included.

    absorption is either uniform or per-wall (x_lo, x_hi, y_lo, y_hi, z_lo,
    z_hi); gains are the product of sqrt(1 - alpha) over the bounces.
    """
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    alpha = np.asarray(absorption, float)
    alpha = np.full(6, float(alpha)) if alpha.ndim == 0 else alpha
    if alpha.shape != (6,):
        raise ValueError("absorption must be a scalar or 6 per-wall values")
    refl = np.sqrt(1.0 - alpha)
    positions, orders, gains = _shoebox_lattice(dims, source, max_order, refl[0::2], refl[1::2])
    return [
        ImageSource(position=positions[i].copy(), order=int(orders[i]), gain=float(gains[i]))
        for i in range(len(orders))
    ]


def fold_coordinate(u: float, length: float) -> float:
    """Map an unfolded lattice coordinate back into [0, length]."""
    m = math.fmod(u, 2.0 * length)
    if m < 0:
        m += 2.0 * length
    return m if m <= length else 2.0 * length - m


def validate_lattice_path(scene: Scene, image_position: Vec3, listener: Vec3) -> Optional[list[Vec3]]:
    """Fold a lattice image path into the room and occlusion-check it.

    Returns the reflection points from source side to listener side, or None
    if any folded segment is blocked (only obstacles can block in a box). The
    direct segment of the order-0 image folds to the plain visibility check.
    """
    dims = scene.shoebox_dims
    if dims is None:
        raise ValueError("lattice validation requires a shoebox scene")
    listener = np.asarray(listener, float)
    image_position = np.asarray(image_position, float)
    delta = image_position - listener
    # crossing parameters of all lattice planes k*L between listener and image
    ts: list[float] = []
    for axis in range(3):
        if abs(delta[axis]) < 1e-12:
            continue
        lo = min(listener[axis], image_position[axis])
        hi = max(listener[axis], image_position[axis])
        L = float(dims[axis])
        for k in range(math.floor(lo / L) + 1, math.ceil(hi / L)):
            t = (k * L - listener[axis]) / delta[axis]
            if 1e-12 < t < 1.0 - 1e-12:
                ts.append(float(t))
    ts.sort()
    points = [listener]
    for t in ts:
        raw = listener + t * delta
        points.append(np.array([fold_coordinate(float(raw[i]), float(dims[i])) for i in range(3)]))
    # the image position folds back to the true source
    raw_end = image_position
    points.append(np.array([fold_coordinate(float(raw_end[i]), float(dims[i])) for i in range(3)]))
    if scene.obstacles:
        for a, b in zip(points[:-1], points[1:]):
            if _segment_hits_obstacle(scene, a, b):
                return None
    return points[1:-1][::-1]  # reflection points, source side first


def _segment_hits_obstacle(scene: Scene, a: Vec3, b: Vec3) -> bool:
    delta = b - a
    length = float(np.linalg.norm(delta))
    if length < 1e-9:
        return False
    d = delta / length
    hit = intersect(scene, Ray(a, d))
    while hit is not None and hit.distance < length - 1e-6:
        if not scene.tri_boundary[hit.triangle_index]:
            return True
        # grazing a boundary wall exactly at a reflection point; step past it
        remaining = length - hit.distance
        a = hit.point
        hit = intersect(scene, Ray(a, d))
        length = remaining
    return False


# ---------------------------------------------------------------------------
# Generic planar scenes
# ---------------------------------------------------------------------------


def mirror_point(point: Vec3, scene: Scene, wall_index: int) -> Vec3:
    w = scene.walls[wall_index]
    v0 = np.asarray(w.vertices, float)[0]
    n = w.normal
    return point - 2.0 * float(np.dot(point - v0, n)) * n


def enumerate_images_generic(scene: Scene, source: Vec3, max_order: int) -> list[ImageSource]:
    """Candidate images by recursive mirroring across boundary walls.

    Immediate same-wall re-reflection is excluded; candidates of order
    1..max_order are returned (the direct path is handled separately).
    """
    source = np.asarray(source, float)
    boundary_walls = [i for i, w in enumerate(scene.walls) if w.is_boundary]
    out: list[ImageSource] = []
    frontier: list[ImageSource] = [ImageSource(source, 0, 1.0, ())]
    for _ in range(max_order):
        nxt: list[ImageSource] = []
        for img in frontier:
            last = img.generating_surfaces[-1] if img.generating_surfaces else -1
            for wi in boundary_walls:
                if wi == last:
                    continue
                mat = scene.materials[scene.walls[wi].material_id]
                refl = math.sqrt(1.0 - float(np.asarray(mat.absorption)[0]))
                nxt.append(
                    ImageSource(
                        position=mirror_point(img.position, scene, wi),
                        order=img.order + 1,
                        gain=img.gain * refl,
                        generating_surfaces=img.generating_surfaces + (wi,),
                    )
                )
        out.extend(nxt)
        frontier = nxt
    return out


def image_count(scene: Scene, max_order: int) -> int:
    """Number of candidate images generated before validation (order >= 1)."""
    return len(enumerate_images_generic(scene, np.asarray(scene.bounds_min) + 1e-3, max_order))


def _point_on_wall(scene: Scene, wall_index: int, p: Vec3, tol: float = 1e-9) -> bool:
    w = scene.walls[wall_index]
    verts = np.asarray(w.vertices, float)
    if abs(float(np.dot(p - verts[0], w.normal))) > 1e-6:
        return False
    # convex polygon containment, winding-agnostic: every edge cross product
    # must point the same way
    k = verts.shape[0]
    pos = neg = False
    for i in range(k):
        a, b = verts[i], verts[(i + 1) % k]
        s = float(np.dot(np.cross(b - a, p - a), w.normal))
        if s > tol:
            pos = True
        elif s < -tol:
            neg = True
    return not (pos and neg)


def _segment_clear(scene: Scene, a: Vec3, b: Vec3) -> bool:
    """No surface strictly between a and b (endpoints may lie on surfaces)."""
    delta = b - a
    length = float(np.linalg.norm(delta))
    if length < 1e-9:
        return True
    hit = intersect(scene, Ray(a, delta / length))
    return hit is None or hit.distance >= length - 1e-6


def validate_image_path(scene: Scene, image: ImageSource, listener: Vec3) -> Optional[list[Vec3]]:
    """Unfold an image path back-to-front and check realizability.

    Every segment must cross its generating wall within the wall's extent and
    no segment may be blocked by another surface. Returns reflection points
    ordered from the source side, or None for infeasible paths. Order-0 images
    reduce to the direct visibility check (empty point list when visible).

    Lattice images (empty generating_surfaces, order > 0) are validated by
    folding in shoebox scenes.
    """
    listener = np.asarray(listener, float)
    if image.order > 0 and not image.generating_surfaces:
        return validate_lattice_path(scene, image.position, listener)
    if image.order == 0:
        return [] if _segment_clear(scene, listener, np.asarray(image.position, float)) else None

    # prefix image positions: source mirrored by w1..wj
    prefix = [None] * (image.order + 1)
    pos = _unmirror_source(scene, image)
    prefix[0] = pos
    for j, wi in enumerate(image.generating_surfaces):
        pos = mirror_point(pos, scene, wi)
        prefix[j + 1] = pos

    points: list[Vec3] = []
    target = listener
    for j in range(image.order, 0, -1):
        wi = image.generating_surfaces[j - 1]
        img_pos = prefix[j]
        w = scene.walls[wi]
        v0 = np.asarray(w.vertices, float)[0]
        denom = float(np.dot(img_pos - target, w.normal))
        if abs(denom) < 1e-12:
            return None
        t = float(np.dot(v0 - target, w.normal)) / denom
        if not (1e-9 < t < 1.0 - 1e-9):
            return None
        p = target + t * (img_pos - target)
        if not _point_on_wall(scene, wi, p):
            return None
        if not _segment_clear(scene, target, p):
            return None
        points.append(p)
        target = p
    if not _segment_clear(scene, target, prefix[0]):
        return None
    return points[::-1]


def _unmirror_source(scene: Scene, image: ImageSource) -> Vec3:
    pos = np.asarray(image.position, float)
    for wi in reversed(image.generating_surfaces):
        pos = mirror_point(pos, scene, wi)
    return pos


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def place_arrivals(
    n_samples: int,
    delays_samples: np.ndarray,
    amplitudes: np.ndarray,
    fractional: bool = True,
) -> np.ndarray:
    """Sum of arrivals at (possibly fractional) sample delays.

    Fractional placement uses an 81-tap Hann-windowed sinc; arrivals are
    accumulated in fixed chunks so the output is bit-reproducible.
    """
    out = np.zeros(n_samples)
    delays = np.asarray(delays_samples, float)
    amps = np.asarray(amplitudes, float)
    if not fractional:
        idx = np.round(delays).astype(np.int64)
        ok = (idx >= 0) & (idx < n_samples)
        if np.any(ok):
            out += np.bincount(idx[ok], weights=amps[ok], minlength=n_samples)
        return out
    offs = np.arange(-SINC_HALF_TAPS, SINC_HALF_TAPS + 1)
    support = SINC_HALF_TAPS + 0.5
    for start in range(0, delays.size, _CHUNK):
        d = delays[start : start + _CHUNK]
        a = amps[start : start + _CHUNK]
        taps = np.round(d).astype(np.int64)[:, None] + offs[None, :]
        u = taps - d[:, None]
        kern = np.sinc(u) * (0.5 * (1.0 + np.cos(np.pi * u / support))) * a[:, None]
        ok = (taps >= 0) & (taps < n_samples)
        if np.any(ok):
            out += np.bincount(taps[ok].ravel(), weights=kern[ok].ravel(), minlength=n_samples)
    return out


def default_max_order(dims: Vec3, t60: float) -> int:
    """Reflection order giving roughly 60 dB of decay: ceil(c*T60/min_dim)."""
    return int(math.ceil(SPEED_OF_SOUND * float(t60) / float(np.min(np.asarray(dims, float)))))


def render_ir_image(
    scene: Scene,
    source: Vec3,
    receivers: Sequence[Vec3],
    max_order: int,
    fs: int,
    ir_length: float,
    fractional_delay: bool = True,
    metadata: Optional[IrMetadata] = None,
) -> ImpulseResponse:
    """Image-source impulse response for one source and multiple receivers.

    One image enumeration is shared across receivers. Empty shoeboxes skip
    path validation (always realizable); scenes with obstacles or generic
    walls validate and occlusion-check every path.
    """
    source = np.asarray(source, float)
    receivers = [np.asarray(r, float) for r in receivers]
    n_samples = int(math.ceil(ir_length * fs))
    if n_samples <= 0:
        raise IrTooShortError("ir_length must cover at least one sample")
    for r in receivers:
        if np.linalg.norm(r - source) / SPEED_OF_SOUND >= ir_length:
            raise IrTooShortError(
                f"ir_length {ir_length} s ends before the direct arrival from {source} to {r}"
            )

    if scene.shoebox_dims is not None:
        dims = scene.shoebox_dims
        alpha6 = np.array(
            [float(np.asarray(scene.materials[scene.walls[i].material_id].absorption)[0]) for i in range(6)]
        )
        refl = np.sqrt(1.0 - alpha6)
        positions, orders, gains = _shoebox_lattice(dims, source, max_order, refl[0::2], refl[1::2])
        channels = []
        for r in receivers:
            if scene.obstacles:
                keep = np.array(
                    [validate_lattice_path(scene, positions[i], r) is not None for i in range(len(gains))]
                )
            else:
                keep = np.ones(len(gains), dtype=bool)
            d = np.linalg.norm(positions[keep] - r, axis=1)
            d = np.maximum(d, 1e-6)
            channels.append(
                place_arrivals(n_samples, d / SPEED_OF_SOUND * fs, gains[keep] / (4.0 * np.pi * d), fractional_delay)
            )
    else:
        images = enumerate_images_generic(scene, source, max_order)
        channels = []
        for r in receivers:
            delays, amps = [], []
            if _segment_clear(scene, np.asarray(r, float), source):
                d0 = float(np.linalg.norm(source - r))
                delays.append(max(d0, 1e-6) / SPEED_OF_SOUND * fs)
                amps.append(1.0 / (4.0 * np.pi * max(d0, 1e-6)))
            for img in images:
                if validate_image_path(scene, img, r) is None:
                    continue
                d = float(np.linalg.norm(np.asarray(img.position) - r))
                delays.append(d / SPEED_OF_SOUND * fs)
                amps.append(img.gain / (4.0 * np.pi * d))
            channels.append(place_arrivals(n_samples, np.array(delays), np.array(amps), fractional_delay))

    md = metadata if metadata is not None else IrMetadata()
    md.engine = "image"
    if md.source_m is None:
        md.source_m = [float(v) for v in source]
    if md.mics_m is None:
        md.mics_m = [[float(v) for v in r] for r in receivers]
    if md.room_dims_m is None and scene.shoebox_dims is not None:
        md.room_dims_m = [float(v) for v in scene.shoebox_dims]
    if "params" not in md.extras:
        md.extras["params"] = {"max_order": int(max_order), "fractional_delay": bool(fractional_delay)}
    return ImpulseResponse(samples=np.stack(channels), sample_rate=fs, metadata=md)
