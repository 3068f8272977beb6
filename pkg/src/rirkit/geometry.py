"""Scene geometry: triangle meshes, ray casting, reflection sampling, mic arrays.

Positions are in meters. Direction vectors are unit-norm. Scenes are immutable
after construction and safe to share across workers; all random sampling takes
an explicit numpy Generator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .materials import Material

Vec3 = np.ndarray  # shape (3,), float64

SELF_INTERSECT_EPS = 1e-7  # m, guards against re-hitting the surface a ray leaves
_DET_EPS = 1e-12
_BARY_EPS = 1e-9  # edge padding so closed meshes stay watertight


def vec3(x: float, y: float, z: float) -> Vec3:
    return np.array([x, y, z], dtype=np.float64)


def normalize(v: Vec3) -> Vec3:
    n = float(np.linalg.norm(v))
    if n < 1e-12:
        raise ValueError("cannot normalize a near-zero vector")
    return np.asarray(v, dtype=np.float64) / n


@dataclass(frozen=True)
class Ray:
    """A ray with unit direction."""

    origin: Vec3
    direction: Vec3

    def __post_init__(self):
        if abs(float(np.linalg.norm(self.direction)) - 1.0) > 1e-9:
            raise ValueError("ray direction must be unit-norm")


@dataclass(frozen=True)
class Hit:
    """Nearest ray-surface intersection.

    `normal` is the face normal oriented toward the side the ray came from,
    so dot(ray.direction, normal) < 0 always holds.
    """

    triangle_index: int
    distance: float
    point: Vec3
    normal: Vec3


@dataclass(frozen=True, eq=False)
class Wall:
    """Planar convex polygon surface; a wall owns one or more scene triangles."""

    vertices: np.ndarray  # (k, 3), ordered CCW when viewed from the normal side
    material_id: int
    normal: Vec3
    is_boundary: bool = True


class Scene:
    """Immutable triangle-soup scene with per-surface materials.

    Boundary walls have normals pointing into the room interior; obstacle
    walls have normals pointing away from the obstacle (also into the room).
    `shoebox_dims` is set for axis-aligned box rooms and enables the fast
    image-source lattice path.
    """

    def __init__(
        self,
        walls: Sequence[Wall],
        materials: Sequence[Material],
        shoebox_dims: Optional[Vec3] = None,
        obstacles: Sequence[tuple[Vec3, Vec3]] = (),
    ):
        if not walls:
            raise ValueError("scene needs at least one wall")
        self.walls: tuple[Wall, ...] = tuple(walls)
        self.materials: tuple[Material, ...] = tuple(materials)
        self.shoebox_dims = None if shoebox_dims is None else np.asarray(shoebox_dims, float)
        self.obstacles = tuple((np.asarray(lo, float), np.asarray(hi, float)) for lo, hi in obstacles)

        v0, e1, e2, nrm, mat, wall_idx, boundary = [], [], [], [], [], [], []
        for wi, w in enumerate(self.walls):
            if not (0 <= w.material_id < len(self.materials)):
                raise ValueError(f"wall {wi}: material_id {w.material_id} out of range")
            verts = np.asarray(w.vertices, float)
            if verts.shape[0] < 3 or verts.shape[1] != 3:
                raise ValueError(f"wall {wi}: need at least 3 vertices of dimension 3")
            for k in range(1, verts.shape[0] - 1):
                a, b, c = verts[0], verts[k], verts[k + 1]
                n = np.cross(b - a, c - a)
                area2 = float(np.linalg.norm(n))
                if area2 < 2e-12:
                    raise ValueError(f"wall {wi}: degenerate triangle (area <= 1e-12 m^2)")
                n = n / area2
                if float(np.dot(n, w.normal)) < 0:  # keep winding consistent with wall normal
                    b, c = c, b
                    n = -n
                v0.append(a)
                e1.append(b - a)
                e2.append(c - a)
                nrm.append(n)
                mat.append(w.material_id)
                wall_idx.append(wi)
                boundary.append(w.is_boundary)

        self.tri_v0 = np.array(v0)
        self.tri_e1 = np.array(e1)
        self.tri_e2 = np.array(e2)
        self.tri_normal = np.array(nrm)
        self.tri_material = np.array(mat, dtype=np.int32)
        self.tri_wall = np.array(wall_idx, dtype=np.int32)
        self.tri_boundary = np.array(boundary, dtype=bool)
        for arr in (self.tri_v0, self.tri_e1, self.tri_e2, self.tri_normal):
            arr.setflags(write=False)

        all_verts = np.concatenate([np.asarray(w.vertices, float) for w in self.walls])
        self.bounds_min = all_verts.min(axis=0)
        self.bounds_max = all_verts.max(axis=0)

    @property
    def n_triangles(self) -> int:
        return self.tri_v0.shape[0]

    def triangle_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(np.cross(self.tri_e1, self.tri_e2), axis=1)

    def boundary_area(self) -> float:
        """Total area of room-boundary surfaces (obstacles excluded)."""
        return float(self.triangle_areas()[self.tri_boundary].sum())

    def volume(self) -> float:
        """Enclosed volume from the boundary mesh (divergence theorem)."""
        m = self.tri_boundary
        v0 = self.tri_v0[m]
        v1 = v0 + self.tri_e1[m]
        v2 = v0 + self.tri_e2[m]
        signed = np.einsum("ij,ij->i", v0, np.cross(v1, v2)).sum() / 6.0
        return abs(float(signed))

    def contains(self, point: Vec3, margin: float = 0.0) -> bool:
        """True if `point` is inside the room bounds and outside every obstacle."""
        p = np.asarray(point, float)
        if np.any(p <= self.bounds_min + margin) or np.any(p >= self.bounds_max - margin):
            return False
        for lo, hi in self.obstacles:
            if np.all(p > lo - margin) and np.all(p < hi + margin):
                return False
        return True


def _box_walls(lo: Vec3, hi: Vec3, material_id: int, inward: bool, is_boundary: bool) -> list[Wall]:
    """Six quad walls of an axis-aligned box.

    inward=True puts normals toward the box interior (a room); inward=False
    puts them away from it (an obstacle sitting inside a room).
    """
    (x0, y0, z0), (x1, y1, z1) = lo, hi
    quads = [
        # (vertices CCW as seen from the inward-normal side, inward normal)
        ([(x0, y0, z0), (x0, y1, z0), (x0, y1, z1), (x0, y0, z1)], (1, 0, 0)),
        ([(x1, y0, z0), (x1, y0, z1), (x1, y1, z1), (x1, y1, z0)], (-1, 0, 0)),
        ([(x0, y0, z0), (x0, y0, z1), (x1, y0, z1), (x1, y0, z0)], (0, 1, 0)),
        ([(x0, y1, z0), (x1, y1, z0), (x1, y1, z1), (x0, y1, z1)], (0, -1, 0)),
        ([(x0, y0, z0), (x1, y0, z0), (x1, y1, z0), (x0, y1, z0)], (0, 0, 1)),
        ([(x0, y0, z1), (x0, y1, z1), (x1, y1, z1), (x1, y0, z1)], (0, 0, -1)),
    ]
    walls = []
    for verts, n in quads:
        normal = np.array(n, float) if inward else -np.array(n, float)
        walls.append(Wall(np.array(verts, float), material_id, normal, is_boundary=is_boundary))
    return walls


def make_shoebox(
    dims: Vec3,
    materials: Optional[Sequence[Material]] = None,
    material_id: int = 0,
    obstacles: Sequence[tuple[Vec3, Vec3]] = (),
    obstacle_material_id: Optional[int] = None,
) -> Scene:
    """Closed axis-aligned box room [0,Lx]x[0,Ly]x[0,Lz] with inward-facing walls.

    Obstacles are axis-aligned boxes given as (lo, hi) corners; each is
    tessellated into 12 triangles facing the room.
    """
    dims = np.asarray(dims, float)
    if dims.shape != (3,) or np.any(dims <= 0):
        raise ValueError(f"room dimensions must be three positive lengths, got {dims}")
    if materials is None:
        materials = (Material(absorption=0.1, scattering=0.5),)
    walls = _box_walls(np.zeros(3), dims, material_id, inward=True, is_boundary=True)
    obs_mat = material_id if obstacle_material_id is None else obstacle_material_id
    for lo, hi in obstacles:
        lo = np.asarray(lo, float)
        hi = np.asarray(hi, float)
        if np.any(lo >= hi) or np.any(lo < 0) or np.any(hi > dims):
            raise ValueError("obstacle box must be non-empty and inside the room")
        walls += _box_walls(lo, hi, obs_mat, inward=False, is_boundary=False)
    return Scene(walls, materials, shoebox_dims=dims, obstacles=obstacles)


def make_scene_from_walls(
    walls: Sequence[tuple[np.ndarray, int, Vec3]],
    materials: Sequence[Material],
) -> Scene:
    """Generic (possibly open) planar scene from (vertices, material_id, normal) walls."""
    return Scene([Wall(np.asarray(v, float), m, normalize(n)) for v, m, n in walls], materials)


def intersect(scene: Scene, ray: Ray) -> Optional[Hit]:
    """Nearest intersection beyond the self-intersection epsilon, or None.

    Reference implementation: vectorized Moller-Trumbore over every triangle.
    The traced kernels use a BVH; this linear scan is the independent oracle
    they are validated against.
    """
    o = np.asarray(ray.origin, float)
    d = np.asarray(ray.direction, float)
    pvec = np.cross(d, scene.tri_e2)
    det = np.einsum("ij,ij->i", scene.tri_e1, pvec)
    ok = np.abs(det) > _DET_EPS
    inv_det = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tvec = o - scene.tri_v0
    u = np.einsum("ij,ij->i", tvec, pvec) * inv_det
    qvec = np.cross(tvec, scene.tri_e1)
    v = np.einsum("j,ij->i", d, qvec) * inv_det
    t = np.einsum("ij,ij->i", scene.tri_e2, qvec) * inv_det
    ok &= (u >= -_BARY_EPS) & (v >= -_BARY_EPS) & (u + v <= 1.0 + _BARY_EPS)
    ok &= t > SELF_INTERSECT_EPS
    if not np.any(ok):
        return None
    t = np.where(ok, t, np.inf)
    i = int(np.argmin(t))
    dist = float(t[i])
    n = scene.tri_normal[i]
    if float(np.dot(d, n)) > 0:
        n = -n
    return Hit(triangle_index=i, distance=dist, point=o + dist * d, normal=n.copy())


def segment_blocked(scene: Scene, a: Vec3, b: Vec3, eps: float = 1e-6) -> bool:
    """True if any surface lies strictly between points a and b."""
    delta = np.asarray(b, float) - np.asarray(a, float)
    length = float(np.linalg.norm(delta))
    if length < eps:
        return False
    hit = intersect(scene, Ray(np.asarray(a, float), delta / length))
    return hit is not None and hit.distance < length - eps


def reflect_specular(incoming: Vec3, normal: Vec3) -> Vec3:
    """Mirror-law reflection of a unit direction about a unit surface normal."""
    c = float(np.dot(incoming, normal))
    if c >= 0:
        raise ValueError("incoming direction must face the surface (dot(incoming, normal) < 0)")
    return incoming - 2.0 * c * normal


def orthonormal_basis(normal: Vec3) -> tuple[Vec3, Vec3]:
    """Two unit tangents completing `normal` to a right-handed frame."""
    a = np.array([1.0, 0.0, 0.0]) if abs(normal[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t1 = np.cross(normal, a)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(normal, t1)
    return t1, t2


def sample_lambert(normal: Vec3, rng: np.random.Generator, n: Optional[int] = None):
    """Cosine-weighted random direction(s) in the hemisphere around `normal`.

    pdf(omega) = cos(theta) / pi. Returns one unit vector, or an (n, 3) batch
    when n is given.
    """
    m = 1 if n is None else int(n)
    u1 = rng.random(m)
    u2 = rng.random(m)
    r = np.sqrt(u1)
    phi = 2.0 * np.pi * u2
    t1, t2 = orthonormal_basis(normal)
    out = (
        (r * np.cos(phi))[:, None] * t1
        + (r * np.sin(phi))[:, None] * t2
        + np.sqrt(1.0 - u1)[:, None] * normal
    )
    return out[0] if n is None else out


def sample_sphere(rng: np.random.Generator, n: Optional[int] = None):
    """Uniform random unit direction(s); (n, 3) batch when n is given."""
    m = 1 if n is None else int(n)
    z = 2.0 * rng.random(m) - 1.0
    phi = 2.0 * np.pi * rng.random(m)
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    out = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    return out[0] if n is None else out


def circular_array(
    center: Vec3,
    radius: float,
    n_mics: int,
    axis: Vec3,
    phase: float = 0.0,
) -> np.ndarray:
    """Microphone positions equally spaced on a circle perpendicular to `axis`.

    Mic k sits at angle phase + 2*pi*k/n_mics; with phase 0, mic 0 lies along
    the +x direction projected onto the array plane (falls back to +y when the
    axis is parallel to x).

    Returns an (n_mics, 3) position array.
    """
    if radius <= 0:
        raise ValueError("array radius must be positive")
    if n_mics < 1:
        raise ValueError("need at least one microphone")
    axis = normalize(np.asarray(axis, float))
    ref = np.array([1.0, 0.0, 0.0])
    proj = ref - np.dot(ref, axis) * axis
    if np.linalg.norm(proj) < 1e-9:
        ref = np.array([0.0, 1.0, 0.0])
        proj = ref - np.dot(ref, axis) * axis
    e1 = proj / np.linalg.norm(proj)
    e2 = np.cross(axis, e1)
    angles = phase + 2.0 * np.pi * np.arange(n_mics) / n_mics
    center = np.asarray(center, float)
    return center + radius * (np.cos(angles)[:, None] * e1 + np.sin(angles)[:, None] * e2)
