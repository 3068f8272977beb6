"""Compiled inner loops for the stochastic tracer.

The kernel traces one fixed chunk of rays sequentially into a private
histogram; chunks are reduced in index order by the caller, which makes the
result bit-identical for any worker count. Per-ray randomness comes from a
splitmix64-seeded xoroshiro128+ substream keyed on (seed, ray index), so the
stream a ray sees is independent of scheduling.

Triangle intersection uses a median-split BVH; the pure-numpy linear scan in
geometry.intersect is the independent reference it is tested against.
"""

from __future__ import annotations

import numpy as np
from numba import njit

U64 = np.uint64
_GOLDEN = U64(0x9E3779B97F4A7C15)
_HIT_EPS = 1e-7  # m, self-intersection guard (matches geometry.SELF_INTERSECT_EPS)
_BARY_EPS = 1e-9
_STACK_DEPTH = 64
_LEAF_SIZE = 4


# ---------------------------------------------------------------------------
# BVH construction (host side)
# ---------------------------------------------------------------------------


class Bvh:
    """Flat BVH arrays ready for the traced kernel."""

    def __init__(self, v0: np.ndarray, e1: np.ndarray, e2: np.ndarray):
        nt = v0.shape[0]
        verts = np.stack([v0, v0 + e1, v0 + e2], axis=1)  # (nt, 3, 3)
        tri_min = verts.min(axis=1)
        tri_max = verts.max(axis=1)
        centroids = verts.mean(axis=1)

        node_min: list[np.ndarray] = []
        node_max: list[np.ndarray] = []
        node_left: list[int] = []
        node_right: list[int] = []
        node_first: list[int] = []
        node_count: list[int] = []
        order: list[int] = []

        def build(idx: np.ndarray) -> int:
            node = len(node_min)
            node_min.append(tri_min[idx].min(axis=0))
            node_max.append(tri_max[idx].max(axis=0))
            node_left.append(-1)
            node_right.append(-1)
            node_first.append(-1)
            node_count.append(0)
            if idx.size <= _LEAF_SIZE:
                node_first[node] = len(order)
                node_count[node] = idx.size
                order.extend(int(i) for i in idx)
                return node
            c = centroids[idx]
            axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
            perm = np.argsort(c[:, axis], kind="stable")
            half = idx.size // 2
            node_left[node] = build(idx[perm[:half]])
            node_right[node] = build(idx[perm[half:]])
            return node

        build(np.arange(nt))
        self.node_min = np.array(node_min)
        self.node_max = np.array(node_max)
        self.node_left = np.array(node_left, dtype=np.int32)
        self.node_right = np.array(node_right, dtype=np.int32)
        self.node_first = np.array(node_first, dtype=np.int32)
        self.node_count = np.array(node_count, dtype=np.int32)
        self.tri_order = np.array(order, dtype=np.int32)


# ---------------------------------------------------------------------------
# RNG: splitmix64 seeding + xoroshiro128+ stream
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z + _GOLDEN) & U64(0xFFFFFFFFFFFFFFFF)
    z = (z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> U64(27))) * U64(0x94D049BB133111EB)
    return z ^ (z >> U64(31))


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << k) | (x >> (U64(64) - k))


@njit(cache=True, inline="always")
def _ray_stream(seed, ray_index):
    z = U64(seed) ^ (U64(ray_index) * _GOLDEN)
    s0 = _mix64(z)
    s1 = _mix64(z ^ U64(0xA5A5A5A5A5A5A5A5))
    if s0 == U64(0) and s1 == U64(0):
        s1 = U64(1)
    return s0, s1


@njit(cache=True, inline="always")
def _next_u64(s0, s1):
    result = s0 + s1
    s1 ^= s0
    s0 = _rotl(s0, U64(55)) ^ s1 ^ (s1 << U64(14))
    s1 = _rotl(s1, U64(36))
    return s0, s1, result


@njit(cache=True, inline="always")
def _uniform(s0, s1):
    s0, s1, r = _next_u64(s0, s1)
    return s0, s1, (r >> U64(11)) * (1.0 / 9007199254740992.0)


# ---------------------------------------------------------------------------
# Intersection
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _tri_hit(ox, oy, oz, dx, dy, dz, v0, e1, e2, ti):
    e1x, e1y, e1z = e1[ti, 0], e1[ti, 1], e1[ti, 2]
    e2x, e2y, e2z = e2[ti, 0], e2[ti, 1], e2[ti, 2]
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if -1e-12 < det < 1e-12:
        return -1.0
    inv = 1.0 / det
    tx = ox - v0[ti, 0]
    ty = oy - v0[ti, 1]
    tz = oz - v0[ti, 2]
    u = (tx * px + ty * py + tz * pz) * inv
    if u < -_BARY_EPS or u > 1.0 + _BARY_EPS:
        return -1.0
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < -_BARY_EPS or u + v > 1.0 + _BARY_EPS:
        return -1.0
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    if t <= _HIT_EPS:
        return -1.0
    return t


@njit(cache=True, inline="always")
def _aabb_entry(ox, oy, oz, idx_, idy_, idz_, node_min, node_max, node):
    """Slab-test entry distance, or inf when the box is missed."""
    t1 = (node_min[node, 0] - ox) * idx_
    t2 = (node_max[node, 0] - ox) * idx_
    tlo = min(t1, t2)
    thi = max(t1, t2)
    t1 = (node_min[node, 1] - oy) * idy_
    t2 = (node_max[node, 1] - oy) * idy_
    tlo = max(tlo, min(t1, t2))
    thi = min(thi, max(t1, t2))
    t1 = (node_min[node, 2] - oz) * idz_
    t2 = (node_max[node, 2] - oz) * idz_
    tlo = max(tlo, min(t1, t2))
    thi = min(thi, max(t1, t2))
    if thi < tlo or thi <= _HIT_EPS:
        return np.inf
    return tlo


@njit(cache=True)
def _bvh_intersect(
    ox, oy, oz, dx, dy, dz,
    v0, e1, e2,
    node_min, node_max, node_left, node_right, node_first, node_count, tri_order,
):
    """Nearest hit: returns (t, triangle_index) or (inf, -1)."""
    idx_ = 1.0 / dx if abs(dx) > 1e-300 else 1e300
    idy_ = 1.0 / dy if abs(dy) > 1e-300 else 1e300
    idz_ = 1.0 / dz if abs(dz) > 1e-300 else 1e300
    best_t = np.inf
    best_i = -1
    if _aabb_entry(ox, oy, oz, idx_, idy_, idz_, node_min, node_max, 0) == np.inf:
        return best_t, best_i
    stack_node = np.empty(_STACK_DEPTH, dtype=np.int32)
    stack_dist = np.empty(_STACK_DEPTH)
    sp = 0
    node = 0
    while True:
        cnt = node_count[node]
        if cnt > 0:
            first = node_first[node]
            for k in range(cnt):
                ti = tri_order[first + k]
                t = _tri_hit(ox, oy, oz, dx, dy, dz, v0, e1, e2, ti)
                if 0.0 < t < best_t:
                    best_t = t
                    best_i = ti
        else:
            left = node_left[node]
            right = node_right[node]
            t_left = _aabb_entry(ox, oy, oz, idx_, idy_, idz_, node_min, node_max, left)
            t_right = _aabb_entry(ox, oy, oz, idx_, idy_, idz_, node_min, node_max, right)
            if t_left > t_right:
                left, right = right, left
                t_left, t_right = t_right, t_left
            if t_left < best_t:  # descend near child, defer the far one
                if t_right < best_t:
                    stack_node[sp] = right
                    stack_dist[sp] = t_right
                    sp += 1
                node = left
                continue
        # pop the next deferred node still worth visiting
        while sp > 0:
            sp -= 1
            if stack_dist[sp] < best_t:
                node = stack_node[sp]
                break
        else:
            return best_t, best_i


# ---------------------------------------------------------------------------
# Tracing kernel
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def trace_chunk(
    ray_start,
    ray_end,
    seed,
    source,
    v0, e1, e2, normals, tri_mat,
    node_min, node_max, node_left, node_right, node_first, node_count, tri_order,
    mat_alpha,  # (n_materials, n_bands) energy absorption
    mat_scat,  # (n_materials,) branch probability of a diffuse bounce
    receivers,  # (n_receivers, 3)
    radius,
    speed_of_sound,
    fs,
    n_bins,
    max_bounces,
    cutoff,  # absolute per-ray termination energy
    ray_energy,  # initial per-band energy of one ray (E0 / M)
    deposit_source_segment,
    hist,  # (n_receivers, n_bands, n_bins) accumulated in ray order
):
    """Trace rays [ray_start, ray_end) into hist; returns traced segment count."""
    n_rec = receivers.shape[0]
    n_bands = mat_alpha.shape[1]
    inv_cross = 1.0 / (np.pi * radius * radius)
    r2 = radius * radius
    energy = np.empty(n_bands)
    segments = 0
    for ray_index in range(ray_start, ray_end):
        s0, s1 = _ray_stream(seed, ray_index)
        # uniform direction on the sphere
        s0, s1, u = _uniform(s0, s1)
        dz = 2.0 * u - 1.0
        s0, s1, u = _uniform(s0, s1)
        phi = 2.0 * np.pi * u
        rr = np.sqrt(max(0.0, 1.0 - dz * dz))
        dx = rr * np.cos(phi)
        dy = rr * np.sin(phi)
        ox, oy, oz = source[0], source[1], source[2]
        for b in range(n_bands):
            energy[b] = ray_energy
        path_len = 0.0
        for bounce in range(max_bounces + 1):
            t_hit, ti = _bvh_intersect(
                ox, oy, oz, dx, dy, dz,
                v0, e1, e2,
                node_min, node_max, node_left, node_right, node_first, node_count, tri_order,
            )
            if ti < 0:
                break  # escaped an open scene
            segments += 1
            if bounce > 0 or deposit_source_segment:
                for rec in range(n_rec):
                    cx = receivers[rec, 0] - ox
                    cy = receivers[rec, 1] - oy
                    cz = receivers[rec, 2] - oz
                    s_star = cx * dx + cy * dy + cz * dz
                    b2 = cx * cx + cy * cy + cz * cz - s_star * s_star
                    if b2 >= r2:
                        continue
                    h = np.sqrt(r2 - b2)
                    if s_star + h <= 1e-9 or s_star - h >= t_hit:
                        continue
                    s_cl = min(max(s_star, 0.0), t_hit)
                    t_dep = (path_len + s_cl) / speed_of_sound
                    bin_idx = int(t_dep * fs + 0.5)
                    if 0 <= bin_idx < n_bins:
                        for b in range(n_bands):
                            hist[rec, b, bin_idx] += energy[b] * inv_cross
            mat = tri_mat[ti]
            e_max = 0.0
            for b in range(n_bands):
                energy[b] *= 1.0 - mat_alpha[mat, b]
                if energy[b] > e_max:
                    e_max = energy[b]
            if e_max < cutoff or bounce == max_bounces:
                break
            path_len += t_hit
            ox += t_hit * dx
            oy += t_hit * dy
            oz += t_hit * dz
            nx, ny, nz = normals[ti, 0], normals[ti, 1], normals[ti, 2]
            cos_in = dx * nx + dy * ny + dz * nz
            if cos_in > 0.0:
                nx, ny, nz = -nx, -ny, -nz
                cos_in = -cos_in
            s0, s1, u = _uniform(s0, s1)
            if u < mat_scat[mat]:
                # cosine-weighted hemisphere around the oriented normal
                s0, s1, u1 = _uniform(s0, s1)
                s0, s1, u2 = _uniform(s0, s1)
                rl = np.sqrt(u1)
                phi = 2.0 * np.pi * u2
                # tangent frame: t1 = normalize(cross(n, a)), a picked away from n
                if abs(nx) < 0.9:
                    ax, ay, az = 1.0, 0.0, 0.0
                else:
                    ax, ay, az = 0.0, 1.0, 0.0
                t1x = ny * az - nz * ay
                t1y = nz * ax - nx * az
                t1z = nx * ay - ny * ax
                tn = np.sqrt(t1x * t1x + t1y * t1y + t1z * t1z)
                t1x /= tn
                t1y /= tn
                t1z /= tn
                t2x = ny * t1z - nz * t1y
                t2y = nz * t1x - nx * t1z
                t2z = nx * t1y - ny * t1x
                ca = rl * np.cos(phi)
                sa = rl * np.sin(phi)
                cz_ = np.sqrt(max(0.0, 1.0 - u1))
                dx = ca * t1x + sa * t2x + cz_ * nx
                dy = ca * t1y + sa * t2y + cz_ * ny
                dz = ca * t1z + sa * t2z + cz_ * nz
            else:
                dx -= 2.0 * cos_in * nx
                dy -= 2.0 * cos_in * ny
                dz -= 2.0 * cos_in * nz
    return segments
