"""Pure NumPy ray-casting kernels (fallback backend).

Vectorized Moller-Trumbore over all (ray, triangle) pairs, chunked over
rays to bound peak memory. Semantics are shared with the compiled
backend: triangles are double-sided, determinants below 1e-12 count as
parallel, hits closer than 1e-9 are ignored (self-intersection guard)
and barycentric edge tests carry a 1e-10 inclusive slack so rays cannot
slip between adjacent triangles along a shared edge.
"""

import numpy as np

DET_EPS = 1e-12
T_MIN = 1e-9
EDGE_EPS = 1e-10

_CHUNK = 512


def ray_first_hits(origin, dirs, triangles):
    """Distance to the first mesh intersection for each ray.

    origin: (3,) shared ray origin. dirs: (n, 3) unit directions.
    triangles: (m, 3, 3) vertex triples. Returns (n,) float64 with
    np.inf where a ray misses every triangle.
    """
    dirs = np.asarray(dirs, dtype=np.float64)
    n = dirs.shape[0]
    out = np.full(n, np.inf)
    if triangles is None or len(triangles) == 0 or n == 0:
        return out
    tris = np.asarray(triangles, dtype=np.float64)
    v0 = tris[:, 0, :]
    edge1 = tris[:, 1, :] - v0  # (m, 3)
    edge2 = tris[:, 2, :] - v0
    tvec = np.asarray(origin, dtype=np.float64) - v0  # (m, 3)
    qvec = np.cross(tvec, edge1)  # (m, 3), ray-independent
    tq = np.einsum("mj,mj->m", edge2, qvec)  # (m,)

    for lo in range(0, n, _CHUNK):
        d = dirs[lo : lo + _CHUNK]  # (k, 3)
        pvec = np.cross(d[:, None, :], edge2[None, :, :])  # (k, m, 3)
        det = np.einsum("kmj,mj->km", pvec, edge1)
        ok = np.abs(det) >= DET_EPS
        inv_det = np.where(ok, 1.0 / np.where(ok, det, 1.0), np.nan)
        u = np.einsum("mj,kmj->km", tvec, pvec) * inv_det
        v = np.einsum("kj,mj->km", d, qvec) * inv_det
        t = tq[None, :] * inv_det
        hit = (
            ok
            & (u >= -EDGE_EPS)
            & (v >= -EDGE_EPS)
            & (u + v <= 1.0 + EDGE_EPS)
            & (t >= T_MIN)
        )
        t = np.where(hit, t, np.inf)
        out[lo : lo + _CHUNK] = t.min(axis=1)
    return out
