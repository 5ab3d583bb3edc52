# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled ray-casting kernels.

Same contract as camcover.kernels._pure: double-sided Moller-Trumbore,
determinant cutoff 1e-12, hits below t = 1e-9 ignored, barycentric edge
tests inclusive with 1e-10 slack.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF DET_EPS = 1e-12
DEF T_MIN = 1e-9
DEF EDGE_EPS = 1e-10


def ray_first_hits(origin, dirs, triangles):
    """Distance to the first mesh intersection for each ray (inf = miss)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] org = np.ascontiguousarray(origin, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] d = np.ascontiguousarray(dirs, dtype=np.float64)
    cdef Py_ssize_t n = d.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.full(n, np.inf)
    if triangles is None or len(triangles) == 0 or n == 0:
        return out
    cdef cnp.ndarray[cnp.float64_t, ndim=3] tris = np.ascontiguousarray(triangles, dtype=np.float64)
    cdef Py_ssize_t m = tris.shape[0]

    cdef double[::1] org_v = org
    cdef double[:, ::1] d_v = d
    cdef double[:, :, ::1] t_v = tris
    cdef double[::1] out_v = out

    cdef Py_ssize_t i, j
    cdef double ox = org_v[0], oy = org_v[1], oz = org_v[2]
    cdef double dx, dy, dz
    cdef double e1x, e1y, e1z, e2x, e2y, e2z
    cdef double tvx, tvy, tvz, qx, qy, qz, px, py, pz
    cdef double det, inv_det, u, v, t, best

    with nogil:
        for i in range(n):
            dx = d_v[i, 0]; dy = d_v[i, 1]; dz = d_v[i, 2]
            best = out_v[i]
            for j in range(m):
                e1x = t_v[j, 1, 0] - t_v[j, 0, 0]
                e1y = t_v[j, 1, 1] - t_v[j, 0, 1]
                e1z = t_v[j, 1, 2] - t_v[j, 0, 2]
                e2x = t_v[j, 2, 0] - t_v[j, 0, 0]
                e2y = t_v[j, 2, 1] - t_v[j, 0, 1]
                e2z = t_v[j, 2, 2] - t_v[j, 0, 2]
                px = dy * e2z - dz * e2y
                py = dz * e2x - dx * e2z
                pz = dx * e2y - dy * e2x
                det = e1x * px + e1y * py + e1z * pz
                if det > -DET_EPS and det < DET_EPS:
                    continue
                inv_det = 1.0 / det
                tvx = ox - t_v[j, 0, 0]
                tvy = oy - t_v[j, 0, 1]
                tvz = oz - t_v[j, 0, 2]
                u = (tvx * px + tvy * py + tvz * pz) * inv_det
                if u < -EDGE_EPS:
                    continue
                qx = tvy * e1z - tvz * e1y
                qy = tvz * e1x - tvx * e1z
                qz = tvx * e1y - tvy * e1x
                v = (dx * qx + dy * qy + dz * qz) * inv_det
                if v < -EDGE_EPS or u + v > 1.0 + EDGE_EPS:
                    continue
                t = (e2x * qx + e2y * qy + e2z * qz) * inv_det
                if t >= T_MIN and t < best:
                    best = t
            out_v[i] = best
    return out
