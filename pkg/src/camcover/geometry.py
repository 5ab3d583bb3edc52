"""Pure 3D math: ray casting, axis-angle rotation, cap sampling, frusta.

Vectors are float64 numpy arrays of shape (3,). World-up is +y (room
height runs along the y-axis); view directions parallel to world-up are
rejected because the camera frame is undefined there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from camcover import kernels
from camcover.errors import GeometryError

WORLD_UP = np.array([0.0, 1.0, 0.0])

# Unit-dot threshold treated as "parallel" in rotation transport and in
# the vertical-direction exclusion.
PARALLEL_EPS = 1e-9


def normalize(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n < 1e-12:
        raise GeometryError("cannot normalize a zero vector")
    return np.asarray(v, dtype=np.float64) / n


def is_vertical(direction: np.ndarray) -> bool:
    """True when a unit direction is within tolerance of +/- world-up."""
    return abs(float(direction[1])) >= 1.0 - PARALLEL_EPS


def ray_triangle_intersect(origin, direction, triangle):
    """Smallest hit distance of a ray against one triangle, or None.

    Edges are inclusive; rays parallel to the triangle plane miss; hits
    closer than 1e-9 are discarded (self-intersection guard).
    """
    tri = np.asarray(triangle, dtype=np.float64).reshape(1, 3, 3)
    t = kernels.ray_first_hits(origin, np.asarray(direction, dtype=np.float64)[None, :], tri)[0]
    return None if np.isinf(t) else float(t)


def ray_first_hit(origin, direction, mesh):
    """First intersection (t, point) of a ray with a triangle soup.

    ``mesh`` is anything with a ``triangles`` (m, 3, 3) array, or such
    an array itself. Returns None when nothing is hit.
    """
    tris = getattr(mesh, "triangles", mesh)
    origin = np.asarray(origin, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    t = kernels.ray_first_hits(origin, direction[None, :], tris)[0]
    if np.isinf(t):
        return None
    return float(t), origin + t * direction


def rotate_about_axis(v: np.ndarray, axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation of ``v`` about a unit ``axis`` (right-handed)."""
    v = np.asarray(v, dtype=np.float64)
    c, s = np.cos(angle), np.sin(angle)
    return v * c + np.cross(axis, v) * s + axis * np.dot(axis, v) * (1.0 - c)


def rotate_along(v_from: np.ndarray, v_to: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Apply the minimal rotation carrying ``v_from`` onto ``v_to`` to ``v``.

    Near-coincident endpoints (dot > 1 - 1e-9) return ``v`` unchanged;
    antiparallel endpoints have no unique rotation axis and raise.
    """
    f = np.asarray(v_from, dtype=np.float64)
    t = np.asarray(v_to, dtype=np.float64)
    d = float(np.dot(f, t))
    if d > 1.0 - PARALLEL_EPS:
        return np.array(v, dtype=np.float64)
    if d < -1.0 + PARALLEL_EPS:
        raise GeometryError("rotation axis undefined for antiparallel vectors")
    axis = normalize(np.cross(f, t))
    angle = float(np.arccos(np.clip(d, -1.0, 1.0)))
    return rotate_about_axis(v, axis, angle)


def sample_spherical_cap(alpha: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """n unit vectors uniform on the spherical cap of half-angle alpha about +z.

    z is uniform on [cos(alpha), 1] and azimuth uniform on [0, 2pi).
    Returns an (n, 3) array.
    """
    z_min = np.cos(alpha)
    out = np.empty((n, 3))
    for i in range(n):
        z = rng.uniform(z_min, 1.0)
        r = np.sqrt(max(0.0, 1.0 - z * z))
        theta = rng.uniform(0.0, 2.0 * np.pi)
        out[i] = (r * np.cos(theta), r * np.sin(theta), z)
    return out


@dataclass
class FrustumCorners:
    """Field-of-view extremity points at unit offset from the apex."""

    r_w1: np.ndarray
    r_w2: np.ndarray
    r_h1: np.ndarray
    r_h2: np.ndarray


def frustum_corners(position, direction, hfov: float, vfov: float) -> FrustumCorners:
    """Horizontal/vertical FOV extremity points for a zero-roll camera.

    right = dir x up, cam_up = right x dir; the w corners rotate ``dir``
    about cam_up by +/- hfov/2 and the h corners rotate it about right
    by +/- vfov/2, all at unit offset from ``position``.
    """
    position = np.asarray(position, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    if abs(float(np.dot(direction, WORLD_UP))) >= 1.0 - PARALLEL_EPS:
        raise GeometryError("view direction parallel to world-up has no frame")
    right = normalize(np.cross(direction, WORLD_UP))
    cam_up = np.cross(right, direction)
    return FrustumCorners(
        r_w1=position + rotate_about_axis(direction, cam_up, +0.5 * hfov),
        r_w2=position + rotate_about_axis(direction, cam_up, -0.5 * hfov),
        r_h1=position + rotate_about_axis(direction, right, +0.5 * vfov),
        r_h2=position + rotate_about_axis(direction, right, -0.5 * vfov),
    )
