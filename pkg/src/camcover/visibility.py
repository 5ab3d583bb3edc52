"""Per-configuration visibility of free voxels.

``calculate_camera_view`` grows a 6-connected flood fill through free
voxels that pass the field-of-view test, then filters the collected set
by depth-of-field and a mesh occlusion ray cast. ``brute_force_view``
is the independent oracle: it tests every free voxel in isolation with
an explicit angle comparison and the same ray cast, assuming nothing
about connectivity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from camcover import kernels
from camcover.errors import GeometryError
from camcover.geometry import WORLD_UP, frustum_corners, is_vertical, normalize
from camcover.scene import TriangleMesh, VoxelGrid

# 26-connected expansion: axis-only stepping cannot track the frustum
# cone where it is thinner than one voxel diagonal (near the apex and
# along clipped wall corners), which strands visible slivers.
_NEIGHBOR_OFFSETS = np.array(
    [
        (dx, dy, dz)
        for dx in (-1, 0, 1)
        for dy in (-1, 0, 1)
        for dz in (-1, 0, 1)
        if (dx, dy, dz) != (0, 0, 0)
    ],
    dtype=np.int32,
)


@dataclass
class CameraIntrinsics:
    """Shared camera optics: FOV angles (radians) and depth-of-field band."""

    hfov: float = np.pi / 2
    vfov: float = np.deg2rad(73.0)
    dof_min: float = 0.0
    dof_max: float = np.inf

    def validate(self) -> None:
        if not (0.0 < self.hfov < np.pi and 0.0 < self.vfov < np.pi):
            raise GeometryError("FOV angles must lie in (0, pi)")
        if not 0.0 <= self.dof_min < self.dof_max:
            raise GeometryError("need 0 <= dof_min < dof_max")


@dataclass
class CameraConfig:
    """A free-voxel position id paired with a unit view direction (zero roll)."""

    position: int
    direction: np.ndarray

    def __post_init__(self):
        self.direction = np.asarray(self.direction, dtype=np.float64)

    def validate(self, grid: VoxelGrid) -> None:
        if not 0 <= self.position < grid.n_free:
            raise GeometryError(f"position id {self.position} outside free range")
        if abs(np.linalg.norm(self.direction) - 1.0) > 1e-9:
            raise GeometryError("direction must be unit norm")
        if is_vertical(self.direction):
            raise GeometryError("direction parallel to world-up is excluded")


def _fov_planes(cam: np.ndarray, direction: np.ndarray, intrinsics: CameraIntrinsics):
    """Unit FOV extremity offsets and plane normals from the frustum corners."""
    fc = frustum_corners(cam, direction, intrinsics.hfov, intrinsics.vfov)
    w1, w2 = fc.r_w1 - cam, fc.r_w2 - cam
    h1, h2 = fc.r_h1 - cam, fc.r_h2 - cam
    return w1, w2, normalize(np.cross(w1, w2)), h1, h2, normalize(np.cross(h1, h2))


def _wedge_pass(offsets: np.ndarray, b1, b2, n) -> np.ndarray:
    """True where the plane-projected offsets fall inside the non-reflex
    wedge between boundary offsets ``b1`` and ``b2`` (inclusive)."""
    proj = offsets - np.outer(offsets @ n, n)
    s1 = np.cross(np.broadcast_to(b1, proj.shape), proj) @ n
    s2 = np.cross(proj, np.broadcast_to(b2, proj.shape)) @ n
    return (s1 >= 0.0) & (s2 >= 0.0)


_BUNDLE_RAYS = 9  # frustum-spanning seed rays per FOV axis


def _bundle_seeds(
    grid: VoxelGrid, cam: np.ndarray, direction: np.ndarray, intrinsics: CameraIntrinsics
) -> np.ndarray:
    """Voxel coords pierced by a bundle of rays spanning the frustum,
    each marched until its first closed voxel or the grid boundary.

    Near the apex and along clipped obstacle edges the frustum is
    thinner than one voxel, so voxels the camera can see may have no
    lattice path through FOV-passing voxels back to the camera's
    neighbourhood; the fill seeded per the pseudocode then never
    reaches them. The bundle plants seeds inside every frustum region
    the apex can reach in a straight line. Seeds are still subject to
    the normal FOV test before they expand.
    """
    right = normalize(np.cross(direction, WORLD_UP))
    cam_up = np.cross(right, direction)
    # pinhole lattice: |horizontal tangent| <= tan(hfov/2) is exactly the
    # horizontal FOV wedge, likewise vertically
    ta = np.linspace(-1.0, 1.0, _BUNDLE_RAYS) * np.tan(0.5 * intrinsics.hfov)
    tb = np.linspace(-1.0, 1.0, _BUNDLE_RAYS) * np.tan(0.5 * intrinsics.vfov)
    rays = (
        direction[None, None, :]
        + ta[:, None, None] * right[None, None, :]
        + tb[None, :, None] * cam_up[None, None, :]
    ).reshape(-1, 3)
    rays /= np.linalg.norm(rays, axis=1, keepdims=True)

    dims = np.array(grid.dims)
    step = 0.25 * grid.voxel_size
    max_steps = int(4 * dims.sum()) + 4
    active = np.ones(len(rays), dtype=bool)
    seen = np.zeros(grid.dims, dtype=bool)
    seeds = []
    for k in range(1, max_steps):
        idx = np.floor((cam + k * step * rays[active] - grid.origin) / grid.voxel_size).astype(
            np.int32
        )
        ok = ((idx >= 0) & (idx < dims)).all(axis=1)
        open_here = np.zeros(len(idx), dtype=bool)
        open_here[ok] = ~grid.closed[tuple(idx[ok].T)]
        alive = np.nonzero(active)[0]
        active[alive[~open_here]] = False
        idx = idx[open_here]
        if len(idx):
            fresh = ~seen[tuple(idx.T)]
            seen[tuple(idx.T)] = True
            seeds.append(idx[fresh])
        if not active.any():
            break
    if not seeds:
        return np.empty((0, 3), dtype=np.int32)
    return np.concatenate(seeds)


def calculate_camera_view(
    mesh: TriangleMesh, grid: VoxelGrid, config: CameraConfig, intrinsics: CameraIntrinsics
) -> set:
    """Free-voxel ids visible from ``config`` via the flood-fill frustum walk.

    The fill is seeded at the camera voxel's 6 neighbours (plus central
    view-ray voxels, see _ray_bridge_seeds) and expands through free
    voxels inside both FOV wedges; collected voxels are then kept iff
    min(first-hit distance, dof_max) >= distance >= dof_min. The
    camera's own voxel is never visible.
    """
    config.validate(grid)
    intrinsics.validate()
    cam = grid.center_of(config.position)
    w1, w2, n_w, h1, h2, n_h = _fov_planes(cam, config.direction, intrinsics)

    dims = np.array(grid.dims)
    visited = np.zeros(grid.dims, dtype=bool)
    cam_coord = grid.free_coords[config.position]
    visited[tuple(cam_coord)] = True

    frontier = np.concatenate(
        [
            cam_coord[None, :] + _NEIGHBOR_OFFSETS,
            _bundle_seeds(grid, cam, config.direction, intrinsics),
        ]
    ).astype(np.int32)

    collected = []
    while len(frontier):
        inb = ((frontier >= 0) & (frontier < dims)).all(axis=1)
        frontier = frontier[inb]
        if not len(frontier):
            break
        fresh = ~visited[tuple(frontier.T)]
        frontier = frontier[fresh]
        if not len(frontier):
            break
        # a batched frontier can repeat a coordinate; keep the first
        frontier = np.unique(frontier, axis=0)
        visited[tuple(frontier.T)] = True
        free = ~grid.closed[tuple(frontier.T)]
        frontier = frontier[free]
        if not len(frontier):
            break
        centers = grid.origin + (frontier + 0.5) * grid.voxel_size
        offs = centers - cam
        passing = frontier[
            _wedge_pass(offs, w1, w2, n_w) & _wedge_pass(offs, h1, h2, n_h)
        ]
        if not len(passing):
            break
        collected.append(passing)
        frontier = (passing[:, None, :] + _NEIGHBOR_OFFSETS[None, :, :]).reshape(-1, 3)

    if not collected:
        return set()
    coords = np.concatenate(collected)
    centers = grid.origin + (coords + 0.5) * grid.voxel_size
    offs = centers - cam
    dists = np.linalg.norm(offs, axis=1)
    t = kernels.ray_first_hits(cam, offs / dists[:, None], mesh.triangles)
    keep = (np.minimum(t, intrinsics.dof_max) >= dists) & (dists >= intrinsics.dof_min)
    ids = grid.free_index[tuple(coords[keep].T)]
    return set(int(i) for i in ids)


def brute_force_view(
    mesh: TriangleMesh, grid: VoxelGrid, config: CameraConfig, intrinsics: CameraIntrinsics
) -> set:
    """Oracle visibility: every free voxel tested independently.

    A voxel is visible iff the angles of its offset's horizontal and
    vertical plane projections from the view axis are within the
    half-FOVs, its distance lies in the depth-of-field band, and the
    mesh ray cast towards it is unobstructed.
    """
    config.validate(grid)
    intrinsics.validate()
    cam = grid.center_of(config.position)
    d = config.direction
    right = normalize(np.cross(d, WORLD_UP))
    cam_up = np.cross(right, d)

    centers = grid.centers()
    offs = centers - cam
    dists = np.linalg.norm(offs, axis=1)
    own = dists < 1e-12

    def angle_ok(plane_normal, half_angle):
        proj = offs - np.outer(offs @ plane_normal, plane_normal)
        return proj @ d >= np.cos(half_angle) * np.linalg.norm(proj, axis=1)

    fov = angle_ok(cam_up, 0.5 * intrinsics.hfov) & angle_ok(right, 0.5 * intrinsics.vfov)
    cand = fov & ~own & (dists >= intrinsics.dof_min)
    idx = np.nonzero(cand)[0]
    if not len(idx):
        return set()
    t = kernels.ray_first_hits(cam, offs[idx] / dists[idx, None], mesh.triangles)
    visible = idx[np.minimum(t, intrinsics.dof_max) >= dists[idx]]
    return set(int(i) for i in visible)


def invert_visibility(per_config_sets) -> dict:
    """Invert (config index, voxel-id set) pairs to voxel -> config list.

    Config lists are ordered by config index; voxel keys are sorted.
    """
    inv: dict[int, list[int]] = {}
    for cfg_idx, voxels in per_config_sets:
        for v in sorted(voxels):
            inv.setdefault(int(v), []).append(int(cfg_idx))
    return {v: inv[v] for v in sorted(inv)}


@dataclass
class VisibilityMap:
    """Per-config visible sets plus the inverted voxel -> configs map."""

    sets: list = field(default_factory=list)

    @property
    def inverted(self) -> dict:
        return invert_visibility(enumerate(self.sets))

    def check_inversion(self) -> bool:
        inv = self.inverted
        for v, cfgs in inv.items():
            for c in cfgs:
                if v not in self.sets[c]:
                    return False
        return sum(len(s) for s in self.sets) == sum(len(c) for c in inv.values())
