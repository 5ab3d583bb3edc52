"""Environment ingestion and synthesis.

Loads OBJ triangle soups, generates parametric benchmark rooms,
voxelizes meshes into a free-space grid and aggregates voxels into
supervoxel blocks. The grid convention: cubic voxels of edge
``voxel_size`` (1 world unit by default), world-up along +y, free
voxels indexed densely in C-order of their (ix, iy, iz) coordinates.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from camcover.errors import SceneError

log = logging.getLogger(__name__)

# Voxel boxes are shrunk by this amount for the triangle overlap test so
# surfaces lying exactly on a voxel face do not close both neighbours.
_SAT_EPS = 1e-6
# Generated partition slabs are inset by this amount from their
# whole-voxel footprint so each slab closes exactly its own columns.
_SLAB_INSET = 1e-3


@dataclass
class TriangleMesh:
    """Triangle soup with cached axis-aligned bounds."""

    triangles: np.ndarray  # (n, 3, 3) float64
    dropped_faces: int = 0

    def __post_init__(self):
        self.triangles = np.asarray(self.triangles, dtype=np.float64).reshape(-1, 3, 3)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        pts = self.triangles.reshape(-1, 3)
        return pts.min(axis=0), pts.max(axis=0)


def _validated_triangles(raw: list, dropped_ok: bool = True) -> tuple[np.ndarray, int]:
    """Filter degenerate faces (area <= 1e-12), counting the drops."""
    tris = np.asarray(raw, dtype=np.float64).reshape(-1, 3, 3)
    if len(tris) == 0:
        return tris, 0
    areas = 0.5 * np.linalg.norm(
        np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0]), axis=1
    )
    keep = areas > 1e-12
    return tris[keep], int((~keep).sum())


def load_mesh(path) -> TriangleMesh:
    """Load an ASCII OBJ (v/f records, 1-based indices, fan triangulation).

    Degenerate faces are dropped with a logged count; malformed lines
    and out-of-range indices raise SceneError.
    """
    vertices: list[tuple[float, float, float]] = []
    faces: list[tuple[int, int, int]] = []
    try:
        fh = open(path, "r")
    except OSError as exc:
        raise SceneError(f"cannot open mesh file {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens or tokens[0].startswith("#"):
                continue
            if tokens[0] == "v":
                if len(tokens) < 4:
                    raise SceneError(f"{path}:{lineno}: vertex needs 3 coordinates")
                try:
                    vertices.append(tuple(float(t) for t in tokens[1:4]))
                except ValueError as exc:
                    raise SceneError(f"{path}:{lineno}: non-numeric vertex") from exc
            elif tokens[0] == "f":
                try:
                    # accept vid, vid/tid, vid//nid and vid/tid/nid forms
                    idx = [int(t.split("/")[0]) for t in tokens[1:]]
                except ValueError as exc:
                    raise SceneError(f"{path}:{lineno}: bad face index") from exc
                if len(idx) < 3:
                    raise SceneError(f"{path}:{lineno}: face needs >= 3 vertices")
                for i in idx:
                    if not 1 <= i <= len(vertices):
                        raise SceneError(f"{path}:{lineno}: vertex index {i} out of range")
                for k in range(2, len(idx)):  # fan triangulation
                    faces.append((idx[0] - 1, idx[k - 1] - 1, idx[k] - 1))
    if not faces:
        raise SceneError(f"{path}: no faces found")
    verts = np.asarray(vertices, dtype=np.float64)
    if not np.isfinite(verts).all():
        raise SceneError(f"{path}: non-finite vertex coordinates")
    tris, dropped = _validated_triangles(verts[np.asarray(faces)])
    if dropped:
        log.warning("%s: dropped %d degenerate face(s)", path, dropped)
    if len(tris) == 0:
        raise SceneError(f"{path}: all faces degenerate")
    return TriangleMesh(tris, dropped_faces=dropped)


def save_obj(mesh: TriangleMesh, path) -> None:
    """Write a triangle soup as ASCII OBJ (3 vertices per face)."""
    with open(path, "w") as fh:
        fh.write("# camcover triangle soup\n")
        for tri in mesh.triangles:
            for v in tri:
                fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for i in range(mesh.n_triangles):
            a = 3 * i + 1
            fh.write(f"f {a} {a + 1} {a + 2}\n")


# ---------------------------------------------------------------------------
# Room scenario generator


@dataclass
class RoomParams:
    """Inputs of the cuboid benchmark-room generator (whole-voxel dims)."""

    length: int
    height: int
    breadth: int
    num_walls: int = 0
    y_wall_edge_ratio: float = 1.0
    z_wall_edge_ratio: float = 0.6
    wall_width: int = 1
    random_range: float = 0.0
    seed: int = 0
    wall_orient: str = "alternate"

    def validate(self) -> None:
        if min(self.length, self.height, self.breadth) < 1:
            raise SceneError("room dimensions must be >= 1 voxel")
        if self.num_walls < 0:
            raise SceneError("num_walls must be >= 0")
        if self.num_walls > 0 and self.wall_width < 1:
            raise SceneError("wall_width must be >= 1 when walls are present")
        for name in ("y_wall_edge_ratio", "z_wall_edge_ratio", "random_range"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SceneError(f"{name} must lie in [0, 1], got {v}")
        if self.wall_orient not in ("alternate", "same-side"):
            raise SceneError(f"unknown wall_orient {self.wall_orient!r}")


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def _box_triangles(lo, hi) -> list:
    """12 triangles forming the closed surface of an axis-aligned box."""
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    c = [
        (x0, y0, z0), (x1, y0, z0), (x1, y1, z0), (x0, y1, z0),
        (x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1),
    ]
    quads = [
        (0, 1, 2, 3), (4, 5, 6, 7),  # z faces
        (0, 1, 5, 4), (3, 2, 6, 7),  # y faces
        (0, 3, 7, 4), (1, 2, 6, 5),  # x faces
    ]
    tris = []
    for a, b, cc, d in quads:
        tris.append((c[a], c[b], c[cc]))
        tris.append((c[a], c[cc], c[d]))
    return tris


def generate_room(params: RoomParams) -> TriangleMesh:
    """Cuboid shell plus interior partition slabs at equidistant x-intervals.

    Slabs are anchored at the floor, span a whole-voxel footprint of
    wall_width x round(y_ratio*height) x round(z_ratio*breadth) voxels
    and are z-anchored per ``wall_orient`` (alternating sides or all on
    the low-z side). Each slab centre may be perturbed along x by
    u * random_range * interval with u ~ Uniform(-1, 1) drawn from
    ``seed``; the footprint is then snapped back to whole voxels.
    Deterministic given the seed.
    """
    params.validate()
    L, H, B = params.length, params.height, params.breadth
    tris = _box_triangles((0.0, 0.0, 0.0), (float(L), float(H), float(B)))

    if params.num_walls > 0:
        y_vox = _round_half_up(params.y_wall_edge_ratio * H)
        z_vox = _round_half_up(params.z_wall_edge_ratio * B)
        if y_vox < 1 or z_vox < 1:
            raise SceneError("wall cross-section rounds to zero voxels")
        w = params.wall_width
        interval = L / (params.num_walls + 1)
        rng = np.random.default_rng(params.seed)
        spans = []
        for i in range(1, params.num_walls + 1):
            x_c = i * interval
            if params.random_range > 0.0:
                x_c += rng.uniform(-1.0, 1.0) * params.random_range * interval
            x0 = _round_half_up(x_c - 0.5 * w)
            if x0 < 1 or x0 + w > L - 1:
                raise SceneError(f"wall {i} overlaps the room shell")
            spans.append(x0)
            if params.wall_orient == "alternate" and i % 2 == 0:
                z0, z1 = B - z_vox, B
            else:
                z0, z1 = 0, z_vox
            d = _SLAB_INSET
            tris += _box_triangles(
                (x0 + d, 0.0 + d, z0 + d), (x0 + w - d, y_vox - d, z1 - d)
            )
        spans.sort()
        for a, b in zip(spans, spans[1:]):
            if a + w > b:
                raise SceneError("partition walls overlap each other")

    return TriangleMesh(np.asarray(tris))


# ---------------------------------------------------------------------------
# Voxelization


@dataclass
class VoxelGrid:
    """Axis-aligned cubic grid with a dense index over free voxels."""

    origin: np.ndarray  # (3,)
    voxel_size: float
    closed: np.ndarray  # (nx, ny, nz) bool, True = closed

    free_coords: np.ndarray = field(init=False)  # (n_free, 3) int32
    free_index: np.ndarray = field(init=False)  # (nx, ny, nz) int32, -1 = closed

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64)
        self.closed = np.asarray(self.closed, dtype=bool)
        coords = np.argwhere(~self.closed).astype(np.int32)
        self.free_coords = coords
        self.free_index = np.full(self.closed.shape, -1, dtype=np.int32)
        self.free_index[tuple(coords.T)] = np.arange(len(coords), dtype=np.int32)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(self.closed.shape)

    @property
    def n_free(self) -> int:
        return len(self.free_coords)

    def centers(self, free_ids=None) -> np.ndarray:
        """World-space centres of the given free ids (all when None)."""
        coords = self.free_coords if free_ids is None else self.free_coords[free_ids]
        return self.origin + (coords + 0.5) * self.voxel_size

    def center_of(self, free_id: int) -> np.ndarray:
        return self.origin + (self.free_coords[free_id] + 0.5) * self.voxel_size

    def free_id_at_point(self, point) -> int:
        """Dense free id of the voxel containing a world point (-1 if closed/outside)."""
        idx = np.floor((np.asarray(point) - self.origin) / self.voxel_size).astype(int)
        if ((idx < 0) | (idx >= np.array(self.closed.shape))).any():
            return -1
        return int(self.free_index[tuple(idx)])


def _triangle_box_overlaps(tri: np.ndarray, centers: np.ndarray, h: float) -> np.ndarray:
    """Separating-axis triangle/cube test for one triangle vs many cubes.

    ``centers`` is (k, 3); ``h`` the cube half-extent (already shrunk by
    the caller). Returns a (k,) bool mask.
    """
    v = tri[None, :, :] - centers[:, None, :]  # (k, 3 verts, 3)
    ok = np.ones(len(centers), dtype=bool)

    # box axes
    for ax in range(3):
        mn = v[:, :, ax].min(axis=1)
        mx = v[:, :, ax].max(axis=1)
        ok &= (mn <= h) & (mx >= -h)

    # triangle plane
    e0 = tri[1] - tri[0]
    e1 = tri[2] - tri[1]
    e2 = tri[0] - tri[2]
    n = np.cross(e0, tri[2] - tri[0])
    r = h * np.abs(n).sum()
    s = v[:, 0, :] @ n
    ok &= np.abs(s) <= r

    # 9 edge-axis cross products
    for e in (e0, e1, e2):
        for ax in range(3):
            u = np.zeros(3)
            u[ax] = 1.0
            a = np.cross(u, e)
            if not a.any():
                continue
            p = v @ a  # (k, 3)
            r = h * np.abs(a).sum()
            ok &= (p.min(axis=1) <= r) & (p.max(axis=1) >= -r)
    return ok


def voxelize(mesh: TriangleMesh, voxel_size: float = 1.0, interior_seed=None) -> VoxelGrid:
    """Classify cubic voxels over the mesh bounds as free or closed.

    A voxel is closed when any triangle overlaps its (slightly shrunk)
    cube; the rest are split by a 6-connected flood fill from
    ``interior_seed`` (grid centre by default, auto-scanning for a
    surface-free voxel when the centre is closed): reachable voxels are
    free, unreachable ones (outside the shell or sealed off) closed.
    """
    if mesh.n_triangles == 0:
        raise SceneError("cannot voxelize an empty mesh")
    if voxel_size <= 0:
        raise SceneError("voxel_size must be positive")
    lo, hi = mesh.bounds
    dims = np.maximum(1, np.ceil((hi - lo) / voxel_size - 1e-9).astype(int))
    nx, ny, nz = (int(d) for d in dims)

    surface = np.zeros((nx, ny, nz), dtype=bool)
    h = 0.5 * voxel_size - _SAT_EPS
    for tri in mesh.triangles:
        t_lo = np.floor((tri.min(axis=0) - lo) / voxel_size - 1e-9).astype(int)
        t_hi = np.floor((tri.max(axis=0) - lo) / voxel_size + 1e-9).astype(int)
        t_lo = np.clip(t_lo, 0, dims - 1)
        t_hi = np.clip(t_hi, 0, dims - 1)
        ix, iy, iz = np.meshgrid(
            np.arange(t_lo[0], t_hi[0] + 1),
            np.arange(t_lo[1], t_hi[1] + 1),
            np.arange(t_lo[2], t_hi[2] + 1),
            indexing="ij",
        )
        idx = np.stack([ix.ravel(), iy.ravel(), iz.ravel()], axis=1)
        if len(idx) == 0:
            continue
        centers = lo + (idx + 0.5) * voxel_size
        hits = _triangle_box_overlaps(tri, centers, h)
        surface[tuple(idx[hits].T)] = True

    open_mask = ~surface
    if not open_mask.any():
        raise SceneError("mesh closes every voxel; no free space")

    if interior_seed is not None:
        seed_idx = np.floor((np.asarray(interior_seed) - lo) / voxel_size).astype(int)
        if ((seed_idx < 0) | (seed_idx >= dims)).any() or surface[tuple(seed_idx)]:
            raise SceneError("interior_seed lies outside the grid or in a closed voxel")
    else:
        center = np.array([nx // 2, ny // 2, nz // 2])
        if not surface[tuple(center)]:
            seed_idx = center
        else:  # auto-scan: nearest open voxel to the grid centre
            candidates = np.argwhere(open_mask)
            dist = np.abs(candidates - center).max(axis=1)
            seed_idx = candidates[np.lexsort((candidates[:, 2], candidates[:, 1], candidates[:, 0], dist))][0]

    reach = np.zeros_like(open_mask)
    reach[tuple(seed_idx)] = True
    frontier = reach.copy()
    while frontier.any():
        grown = np.zeros_like(frontier)
        grown[1:, :, :] |= frontier[:-1, :, :]
        grown[:-1, :, :] |= frontier[1:, :, :]
        grown[:, 1:, :] |= frontier[:, :-1, :]
        grown[:, :-1, :] |= frontier[:, 1:, :]
        grown[:, :, 1:] |= frontier[:, :, :-1]
        grown[:, :, :-1] |= frontier[:, :, 1:]
        frontier = grown & open_mask & ~reach
        reach |= frontier

    if not reach.any():
        raise SceneError("flood fill found no free space")
    return VoxelGrid(origin=lo, voxel_size=float(voxel_size), closed=~reach)


# ---------------------------------------------------------------------------
# Supervoxels


@dataclass
class SupervoxelGrid:
    """Uncovered-voxel mass aggregated over super_size^3 blocks."""

    super_size: int
    blocks: tuple[int, int, int]
    centers: np.ndarray  # (K, 3) block centroids, world space
    counts: np.ndarray  # (K,) int64

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def supervoxel_counts(grid: VoxelGrid, uncovered, super_size: int = 5) -> SupervoxelGrid:
    """Count uncovered free voxels per super_size^3 block.

    Boundary blocks are truncated, not padded; centres sit at the
    geometric centroid of each (possibly truncated) block.
    """
    if super_size < 1:
        raise SceneError("super_size must be >= 1")
    uncovered = np.asarray(sorted(uncovered), dtype=np.int64)
    if len(uncovered) and (uncovered[0] < 0 or uncovered[-1] >= grid.n_free):
        raise SceneError("uncovered set contains ids outside the free range")
    dims = np.array(grid.dims)
    nb = -(-dims // super_size)  # ceil
    K = int(nb.prod())

    counts = np.zeros(K, dtype=np.int64)
    if len(uncovered):
        bcoords = grid.free_coords[uncovered] // super_size
        flat = (bcoords[:, 0] * nb[1] + bcoords[:, 1]) * nb[2] + bcoords[:, 2]
        np.add.at(counts, flat, 1)

    bx, by, bz = np.meshgrid(np.arange(nb[0]), np.arange(nb[1]), np.arange(nb[2]), indexing="ij")
    bidx = np.stack([bx.ravel(), by.ravel(), bz.ravel()], axis=1)
    lo = bidx * super_size
    hi = np.minimum(lo + super_size, dims)
    centers = grid.origin + 0.5 * (lo + hi) * grid.voxel_size
    return SupervoxelGrid(
        super_size=super_size, blocks=tuple(int(b) for b in nb), centers=centers, counts=counts
    )


# ---------------------------------------------------------------------------
# Grid fixture format: JSON header + run-length-encoded occupancy


def dump_grid(grid: VoxelGrid, path) -> None:
    flat = grid.closed.ravel(order="C")
    runs = []
    i = 0
    n = len(flat)
    while i < n:
        j = i
        while j < n and flat[j] == flat[i]:
            j += 1
        runs.append(f"{j - i}{'C' if flat[i] else 'F'}")
        i = j
    doc = {
        "origin": [float(x) for x in grid.origin],
        "dims": list(grid.dims),
        "voxel_size": grid.voxel_size,
        "occupancy_rle": "".join(runs),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_grid(path) -> VoxelGrid:
    with open(path) as fh:
        doc = json.load(fh)
    dims = tuple(doc["dims"])
    flat = np.empty(int(np.prod(dims)), dtype=bool)
    pos = 0
    num = ""
    for ch in doc["occupancy_rle"]:
        if ch.isdigit():
            num += ch
        else:
            if not num or ch not in "FC":
                raise SceneError(f"bad RLE token near offset {pos}")
            k = int(num)
            flat[pos : pos + k] = ch == "C"
            pos += k
            num = ""
    if pos != len(flat) or num:
        raise SceneError("RLE length does not match grid dims")
    return VoxelGrid(
        origin=np.asarray(doc["origin"], dtype=np.float64),
        voxel_size=float(doc["voxel_size"]),
        closed=flat.reshape(dims),
    )
