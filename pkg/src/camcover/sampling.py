"""Candidate-generation strategies.

Random Selection draws uniform positions paired with isotropic unit
directions; Explore-and-Exploit adds jittered children of the incumbent
network; Target-Uncovered-Spaces aims configurations at supervoxels
holding uncovered mass. All strategies take an explicit numpy
Generator, draw in a fixed order and never share RNG state, so batches
are reproducible and independent of visibility-evaluation parallelism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from camcover import kernels
from camcover.errors import SamplingError
from camcover.geometry import is_vertical, normalize, rotate_along, sample_spherical_cap
from camcover.scene import SupervoxelGrid, TriangleMesh, VoxelGrid
from camcover.visibility import CameraConfig

# directions are considered duplicates when equal after per-component
# quantization at this step
DIR_QUANTUM = 1e-6

_Z0 = np.array([0.0, 0.0, 1.0])


def config_key(config: CameraConfig) -> tuple:
    """Dedup key: (voxel id, direction quantized per component)."""
    q = np.round(config.direction / DIR_QUANTUM).astype(np.int64)
    return (config.position, int(q[0]), int(q[1]), int(q[2]))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass
class EEParams:
    """Explore-and-Exploit inputs (defaults are the tuned values)."""

    n_pos: int
    n_dir_pos: int = 8
    f_exploit: float = 0.6
    theta_jitter: float = np.deg2rad(30.0)
    v_jitter: int = 1

    def validate(self) -> None:
        if self.n_pos < 1 or self.n_dir_pos < 1:
            raise SamplingError("n_pos and n_dir_pos must be >= 1")
        if not 0.0 <= self.f_exploit <= 1.0:
            raise SamplingError("f_exploit must lie in [0, 1]")
        if self.v_jitter < 0:
            raise SamplingError("v_jitter must be >= 0")


@dataclass
class TUSParams:
    """Target-Uncovered-Spaces inputs (defaults are the tuned values)."""

    n_pos: int
    n_dir_pos: int = 8
    f_unc: float = 0.4
    super_size: int = 5
    strict_vis_req: bool = False

    def validate(self) -> None:
        if self.n_pos < 1 or self.n_dir_pos < 1:
            raise SamplingError("n_pos and n_dir_pos must be >= 1")
        if not 0.0 <= self.f_unc <= 1.0:
            raise SamplingError("f_unc must lie in [0, 1]")
        if self.super_size < 1:
            raise SamplingError("super_size must be >= 1")


@dataclass
class ConfigBatch:
    """Ordered configurations with per-entry provenance tags.

    Duplicate (position, quantized direction) pairs within the batch
    are dropped at construction, keeping the first occurrence.
    """

    configs: list = field(default_factory=list)
    provenance: list = field(default_factory=list)

    @classmethod
    def build(cls, entries) -> "ConfigBatch":
        configs, tags, seen = [], [], set()
        for config, tag in entries:
            key = config_key(config)
            if key in seen:
                continue
            seen.add(key)
            configs.append(config)
            tags.append(tag)
        return cls(configs, tags)

    def __len__(self) -> int:
        return len(self.configs)

    def __iter__(self):
        return iter(zip(self.configs, self.provenance))


def _random_direction(rng: np.random.Generator) -> np.ndarray:
    """Normalized trivariate standard normal, resampled when vertical."""
    while True:
        d = rng.standard_normal(3)
        n = np.linalg.norm(d)
        if n < 1e-12:
            continue
        d = d / n
        if not is_vertical(d):
            return d


def sample_random_configurations(
    n_pos: int, grid: VoxelGrid, n_dir_pos: int, rng: np.random.Generator
) -> ConfigBatch:
    """n_pos uniform free-voxel positions, n_dir_pos isotropic directions each."""
    if grid.n_free < 1:
        raise SamplingError("grid has no free voxels")
    entries = []
    for _ in range(n_pos):
        p = int(rng.integers(0, grid.n_free))
        for _ in range(n_dir_pos):
            entries.append((CameraConfig(p, _random_direction(rng)), "random"))
    return ConfigBatch.build(entries)


def explore_and_exploit(
    params: EEParams, grid: VoxelGrid, prev_solution, rng: np.random.Generator
) -> ConfigBatch:
    """Random exploration plus jittered children of the previous network.

    Children perturb each parent position by a per-axis integer offset
    in {-v_jitter..v_jitter} (resampled until the voxel is free) and
    rotate the parent direction by the rotation carrying +z onto a
    spherical-cap sample of half-angle theta_jitter. With an empty
    previous solution the whole budget falls back to random samples.
    """
    params.validate()
    n_tot = params.n_pos * params.n_dir_pos
    prev = list(prev_solution or [])
    if params.f_exploit <= 0.0 or not prev:
        return sample_random_configurations(params.n_pos, grid, params.n_dir_pos, rng)

    n_explore = _round_half_up(n_tot * (1.0 - params.f_exploit))
    n_pos_explore = math.ceil(n_explore / params.n_dir_pos)
    entries = []
    if n_pos_explore > 0:
        explore = sample_random_configurations(n_pos_explore, grid, params.n_dir_pos, rng)
        entries += [(c, "random") for c in explore.configs]

    n_exploit = _round_half_up(n_tot * params.f_exploit)
    n_config_sol = _round_half_up(n_exploit / len(prev))
    caps = sample_spherical_cap(params.theta_jitter, len(prev) * n_config_sol, rng)
    dims = np.array(grid.dims)
    k = 0
    for parent in prev:
        base = grid.free_coords[parent.position]
        for _ in range(n_config_sol):
            while True:
                coord = base + rng.integers(-params.v_jitter, params.v_jitter + 1, size=3)
                if ((coord >= 0) & (coord < dims)).all() and not grid.closed[tuple(coord)]:
                    break
            child_dir = rotate_along(_Z0, caps[k], parent.direction)
            k += 1
            while is_vertical(child_dir):  # keep the config invariant
                child_dir = rotate_along(
                    _Z0, sample_spherical_cap(params.theta_jitter, 1, rng)[0], parent.direction
                )
            pos_id = int(grid.free_index[tuple(coord)])
            entries.append((CameraConfig(pos_id, child_dir), "exploit"))
    return ConfigBatch.build(entries)


def target_probabilities(supergrid: SupervoxelGrid) -> np.ndarray:
    """Per-supervoxel targeting probabilities: count / total count."""
    total = supergrid.total
    if total <= 0:
        raise SamplingError("no uncovered voxels to target")
    return supergrid.counts / float(total)


def target_uncovered_spaces(
    params: TUSParams,
    grid: VoxelGrid,
    mesh: TriangleMesh,
    supergrid: SupervoxelGrid,
    rng: np.random.Generator,
) -> ConfigBatch:
    """Random phase plus configurations aimed at uncovered supervoxels.

    Supervoxel centres are drawn from the categorical distribution
    proportional to their uncovered counts; each target pairs a uniform
    free-voxel position (pushed back by linear_visibility under
    strict_vis_req) with the direction towards the centre. With full
    coverage the targeted share converts to random samples.
    """
    params.validate()
    n_tot = params.n_pos * params.n_dir_pos
    n_random = _round_half_up(n_tot * (1.0 - params.f_unc))
    n_pos_random = math.ceil(n_random / params.n_dir_pos)
    entries = []
    if n_pos_random > 0:
        batch = sample_random_configurations(n_pos_random, grid, params.n_dir_pos, rng)
        entries += [(c, "random") for c in batch.configs]

    n_targeted = _round_half_up(n_tot * params.f_unc)
    if n_targeted > 0 and supergrid.total == 0:
        # nothing left to target: keep the budget accounting, go random
        extra = sample_random_configurations(
            math.ceil(n_targeted / params.n_dir_pos), grid, params.n_dir_pos, rng
        )
        entries += [(c, "random") for c in extra.configs]
        return ConfigBatch.build(entries)

    probs = target_probabilities(supergrid) if n_targeted > 0 else None
    for _ in range(n_targeted):
        center = supergrid.centers[int(rng.choice(len(probs), p=probs))]
        while True:
            p_tilde = int(rng.integers(0, grid.n_free))
            pos = p_tilde
            if params.strict_vis_req:
                pos = None
                for _ in range(8):
                    try:
                        pos = linear_visibility(p_tilde, center, grid, mesh)
                        break
                    except SamplingError:
                        p_tilde = int(rng.integers(0, grid.n_free))
                if pos is None:  # give up on strictness for this draw
                    pos = p_tilde
            d = center - grid.center_of(pos)
            if np.linalg.norm(d) < 1e-12:
                continue  # centre collides with the position: resample
            d = normalize(d)
            if is_vertical(d):
                continue
            break
        entries.append((CameraConfig(pos, d), "targeted"))
    return ConfigBatch.build(entries)


def linear_visibility(p_tilde: int, v_center, grid: VoxelGrid, mesh: TriangleMesh) -> int:
    """Furthest free voxel from ``v_center`` along the ray towards ``p_tilde``
    whose sight line back to the centre is unobstructed.

    Marches in voxel-pitch steps from the centre, collecting the first
    run of free voxels (leading closed voxels are skipped so a blocked
    first step still yields the nearest free voxel); candidates are
    checked far-to-near with a mesh ray cast. Raises SamplingError when
    no unobstructed free voxel exists on the ray.
    """
    v_center = np.asarray(v_center, dtype=np.float64)
    d = grid.center_of(p_tilde) - v_center
    if np.linalg.norm(d) < 1e-12:
        raise SamplingError("position coincides with the target centre")
    u = d / np.linalg.norm(d)
    dims = np.array(grid.dims)

    run: list[int] = []
    started = False
    for k in range(1, int(4 * dims.sum()) + 4):
        q = v_center + k * grid.voxel_size * u
        idx = np.floor((q - grid.origin) / grid.voxel_size).astype(int)
        if ((idx < 0) | (idx >= dims)).any():
            break
        if grid.closed[tuple(idx)]:
            if started:
                break
            continue
        started = True
        fid = int(grid.free_index[tuple(idx)])
        if not run or run[-1] != fid:
            run.append(fid)

    for fid in reversed(run):
        c = grid.center_of(fid)
        seg = v_center - c
        length = float(np.linalg.norm(seg))
        if length < 1e-12:
            continue
        t = kernels.ray_first_hits(c, (seg / length)[None, :], mesh.triangles)[0]
        if t >= length - 1e-9:
            return fid
    raise SamplingError("no unobstructed free voxel along the ray")
