"""The iterative optimization loop and the multi-trial benchmark driver.

Each iteration asks the configured strategy for a batch, dedupes it
against the cumulative pool, evaluates visibility for the newly
accepted configurations only, and re-solves the selection problem warm-
started with the previous network, so coverage never decreases. Runs
are deterministic given the master seed: per-iteration generators are
spawned from ``SeedSequence(seed, spawn_key=(iteration,))`` and
visibility results are merged in submission order regardless of the
thread count.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from camcover.errors import ConfigError
from camcover.sampling import (
    ConfigBatch,
    EEParams,
    TUSParams,
    config_key,
    explore_and_exploit,
    sample_random_configurations,
    target_uncovered_spaces,
)
from camcover.scene import RoomParams, TriangleMesh, VoxelGrid, generate_room, load_mesh, supervoxel_counts, voxelize
from camcover.solver import CoverageInstance, Solution, coverage_metrics, solve_exact, solve_greedy
from camcover.visibility import CameraConfig, CameraIntrinsics, calculate_camera_view

log = logging.getLogger(__name__)

STRATEGIES = ("RS", "EE", "TUS")


@dataclass
class StrategyConfig:
    """Flat strategy description; fields irrelevant to ``name`` are ignored."""

    name: str
    n_pos: int
    n_dir_pos: int = 8
    f_exploit: float = 0.6
    theta_jitter: float = np.deg2rad(30.0)
    v_jitter: int = 1
    f_unc: float = 0.4
    super_size: int = 5
    strict_vis_req: bool = False

    def validate(self) -> None:
        if self.name not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.name!r}")
        if self.n_pos < 1 or self.n_dir_pos < 1:
            raise ConfigError("n_pos and n_dir_pos must be >= 1")


@dataclass
class RunConfig:
    """Everything one optimization run depends on."""

    scene: RoomParams | str  # room parameters or an OBJ path
    strategy: StrategyConfig
    budget: float
    iterations: int = 10
    voxel_size: float = 1.0
    intrinsics: CameraIntrinsics = field(default_factory=CameraIntrinsics)
    unit_cost: float = 1.0
    locale_radius: int = 0
    solver: str = "exact"
    time_limit: float | None = None
    seed: int = 0
    threads: int | None = None
    name: str = "run"

    def validate(self) -> None:
        self.strategy.validate()
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.budget < 0:
            raise ConfigError("budget must be >= 0")
        if self.unit_cost <= 0:
            raise ConfigError("unit_cost must be positive")
        if self.solver not in ("exact", "greedy"):
            raise ConfigError(f"unknown solver {self.solver!r}")
        self.intrinsics.validate()

    @property
    def sampling_budget(self) -> int:
        return self.strategy.n_pos * self.strategy.n_dir_pos * self.iterations


@dataclass
class IterationRecord:
    iteration: int
    batch_size: int  # generated this iteration, before dedup
    accepted: int  # new unique configs added to the pool
    pool_size: int
    cumulative_sampled: int
    coverage: int
    optimality: str
    sampling_time: float = 0.0
    visibility_time: float = 0.0
    solve_time: float = 0.0


@dataclass
class RunReport:
    name: str
    strategy: str
    free_voxels: int
    grid_dims: tuple
    budget: float
    sampling_budget: int
    seed: int
    iterations: list
    solution: Solution
    selected: list  # dicts: position id, grid coords, direction
    metrics: dict
    provenance: dict

    @property
    def coverage_trajectory(self) -> list:
        return [r.coverage for r in self.iterations]


def dedupe_into_pool(pool_configs, batch: ConfigBatch) -> list:
    """Entries of ``batch`` whose (voxel, quantized direction) key is not
    already in the pool, in batch order."""
    seen = {config_key(c) for c in pool_configs}
    accepted = []
    for config, tag in batch:
        key = config_key(config)
        if key in seen:
            continue
        seen.add(key)
        accepted.append((config, tag))
    return accepted


def build_scene(config: RunConfig) -> tuple[TriangleMesh, VoxelGrid]:
    if isinstance(config.scene, RoomParams):
        mesh = generate_room(config.scene)
    else:
        mesh = load_mesh(config.scene)
    return mesh, voxelize(mesh, config.voxel_size)


def _iteration_rng(seed: int, iteration: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(iteration,))))


def _visibility_batch(mesh, grid, configs, intrinsics, threads):
    workers = threads if threads is not None else (os.cpu_count() or 1)
    if workers <= 1 or len(configs) < 2:
        return [calculate_camera_view(mesh, grid, c, intrinsics) for c in configs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: calculate_camera_view(mesh, grid, c, intrinsics), configs))


def run(config: RunConfig, mesh: TriangleMesh | None = None, grid: VoxelGrid | None = None) -> RunReport:
    """Execute the full loop and return the trajectory and final network.

    A pre-built (mesh, grid) pair may be passed to share scene
    construction across trials.
    """
    config.validate()
    if mesh is None or grid is None:
        mesh, grid = build_scene(config)
    strat = config.strategy

    pool: list[CameraConfig] = []
    pool_tags: list[str] = []
    visible_sets: list[set] = []
    records: list[IterationRecord] = []
    prev_solution: Solution | None = None
    cumulative = 0

    # RS spends the entire sampling budget in a single iteration
    iterations = 1 if strat.name == "RS" else config.iterations

    for it in range(1, iterations + 1):
        rng = _iteration_rng(config.seed, it)
        t0 = time.perf_counter()
        if strat.name == "RS":
            n_pos_total = strat.n_pos * config.iterations
            batch = sample_random_configurations(n_pos_total, grid, strat.n_dir_pos, rng)
        elif strat.name == "EE":
            params = EEParams(
                n_pos=strat.n_pos,
                n_dir_pos=strat.n_dir_pos,
                f_exploit=strat.f_exploit,
                theta_jitter=strat.theta_jitter,
                v_jitter=strat.v_jitter,
            )
            prev_cfgs = [pool[i] for i in prev_solution.selected] if prev_solution else []
            batch = explore_and_exploit(params, grid, prev_cfgs, rng)
        else:  # TUS
            params = TUSParams(
                n_pos=strat.n_pos,
                n_dir_pos=strat.n_dir_pos,
                f_unc=strat.f_unc,
                super_size=strat.super_size,
                strict_vis_req=strat.strict_vis_req,
            )
            covered = prev_solution.covered if prev_solution else set()
            uncovered = [v for v in range(grid.n_free) if v not in covered]
            supergrid = supervoxel_counts(grid, uncovered, params.super_size)
            batch = target_uncovered_spaces(params, grid, mesh, supergrid, rng)
        t_sample = time.perf_counter() - t0

        cumulative += strat.n_pos * strat.n_dir_pos * (config.iterations if strat.name == "RS" else 1)
        accepted = dedupe_into_pool(pool, batch)
        if not accepted:
            log.warning("%s iteration %d produced no new unique configs", config.name, it)

        t0 = time.perf_counter()
        new_sets = _visibility_batch(
            mesh, grid, [c for c, _ in accepted], config.intrinsics, config.threads
        )
        t_vis = time.perf_counter() - t0
        for (c, tag), s in zip(accepted, new_sets):
            pool.append(c)
            pool_tags.append(tag)
            visible_sets.append(s)

        instance = CoverageInstance(
            positions=np.array([grid.free_coords[c.position] for c in pool], dtype=np.int64).reshape(-1, 3),
            voxel_sets=visible_sets,
            budget=config.budget,
            costs=np.full(len(pool), config.unit_cost),
            locale_radius=config.locale_radius,
            n_free=grid.n_free,
        )
        t0 = time.perf_counter()
        if config.solver == "exact":
            solution = solve_exact(instance, warm_start=prev_solution, time_limit=config.time_limit)
        else:
            solution = solve_greedy(instance)
            if prev_solution is not None and solution.objective < prev_solution.objective:
                solution = prev_solution  # incumbent dominance keeps trajectories monotone
        t_solve = time.perf_counter() - t0

        union = set()
        for i in solution.selected:
            union |= visible_sets[i]
        if union != solution.covered:
            raise RuntimeError("solver coverage bookkeeping disagrees with raw visibility sets")

        records.append(
            IterationRecord(
                iteration=it,
                batch_size=len(batch),
                accepted=len(accepted),
                pool_size=len(pool),
                cumulative_sampled=cumulative,
                coverage=solution.objective,
                optimality=solution.optimality,
                sampling_time=t_sample,
                visibility_time=t_vis,
                solve_time=t_solve,
            )
        )
        prev_solution = solution

    metrics = coverage_metrics(prev_solution, instance)
    hist: dict[str, int] = {}
    for tag in pool_tags:
        hist[tag] = hist.get(tag, 0) + 1
    selected = [
        {
            "config": int(i),
            "position": int(pool[i].position),
            "grid_coords": [int(x) for x in grid.free_coords[pool[i].position]],
            "direction": [float(x) for x in pool[i].direction],
            "provenance": pool_tags[i],
        }
        for i in prev_solution.selected
    ]
    return RunReport(
        name=config.name,
        strategy=strat.name,
        free_voxels=grid.n_free,
        grid_dims=grid.dims,
        budget=config.budget,
        sampling_budget=config.sampling_budget,
        seed=config.seed,
        iterations=records,
        solution=prev_solution,
        selected=selected,
        metrics=metrics,
        provenance=hist,
    )


# ---------------------------------------------------------------------------
# Multi-trial benchmark


@dataclass
class BenchmarkResult:
    rows: list  # aggregate dicts, one per (scenario, strategy)
    trajectories: dict  # (scenario, strategy) -> per-iteration stats
    reports: dict  # (scenario, strategy) -> list[RunReport]


def benchmark(configs: list, trials: int = 5) -> BenchmarkResult:
    """Run each config over ``trials`` derived seeds and tabulate.

    Trial seeds are config.seed + trial index. Improvement percentages
    compare each strategy's mean final coverage against the RS baseline
    of the same scenario (None for the baseline itself and when no RS
    run exists). Trajectories carry mean/min/max coverage per iteration
    against the fraction of the sampling budget spent.
    """
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    reports: dict[tuple, list] = {}
    scene_cache: dict[int, tuple] = {}
    for cfg in configs:
        key = (cfg.name, cfg.strategy.name)
        if id(cfg) not in scene_cache:
            scene_cache[id(cfg)] = build_scene(cfg)
        mesh, grid = scene_cache[id(cfg)]
        runs = []
        for t in range(trials):
            trial_cfg = RunConfig(**{**cfg.__dict__, "seed": cfg.seed + t})
            runs.append(run(trial_cfg, mesh=mesh, grid=grid))
        reports[key] = runs

    rs_final: dict[str, float] = {}
    for (scenario, strategy), runs in reports.items():
        if strategy == "RS":
            rs_final[scenario] = float(np.mean([r.solution.objective for r in runs]))

    rows = []
    trajectories = {}
    for (scenario, strategy), runs in reports.items():
        finals = [r.solution.objective for r in runs]
        free = runs[0].free_voxels
        mean_cov = float(np.mean(finals))
        base = rs_final.get(scenario)
        improvement = None
        if strategy != "RS" and base:
            improvement = 100.0 * (mean_cov - base) / base
        rows.append(
            {
                "scenario": scenario,
                "strategy": strategy,
                "free_voxels": free,
                "trials": len(runs),
                "coverages": finals,
                "min_coverage": int(min(finals)),
                "max_coverage": int(max(finals)),
                "mean_coverage": mean_cov,
                "mean_pre_time": float(
                    np.mean([sum(i.sampling_time + i.visibility_time for i in r.iterations) for r in runs])
                ),
                "mean_solve_time": float(
                    np.mean([sum(i.solve_time for i in r.iterations) for r in runs])
                ),
                "improvement_pct": improvement,
            }
        )

        n_iters = max(len(r.iterations) for r in runs)
        stats = []
        for k in range(n_iters):
            vals = [r.iterations[min(k, len(r.iterations) - 1)].coverage for r in runs]
            frac = runs[0].iterations[min(k, len(runs[0].iterations) - 1)].cumulative_sampled / runs[
                0
            ].sampling_budget
            stats.append(
                {
                    "iteration": k + 1,
                    "budget_fraction": frac,
                    "mean": float(np.mean(vals)),
                    "min": int(min(vals)),
                    "max": int(max(vals)),
                }
            )
        trajectories[(scenario, strategy)] = stats

    rows.sort(key=lambda r: (r["scenario"], STRATEGIES.index(r["strategy"])))
    return BenchmarkResult(rows=rows, trajectories=trajectories, reports=reports)


def crossing_fraction(result: BenchmarkResult, scenario: str, strategy: str) -> float | None:
    """Smallest budget fraction at which the strategy's mean trajectory
    reaches the scenario's RS final mean coverage (None when it never does)."""
    base = None
    for row in result.rows:
        if row["scenario"] == scenario and row["strategy"] == "RS":
            base = row["mean_coverage"]
    if base is None:
        return None
    for point in result.trajectories.get((scenario, strategy), []):
        if point["mean"] >= base:
            return point["budget_fraction"]
    return None
