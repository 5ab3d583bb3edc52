"""Budgeted maximum-coverage selection over candidate camera configurations.

``solve_exact`` is an in-house branch-and-bound: candidates ordered by
greedy density, an incumbent seeded from the greedy heuristic (and the
warm start when given) and a fractional-knapsack upper bound over
per-node marginal gains. ``solve_greedy`` is the classical density
heuristic with locale-group removal. Visible sets are kept as Python
integer bitsets over the dense free-voxel ids, which keeps both solvers
allocation-free in the inner loops.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from camcover.errors import SolverError


def _mask_from_ids(ids) -> int:
    m = 0
    for v in ids:
        m |= 1 << int(v)
    return m


def _ids_from_mask(mask: int) -> list:
    out = []
    v = 0
    while mask:
        if mask & 1:
            out.append(v)
        mask >>= 1
        v += 1
    return out


@dataclass
class CoverageInstance:
    """One selection problem: candidates, costs, budget, locale groups.

    ``positions`` holds the grid index triple of each candidate (used
    for the Chebyshev locale test), ``voxel_sets`` the visible free-
    voxel ids per candidate. Locale groups are balls of radius
    ``locale_radius`` centred at the distinct candidate positions; at
    most one candidate may be selected per group (radius 0 reduces to
    one camera per voxel).
    """

    positions: np.ndarray  # (n, 3) int
    voxel_sets: list  # of iterables of voxel ids
    budget: float
    costs: np.ndarray | None = None  # (n,) > 0, default unit
    locale_radius: int = 0
    n_free: int | None = None  # optional universe size for validation

    masks: list = field(init=False)
    conflicts: list = field(init=False)  # per-candidate bitmask over candidates

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.int64).reshape(-1, 3)
        n = len(self.positions)
        if self.costs is None:
            self.costs = np.ones(n)
        self.costs = np.asarray(self.costs, dtype=np.float64)
        if len(self.voxel_sets) != n or len(self.costs) != n:
            raise SolverError("candidate arrays disagree in length")
        if self.budget < 0:
            raise SolverError("budget must be >= 0")
        if n and (self.costs <= 0).any():
            raise SolverError("costs must be positive")
        self.masks = []
        for ids in self.voxel_sets:
            ids = sorted(int(v) for v in ids)
            if ids and (ids[0] < 0 or (self.n_free is not None and ids[-1] >= self.n_free)):
                raise SolverError("voxel id outside the free range")
            self.masks.append(_mask_from_ids(ids))
        self.conflicts = self._conflict_masks()

    @property
    def n_candidates(self) -> int:
        return len(self.positions)

    def _conflict_masks(self) -> list:
        n = self.n_candidates
        if n == 0:
            return []
        r = self.locale_radius
        pos = self.positions
        # i and j conflict when some candidate position is within radius
        # r of both (constraint (4) instantiated at occupied positions)
        cheb = np.abs(pos[:, None, :] - pos[None, :, :]).max(axis=2)
        near = cheb <= r  # (n, n): candidate j in ball of position i
        conflict = (near[:, :, None] & near[:, None, :]).any(axis=0) if r > 0 else near
        out = []
        for i in range(n):
            m = 0
            for j in np.nonzero(conflict[i])[0]:
                m |= 1 << int(j)
            out.append(m)
        return out

    @property
    def inverted(self) -> dict:
        """Voxel id -> ordered candidate indices able to view it."""
        inv: dict[int, list[int]] = {}
        for i, ids in enumerate(self.voxel_sets):
            for v in sorted(int(x) for x in ids):
                inv.setdefault(v, []).append(i)
        return {v: inv[v] for v in sorted(inv)}


@dataclass
class Solution:
    """A feasible camera network with its covered voxel set."""

    selected: tuple
    objective: int
    covered: set
    optimality: str  # "proven" | "incumbent"
    solve_time: float = 0.0


def _check_feasible(instance: CoverageInstance, selected) -> int:
    """Validate budget and locale feasibility; return the covered mask."""
    total = 0.0
    covered = 0
    taken = 0
    for i in selected:
        if not 0 <= i < instance.n_candidates:
            raise SolverError(f"candidate index {i} out of range")
        if taken & (1 << i):
            raise SolverError("duplicate candidate in solution")
        if taken & instance.conflicts[i]:
            raise SolverError("solution violates the locale constraint")
        taken |= 1 << i
        total += instance.costs[i]
        covered |= instance.masks[i]
    if total > instance.budget + 1e-9:
        raise SolverError("solution exceeds the budget")
    return covered


def solve_greedy(instance: CoverageInstance) -> Solution:
    """Density-greedy selection: argmax remaining-gain/cost until the
    budget is exhausted or no affordable candidate still adds coverage.

    Ties break to the lowest candidate index; selecting a candidate
    removes its locale group and subtracts its voxels from every
    remaining candidate.
    """
    t0 = time.perf_counter()
    n = instance.n_candidates
    remaining = list(instance.masks)
    alive = [True] * n
    budget_left = float(instance.budget)
    covered = 0
    selected = []
    while True:
        best, best_score = -1, 0.0
        for i in range(n):
            if not alive[i] or instance.costs[i] > budget_left + 1e-9:
                continue
            score = remaining[i].bit_count() / instance.costs[i]
            if score > best_score:
                best, best_score = i, score
        if best < 0 or remaining[best] == 0:
            break
        chosen = remaining[best]
        covered |= chosen
        budget_left -= instance.costs[best]
        selected.append(best)
        kill = instance.conflicts[best]
        for j in range(n):
            if not alive[j]:
                continue
            if kill & (1 << j):
                alive[j] = False
            elif remaining[j] & chosen:
                remaining[j] &= ~chosen
    return Solution(
        selected=tuple(sorted(selected)),
        objective=covered.bit_count(),
        covered=set(_ids_from_mask(covered)),
        optimality="incumbent",
        solve_time=time.perf_counter() - t0,
    )


class _TimeUp(Exception):
    pass


def solve_exact(
    instance: CoverageInstance,
    warm_start: Solution | None = None,
    time_limit: float | None = None,
) -> Solution:
    """Prove the maximum-coverage optimum by branch and bound.

    Returns a proven-optimal solution, or the best incumbent found when
    ``time_limit`` expires; the incumbent never falls below the warm
    start's objective. Deterministic given the instance (up to which
    optimal selection is reported first under a time limit).
    """
    t0 = time.perf_counter()
    n = instance.n_candidates
    masks = instance.masks
    costs = instance.costs
    conflicts = instance.conflicts

    best_obj = -1
    best_sel: tuple = ()
    if warm_start is not None:
        covered = _check_feasible(instance, warm_start.selected)
        best_obj = covered.bit_count()
        best_sel = tuple(sorted(warm_start.selected))
    g = solve_greedy(instance)
    if g.objective > best_obj:
        best_obj, best_sel = g.objective, g.selected
    if best_obj < 0:
        best_obj, best_sel = 0, ()

    deadline = None if time_limit is None else t0 + time_limit
    ticks = 0

    def dfs(active, budget_left: float, covered: int, cov_cnt: int, banned: int, chosen: tuple):
        """Branch on the highest-density candidate of the residual
        problem; excluding it iterates in place, so recursion depth
        tracks inclusions only (at most budget / min cost)."""
        nonlocal best_obj, best_sel, ticks
        while True:
            ticks += 1
            if deadline is not None and ticks % 64 == 0 and time.perf_counter() > deadline:
                raise _TimeUp
            if cov_cnt > best_obj:
                best_obj, best_sel = cov_cnt, tuple(sorted(chosen))
            items = []
            for i in active:
                if banned & (1 << i) or costs[i] > budget_left + 1e-9:
                    continue
                gain = (masks[i] & ~covered).bit_count()
                if gain:
                    items.append((-gain / costs[i], i, gain))
            if not items:
                return
            items.sort()
            # fractional knapsack over marginal gains bounds any feasible
            # completion: union gain <= sum of per-candidate gains
            total = 0.0
            rem = budget_left
            for neg_density, _, gain in items:
                cost = -gain / neg_density
                if cost <= rem:
                    total += gain
                    rem -= cost
                else:
                    total -= neg_density * rem
                    break
            if cov_cnt + total <= best_obj:
                return
            i = items[0][1]
            rest = [j for _, j, _ in items[1:]]
            dfs(
                rest,
                budget_left - costs[i],
                covered | masks[i],
                (covered | masks[i]).bit_count(),
                banned | conflicts[i],
                chosen + (i,),
            )
            active = rest  # exclude i and continue in place

    complete = True
    try:
        dfs(list(range(n)), float(instance.budget), 0, 0, 0, ())
    except _TimeUp:
        complete = False

    covered_mask = 0
    for i in best_sel:
        covered_mask |= masks[i]
    return Solution(
        selected=best_sel,
        objective=best_obj,
        covered=set(_ids_from_mask(covered_mask)),
        optimality="proven" if complete else "incumbent",
        solve_time=time.perf_counter() - t0,
    )


def coverage_metrics(solution: Solution, instance: CoverageInstance) -> dict:
    """Per-camera coverage report: voxels covered, share of the network
    coverage and overcoverage (voxels shared with another selected camera)."""
    _check_feasible(instance, solution.selected)
    total_mask = 0
    for i in solution.selected:
        total_mask |= instance.masks[i]
    total = total_mask.bit_count()
    per_config = []
    multi = 0
    seen_once = 0
    for i in solution.selected:
        others = 0
        for j in solution.selected:
            if j != i:
                others |= instance.masks[j]
        m = instance.masks[i]
        per_config.append(
            {
                "config": int(i),
                "voxels_covered": m.bit_count(),
                "coverage_share": (m.bit_count() / total) if total else 0.0,
                "overcovered": (m & others).bit_count(),
            }
        )
        multi |= m & seen_once
        seen_once |= m
    return {
        "network_coverage": total,
        "overcovered_total": multi.bit_count(),
        "per_config": per_config,
    }


# ---------------------------------------------------------------------------
# Instance fixtures


def dump_instance(instance: CoverageInstance, path) -> None:
    doc = {
        "budget": instance.budget,
        "locale_radius": instance.locale_radius,
        "candidates": [
            {
                "position": [int(x) for x in instance.positions[i]],
                "cost": float(instance.costs[i]),
                "voxels": sorted(int(v) for v in instance.voxel_sets[i]),
            }
            for i in range(instance.n_candidates)
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_instance(path) -> CoverageInstance:
    with open(path) as fh:
        doc = json.load(fh)
    cands = doc["candidates"]
    return CoverageInstance(
        positions=np.array([c["position"] for c in cands], dtype=np.int64).reshape(-1, 3),
        voxel_sets=[c["voxels"] for c in cands],
        budget=doc["budget"],
        costs=np.array([c["cost"] for c in cands]),
        locale_radius=int(doc.get("locale_radius", 0)),
    )
