"""Two-step design-space exploration: sample capacities first (random or
grid), then run a partition-only search per candidate."""

from __future__ import annotations

import random
from dataclasses import replace as dc_replace

from ..cost import Evaluator
from ..graph import ComputationGraph
from ..hardware import HardwareSpace
from .ga import OptResult, TracePoint, run_ga
from .genome import GAParams

SAMPLERS = ("random", "grid")


def capacity_candidates(space: HardwareSpace, sampler: str, count: int, rng,
                        gs_stride: int = 4) -> list:
    """Capacity choice tuples to explore.

    Random sampling draws uniformly; grid sampling enumerates a coarse
    sub-grid (every ``gs_stride``-th candidate per axis) descending from the
    largest capacity.
    """
    if sampler == "random":
        return [space.random_choice(rng) for _ in range(count)]
    axes = [list(range(len(grid) - 1, -1, -gs_stride)) for grid in space.grids()]
    coarse = [()]
    for axis in axes:
        coarse = [c + (i,) for c in coarse for i in axis]
    grids = space.grids()
    coarse.sort(key=lambda c: (-sum(grids[k][c[k]] for k in range(len(c))),
                               tuple(-grids[k][c[k]] for k in range(len(c)))))
    return coarse[:count]


def run_two_step(g: ComputationGraph, space: HardwareSpace, sampler: str,
                 per_capacity_budget: int, total_budget: int,
                 metric: str = "energy", alpha: float = 0.002,
                 params: GAParams | None = None,
                 evaluator: Evaluator | None = None) -> OptResult:
    """Best co-design objective over sampled capacities, each explored with a
    partition-only GA of ``per_capacity_budget`` samples."""
    if sampler not in SAMPLERS:
        raise ValueError(f"sampler must be one of {SAMPLERS}")
    params = params or GAParams()
    if per_capacity_budget < 1 or total_budget < per_capacity_budget:
        raise ValueError("total budget must cover at least one capacity candidate")
    rng = random.Random(f"two_step:{sampler}:{params.seed}")
    count = total_budget // per_capacity_budget
    candidates = capacity_candidates(space, sampler, count, rng)
    ev = evaluator or Evaluator(g, space.base, metric, alpha)

    best = None
    trace = []
    samples = 0
    for k, choice in enumerate(candidates):
        sub_space = space.fixed_space(choice)
        sub_params = dc_replace(params, budget=per_capacity_budget,
                                population=min(params.population, per_capacity_budget),
                                seed=f"{params.seed}/{k}")
        res = run_ga(g, sub_space, sub_params, metric, "codesign", alpha, evaluator=ev)
        prev_best = best.objective if best is not None else float("inf")
        for tp in res.trace:
            trace.append(TracePoint(samples + tp.sample,
                                    min(prev_best, tp.best_objective),
                                    tp.current_objective))
        samples += res.samples
        inner_best = type(res.best)(res.best.partition, choice, res.best.objective)
        if best is None or inner_best.objective < best.objective:
            best = inner_best
    return OptResult(f"two_step_{sampler}", best, trace, samples)
