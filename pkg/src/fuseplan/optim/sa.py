"""Simulated-annealing baseline over the same genome operators."""

from __future__ import annotations

import math
import random

from ..cost import Evaluator
from ..graph import ComputationGraph
from ..hardware import HardwareSpace
from .ga import OptResult, _Budget
from .genome import GAParams, Genome, evaluate_and_repair, mutate, random_valid_partition


def run_sa(g: ComputationGraph, space: HardwareSpace, params: GAParams,
           metric: str = "ema", mode: str = "codesign", alpha: float = 0.002,
           evaluator: Evaluator | None = None) -> OptResult:
    """Single-state annealing with the customized mutation set.

    Worse candidates are accepted with probability exp(-delta/T) under a
    geometric cooling schedule.  When no starting temperature is configured
    it is calibrated so the initial acceptance ratio is roughly 0.8 over a
    small batch of probe mutations (which consume budget like any sample).
    """
    rng = random.Random(f"sa:{params.seed}")
    ev = evaluator or Evaluator(g, space.base, metric, alpha)
    budget = _Budget(params.budget, params.stop_at_objective)

    state = Genome(random_valid_partition(g, rng), space.random_choice(rng))
    state = evaluate_and_repair(g, ev, space, state, mode)
    budget.record(state)

    temp = params.sa_t0
    if temp is None:
        deltas = []
        for _ in range(params.sa_calibration_samples):
            if budget.exhausted:
                break
            probe = mutate(g, space, state, params, rng, mode)
            probe = evaluate_and_repair(g, ev, space, probe, mode)
            budget.record(probe)
            if math.isfinite(probe.objective) and math.isfinite(state.objective):
                deltas.append(abs(probe.objective - state.objective))
            if probe.objective < state.objective:
                state = probe
        mean = sum(deltas) / len(deltas) if deltas else 0.0
        temp = mean / math.log(1 / 0.8) if mean > 0 else 1.0

    accepted_worse = 0
    while not budget.exhausted:
        cand = mutate(g, space, state, params, rng, mode)
        cand = evaluate_and_repair(g, ev, space, cand, mode)
        budget.record(cand)
        if cand.objective < state.objective:
            state = cand
        elif math.isfinite(cand.objective):
            delta = cand.objective - state.objective
            if temp > 0 and rng.random() < math.exp(-delta / temp):
                if delta > 0:
                    accepted_worse += 1
                state = cand
        temp *= params.sa_cooling
    return OptResult("sa", budget.best, budget.trace, budget.samples,
                     {"accepted_worse": accepted_worse, "final_temp": temp})
