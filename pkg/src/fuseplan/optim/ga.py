"""Genetic co-exploration over partitions and buffer capacities."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..cost import Evaluator, INFEASIBLE
from ..graph import ComputationGraph
from ..hardware import HardwareSpace
from .genome import (GAParams, Genome, crossover, evaluate_and_repair,
                     init_population, mutate)

MODES = ("partition_only", "codesign")


@dataclass
class TracePoint:
    sample: int
    best_objective: float
    current_objective: float


@dataclass
class OptResult:
    algorithm: str
    best: Genome
    trace: list = field(default_factory=list)
    samples: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def best_objective(self) -> float:
        return self.best.objective


class _Budget:
    """Shared sample accounting: one fitness evaluation is one sample."""

    def __init__(self, limit: int, stop_at=None):
        self.limit = limit
        self.stop_at = stop_at
        self.samples = 0
        self.trace: list = []
        self.best: Genome | None = None

    def record(self, genome: Genome) -> None:
        self.samples += 1
        if self.best is None or genome.objective < self.best.objective:
            self.best = genome
        self.trace.append(TracePoint(self.samples, self.best.objective, genome.objective))

    @property
    def exhausted(self) -> bool:
        if self.samples >= self.limit:
            return True
        return (self.stop_at is not None and self.best is not None
                and self.best.objective <= self.stop_at)


def run_ga(g: ComputationGraph, space: HardwareSpace, params: GAParams,
           metric: str = "ema", mode: str = "codesign", alpha: float = 0.002,
           seed_partitions=None, evaluator: Evaluator | None = None,
           on_generation=None) -> OptResult:
    """Generational loop: crossover, mutation, evaluation with in-situ
    repair, then tournament selection with the best genome kept (elitism).

    Deterministic for a fixed seed.  The trace records every sample with the
    best-so-far objective for convergence curves.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    rng = random.Random(f"ga:{params.seed}")
    ev = evaluator or Evaluator(g, space.base, metric, alpha)
    budget = _Budget(params.budget, params.stop_at_objective)

    population = []
    for genome in init_population(g, space, params, rng, seed_partitions):
        if budget.exhausted:
            break
        genome = evaluate_and_repair(g, ev, space, genome, mode)
        budget.record(genome)
        population.append(genome)

    if on_generation is not None:
        on_generation(population)
    k = max(2, params.tournament_size)
    while not budget.exhausted:
        offspring = []
        for _ in range(params.population):
            if budget.exhausted:
                break
            if rng.random() < params.crossover_rate and len(population) >= 2:
                mom, dad = rng.choice(population), rng.choice(population)
                child = crossover(g, space, mom, dad, rng, params.merge_bias)
            else:
                child = rng.choice(population)
            child = mutate(g, space, child, params, rng, mode)
            child = evaluate_and_repair(g, ev, space, child, mode)
            budget.record(child)
            offspring.append(child)
        pool = population + offspring
        new_pop = [budget.best]
        while len(new_pop) < params.population:
            contenders = [pool[rng.randrange(len(pool))] for _ in range(k)]
            new_pop.append(max(contenders, key=lambda c: c.fitness))
        population = new_pop
        if on_generation is not None:
            on_generation(population)
    return OptResult("ga", budget.best, budget.trace, budget.samples)
