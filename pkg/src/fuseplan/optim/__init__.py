from .baselines import EnumResult, run_dp, run_enumeration, run_greedy
from .ga import OptResult, TracePoint, run_ga
from .genome import (GAParams, Genome, crossover, evaluate_and_repair,
                     init_population, mutate, random_valid_partition,
                     split_byte_balanced)
from .sa import run_sa
from .two_step import capacity_candidates, run_two_step

__all__ = [
    "EnumResult", "GAParams", "Genome", "OptResult", "TracePoint",
    "capacity_candidates", "crossover", "evaluate_and_repair",
    "init_population", "mutate", "random_valid_partition",
    "run_dp", "run_enumeration", "run_ga", "run_greedy", "run_sa",
    "run_two_step", "split_byte_balanced",
]
