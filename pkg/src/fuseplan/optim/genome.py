"""Genome encoding and the genetic operators shared by the optimizers.

A genome is a (partition, buffer-capacity choice) pair.  Partitions are
stored as dense subgraph-index tuples aligned with the graph's node order;
every operator returns a canonicalized, valid partition (see
``graph.canonicalize``), so populations never contain invalid genomes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..cost import Evaluator, INFEASIBLE
from ..graph import ComputationGraph, canonicalize, validate_partition, partition_from_tuple
from ..hardware import HardwareSpace

MUTATION_OPS = ("modify_node", "split_subgraph", "merge_subgraph", "mutation_dse")


@dataclass(frozen=True)
class Genome:
    partition: tuple
    hw_choice: tuple
    objective: float = INFEASIBLE

    @property
    def fitness(self) -> float:
        return -self.objective

    def with_objective(self, obj: float, partition=None) -> "Genome":
        return Genome(partition if partition is not None else self.partition,
                      self.hw_choice, obj)


@dataclass(frozen=True)
class GAParams:
    population: int = 500
    budget: int = 50000
    crossover_rate: float = 0.8
    mutation_rates: tuple = (("modify_node", 0.4), ("split_subgraph", 0.2),
                             ("merge_subgraph", 0.2), ("mutation_dse", 0.2))
    tournament_size: int = 4
    dse_sigma_steps: float = 4.0
    merge_bias: float = 0.5
    seed: int = 0
    stop_at_objective: float | None = None
    # simulated-annealing knobs (shared parameter record)
    sa_t0: float | None = None
    sa_cooling: float = 0.995
    sa_calibration_samples: int = 20

    def __post_init__(self):
        if self.population < 1:
            raise ValueError("population must be >= 1")
        for name, rate in self.mutation_rates:
            if name not in MUTATION_OPS or rate < 0:
                raise ValueError(f"bad mutation rate entry ({name}, {rate})")
        if not 0 <= self.crossover_rate <= 1:
            raise ValueError("crossover_rate must be in [0, 1]")

    def op_weights(self, mode: str) -> list:
        rates = dict(self.mutation_rates)
        if mode == "partition_only":
            rates["mutation_dse"] = 0.0
        total = sum(rates.values())
        if total == 0:
            return []
        return [(op, rates.get(op, 0.0) / total) for op in MUTATION_OPS]


# ---------------------------------------------------------------------------
# construction


def random_valid_partition(g: ComputationGraph, rng) -> tuple:
    """Random precedence-valid assignment built in topological order.

    Each node picks uniformly among the subgraphs of already-placed
    neighbors that respect its producers' indices, or opens a fresh
    subgraph; connectivity is restored by canonicalization.
    """
    assign = {}
    next_idx = 0
    for nid in g.topo_order:
        prods = [assign[u] for u in g.producers(nid) if u in assign]
        floor = max(prods, default=0)
        options = {assign[w] for w in g.producers(nid) + g.consumers(nid)
                   if w in assign and assign[w] >= floor}
        options.add(next_idx)  # fresh subgraph
        choice = rng.choice(sorted(options))
        assign[nid] = choice
        next_idx = max(next_idx, choice + 1)
    return canonicalize(g, assign).as_tuple(g)


def init_population(g: ComputationGraph, space: HardwareSpace, params: GAParams,
                    rng, seed_partitions=None) -> list:
    """Unevaluated initial population; seed partitions fill a prefix."""
    pop = []
    for p in seed_partitions or ():
        if not isinstance(p, tuple):
            p = p.as_tuple(g) if hasattr(p, "as_tuple") else tuple(p)
        verdict = validate_partition(g, partition_from_tuple(g, p))
        if not verdict.ok:
            raise ValueError(f"seed partition rejected: {verdict.violations}")
        pop.append(Genome(p, space.random_choice(rng)))
        if len(pop) == params.population:
            return pop
    while len(pop) < params.population:
        pop.append(Genome(random_valid_partition(g, rng), space.random_choice(rng)))
    return pop


# ---------------------------------------------------------------------------
# crossover


def crossover(g: ComputationGraph, space: HardwareSpace, mom: Genome, dad: Genome,
              rng, merge_bias: float = 0.5) -> Genome:
    child, _ = crossover_with_log(g, space, mom, dad, rng, merge_bias)
    return child


def crossover_with_log(g: ComputationGraph, space: HardwareSpace, mom: Genome,
                       dad: Genome, rng, merge_bias: float = 0.5):
    """Topological reassembly crossover.

    Each still-undecided layer picks one parent and reproduces that parent's
    whole subgraph; when the reproduced subgraph overlaps already-decided
    layers the remainder either splits out as a fresh subgraph or merges into
    the subgraph of one of the decided layers (coin with ``merge_bias``).
    """
    hw_choice = space.mean_choice(mom.hw_choice, dad.hw_choice)
    parents = {"mom": _groups_by_node(g, mom.partition),
               "dad": _groups_by_node(g, dad.partition)}
    decided = {}
    next_idx = 0
    log = []
    for nid in g.topo_order:
        if nid in decided:
            continue
        pname = "mom" if rng.random() < 0.5 else "dad"
        group = parents[pname][nid]
        overlap = [m for m in group if m in decided]
        fresh = [m for m in group if m not in decided]
        if not overlap:
            for m in fresh:
                decided[m] = next_idx
            log.append((nid, pname, "reproduce", next_idx))
            next_idx += 1
        elif rng.random() < merge_bias:
            target = decided[overlap[rng.randrange(len(overlap))]]
            for m in fresh:
                decided[m] = target
            log.append((nid, pname, "merge", target))
        else:
            for m in fresh:
                decided[m] = next_idx
            log.append((nid, pname, "split", next_idx))
            next_idx += 1
    partition = canonicalize(g, decided).as_tuple(g)
    return Genome(partition, hw_choice), log


def _groups_by_node(g, partition_tuple):
    groups = {}
    for nid, s in zip(g.ids, partition_tuple):
        groups.setdefault(s, set()).add(nid)
    return {nid: frozenset(groups[s]) for nid, s in zip(g.ids, partition_tuple)}


# ---------------------------------------------------------------------------
# mutations


def mutate(g: ComputationGraph, space: HardwareSpace, genome: Genome, params: GAParams,
           rng, mode: str = "codesign") -> Genome:
    """Apply one mutation operation chosen by the configured rates.

    Inapplicable draws degrade to the identity; results are always valid.
    """
    weights = params.op_weights(mode)
    if not weights:
        return genome
    pick = rng.random()
    acc = 0.0
    op = weights[-1][0]
    for name, wgt in weights:
        acc += wgt
        if pick < acc:
            op = name
            break
    if op == "modify_node":
        return replace(genome, partition=_modify_node(g, genome.partition, rng),
                       objective=INFEASIBLE)
    if op == "split_subgraph":
        return replace(genome, partition=_split_random(g, genome.partition, rng),
                       objective=INFEASIBLE)
    if op == "merge_subgraph":
        return replace(genome, partition=_merge_random(g, genome.partition, rng),
                       objective=INFEASIBLE)
    return replace(genome, hw_choice=_mutate_dse(space, genome.hw_choice, params, rng),
                   objective=INFEASIBLE)


def _assign_dict(g, partition_tuple):
    return {nid: s for nid, s in zip(g.ids, partition_tuple)}


def _modify_node(g, partition_tuple, rng) -> tuple:
    assign = _assign_dict(g, partition_tuple)
    nid = g.ids[rng.randrange(len(g.ids))]
    floor = max((assign[u] for u in g.producers(nid)), default=None)
    ceil_ = min((assign[c] for c in g.consumers(nid)), default=None)
    options = set()
    for w in g.producers(nid) + g.consumers(nid):
        s = assign[w]
        if (floor is None or s >= floor) and (ceil_ is None or s <= ceil_):
            options.add(s)
    options.discard(assign[nid])
    fresh = max(assign.values()) + 1
    choices = sorted(options) + [fresh]
    assign[nid] = choices[rng.randrange(len(choices))]
    return canonicalize(g, assign).as_tuple(g)


def _split_random(g, partition_tuple, rng) -> tuple:
    assign = _assign_dict(g, partition_tuple)
    groups = {}
    for nid, s in assign.items():
        groups.setdefault(s, []).append(nid)
    splittable = sorted(s for s, members in groups.items() if len(members) > 1)
    if not splittable:
        return partition_tuple
    s = splittable[rng.randrange(len(splittable))]
    members = sorted(groups[s], key=g.topo_rank)
    cut = rng.randrange(1, len(members))
    fresh = max(assign.values()) + 1
    for nid in members[cut:]:
        assign[nid] = fresh
    return canonicalize(g, assign).as_tuple(g)


def _merge_random(g, partition_tuple, rng) -> tuple:
    assign = _assign_dict(g, partition_tuple)
    pairs = set()
    for u, v in g.edges:
        su, sv = assign[u], assign[v]
        if su != sv:
            pairs.add((min(su, sv), max(su, sv)))
    if not pairs:
        return partition_tuple
    a, b = sorted(pairs)[rng.randrange(len(pairs))]
    for nid, s in assign.items():
        if s == b:
            assign[nid] = a
    return canonicalize(g, assign).as_tuple(g)


def _mutate_dse(space: HardwareSpace, choice: tuple, params: GAParams, rng) -> tuple:
    grids = space.grids()
    out = []
    for k, grid in enumerate(grids):
        cur = grid[choice[k]]
        sigma = params.dse_sigma_steps * grid.step
        out.append(grid.nearest_index(rng.gauss(cur, sigma)))
    return tuple(out)


# ---------------------------------------------------------------------------
# evaluation with in-situ repair


def split_byte_balanced(g: ComputationGraph, partition_tuple, members, rng=None) -> tuple:
    """Split one subgraph at the topological cut that best balances bytes
    (weights plus output tensors).  Used for in-situ repair of oversized
    subgraphs."""
    assign = _assign_dict(g, partition_tuple)
    ordered = sorted(members, key=g.topo_rank)
    sizes = [g.node(n).weight_bytes + g.node(n).tensor_bytes for n in ordered]
    total = sum(sizes)
    best_cut, best_gap = 1, None
    acc = 0
    for k in range(1, len(ordered)):
        acc += sizes[k - 1]
        gap = abs(total - 2 * acc)
        if best_gap is None or gap < best_gap:
            best_cut, best_gap = k, gap
    fresh = max(assign.values()) + 1
    for nid in ordered[best_cut:]:
        assign[nid] = fresh
    return canonicalize(g, assign).as_tuple(g)


def evaluate_and_repair(g: ComputationGraph, evaluator: Evaluator, space: HardwareSpace,
                        genome: Genome, mode: str = "codesign") -> Genome:
    """Fitness evaluation with in-situ splitting of infeasible subgraphs.

    Oversized subgraphs are split (byte-balanced) until the partition is
    feasible or an offender is atomic, in which case the genome scores an
    infinite objective.  The repaired partition persists in the returned
    genome.
    """
    hw = space.config_for(genome.hw_choice)
    partition = genome.partition
    guard = len(g) + 1
    for _ in range(guard):
        bad = evaluator.first_infeasible(partition, hw)
        if bad is None:
            break
        _, members, _why = bad
        if len(members) <= 1:
            return genome.with_objective(INFEASIBLE, partition)
        partition = split_byte_balanced(g, partition, members)
    else:
        return genome.with_objective(INFEASIBLE, partition)
    report = evaluator.evaluate_partition(partition, hw)
    obj = report.objective_partition if mode == "partition_only" else report.objective_codesign
    return genome.with_objective(obj, partition)
