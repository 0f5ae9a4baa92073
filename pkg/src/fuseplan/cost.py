"""Analytical cost model: external memory access, energy, cycles, bandwidth
and the scalar partition / co-design objectives.

Per subgraph, the EMA is the weights of its member layers plus boundary
activation tensors in and out (tensor-exact, padding-free).  Energy combines
DRAM transfer energy, on-chip buffer accesses counted analytically (one
buffer write per produced element, one read per consumer-window element) and
MAC energy.  Latency per subgraph is the maximum of compute and external
communication cycles.

The partition objective sums the chosen metric over subgraphs; the co-design
objective adds the buffer capacity:  totals are reported per
:class:`CostReport`, with ``objective_codesign = BUF_SIZE + alpha *
objective_partition``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graph import ComputationGraph, PartitionScheme, partition_from_tuple
from .hardware import HardwareConfig
from .memory import region_sizes
from .schedule import (SubgraphView, UnschedulableError, derive_schedule,
                       modeled_utilization)

METRICS = ("ema", "energy")
INFEASIBLE = float("inf")


@dataclass(frozen=True)
class SubgraphAtoms:
    """Hardware-capacity-independent facts about one subgraph's execution."""

    nodes: tuple
    schedulable: bool
    reason: str
    weights_bytes: int = 0
    acts_in_bytes: int = 0
    acts_out_bytes: int = 0
    macs: int = 0
    sram_write_bytes: int = 0
    sram_read_bytes: int = 0
    compute_cycles: float = 0.0
    act_region_bytes: int = 0
    node_count: int = 0

    @property
    def ema_bytes(self) -> int:
        return self.weights_bytes + self.acts_in_bytes + self.acts_out_bytes


@dataclass(frozen=True)
class SubgraphCost:
    nodes: tuple
    feasible: bool
    reason: str
    weights_bytes: int
    acts_in_bytes: int
    acts_out_bytes: int
    ema_bytes: int
    energy_pj: float
    compute_cycles: float
    comm_cycles: float

    @property
    def latency_cycles(self) -> float:
        return max(self.compute_cycles, self.comm_cycles)


@dataclass(frozen=True)
class CostReport:
    per_subgraph: tuple
    feasible: bool
    reason: str
    metric: str
    alpha: float
    buf_size_bytes: int
    weights_bytes: int
    acts_in_bytes: int
    acts_out_bytes: int
    ema_bytes: int
    energy_pj: float
    compute_cycles: float
    comm_cycles: float
    latency_cycles: float
    freq_hz: float

    @property
    def latency_s(self) -> float:
        return self.latency_cycles / self.freq_hz

    @property
    def avg_bandwidth_bytes_per_s(self) -> float:
        return self.ema_bytes / self.latency_s if self.latency_cycles else 0.0

    @property
    def peak_bandwidth_bytes_per_s(self) -> float:
        peak = 0.0
        for sc in self.per_subgraph:
            if sc.latency_cycles:
                peak = max(peak, sc.ema_bytes / (sc.latency_cycles / self.freq_hz))
        return peak

    @property
    def weight_bandwidth_bytes_per_s(self) -> float:
        return self.weights_bytes / self.latency_s if self.latency_cycles else 0.0

    @property
    def act_bandwidth_bytes_per_s(self) -> float:
        if not self.latency_cycles:
            return 0.0
        return (self.acts_in_bytes + self.acts_out_bytes) / self.latency_s

    @property
    def objective_partition(self) -> float:
        if not self.feasible:
            return INFEASIBLE
        return float(self.ema_bytes) if self.metric == "ema" else self.energy_pj

    @property
    def objective_codesign(self) -> float:
        if not self.feasible:
            return INFEASIBLE
        return self.buf_size_bytes + self.alpha * self.objective_partition

    def to_json(self) -> dict:
        return {
            "feasible": self.feasible,
            "reason": self.reason,
            "metric": self.metric,
            "alpha": self.alpha,
            "buf_size_bytes": self.buf_size_bytes,
            "ema_bytes": self.ema_bytes,
            "weights_bytes": self.weights_bytes,
            "acts_in_bytes": self.acts_in_bytes,
            "acts_out_bytes": self.acts_out_bytes,
            "energy_pj": self.energy_pj,
            "compute_cycles": self.compute_cycles,
            "comm_cycles": self.comm_cycles,
            "latency_cycles": self.latency_cycles,
            "avg_bandwidth_bytes_per_s": self.avg_bandwidth_bytes_per_s,
            "peak_bandwidth_bytes_per_s": self.peak_bandwidth_bytes_per_s,
            "objective_partition": self.objective_partition,
            "objective_codesign": self.objective_codesign,
            "subgraphs": [
                {
                    "nodes": list(sc.nodes),
                    "feasible": sc.feasible,
                    "ema_bytes": sc.ema_bytes,
                    "energy_pj": sc.energy_pj,
                    "compute_cycles": sc.compute_cycles,
                    "comm_cycles": sc.comm_cycles,
                    "latency_cycles": sc.latency_cycles,
                }
                for sc in self.per_subgraph
            ],
        }


class Evaluator:
    """Caches per-subgraph execution facts across partitions.

    A subgraph's atoms depend only on its member set (plus the PE geometry
    and utilization threshold of the base config), never on the buffer
    capacities, so one evaluator serves a whole capacity grid.

    ``cores`` and ``batch`` select the multi-core/batch extension; the
    defaults reduce exactly to the single-core, single-sample model.
    """

    def __init__(self, g: ComputationGraph, hw: HardwareConfig,
                 metric: str = "ema", alpha: float = 0.002, tile_override=None,
                 cores: int = 1, batch: int = 1):
        if metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        if cores < 1 or (cores & (cores - 1)):
            raise ValueError(f"unsupported core count {cores}; must be a power of two")
        if batch < 1:
            raise ValueError("batch must be >= 1")
        self.g = g
        self.hw = hw
        self.metric = metric
        self.alpha = alpha
        self.tile_override = tile_override
        self.cores = cores
        self.batch = batch
        self._atoms_cache: dict = {}

    # -- per-subgraph ------------------------------------------------------

    def atoms(self, members) -> SubgraphAtoms:
        key = tuple(sorted(members))
        hit = self._atoms_cache.get(key)
        if hit is not None:
            return hit
        out = self._compute_atoms(key, frozenset(members))
        self._atoms_cache[key] = out
        return out

    def _compute_atoms(self, key, members) -> SubgraphAtoms:
        g = self.g
        view = SubgraphView(g, members)
        p = _PartitionStub(members)
        try:
            sched = derive_schedule(g, p, 0, self.hw, tile_override=self.tile_override,
                                    view=view)
        except UnschedulableError as exc:
            return SubgraphAtoms(key, False, f"unschedulable: {exc}")
        weights = sum(g.node(n).weight_bytes for n in members)
        acts_in = sum(g.node(n).tensor_bytes for n in view.ext_inputs)
        acts_out = sum(g.node(n).tensor_bytes for n in view.ext_outputs)
        macs = sum(g.node(n).macs for n in members)

        # every buffered tensor is written once per element (from DRAM for
        # sources, from the PE array for members)
        writes = sum(nd.tensor_bytes for nd in view.nodes)
        reads = 0
        for pos, nid in enumerate(view.order):
            nd = view.nodes[pos]
            for k in range(view.cons_indptr[pos], view.cons_indptr[pos + 1]):
                c = view.nodes[view.cons_idx[k]]
                reads += (c.out_h * c.out_w * c.kernel_h * c.kernel_w
                          * nd.out_channels * nd.act_bytes_per_elem)

        compute = 0.0
        peak = self.hw.peak_macs_per_cycle
        for nid in members:
            nd = g.node(nid)
            if nd.macs == 0:
                continue
            ns = sched.per_node[nid]
            util = modeled_utilization(nd, min(ns.delta_h, nd.out_h),
                                       min(ns.delta_w, nd.out_w), self.hw)
            compute += nd.macs / (peak * util)

        total_regions = sum(m + s for _, m, s in region_sizes(sched, g, self.hw))
        return SubgraphAtoms(key, True, "", weights, acts_in, acts_out, macs,
                             writes, reads, compute, total_regions, len(view.order))

    # -- per-partition -----------------------------------------------------

    def subgraph_sets(self, p) -> list:
        if isinstance(p, PartitionScheme):
            return p.subgraphs()
        groups: dict = {}
        for nid, s in zip(self.g.ids, p):
            groups.setdefault(s, set()).add(nid)
        return [frozenset(groups[i]) for i in sorted(groups)]

    def evaluate_partition(self, p, hw: HardwareConfig | None = None) -> CostReport:
        hw = hw or self.hw
        sets = self.subgraph_sets(p)
        atoms = [self.atoms(s) for s in sets]
        return self.report_from_atoms(atoms, hw)

    def report_from_atoms(self, atoms, hw: HardwareConfig) -> CostReport:
        per = []
        feasible = True
        reason = ""
        cores, batch = self.cores, self.batch
        act_cap_buf = hw.shared_buf_bytes if hw.buffer_mode == "shared" else hw.global_buf_bytes
        rd_pj = hw.energy.sram_read_pj(act_cap_buf)
        wr_pj = hw.energy.sram_write_pj(act_cap_buf)
        for i, a in enumerate(atoms):
            next_w = atoms[i + 1].weights_bytes if hw.weight_prefetch and i + 1 < len(atoms) else 0
            ok, why = _subgraph_feasible(a, next_w, hw, cores)
            # weights cross DRAM once per subgraph; activations per sample
            acts = (a.acts_in_bytes + a.acts_out_bytes) * batch
            ema = a.weights_bytes + acts
            hop_bytes = a.weights_bytes * (cores - 1) * batch
            energy = (ema * 8 * hw.energy.dram_pj_per_bit
                      + hop_bytes * hw.energy.hop_pj_per_byte
                      + (a.sram_read_bytes * rd_pj + a.sram_write_bytes * wr_pj
                         + a.macs * hw.energy.mac_pj) * batch)
            compute = a.compute_cycles * batch / cores
            comm = (ema / cores) / hw.dram_bytes_per_cycle
            if hop_bytes:
                comm += (hop_bytes / cores) / (hw.hop_bw_bytes_per_s / hw.freq_hz)
            per.append(SubgraphCost(a.nodes, ok, why, a.weights_bytes,
                                    a.acts_in_bytes * batch, a.acts_out_bytes * batch,
                                    ema, energy, compute, comm))
            if not ok and feasible:
                feasible = False
                reason = f"subgraph {i}: {why}"
        return CostReport(
            per_subgraph=tuple(per),
            feasible=feasible,
            reason=reason,
            metric=self.metric,
            alpha=self.alpha,
            buf_size_bytes=hw.buf_total_bytes,
            weights_bytes=sum(c.weights_bytes for c in per),
            acts_in_bytes=sum(c.acts_in_bytes for c in per),
            acts_out_bytes=sum(c.acts_out_bytes for c in per),
            ema_bytes=sum(c.ema_bytes for c in per),
            energy_pj=sum(c.energy_pj for c in per),
            compute_cycles=sum(c.compute_cycles for c in per),
            comm_cycles=sum(c.comm_cycles for c in per),
            latency_cycles=sum(c.latency_cycles for c in per),
            freq_hz=hw.freq_hz,
        )

    def first_infeasible(self, p, hw: HardwareConfig | None = None):
        """(index, member set, reason) of the first infeasible subgraph, or None.

        For a pair-residency violation the heavier neighbour is reported as
        the offender so repair splits where it helps."""
        hw = hw or self.hw
        sets = self.subgraph_sets(p)
        atoms = [self.atoms(s) for s in sets]
        for i, a in enumerate(atoms):
            next_w = atoms[i + 1].weights_bytes if hw.weight_prefetch and i + 1 < len(atoms) else 0
            ok, why = _subgraph_feasible(a, next_w, hw, self.cores)
            if not ok:
                if why.startswith("weights") and i + 1 < len(atoms) \
                        and atoms[i + 1].weights_bytes > a.weights_bytes:
                    return i + 1, sets[i + 1], why
                return i, sets[i], why
        return None


def _subgraph_feasible(a: SubgraphAtoms, next_weights: int, hw: HardwareConfig,
                       cores: int = 1):
    if not a.schedulable:
        return False, a.reason
    if a.node_count > hw.region_limit:
        return False, f"regions: {a.node_count} nodes exceed the {hw.region_limit}-node budget"
    resident = -(-a.weights_bytes // cores) + -(-next_weights // cores)
    if hw.buffer_mode == "separate":
        if resident > hw.weight_buf_bytes:
            return False, (f"weights: {resident} resident bytes exceed "
                           f"weight buffer {hw.weight_buf_bytes}")
        if a.act_region_bytes > hw.global_buf_bytes:
            return False, (f"capacity: {a.act_region_bytes} region bytes exceed "
                           f"global buffer {hw.global_buf_bytes}")
    else:
        if a.act_region_bytes + resident > hw.shared_buf_bytes:
            return False, (f"capacity: {a.act_region_bytes} region bytes + {resident} "
                           f"weight bytes exceed shared buffer {hw.shared_buf_bytes}")
    return True, ""


class _PartitionStub:
    """Single-subgraph partition facade for schedule derivation on a node set."""

    def __init__(self, members):
        self._members = frozenset(members)

    def subgraph(self, i):
        return self._members


# ---------------------------------------------------------------------------
# public operations


def subgraph_cost(g: ComputationGraph, p: PartitionScheme, i: int,
                  hw: HardwareConfig, metric: str = "ema") -> SubgraphCost:
    ev = Evaluator(g, hw, metric)
    report = ev.evaluate_partition(p, hw)
    return report.per_subgraph[i]


def evaluate(g: ComputationGraph, p, hw: HardwareConfig, metric: str = "ema",
             alpha: float = 0.002) -> CostReport:
    """Cost report for a whole partition; subgraphs aggregate in index order."""
    if not isinstance(p, PartitionScheme):
        p = partition_from_tuple(g, p)
    return Evaluator(g, hw, metric, alpha).evaluate_partition(p, hw)


def multicore_evaluate(g: ComputationGraph, p, hw: HardwareConfig, cores: int,
                       batch: int, metric: str = "energy",
                       alpha: float = 0.002) -> CostReport:
    """Analytical multi-core / multi-batch extension.

    Weights of a subgraph are striped across cores (each holds
    ceil(w/cores)); every sample's pass rotates the remote share between
    cores over the crossbar.  Weights cross DRAM once per subgraph
    regardless of batch; activations scale with batch.  Compute and
    per-core DRAM streams split evenly across cores.
    """
    if not isinstance(p, PartitionScheme):
        p = partition_from_tuple(g, p)
    return Evaluator(g, hw, metric, alpha, cores=cores, batch=batch) \
        .evaluate_partition(p, hw)
