"""Buffer-region allocation and index-level replay for subgraph schedules.

Each scheduled node owns a MAIN region (its buffered tile) and, when some
in-subgraph consumer re-reads rows across row loops, a SIDE region holding
the horizontally overlapping rows.  Regions are packed contiguously in
topological order at buffer-word granularity; a region manager with a fixed
node budget bounds how many nodes one subgraph may schedule.

``replay_trace`` re-executes a schedule as an index-level sliding-window
simulation.  It is a validation instrument for the tests (demand
sufficiency, zero recomputation, exactly-once DRAM fetch), not part of the
performance model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .graph import ComputationGraph, LayerKind, PartitionScheme
from .hardware import HardwareConfig
from .schedule import SubgraphSchedule, SubgraphView


@dataclass(frozen=True)
class RegionAllocation:
    node: int
    main_bytes: int
    side_bytes: int
    main_start: int
    main_end: int
    side_start: int
    side_end: int


@dataclass(frozen=True)
class AllocationResult:
    regions: tuple
    total_bytes: int
    node_count: int
    feasible: bool
    reason: str = ""

    def region_for(self, nid: int) -> RegionAllocation:
        for r in self.regions:
            if r.node == nid:
                return r
        raise KeyError(nid)


def _round_word(nbytes: int, word: int) -> int:
    return -(-nbytes // word) * word


def _side_overlap_rows(g: ComputationGraph, nid: int, members) -> int:
    """Rows reused across row loops: worst in-subgraph consumer (max kernel,
    min stride), clamped at zero when strides cover the kernel."""
    fmax, smin = 0, None
    for c in g.consumers(nid):
        if c in members:
            cd = g.node(c)
            fmax = max(fmax, cd.kernel_h)
            smin = cd.stride_h if smin is None else min(smin, cd.stride_h)
    if smin is None:
        return 0
    return max(0, fmax - smin)


def region_sizes(sched: SubgraphSchedule, g: ComputationGraph, hw: HardwareConfig,
                 members=None) -> list:
    """(node, main_bytes, side_bytes) per scheduled node, word-rounded.

    MAIN holds the clamped tile (tile never exceeds the tensor extent);
    SIDE holds the overlap rows across the node's full row width.
    """
    members = members if members is not None else sched.members
    word = hw.buffer_word_bytes
    out = []
    for nid in sched.exec_order:
        nd = g.node(nid)
        ns = sched.per_node[nid]
        th = min(ns.tile_h, nd.out_h)
        tw = min(ns.tile_w, nd.out_w)
        main = _round_word(th * tw * nd.out_channels * nd.act_bytes_per_elem, word)
        rows = _side_overlap_rows(g, nid, members)
        side = _round_word(rows * nd.out_w * nd.out_channels * nd.act_bytes_per_elem, word)
        out.append((nid, main, side))
    return out


def allocate_regions(sched: SubgraphSchedule, g: ComputationGraph, hw: HardwareConfig,
                     resident_weight_bytes: int = 0) -> AllocationResult:
    """Pack MAIN+SIDE regions first-fit (bump) in topological order.

    Infeasible when the packed bytes exceed the activation capacity (global
    buffer, or shared buffer minus ``resident_weight_bytes``) or the node
    count exceeds the region manager's budget.
    """
    sizes = region_sizes(sched, g, hw)
    regions = []
    cursor = 0
    for nid, main, side in sizes:
        ms = cursor
        cursor += main
        ss = cursor
        cursor += side
        regions.append(RegionAllocation(nid, main, side, ms, ms + main, ss, ss + side))
    capacity = hw.activation_capacity(resident_weight_bytes)
    n = len(regions)
    if n > hw.region_limit:
        return AllocationResult(tuple(regions), cursor, n, False,
                                f"regions: {n} nodes exceed the {hw.region_limit}-node budget")
    if cursor > capacity:
        return AllocationResult(tuple(regions), cursor, n, False,
                                f"capacity: {cursor} bytes > {capacity} available")
    return AllocationResult(tuple(regions), cursor, n, True)


def weight_residency(g: ComputationGraph, p: PartitionScheme, i: int) -> int:
    """Bytes of weights resident while subgraph ``i`` computes (its own)."""
    return sum(g.node(nid).weight_bytes for nid in p.subgraph(i))


# ---------------------------------------------------------------------------
# replay


@dataclass(frozen=True)
class TraceEvent:
    step: int
    node: int
    region: str   # "main" | "side"
    dim: str      # "w" for column-window updates, "h" for row-band events
    lo: int
    hi: int
    source: str   # "dram" | "compute" | "side"


@dataclass
class ReplayResult:
    events: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations


def replay_trace(sched: SubgraphSchedule, g: ComputationGraph, hw: HardwareConfig,
                 rows: int = 1) -> ReplayResult:
    """Index-level replay of ``rows`` row loops of the schedule.

    Within a row loop the width dimension advances in elementary operations:
    output nodes are driven update by update and each update demand-pulls its
    producers.  A violation is recorded when a consumer's required window was
    already evicted from the producer's tile (data would need a second
    fetch) or cannot be produced.  Across row loops, source nodes reload only
    fresh rows from DRAM; the overlap rows come from the SIDE region.
    """
    view = SubgraphView(g, sched.members)
    res = ReplayResult()
    step_counter = [0]

    # only member nodes compute; in-view sources stream from DRAM
    prods_in_view = {nid: [u for u in g.producers(nid) if u in view.pos]
                     for nid in view.order}
    is_source = {nid: not prods for nid, prods in prods_in_view.items()}

    required = _w_required_map(g, view, sched)

    cons_in_view = {nid: [c for c in g.consumers(nid)
                          if c in view.pos and c in sched.members]
                    for nid in view.order}

    for row in range(rows):
        counts = {nid: 0 for nid in view.order}

        def try_update(v):
            """One data-driven update of node v: advance by at most delta_w,
            clipped to what the producers' data allows (the warmup prologue
            staggers through partial fills) and never evicting rows an
            in-subgraph consumer still needs."""
            nd = g.node(v)
            ns = sched.per_node[v]
            cap = required[v]
            if counts[v] >= cap:
                return False
            new_hi = min(counts[v] + ns.delta_w, cap)
            for u in prods_in_view[v]:
                avail = counts[u]
                if avail >= g.node(u).out_w:
                    continue  # fully produced: border windows clip
                producible = (avail - nd.kernel_w) // nd.stride_w + 1
                new_hi = min(new_hi, producible)
            if new_hi <= counts[v]:
                return False
            tile_w = min(ns.tile_w, nd.out_w)
            lo_new = max(0, new_hi - tile_w)
            for c in cons_in_view[v]:
                if counts[c] * g.node(c).stride_w < lo_new:
                    return False
            for u in prods_in_view[v]:
                und = g.node(u)
                uns = sched.per_node[u]
                window_lo = max(0, counts[u] - min(uns.tile_w, und.out_w))
                if counts[v] * nd.stride_w < window_lo:
                    # the producer's window cannot hold this read: refetch
                    res.violations.append(("evicted", v, u,
                                           counts[v] * nd.stride_w, window_lo))
            src = "dram" if is_source[v] else "compute"
            res.events.append(TraceEvent(step_counter[0], v, "main", "w",
                                         max(0, new_hi - tile_w), new_hi, src))
            step_counter[0] += 1
            counts[v] = new_hi
            return True

        # rounds of elementary-operation execution: every node attempts its
        # per-op updates; deep nodes simply skip rounds until data arrives
        progressed = True
        while progressed:
            progressed = False
            for nid in view.order:
                for _ in range(sched.per_node[nid].upd_w):
                    progressed |= try_update(nid)

        # verify full coverage of every scheduled tensor along W; a stalled
        # (deadlocked) schedule surfaces here as missing coverage
        for nid in view.order:
            if counts[nid] < required[nid]:
                res.violations.append(("coverage", nid, counts[nid]))

        # row-loop boundary: SIDE writes for the next loop, DRAM row bands
        for nid in view.order:
            nd = g.node(nid)
            ns = sched.per_node[nid]
            rows_overlap = _side_overlap_rows(g, nid, sched.members)
            if is_source[nid]:
                th = min(ns.tile_h, nd.out_h)
                if row == 0:
                    lo, hi = 0, th
                else:
                    start = th + (row - 1) * ns.delta_h
                    lo, hi = start, min(start + ns.delta_h, nd.out_h)
                if hi > lo:
                    res.events.append(TraceEvent(step_counter[0], nid, "main", "h",
                                                 lo, hi, "dram"))
                    step_counter[0] += 1
                if row > 0 and rows_overlap > 0:
                    res.events.append(TraceEvent(step_counter[0], nid, "side", "h",
                                                 max(0, lo - rows_overlap), lo, "side"))
                    step_counter[0] += 1
            if rows_overlap > 0 and row < rows - 1:
                # path 2: bottom rows copied on-chip for the next row loop
                covered = min(ns.tile_h + row * ns.delta_h, nd.out_h)
                res.events.append(TraceEvent(step_counter[0], nid, "side", "h",
                                             max(0, covered - rows_overlap), covered,
                                             "compute"))
                step_counter[0] += 1
    return res


def _w_required_map(g, view, sched):
    """W extent each node must reach so that every consumer's demand is met.

    Output nodes must cover their full width; everything else must cover the
    largest window any in-subgraph consumer needs (clamped at the tensor)."""
    required = {}
    for pos in range(len(view.order) - 1, -1, -1):
        nid = view.order[pos]
        nd = view.nodes[pos]
        if pos in view.output_positions:
            required[nid] = nd.out_w
            continue
        need = 0
        for c in g.consumers(nid):
            if c in sched.members:
                cd = g.node(c)
                need = max(need, min((required[c] - 1) * cd.stride_w + cd.kernel_w, nd.out_w))
        required[nid] = need
    return required
