"""Consumption-centric subgraph execution schemes.

Given one subgraph of a partitioned graph, derive the repeating elementary
operation that drives every member from its consumers' demand:

  stage 1  pick output-node tile sizes for adequate PE utilization,
  stage 2  walk the subgraph in reverse topological order, aligning each
           producer's update offset to the least common multiple of its
           consumers' input strides and sizing its buffered tile to the
           largest consumer window,
  stage 3  solve per-edge rate equations for the minimal co-prime number of
           updates each node performs per elementary operation.

The two spatial dimensions are derived independently.  External producers of
the subgraph take part as source nodes (their tiles stream from DRAM), so a
schedule covers every buffer-resident tensor of the subgraph's execution.
"""

from __future__ import annotations

from array import array
from dataclasses import dataclass
from math import ceil

from . import kernels
from .graph import ComputationGraph, LayerKind, PartitionScheme
from .hardware import HardwareConfig


class UnschedulableError(Exception):
    """A subgraph has no bounded-alignment schedule (runaway offset LCM)."""

    def __init__(self, subgraph, node_chain, message=None):
        self.subgraph = subgraph
        self.node_chain = tuple(node_chain)
        super().__init__(message or
                         f"subgraph {subgraph}: update-offset alignment exceeds cap "
                         f"along nodes {list(self.node_chain)}")


class RateConsistencyError(Exception):
    """Stage-3 rate equations are inconsistent after stage-2 alignment; this
    indicates an internal bug, not a user input problem."""


@dataclass(frozen=True)
class NodeSchedule:
    node: int
    delta_h: int
    delta_w: int
    tile_h: int
    tile_w: int
    upd_h: int = 1
    upd_w: int = 1

    @property
    def upd_num(self) -> int:
        """Memory updates per 2D elementary operation."""
        return self.upd_h * self.upd_w


@dataclass(frozen=True)
class SubgraphSchedule:
    subgraph: int
    per_node: dict
    exec_order: tuple
    steps_h: int
    steps_w: int
    members: frozenset = frozenset()
    low_util: tuple = ()

    @property
    def steps_per_tensor(self) -> int:
        return self.steps_h * self.steps_w

    def to_json(self) -> dict:
        return {
            "nodes": {
                str(ns.node): {
                    "delta": [ns.delta_h, ns.delta_w],
                    "tile": [ns.tile_h, ns.tile_w],
                    "upd_num": ns.upd_num,
                }
                for ns in (self.per_node[n] for n in self.exec_order)
            },
            "steps": self.steps_per_tensor,
        }


def f_v(node, x: int, dim: str) -> int:
    """Input extent node ``v`` needs to produce ``x`` outputs along ``dim``."""
    if x < 1:
        raise ValueError("x must be >= 1")
    if dim == "h":
        return node.kernel_h + (x - 1) * node.stride_h
    if dim == "w":
        return node.kernel_w + (x - 1) * node.stride_w
    raise ValueError(f"dim must be 'h' or 'w', got {dim!r}")


class SubgraphView:
    """Array-of-struct form of one subgraph plus its external producers,
    in topological order, ready for the derivation kernels."""

    __slots__ = ("members", "order", "pos", "nodes", "kh", "kw", "sh", "sw",
                 "cons_indptr", "cons_idx", "prod_indptr", "prod_idx",
                 "edge_src", "edge_dst", "output_positions", "ext_inputs",
                 "ext_outputs")

    def __init__(self, g: ComputationGraph, members):
        self.members = frozenset(members)
        view = set(self.members)
        for nid in self.members:
            view.update(g.producers(nid))
        self.order = tuple(nid for nid in g.topo_order if nid in view)
        self.pos = {nid: i for i, nid in enumerate(self.order)}
        self.nodes = tuple(g.node(nid) for nid in self.order)
        n = len(self.order)

        self.kh = array("q", (nd.kernel_h for nd in self.nodes))
        self.kw = array("q", (nd.kernel_w for nd in self.nodes))
        self.sh = array("q", (nd.stride_h for nd in self.nodes))
        self.sw = array("q", (nd.stride_w for nd in self.nodes))

        cons = [[] for _ in range(n)]
        prods = [[] for _ in range(n)]
        src, dst = [], []
        for i, nid in enumerate(self.order):
            for c in g.consumers(nid):
                if c in self.members:
                    j = self.pos[c]
                    cons[i].append(j)
                    prods[j].append(i)
                    src.append(i)
                    dst.append(j)
        self.cons_indptr, self.cons_idx = _csr(cons)
        self.prod_indptr, self.prod_idx = _csr(prods)
        self.edge_src = array("q", src)
        self.edge_dst = array("q", dst)
        self.output_positions = tuple(i for i in range(n) if not cons[i])

        ext_in = set()
        for i, nid in enumerate(self.order):
            if cons[i] and (nid not in self.members or self.nodes[i].kind is LayerKind.INPUT):
                ext_in.add(nid)
        ext_out = set()
        for nid in self.members:
            nd = g.node(nid)
            if nd.kind is LayerKind.INPUT:
                continue
            if nid in g.model_outputs or any(c not in self.members for c in g.consumers(nid)):
                ext_out.add(nid)
        self.ext_inputs = frozenset(ext_in)
        self.ext_outputs = frozenset(ext_out)

    def __len__(self):
        return len(self.order)


def _csr(adj_lists):
    indptr = [0]
    flat = []
    for lst in adj_lists:
        flat.extend(lst)
        indptr.append(len(flat))
    return array("q", indptr), array("q", flat)


def _dim_candidates(extent: int, grain: int):
    cands = set(range(1, min(extent, grain) + 1))
    t = 2 * grain
    while t < extent:
        cands.add(t)
        t += grain
    cands.add(extent)
    return sorted(cands)


def _macs_per_pixel(nd) -> int:
    if nd.kind is LayerKind.CONV:
        return nd.out_channels * nd.kernel_h * nd.kernel_w * nd.in_channels
    if nd.kind in (LayerKind.DWCONV, LayerKind.POOL):
        return nd.out_channels * nd.kernel_h * nd.kernel_w
    if nd.kind is LayerKind.ELTWISE:
        return nd.out_channels
    return 0


def modeled_utilization(nd, tile_h: int, tile_w: int, hw: HardwareConfig) -> float:
    """Fraction of the PE array kept busy by one tile-sized work step."""
    return min(1.0, tile_h * tile_w * _macs_per_pixel(nd) / hw.peak_macs_per_cycle)


def _choose_tile(nd, hw: HardwareConfig):
    """Smallest candidate tile meeting the utilization threshold.

    Returns ((tile_h, tile_w), low_util_flag).  Candidates step at the PE
    array's output granularity once past single elements.
    """
    if _macs_per_pixel(nd) == 0:
        return (1, 1), False
    ch = _dim_candidates(nd.out_h, hw.pe_rows)
    cw = _dim_candidates(nd.out_w, hw.pe_cols)
    pairs = sorted(((h * w, h, w) for h in ch for w in cw))
    for _, h, w in pairs:
        if modeled_utilization(nd, h, w, hw) >= hw.util_threshold:
            return (h, w), False
    return (1, 1), True


def stage1_output_tiles(g, p, i, hw, tile_override=None, view=None):
    """Tile sizes for the subgraph's output nodes (no in-subgraph consumer)."""
    view = view or SubgraphView(g, p.subgraph(i))
    tiles = {}
    low = []
    for pos in view.output_positions:
        nd = view.nodes[pos]
        if tile_override is not None:
            tiles[nd.id] = (min(tile_override, nd.out_h), min(tile_override, nd.out_w))
            continue
        tile, flagged = _choose_tile(nd, hw)
        tiles[nd.id] = tile
        if flagged:
            low.append(nd.id)
    return tiles, tuple(low)


def stage2_backward_derive(g, p, i, output_tiles, lcm_cap=4096, view=None):
    """Update offsets and tile sizes for every node of subgraph ``i``.

    ``output_tiles`` maps each output node to its (tile_h, tile_w).  Returns
    {node: ((delta_h, delta_w), (tile_h, tile_w))}.  Raises
    :class:`UnschedulableError` when offset alignment exceeds ``lcm_cap``.
    """
    view = view or SubgraphView(g, p.subgraph(i))
    n = len(view)
    res = {}
    deltas = {}
    tiles = {}
    for dim in ("h", "w"):
        out_tile = array("q", [0] * n)
        for pos in view.output_positions:
            nid = view.order[pos]
            th, tw = output_tiles[nid]
            out_tile[pos] = th if dim == "h" else tw
        kern = view.kh if dim == "h" else view.kw
        stride = view.sh if dim == "h" else view.sw
        delta, tile, err = kernels.derive_dim(kern, stride, view.cons_indptr,
                                              view.cons_idx, out_tile, lcm_cap,
                                              view.prod_indptr, view.prod_idx)
        if err >= 0:
            lo, hi = view.cons_indptr[err], view.cons_indptr[err + 1]
            chain = [view.order[err]] + [view.order[view.cons_idx[k]] for k in range(lo, hi)]
            raise UnschedulableError(i, chain)
        deltas[dim] = delta
        tiles[dim] = tile
    for pos, nid in enumerate(view.order):
        res[nid] = ((deltas["h"][pos], deltas["w"][pos]),
                    (tiles["h"][pos], tiles["w"][pos]))
    return res


def stage3_update_counts(g, p, i, stage2_result, view=None):
    """Minimal co-prime update counts per node (product over dimensions)."""
    per_dim = _stage3_per_dim(g, p, i, stage2_result, view=view)
    return {nid: uh * uw for nid, (uh, uw) in per_dim.items()}


def _stage3_per_dim(g, p, i, stage2_result, view=None):
    view = view or SubgraphView(g, p.subgraph(i))
    n = len(view)
    upd = {}
    for di, dim in enumerate(("h", "w")):
        delta = array("q", (stage2_result[nid][0][di] for nid in view.order))
        stride = view.sh if dim == "h" else view.sw
        counts = kernels.solve_update_counts(n, stride, delta,
                                             view.edge_src, view.edge_dst)
        if counts is None:
            raise RateConsistencyError(
                f"subgraph {i}: stage-3 rates inconsistent along dim {dim}")
        upd[dim] = counts
    return {nid: (upd["h"][pos], upd["w"][pos]) for pos, nid in enumerate(view.order)}


def derive_schedule(g: ComputationGraph, p: PartitionScheme, i: int,
                    hw: HardwareConfig, tile_override=None, view=None) -> SubgraphSchedule:
    """Compose stages 1-3 into the subgraph's elementary-operation schedule."""
    view = view or SubgraphView(g, p.subgraph(i))
    tiles, low = stage1_output_tiles(g, p, i, hw, tile_override=tile_override, view=view)
    st2 = stage2_backward_derive(g, p, i, tiles, lcm_cap=hw.lcm_cap, view=view)
    upd = _stage3_per_dim(g, p, i, st2, view=view)
    per_node = {}
    for nid in view.order:
        (dh, dw), (th, tw) = st2[nid]
        uh, uw = upd[nid]
        per_node[nid] = NodeSchedule(nid, dh, dw, th, tw, uh, uw)
    steps_h = steps_w = 1
    for pos in view.output_positions:
        nd = view.nodes[pos]
        ns = per_node[nd.id]
        steps_h = max(steps_h, ceil(nd.out_h / (ns.delta_h * ns.upd_h)))
        steps_w = max(steps_w, ceil(nd.out_w / (ns.delta_w * ns.upd_w)))
    return SubgraphSchedule(i, per_node, view.order, steps_h, steps_w,
                            view.members, low)
