"""Exact and heuristic partition baselines: state-compressed enumeration,
iterative pair-merging (greedy), and depth-order dynamic programming."""

from __future__ import annotations

import time
from dataclasses import dataclass

from ..cost import Evaluator, INFEASIBLE, _subgraph_feasible
from ..graph import ComputationGraph, PartitionScheme, canonicalize, singleton_partition
from ..hardware import HardwareConfig


@dataclass
class EnumResult:
    status: str                 # "ok" | "timeout" | "infeasible"
    partition: PartitionScheme | None
    objective: float
    states: int


class _StateBudget(Exception):
    pass


def run_enumeration(g: ComputationGraph, hw: HardwareConfig, metric: str = "ema",
                    alpha: float = 0.002, budget_states: int = 10_000_000,
                    wall_timeout_s: float | None = 60.0,
                    evaluator: Evaluator | None = None) -> EnumResult:
    """Exact optimum of the partition objective by sequential subgraph
    construction with memoization on (closed set, open subgraph, predecessor
    residency).  Returns a timeout verdict when the state budget or wall
    clock is exceeded.
    """
    ev = evaluator or Evaluator(g, hw, metric, alpha)
    n = len(g)
    order = g.topo_order
    pos = {nid: i for i, nid in enumerate(order)}
    prod_masks = [0] * n
    adj_masks = [0] * n
    for i, nid in enumerate(order):
        for u in g.producers(nid):
            prod_masks[i] |= 1 << pos[u]
            adj_masks[i] |= 1 << pos[u]
        for c in g.consumers(nid):
            adj_masks[i] |= 1 << pos[c]
    full = (1 << n) - 1
    memo: dict = {}
    deadline = time.monotonic() + wall_timeout_s if wall_timeout_s else None

    def close_stats(mask):
        members = frozenset(order[i] for i in range(n) if mask >> i & 1)
        if not _mask_connected(mask, adj_masks, n):
            return None
        a = ev.atoms(members)
        if not a.schedulable:
            return None
        return a

    def solve(closed, open_mask, prev_w, prev_act):
        key = (closed, open_mask, prev_w, prev_act)
        hit = memo.get(key)
        if hit is not None:
            return hit[0]
        if len(memo) >= budget_states:
            raise _StateBudget()
        if deadline is not None and len(memo) % 4096 == 0 and time.monotonic() > deadline:
            raise _StateBudget()
        memo[key] = (INFEASIBLE, None)  # placeholder guards re-entry
        best = INFEASIBLE
        action = None
        covered = closed | open_mask
        if covered == full and open_mask == 0:
            ok = _pair_ok(prev_w, prev_act, 0, hw)
            best = 0.0 if ok else INFEASIBLE
            memo[key] = (best, None)
            return best
        # close the open subgraph
        if open_mask:
            a = close_stats(open_mask)
            if a is not None and _pair_ok(prev_w, prev_act, a.weights_bytes, hw) \
                    and _own_ok(a, hw):
                tail = solve(covered, 0, a.weights_bytes, a.act_region_bytes)
                here = _metric_value(a, hw, metric, ev)
                if here + tail < best:
                    best = here + tail
                    action = ("close",)
        # grow the open subgraph with any eligible node
        for i in range(n):
            bit = 1 << i
            if covered & bit or (prod_masks[i] & ~covered):
                continue
            tail = solve(closed, open_mask | bit, prev_w, prev_act)
            if tail < best:
                best = tail
                action = ("add", i)
        memo[key] = (best, action)
        return best

    try:
        value = solve(0, 0, 0, 0)
    except (_StateBudget, RecursionError):
        return EnumResult("timeout", None, INFEASIBLE, len(memo))
    if value == INFEASIBLE:
        return EnumResult("infeasible", None, INFEASIBLE, len(memo))

    # reconstruct the optimal partition by replaying memoized actions
    assign = {}
    closed, open_mask, prev_w, prev_act = 0, 0, 0, 0
    idx = 0
    while (closed | open_mask) != full or open_mask:
        _, action = memo[(closed, open_mask, prev_w, prev_act)]
        if action is None:
            break
        if action[0] == "add":
            open_mask |= 1 << action[1]
        else:
            a = close_stats(open_mask)
            for i in range(n):
                if open_mask >> i & 1:
                    assign[order[i]] = idx
            idx += 1
            closed |= open_mask
            open_mask = 0
            prev_w, prev_act = a.weights_bytes, a.act_region_bytes
    partition = canonicalize(g, assign)
    return EnumResult("ok", partition, value, len(memo))


def _metric_value(atoms, hw, metric, ev):
    if metric == "ema":
        return float(atoms.ema_bytes)
    report = ev.report_from_atoms([atoms], hw)
    return report.per_subgraph[0].energy_pj


def _pair_ok(prev_w, prev_act, next_w, hw: HardwareConfig) -> bool:
    """Residency feasibility of the previous subgraph given its successor."""
    if prev_w == 0 and prev_act == 0:
        return True
    resident = prev_w + (next_w if hw.weight_prefetch else 0)
    if hw.buffer_mode == "separate":
        return resident <= hw.weight_buf_bytes and prev_act <= hw.global_buf_bytes
    return prev_act + resident <= hw.shared_buf_bytes


def _own_ok(atoms, hw: HardwareConfig) -> bool:
    return atoms.node_count <= hw.region_limit


def _mask_connected(mask, adj_masks, n) -> bool:
    seed = mask & -mask
    seen = seed
    frontier = seed
    while frontier:
        nxt = 0
        f = frontier
        while f:
            low = f & -f
            i = low.bit_length() - 1
            nxt |= adj_masks[i] & mask & ~seen
            f ^= low
        seen |= nxt
        frontier = nxt
    return seen == mask


# ---------------------------------------------------------------------------


def run_greedy(g: ComputationGraph, hw: HardwareConfig, metric: str = "ema",
               alpha: float = 0.002, evaluator: Evaluator | None = None) -> PartitionScheme:
    """Pair-merging heuristic: start from single-layer subgraphs and fuse the
    adjacent pair with the greatest objective benefit until none helps.
    Ties resolve to the smallest subgraph-index pair."""
    ev = evaluator or Evaluator(g, hw, metric, alpha)
    current = singleton_partition(g).as_tuple(g)

    def objective(part):
        return ev.evaluate_partition(part, hw).objective_partition

    cur_obj = objective(current)
    while True:
        assign = {nid: s for nid, s in zip(g.ids, current)}
        pairs = set()
        for u, v in g.edges:
            su, sv = assign[u], assign[v]
            if su != sv:
                pairs.add((min(su, sv), max(su, sv)))
        best_pair, best_obj, best_part = None, cur_obj, None
        for a, b in sorted(pairs):
            trial = {nid: (a if s == b else s) for nid, s in assign.items()}
            part = canonicalize(g, trial).as_tuple(g)
            obj = objective(part)
            if obj < best_obj:
                best_pair, best_obj, best_part = (a, b), obj, part
        if best_pair is None:
            break
        current, cur_obj = best_part, best_obj
    return canonicalize(g, {nid: s for nid, s in zip(g.ids, current)})


def run_dp(g: ComputationGraph, hw: HardwareConfig, metric: str = "ema",
           alpha: float = 0.002, evaluator: Evaluator | None = None) -> PartitionScheme:
    """Optimal partition among those whose subgraphs are contiguous runs of
    the depth order (depth ties broken by node id)."""
    ev = evaluator or Evaluator(g, hw, metric, alpha)
    order = sorted(g.ids, key=lambda nid: (g.depth[nid], nid))
    n = len(order)
    memo: dict = {}

    def chunk_atoms(i, j):
        members = frozenset(order[i:j])
        a = ev.atoms(members)
        return a if a.schedulable else None

    def precedence_ok(i, j):
        members = set(order[i:j])
        before = set(order[:i])
        for nid in members:
            for u in g.producers(nid):
                if u not in members and u not in before:
                    return False
        return True

    def connected(i, j):
        members = set(order[i:j])
        seen = {order[i]}
        stack = [order[i]]
        while stack:
            nid = stack.pop()
            for nb in g.producers(nid) + g.consumers(nid):
                if nb in members and nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == len(members)

    def solve(i, prev_w, prev_act):
        if i == n:
            return (0.0, None) if _pair_ok(prev_w, prev_act, 0, hw) else (INFEASIBLE, None)
        key = (i, prev_w, prev_act)
        hit = memo.get(key)
        if hit is not None:
            return hit
        best, best_j = INFEASIBLE, None
        for j in range(i + 1, n + 1):
            if not precedence_ok(i, j) or not connected(i, j):
                continue
            a = chunk_atoms(i, j)
            if a is None or not _own_ok(a, hw):
                continue
            if not _pair_ok(prev_w, prev_act, a.weights_bytes, hw):
                continue
            tail, _ = solve(j, a.weights_bytes, a.act_region_bytes)
            total = _metric_value(a, hw, metric, ev) + tail
            if total < best:
                best, best_j = total, j
        memo[key] = (best, best_j)
        return memo[key]

    value, _ = solve(0, 0, 0)
    assign = {}
    i, prev_w, prev_act = 0, 0, 0
    idx = 0
    while i < n:
        _, j = memo.get((i, prev_w, prev_act), (None, None))
        if j is None:
            # no feasible contiguous partition from here: fall back to singletons
            for k in range(i, n):
                assign[order[k]] = idx
                idx += 1
            break
        a = chunk_atoms(i, j)
        for k in range(i, j):
            assign[order[k]] = idx
        idx += 1
        prev_w, prev_act = a.weights_bytes, a.act_region_bytes
        i = j
    return canonicalize(g, assign)
