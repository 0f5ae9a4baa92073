"""Independent oracles used by the tests.

Everything here is deliberately implemented from scratch (no reuse of the
package's derivation/search code paths): per-layer MAC hand sums, sliding
window index simulations, a set-recursive partition enumerator, and a
forward (production-driven) tiling reference.
"""

import json
import math
import random


# ---------------------------------------------------------------------------
# MAC hand sum straight off a graph JSON document


def mac_hand_sum(doc_or_path) -> int:
    if isinstance(doc_or_path, (str,)) or hasattr(doc_or_path, "read_text"):
        with open(doc_or_path) as fh:
            doc = json.load(fh)
    else:
        doc = doc_or_path
    extents = {int(n["id"]): n["out_hw"] for n in doc["nodes"]}
    producer = {}
    for u, v in doc["edges"]:
        producer.setdefault(int(v), int(u))
    total = 0
    for n in doc["nodes"]:
        kind = n["kind"].lower()
        oh, ow = n["out_hw"]
        pixels = oh * ow * n["out_ch"]
        if kind in ("conv", "fc"):
            if kind == "fc":
                ph, pw = extents.get(producer.get(int(n["id"])), (1, 1))
                kh, kw = max(1, ph - oh + 1), max(1, pw - ow + 1)
            else:
                kh, kw = n["kernel"]
            total += pixels * kh * kw * n["in_ch"]
        elif kind in ("dwconv", "pool"):
            kh, kw = n["kernel"]
            total += pixels * kh * kw
        elif kind == "eltwise":
            total += pixels
    return total


# ---------------------------------------------------------------------------
# sliding-window index simulations


def window_extent(F, s, x) -> int:
    """Input extent covered by x consecutive kernel windows (index sim)."""
    indices = set()
    for out in range(x):
        for k in range(F):
            indices.add(out * s + k)
    return max(indices) - min(indices) + 1


def chain_window_sim(layers, out_tile, out_extent=None):
    """1D index simulation along a chain: layers = [(F, s), ...] input-to-output.

    The output layer emits ``out_tile`` new elements per step; each producer
    buffers exactly the indices its consumer's steady new chunk touches.
    Returns [(delta, window)] per layer boundary from the input side, where
    delta is the advance of that index set between steps and window its span.
    """
    result = []
    delta = out_tile
    for F, s in reversed(layers):
        need = sorted({o * s + k for o in range(delta) for k in range(F)})
        shifted = sorted({(o + delta) * s + k for o in range(delta) for k in range(F)})
        window = need[-1] - need[0] + 1
        adv = shifted[0] - need[0]
        result.append((adv, window))
        delta = adv
    return list(reversed(result))


# ---------------------------------------------------------------------------
# valid-partition enumeration by set recursion (ordered partitions)


def enumerate_valid_partitions(g):
    """Yield every valid execution-ordered partition as a node->index dict.

    Subgraph 0 must be producer-closed and connected; recurse on the rest.
    Independent of the package's search code (no masks, no memoization).
    """
    ids = list(g.ids)

    def connected(nodes):
        nodes = set(nodes)
        seen = {next(iter(nodes))}
        stack = list(seen)
        while stack:
            n = stack.pop()
            for nb in g.producers(n) + g.consumers(n):
                if nb in nodes and nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == len(nodes)

    def closed_connected_subsets(remaining):
        # grow by producer-closure alone; connectivity is a property of the
        # finished set (a member may bridge two earlier-added branches)
        rem = set(remaining)
        ready = [n for n in rem if all(p not in rem for p in g.producers(n))]
        found = set()

        def grow(current):
            key = frozenset(current)
            if key in found:
                return
            found.add(key)
            if connected(key):
                yield key
            for n in sorted(rem - current):
                if all(p in current or p not in rem for p in g.producers(n)):
                    yield from grow(current | {n})

        for seed in sorted(ready):
            yield from grow({seed})

    def rec(remaining, idx):
        if not remaining:
            yield {}
            return
        for sub in closed_connected_subsets(remaining):
            for rest in rec(remaining - sub, idx + 1):
                d = {n: idx for n in sub}
                d.update(rest)
                yield d

    seen = set()
    for assign in rec(frozenset(ids), 0):
        key = tuple(assign[n] for n in ids)
        if key not in seen:
            seen.add(key)
            yield assign


def brute_force_optimum(g, hw, evaluate_fn):
    """(best objective, best assignment) over every valid partition."""
    best, best_assign = float("inf"), None
    for assign in enumerate_valid_partitions(g):
        obj = evaluate_fn(assign)
        if obj < best:
            best, best_assign = obj, dict(assign)
    return best, best_assign


# ---------------------------------------------------------------------------
# boundary tensors by direct edge enumeration


def edge_cut_boundaries(g, assignment, i):
    members = {n for n, s in assignment.items() if s == i}
    ext_in, ext_out = set(), set()
    for u, v in g.edges:
        if v in members:
            if u not in members or g.node(u).kind.value == "input":
                ext_in.add(u)
        if u in members and v not in members and g.node(u).kind.value != "input":
            ext_out.add(u)
    for n in members:
        if n in g.model_outputs and g.node(n).kind.value != "input":
            ext_out.add(n)
    return ext_in, ext_out


# ---------------------------------------------------------------------------
# production-driven (forward) tiling reference


def production_forward_tiles(g, members, input_tile):
    """Forward-derive per-node produced tile extents from a fixed source tile
    (per dimension): each node produces everything its inputs allow."""
    members = set(members)
    tiles = {}
    for nid in g.topo_order:
        nd = g.node(nid)
        prods = [p for p in g.producers(nid) if p in members or p in tiles]
        if not prods:
            if nid in members:
                tiles[nid] = input_tile
            continue
        if nid not in members:
            continue
        avail_h = min(tiles[p][0] for p in prods)
        avail_w = min(tiles[p][1] for p in prods)
        th = (avail_h - nd.kernel_h) // nd.stride_h + 1 if avail_h >= nd.kernel_h else 0
        tw = (avail_w - nd.kernel_w) // nd.stride_w + 1 if avail_w >= nd.kernel_w else 0
        tiles[nid] = (max(th, 0), max(tw, 0))
    return tiles


def production_live_elements(g, members, input_tile):
    """Peak cached intermediate elements under the forward scheme: every
    produced-but-not-yet-fully-consumed intermediate tile is live at once."""
    tiles = production_forward_tiles(g, members, input_tile)
    members = set(members)
    live = 0
    for nid, (th, tw) in tiles.items():
        nd = g.node(nid)
        if nd.kind.value == "input" or nid not in members:
            continue
        if any(c in members for c in g.consumers(nid)):
            live += th * tw
    return live


# ---------------------------------------------------------------------------
# random well-formed test graphs


def random_test_graph(rng: random.Random, n_body: int, channels=8, extent=24,
                      kernels=(1, 3, 5, 7), strides=(1, 2), branch_prob=0.3):
    """Random DAG with SAME-padded spatial arithmetic.

    Producers are drawn among earlier nodes of equal extent so that
    multi-input nodes stay dimension-consistent.
    """
    from fuseplan.graph import ComputationGraph, LayerDescriptor, LayerKind

    nodes = [LayerDescriptor(0, LayerKind.INPUT, 1, 1, 1, 1, channels, channels,
                             extent, extent, 0)]
    ext = {0: extent}
    edges = []
    for i in range(1, n_body + 1):
        F = rng.choice(kernels)
        s = rng.choice(strides) if F > 1 else 1
        cand_prod = [j for j in range(i)]
        first = rng.choice(cand_prod)
        prods = [first]
        if rng.random() < branch_prob:
            same_ext = [j for j in cand_prod if ext[j] == ext[first] and j != first]
            if same_ext:
                prods.append(rng.choice(same_ext))
        out_ext = max(1, -(-ext[first] // s))
        in_ch = channels * len(prods)
        nodes.append(LayerDescriptor(
            i, LayerKind.CONV, F, F, s, s, in_ch, channels, out_ext, out_ext,
            F * F * in_ch * channels))
        ext[i] = out_ext
        edges.extend((p, i) for p in prods)
    consumed = {u for u, _ in edges}
    outputs = [i for i in range(1, n_body + 1) if i not in consumed] or [n_body]
    return ComputationGraph(nodes, edges, [0], outputs)
