"""Synthetic benchmark graphs: chains, diamonds, inception/residual blocks
and randomly wired DAGs.  All generators are deterministic for a fixed seed
and produce graphs that pass every ComputationGraph invariant."""

import random

from .graph import ComputationGraph, LayerDescriptor, LayerKind

FAMILIES = ("plain_chain", "diamond", "inception_block", "residual_block", "randwire")


def generate_benchmark(name, **params) -> ComputationGraph:
    try:
        fn = _FAMILY_FNS[name]
    except KeyError:
        raise ValueError(f"unknown benchmark family {name!r}; choose from {FAMILIES}") from None
    return fn(**params)


def _conv(nid, in_ch, out_ch, hw, kernel=3, stride=1, wbytes=None):
    out_h = -(-hw // stride)  # SAME sizing
    if wbytes is None:
        wbytes = kernel * kernel * in_ch * out_ch
    return LayerDescriptor(nid, LayerKind.CONV, kernel, kernel, stride, stride,
                           in_ch, out_ch, out_h, out_h, wbytes)


def _input(nid, ch, hw):
    return LayerDescriptor(nid, LayerKind.INPUT, 1, 1, 1, 1, ch, ch, hw, hw, 0)


def plain_chain(depth=4, channels=16, hw=16, kernel=3) -> ComputationGraph:
    if depth < 1:
        raise ValueError("depth must be >= 1")
    nodes = [_input(0, channels, hw)]
    edges = []
    for i in range(1, depth + 1):
        nodes.append(_conv(i, channels, channels, hw, kernel))
        edges.append((i - 1, i))
    return ComputationGraph(nodes, edges, [0], [depth])


def diamond(channels=16, hw=16) -> ComputationGraph:
    # a -> {b, c} -> d with the source as the input node
    nodes = [
        _input(0, channels, hw),
        _conv(1, channels, channels, hw),
        _conv(2, channels, channels, hw),
        LayerDescriptor(3, LayerKind.ELTWISE, 1, 1, 1, 1, channels, channels, hw, hw, 0),
    ]
    edges = [(0, 1), (0, 2), (1, 3), (2, 3)]
    return ComputationGraph(nodes, edges, [0], [3])


def inception_block(channels=16, hw=16) -> ComputationGraph:
    """1-in / 4-branch / 1-out block: 1x1, 1x1-3x3, 1x1-5x5 and pool-1x1
    branches joined by a pointwise convolution over the concatenated maps."""
    c = channels
    nodes = [_input(0, c, hw)]
    edges = []
    nid = 1
    branch_outs = []
    # branch 1: pointwise
    nodes.append(_conv(nid, c, c, hw, kernel=1))
    edges.append((0, nid))
    branch_outs.append(nid)
    nid += 1
    # branches 2 and 3: reduce then spatial kernel
    for kernel in (3, 5):
        nodes.append(_conv(nid, c, c // 2, hw, kernel=1))
        edges.append((0, nid))
        nodes.append(_conv(nid + 1, c // 2, c, hw, kernel=kernel))
        edges.append((nid, nid + 1))
        branch_outs.append(nid + 1)
        nid += 2
    # branch 4: pool then pointwise
    nodes.append(LayerDescriptor(nid, LayerKind.POOL, 3, 3, 1, 1, c, c, hw, hw, 0))
    edges.append((0, nid))
    nodes.append(_conv(nid + 1, c, c, hw, kernel=1))
    edges.append((nid, nid + 1))
    branch_outs.append(nid + 1)
    nid += 2
    join = _conv(nid, 4 * c, c, hw, kernel=1)
    nodes.append(join)
    edges.extend((b, nid) for b in branch_outs)
    return ComputationGraph(nodes, edges, [0], [nid])


def residual_block(blocks=1, channels=16, hw=16) -> ComputationGraph:
    """Stacked two-conv residual units with identity skips into eltwise adds."""
    if blocks < 1:
        raise ValueError("blocks must be >= 1")
    c = channels
    nodes = [_input(0, c, hw), _conv(1, c, c, hw)]
    edges = [(0, 1)]
    prev = 1
    nid = 2
    for _ in range(blocks):
        nodes.append(_conv(nid, c, c, hw))
        nodes.append(_conv(nid + 1, c, c, hw))
        nodes.append(LayerDescriptor(nid + 2, LayerKind.ELTWISE, 1, 1, 1, 1, c, c, hw, hw, 0))
        edges += [(prev, nid), (nid, nid + 1), (nid + 1, nid + 2), (prev, nid + 2)]
        prev = nid + 2
        nid += 3
    return ComputationGraph(nodes, edges, [0], [prev])


def randwire(n=20, seed=0, edge_prob=0.25, channels=16, hw=16) -> ComputationGraph:
    """Randomly wired DAG of ``n`` body nodes between an input and a join.

    Every body node gets at least one producer among earlier nodes; dangling
    body outputs are gathered by a final eltwise join, mirroring randomly
    wired network generators.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = random.Random(f"randwire:{seed}")
    c = channels
    nodes = [_input(0, c, hw)]
    edges = []
    for i in range(1, n + 1):
        kernel = rng.choice((1, 3, 3, 5))
        producers = [j for j in range(i) if rng.random() < edge_prob]
        if not producers:
            producers = [rng.randrange(0, i)]
        nodes.append(_conv(i, len(producers) * c, c, hw, kernel=kernel))
        edges.extend((p, i) for p in producers)
    consumed = {u for u, _ in edges}
    dangling = [i for i in range(1, n + 1) if i not in consumed]
    join = n + 1
    nodes.append(LayerDescriptor(join, LayerKind.ELTWISE, 1, 1, 1, 1, c, c, hw, hw, 0))
    for d in dangling:
        edges.append((d, join))
    return ComputationGraph(nodes, edges, [0], [join])


_FAMILY_FNS = {
    "plain_chain": plain_chain,
    "diamond": diamond,
    "inception_block": inception_block,
    "residual_block": residual_block,
    "randwire": randwire,
}
