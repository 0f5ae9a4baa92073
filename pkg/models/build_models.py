"""Regenerate the bundled benchmark model files.

Topologies follow the well-known reference networks; channel widths are
scaled down uniformly so the graphs are workable on the default buffer
capacity grids (full-width weight tensors would not fit any candidate
weight buffer under the double-residency prefetch rule).  Weights and
activations are 8-bit (1 byte per element).

Usage: python models/build_models.py [outdir]
"""

import json
import sys
from pathlib import Path


def conv(nid, in_ch, out_ch, hw_out, k=3, s=1):
    return {"id": nid, "kind": "conv", "kernel": [k, k], "stride": [s, s],
            "in_ch": in_ch, "out_ch": out_ch, "out_hw": [hw_out, hw_out],
            "weight_bytes": k * k * in_ch * out_ch}


def pool(nid, ch, hw_out, k=3, s=2):
    return {"id": nid, "kind": "pool", "kernel": [k, k], "stride": [s, s],
            "in_ch": ch, "out_ch": ch, "out_hw": [hw_out, hw_out],
            "weight_bytes": 0}


def fc(nid, in_ch, out_ch, spatial=1):
    # in_ch counts channels; weights cover the flattened spatial extent
    return {"id": nid, "kind": "fc", "in_ch": in_ch, "out_ch": out_ch,
            "out_hw": [1, 1], "weight_bytes": in_ch * spatial * spatial * out_ch}


def inp(nid, ch, hw):
    return {"id": nid, "kind": "input", "kernel": [1, 1], "stride": [1, 1],
            "in_ch": ch, "out_ch": ch, "out_hw": [hw, hw], "weight_bytes": 0}


def chain_edges(ids):
    return [[a, b] for a, b in zip(ids, ids[1:])]


def resnet50(width=0.25):
    """53 nodes: input, conv1, maxpool, 16 bottleneck triples, avgpool, fc."""
    w = lambda c: max(4, int(c * width))
    nodes = [inp(0, 3, 224), conv(1, 3, w(64), 112, k=7, s=2), pool(2, w(64), 56)]
    nid = 3
    hw_map = {1: 56, 2: 28, 3: 14, 4: 7}
    stage_ch = {1: 64, 2: 128, 3: 256, 4: 512}
    blocks = {1: 3, 2: 4, 3: 6, 4: 3}
    prev_ch = w(64)
    for stage in (1, 2, 3, 4):
        mid, out = w(stage_ch[stage]), w(stage_ch[stage] * 4)
        for b in range(blocks[stage]):
            stride = 2 if stage > 1 and b == 0 else 1
            hw_in = hw_map[stage] * stride
            nodes.append(conv(nid, prev_ch, mid, hw_in, k=1))
            nodes.append(conv(nid + 1, mid, mid, hw_map[stage], k=3, s=stride))
            nodes.append(conv(nid + 2, mid, out, hw_map[stage], k=1))
            prev_ch = out
            nid += 3
    nodes.append(pool(nid, prev_ch, 1, k=7, s=7))
    nodes.append(fc(nid + 1, prev_ch, 1000))
    ids = [n["id"] for n in nodes]
    return {"name": "resnet50-w25", "nodes": nodes, "edges": chain_edges(ids),
            "inputs": [0], "outputs": [nid + 1]}


def vgg16(width=0.125):
    w = lambda c: max(4, int(c * width))
    cfg = [(64, 2), (128, 2), (256, 3), (512, 3), (512, 3)]
    nodes = [inp(0, 3, 224)]
    nid = 1
    hw = 224
    prev = 3
    for ch, reps in cfg:
        for _ in range(reps):
            nodes.append(conv(nid, prev, w(ch), hw))
            prev = w(ch)
            nid += 1
        hw //= 2
        nodes.append(pool(nid, prev, hw, k=2, s=2))
        nid += 1
    for k, out_ch in enumerate((256, 256, 1000)):
        nodes.append(fc(nid, prev, out_ch, spatial=hw if k == 0 else 1))
        prev = out_ch
        nid += 1
    ids = [n["id"] for n in nodes]
    return {"name": "vgg16-w8", "nodes": nodes, "edges": chain_edges(ids),
            "inputs": [0], "outputs": [nid - 1]}


def googlenet(width=0.25):
    """Stem plus three inception modules, each closed by a 1x1 projection."""
    w = lambda c: max(4, int(c * width))
    nodes = [inp(0, 3, 224), conv(1, 3, w(64), 112, k=7, s=2), pool(2, w(64), 56),
             conv(3, w(64), w(64), 56, k=1), conv(4, w(64), w(192), 56),
             pool(5, w(192), 28)]
    edges = chain_edges([0, 1, 2, 3, 4, 5])
    nid = 6
    src = 5
    src_ch = w(192)
    hw = 28
    module_cfg = [(64, 96, 128, 16, 32, 32), (128, 128, 192, 32, 96, 64),
                  (192, 96, 208, 16, 48, 64)]
    for m, (c1, c3r, c3, c5r, c5, cp) in enumerate(module_cfg):
        if m == 2:
            nodes.append(pool(nid, src_ch, 14))
            edges.append([src, nid])
            src = nid
            hw = 14
            nid += 1
        outs = []
        nodes.append(conv(nid, src_ch, w(c1), hw, k=1))
        edges.append([src, nid])
        outs.append(nid)
        nid += 1
        for red, spat, k in ((c3r, c3, 3), (c5r, c5, 5)):
            nodes.append(conv(nid, src_ch, w(red), hw, k=1))
            edges.append([src, nid])
            nodes.append(conv(nid + 1, w(red), w(spat), hw, k=k))
            edges.append([nid, nid + 1])
            outs.append(nid + 1)
            nid += 2
        nodes.append(pool(nid, src_ch, hw, k=3, s=1))
        edges.append([src, nid])
        nodes.append(conv(nid + 1, src_ch, w(cp), hw, k=1))
        edges.append([nid, nid + 1])
        outs.append(nid + 1)
        nid += 2
        total = sum(next(n["out_ch"] for n in nodes if n["id"] == o) for o in outs)
        nodes.append(conv(nid, total, total, hw, k=1))
        edges.extend([o, nid] for o in outs)
        src = nid
        src_ch = total
        nid += 1
    nodes.append(pool(nid, src_ch, 1, k=hw, s=hw))
    edges.append([src, nid])
    nodes.append(fc(nid + 1, src_ch, 1000))
    edges.append([nid, nid + 1])
    return {"name": "googlenet-w25", "nodes": nodes, "edges": edges,
            "inputs": [0], "outputs": [nid + 1]}


def toy_forkjoin():
    """Two-input fork-join example, 1D along the width dimension."""
    nodes = [
        inp(0, 8, 1), inp(1, 8, 1),
        {"id": 2, "kind": "conv", "kernel": [1, 4], "stride": [1, 2],
         "in_ch": 8, "out_ch": 16, "out_hw": [1, 4], "weight_bytes": 512},
        {"id": 3, "kind": "conv", "kernel": [1, 3], "stride": [1, 1],
         "in_ch": 16, "out_ch": 16, "out_hw": [1, 8], "weight_bytes": 768},
        {"id": 4, "kind": "conv", "kernel": [1, 3], "stride": [1, 1],
         "in_ch": 8, "out_ch": 16, "out_hw": [1, 8], "weight_bytes": 384},
        {"id": 5, "kind": "eltwise", "kernel": [1, 1], "stride": [1, 1],
         "in_ch": 16, "out_ch": 16, "out_hw": [1, 8], "weight_bytes": 0},
    ]
    for n in nodes[:2]:
        n["out_hw"] = [1, 10]
    return {"name": "toy-forkjoin", "nodes": nodes,
            "edges": [[0, 2], [0, 3], [1, 3], [1, 4], [3, 5], [4, 5]],
            "inputs": [0, 1], "outputs": [2, 5]}


def main(outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for builder in (resnet50, vgg16, googlenet, toy_forkjoin):
        doc = builder()
        name = builder.__name__ + ".json"
        with open(outdir / name, "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
        print(f"wrote {outdir / name} ({len(doc['nodes'])} nodes)")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent)
