"""Computation graphs, partition schemes and their validation.

A network is a DAG of layer descriptors.  Tensors are always node *outputs*;
model inputs are explicit nodes of kind ``input``.  A partition scheme maps
every node to a subgraph index; subgraphs are executed in ascending index
order, so a valid scheme is precedence-closed (``P(u) <= P(v)`` along every
edge) and every subgraph is connected when edge direction is ignored.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping


class GraphError(Exception):
    """Base class for graph construction/IO failures."""


class GraphParseError(GraphError):
    pass


class GraphCycleError(GraphError):
    def __init__(self, nodes):
        self.nodes = tuple(sorted(nodes))
        super().__init__(f"cycle detected among nodes {list(self.nodes)}")


class GraphEdgeError(GraphError):
    pass


class GraphDimensionError(GraphError):
    def __init__(self, node_id, message):
        self.node_id = node_id
        super().__init__(f"node {node_id}: {message}")


class PartitionError(Exception):
    """Raised when a partition does not meet an operation's precondition."""


class LayerKind(str, Enum):
    CONV = "conv"
    DWCONV = "dwconv"
    POOL = "pool"
    ELTWISE = "eltwise"
    INPUT = "input"
    OUTPUT_MARKER = "output"

    @classmethod
    def parse(cls, text: str) -> "LayerKind":
        t = text.strip().lower().replace("-", "_")
        if t in ("output_marker", "output"):
            return cls.OUTPUT_MARKER
        try:
            return cls(t)
        except ValueError:
            raise GraphParseError(f"unknown layer kind {text!r}") from None


# kinds that slide a kernel window over their input
_WINDOWED = (LayerKind.CONV, LayerKind.DWCONV, LayerKind.POOL)


@dataclass(frozen=True)
class LayerDescriptor:
    """One layer (node) of a computation graph.

    ``out_h``/``out_w`` are the full output spatial extent taken from the
    model file, not recomputed from padding.  ``act_bytes_per_elem`` defaults
    to 1 (8-bit activations).
    """

    id: int
    kind: LayerKind
    kernel_h: int
    kernel_w: int
    stride_h: int
    stride_w: int
    in_channels: int
    out_channels: int
    out_h: int
    out_w: int
    weight_bytes: int = 0
    act_bytes_per_elem: int = 1

    def __post_init__(self):
        for name in ("kernel_h", "kernel_w", "stride_h", "stride_w",
                     "in_channels", "out_channels", "out_h", "out_w",
                     "act_bytes_per_elem"):
            if getattr(self, name) < 1:
                raise GraphDimensionError(self.id, f"{name} must be >= 1")
        if self.weight_bytes < 0:
            raise GraphDimensionError(self.id, "weight_bytes must be >= 0")
        if self.kind in (LayerKind.ELTWISE, LayerKind.INPUT, LayerKind.OUTPUT_MARKER):
            if (self.kernel_h, self.kernel_w, self.stride_h, self.stride_w) != (1, 1, 1, 1):
                raise GraphDimensionError(self.id, f"{self.kind.value} layers must have kernel=stride=1")
        if self.kind in (LayerKind.POOL, LayerKind.ELTWISE, LayerKind.INPUT,
                         LayerKind.OUTPUT_MARKER) and self.weight_bytes != 0:
            raise GraphDimensionError(self.id, f"{self.kind.value} layers carry no weights")

    @property
    def elements(self) -> int:
        return self.out_h * self.out_w * self.out_channels

    @property
    def tensor_bytes(self) -> int:
        return self.elements * self.act_bytes_per_elem

    @property
    def macs(self) -> int:
        """Multiply-accumulates to produce the full output tensor."""
        if self.kind is LayerKind.CONV:
            return self.elements * self.kernel_h * self.kernel_w * self.in_channels
        if self.kind in (LayerKind.DWCONV, LayerKind.POOL):
            return self.elements * self.kernel_h * self.kernel_w
        if self.kind is LayerKind.ELTWISE:
            return self.elements
        return 0


class ComputationGraph:
    """Immutable, validated DAG of :class:`LayerDescriptor`.

    Construction performs all structural checks: unique ids, existing edge
    endpoints, acyclicity, reachability of every non-input node from a model
    input, and producer/consumer spatial and channel consistency.
    """

    def __init__(self, nodes: Iterable[LayerDescriptor], edges: Iterable[tuple],
                 inputs: Iterable[int], outputs: Iterable[int]):
        self.nodes: tuple = tuple(nodes)
        self.edges: tuple = tuple((int(u), int(v)) for u, v in edges)
        self.model_inputs = frozenset(int(i) for i in inputs)
        self.model_outputs = frozenset(int(i) for i in outputs)

        self._by_id = {}
        for nd in self.nodes:
            if nd.id in self._by_id:
                raise GraphParseError(f"duplicate node id {nd.id}")
            self._by_id[nd.id] = nd
        for u, v in self.edges:
            if u not in self._by_id or v not in self._by_id:
                raise GraphEdgeError(f"dangling edge ({u}, {v})")
            if u == v:
                raise GraphCycleError([u])
        for i in self.model_inputs | self.model_outputs:
            if i not in self._by_id:
                raise GraphEdgeError(f"model input/output {i} is not a node")

        self._producers = {nd.id: [] for nd in self.nodes}
        self._consumers = {nd.id: [] for nd in self.nodes}
        seen = set()
        for u, v in self.edges:
            if (u, v) in seen:
                raise GraphEdgeError(f"duplicate edge ({u}, {v})")
            seen.add((u, v))
            self._producers[v].append(u)
            self._consumers[u].append(v)
        for nid in self._producers:
            self._producers[nid].sort()
            self._consumers[nid].sort()

        self.topo_order: tuple = self._toposort()
        self._topo_rank = {nid: i for i, nid in enumerate(self.topo_order)}
        self._check_reachability()
        self._check_dimensions()
        self.depth = self._depths()

    # -- structure ---------------------------------------------------------

    def node(self, nid: int) -> LayerDescriptor:
        return self._by_id[nid]

    def __contains__(self, nid: int) -> bool:
        return nid in self._by_id

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def ids(self) -> tuple:
        return tuple(nd.id for nd in self.nodes)

    def producers(self, nid: int) -> tuple:
        return tuple(self._producers[nid])

    def consumers(self, nid: int) -> tuple:
        return tuple(self._consumers[nid])

    def topo_rank(self, nid: int) -> int:
        return self._topo_rank[nid]

    def total_macs(self) -> int:
        return sum(nd.macs for nd in self.nodes)

    def _toposort(self) -> tuple:
        indeg = {nd.id: len(self._producers[nd.id]) for nd in self.nodes}
        ready = [nid for nid, d in indeg.items() if d == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            nid = heapq.heappop(ready)
            order.append(nid)
            for c in self._consumers[nid]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(ready, c)
        if len(order) != len(self.nodes):
            leftover = {nid for nid, d in indeg.items() if d > 0}
            raise GraphCycleError(_find_cycle(leftover, self._consumers))
        return tuple(order)

    def _check_reachability(self):
        reached = set(self.model_inputs)
        stack = list(self.model_inputs)
        while stack:
            for c in self._consumers[stack.pop()]:
                if c not in reached:
                    reached.add(c)
                    stack.append(c)
        unreachable = [nd.id for nd in self.nodes
                       if nd.id not in reached and nd.kind is not LayerKind.INPUT]
        if unreachable:
            raise GraphEdgeError(f"nodes not reachable from any model input: {sorted(unreachable)}")
        for i in self.model_inputs:
            if self._producers[i]:
                raise GraphEdgeError(f"model input {i} has producers")

    def _check_dimensions(self):
        for nd in self.nodes:
            prods = [self._by_id[p] for p in self._producers[nd.id]]
            if not prods:
                continue
            if nd.kind in _WINDOWED or nd.kind is LayerKind.ELTWISE or nd.kind is LayerKind.OUTPUT_MARKER:
                for p, (f, s, out, ext) in _dim_pairs(nd, prods):
                    # accept anything between VALID (padding-free) and SAME output sizing
                    valid = (ext - f) // s + 1 if ext >= f else 0
                    same = -(-ext // s)
                    if not (valid <= out <= same):
                        raise GraphDimensionError(
                            nd.id,
                            f"output extent {out} inconsistent with producer {p.id} "
                            f"extent {ext} under kernel {f} stride {s} (valid {valid}..{same})")
            if nd.kind is LayerKind.CONV:
                total = sum(p.out_channels for p in prods)
                if nd.in_channels != total:
                    raise GraphDimensionError(
                        nd.id, f"in_channels {nd.in_channels} != sum of producer channels {total}")
            elif nd.kind is LayerKind.ELTWISE:
                for p in prods:
                    if p.out_channels != nd.out_channels:
                        raise GraphDimensionError(
                            nd.id, f"eltwise channels {nd.out_channels} != producer {p.id} channels {p.out_channels}")
            elif nd.kind in (LayerKind.DWCONV, LayerKind.POOL):
                if len(prods) != 1:
                    raise GraphDimensionError(nd.id, f"{nd.kind.value} must have exactly one producer")
                if prods[0].out_channels != nd.in_channels:
                    raise GraphDimensionError(
                        nd.id, f"in_channels {nd.in_channels} != producer channels {prods[0].out_channels}")

    def _depths(self) -> dict:
        depth = {}
        for nid in self.topo_order:
            prods = self._producers[nid]
            depth[nid] = 1 + max((depth[p] for p in prods), default=-1)
        return depth

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        nodes = []
        for nd in self.nodes:
            rec = {
                "id": nd.id,
                "kind": nd.kind.value,
                "kernel": [nd.kernel_h, nd.kernel_w],
                "stride": [nd.stride_h, nd.stride_w],
                "in_ch": nd.in_channels,
                "out_ch": nd.out_channels,
                "out_hw": [nd.out_h, nd.out_w],
                "weight_bytes": nd.weight_bytes,
            }
            if nd.act_bytes_per_elem != 1:
                rec["act_bytes"] = nd.act_bytes_per_elem
            nodes.append(rec)
        return {
            "nodes": nodes,
            "edges": [[u, v] for u, v in self.edges],
            "inputs": sorted(self.model_inputs),
            "outputs": sorted(self.model_outputs),
        }


def _dim_pairs(nd: LayerDescriptor, prods):
    for p in prods:
        yield p, (nd.kernel_h, nd.stride_h, nd.out_h, p.out_h)
        yield p, (nd.kernel_w, nd.stride_w, nd.out_w, p.out_w)


def _find_cycle(candidates, consumers):
    """Return the node ids of one directed cycle among ``candidates``."""
    cand = set(candidates)
    for start in sorted(cand):
        path, on_path = [], {}
        node = start
        while node is not None:
            if node in on_path:
                return path[on_path[node]:]
            on_path[node] = len(path)
            path.append(node)
            node = next((c for c in consumers[node] if c in cand), None)
    return sorted(cand)


# ---------------------------------------------------------------------------
# graph IO


def graph_from_json(doc: Mapping) -> ComputationGraph:
    try:
        raw_nodes = doc["nodes"]
        raw_edges = doc["edges"]
        inputs = doc["inputs"]
        outputs = doc["outputs"]
    except (KeyError, TypeError) as exc:
        raise GraphParseError(f"missing required graph key: {exc}") from None
    # dense layers become convolutions: 1x1 over an already-flat producer,
    # or a full-extent valid convolution over a spatial feature map
    extents = {}
    for rec in raw_nodes:
        try:
            extents[int(rec["id"])] = (int(rec["out_hw"][0]), int(rec["out_hw"][1]))
        except (KeyError, TypeError, IndexError, ValueError):
            pass
    producer_of = {}
    for u, v in raw_edges if isinstance(raw_edges, list) else []:
        producer_of.setdefault(int(v), int(u))

    nodes = []
    for rec in raw_nodes:
        try:
            kind_text = rec["kind"]
            if kind_text.strip().lower() == "fc":
                kind = LayerKind.CONV
                nid = int(rec["id"])
                ph, pw = extents.get(producer_of.get(nid, nid), (1, 1))
                oh, ow = extents[nid]
                kernel = [max(1, ph - oh + 1), max(1, pw - ow + 1)]
                stride = [1, 1]
            else:
                kind = LayerKind.parse(kind_text)
                kernel = rec["kernel"]
                stride = rec["stride"]
            nodes.append(LayerDescriptor(
                id=int(rec["id"]),
                kind=kind,
                kernel_h=int(kernel[0]), kernel_w=int(kernel[1]),
                stride_h=int(stride[0]), stride_w=int(stride[1]),
                in_channels=int(rec["in_ch"]),
                out_channels=int(rec["out_ch"]),
                out_h=int(rec["out_hw"][0]), out_w=int(rec["out_hw"][1]),
                weight_bytes=int(rec.get("weight_bytes", 0)),
                act_bytes_per_elem=int(rec.get("act_bytes", 1)),
            ))
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            raise GraphParseError(f"bad node record {rec!r}: {exc}") from None
    return ComputationGraph(nodes, raw_edges, inputs, outputs)


def load_graph(path) -> ComputationGraph:
    """Load and validate a graph JSON file."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise GraphParseError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise GraphParseError(f"{path} is not valid JSON: {exc}") from None
    return graph_from_json(doc)


def save_graph(g: ComputationGraph, path) -> None:
    with open(path, "w") as fh:
        json.dump(g.to_json(), fh, indent=1, sort_keys=False)
        fh.write("\n")


# ---------------------------------------------------------------------------
# partitions


@dataclass(frozen=True)
class PartitionScheme:
    """Map node id -> subgraph index.  Built by :func:`canonicalize` or file IO."""

    assignment: Mapping[int, int]

    def __post_init__(self):
        object.__setattr__(self, "assignment", dict(self.assignment))

    @property
    def num_subgraphs(self) -> int:
        return max(self.assignment.values(), default=-1) + 1

    def subgraph(self, i: int) -> frozenset:
        return frozenset(n for n, s in self.assignment.items() if s == i)

    def subgraphs(self):
        groups = {}
        for n, s in self.assignment.items():
            groups.setdefault(s, set()).add(n)
        return [frozenset(groups[i]) for i in sorted(groups)]

    def as_tuple(self, g: ComputationGraph) -> tuple:
        return tuple(self.assignment[nid] for nid in g.ids)

    def to_json(self) -> dict:
        return {"assignment": {str(n): s for n, s in sorted(self.assignment.items())}}


def partition_from_tuple(g: ComputationGraph, values) -> PartitionScheme:
    return PartitionScheme({nid: int(v) for nid, v in zip(g.ids, values)})


def load_partition(path) -> PartitionScheme:
    with open(path) as fh:
        doc = json.load(fh)
    try:
        return PartitionScheme({int(k): int(v) for k, v in doc["assignment"].items()})
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphParseError(f"bad partition file {path}: {exc}") from None


def save_partition(p: PartitionScheme, path) -> None:
    with open(path, "w") as fh:
        json.dump(p.to_json(), fh, indent=1)
        fh.write("\n")


def single_subgraph_partition(g: ComputationGraph) -> PartitionScheme:
    return PartitionScheme({nid: 0 for nid in g.ids})


def singleton_partition(g: ComputationGraph) -> PartitionScheme:
    return PartitionScheme({nid: i for i, nid in enumerate(g.topo_order)})


@dataclass
class PartitionVerdict:
    ok: bool
    violations: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


def validate_partition(g: ComputationGraph, p: PartitionScheme) -> PartitionVerdict:
    """Check precedence, per-subgraph connectivity and index density.

    Returns a verdict carrying every violated constraint with witnesses.
    """
    if set(p.assignment) != set(g.ids):
        raise PartitionError("partition does not cover exactly the graph's nodes")
    violations = []
    for u, v in g.edges:
        if p.assignment[u] > p.assignment[v]:
            violations.append(("precedence", (u, v)))
    groups = {}
    for nid, s in p.assignment.items():
        groups.setdefault(s, set()).add(nid)
    for s in sorted(groups):
        comps = _components(g, groups[s])
        if len(comps) > 1:
            violations.append(("connectivity", (s, tuple(tuple(sorted(c)) for c in comps))))
    indices = sorted(groups)
    if indices and indices != list(range(len(indices))):
        violations.append(("density", tuple(indices)))
    return PartitionVerdict(not violations, violations)


def _components(g: ComputationGraph, members) -> list:
    members = set(members)
    comps = []
    todo = set(members)
    while todo:
        seed = todo.pop()
        comp = {seed}
        stack = [seed]
        while stack:
            nid = stack.pop()
            for nb in g.producers(nid) + g.consumers(nid):
                if nb in members and nb not in comp:
                    comp.add(nb)
                    todo.discard(nb)
                    stack.append(nb)
        comps.append(comp)
    return comps


def canonicalize(g: ComputationGraph, assignment) -> PartitionScheme:
    """Repair and normalize an arbitrary node->group labelling.

    Groups are split into undirected connected components, components that
    form a directed cycle in the quotient graph are merged back together, and
    the resulting component DAG is renumbered densely in a deterministic
    topological order.  Valid partitions pass through unchanged up to index
    renaming; the function is idempotent.
    """
    if hasattr(assignment, "assignment"):
        assignment = assignment.assignment
    if isinstance(assignment, (tuple, list)):
        assignment = {nid: assignment[i] for i, nid in enumerate(g.ids)}
    if set(assignment) != set(g.ids):
        raise PartitionError("assignment does not cover exactly the graph's nodes")

    groups = {}
    for nid, s in assignment.items():
        groups.setdefault(s, set()).add(nid)
    comp_of = {}
    comps = []
    for s in sorted(groups):
        for comp in sorted(_components(g, groups[s]), key=min):
            for nid in comp:
                comp_of[nid] = len(comps)
            comps.append(comp)

    # quotient edges, then collapse strongly-connected components
    n = len(comps)
    qadj = [set() for _ in range(n)]
    for u, v in g.edges:
        cu, cv = comp_of[u], comp_of[v]
        if cu != cv:
            qadj[cu].add(cv)
    scc = _tarjan(n, qadj)
    merged = {}
    for c, s in enumerate(scc):
        merged.setdefault(s, []).append(c)
    super_members = {s: set().union(*(comps[c] for c in cs)) for s, cs in merged.items()}
    sadj = {s: set() for s in super_members}
    sdeg = {s: 0 for s in super_members}
    for c in range(n):
        for d in qadj[c]:
            if scc[c] != scc[d] and scc[d] not in sadj[scc[c]]:
                sadj[scc[c]].add(scc[d])
                sdeg[scc[d]] += 1

    def key(s):
        m = super_members[s]
        return (min(g.topo_rank(nid) for nid in m), min(m))

    ready = [(key(s), s) for s in super_members if sdeg[s] == 0]
    heapq.heapify(ready)
    result = {}
    idx = 0
    while ready:
        _, s = heapq.heappop(ready)
        for nid in super_members[s]:
            result[nid] = idx
        idx += 1
        for t in sadj[s]:
            sdeg[t] -= 1
            if sdeg[t] == 0:
                heapq.heappush(ready, (key(t), t))
    return PartitionScheme(result)


def _tarjan(n, adj):
    """Iterative Tarjan SCC; returns scc id per vertex (ids unordered)."""
    index = [None] * n
    low = [0] * n
    on_stack = [False] * n
    stack = []
    scc = [None] * n
    counter = [0]
    next_scc = [0]
    for root in range(n):
        if index[root] is not None:
            continue
        work = [(root, iter(sorted(adj[root])))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if index[w] is None:
                    index[w] = low[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, iter(sorted(adj[w]))))
                    advanced = True
                    break
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                pv = work[-1][0]
                low[pv] = min(low[pv], low[v])
            if low[v] == index[v]:
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    scc[w] = next_scc[0]
                    if w == v:
                        break
                next_scc[0] += 1
    return scc


# ---------------------------------------------------------------------------
# subgraph queries


def subgraph_topo_order(g: ComputationGraph, p: PartitionScheme, i: int) -> tuple:
    """Topological order of subgraph ``i``'s induced DAG, ties by node id."""
    members = p.subgraph(i)
    if not members:
        raise PartitionError(f"subgraph {i} does not exist")
    indeg = {nid: sum(1 for u in g.producers(nid) if u in members) for nid in members}
    ready = [nid for nid, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        nid = heapq.heappop(ready)
        order.append(nid)
        for c in g.consumers(nid):
            if c in members:
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(ready, c)
    return tuple(order)


def boundary_tensors(g: ComputationGraph, p: PartitionScheme, i: int):
    """(external_inputs, external_outputs) of subgraph ``i``.

    External inputs are tensors that must be present from DRAM when the
    subgraph runs: producers assigned to other subgraphs, plus model-input
    nodes (their data lives in DRAM whether or not the input node is a
    member).  External outputs are member tensors needed later: model
    outputs, or producers of any consumer outside the subgraph.  Model-input
    nodes are never written back.
    """
    members = p.subgraph(i)
    ext_in = set()
    ext_out = set()
    for nid in members:
        nd = g.node(nid)
        for u in g.producers(nid):
            if u not in members or g.node(u).kind is LayerKind.INPUT:
                ext_in.add(u)
        if nd.kind is LayerKind.INPUT:
            continue
        if nid in g.model_outputs or any(c not in members for c in g.consumers(nid)):
            ext_out.add(nid)
    return frozenset(ext_in), frozenset(ext_out)
