"""Pure-Python schedule-derivation kernels.

Same contract as the compiled twin in ``_kernels_cy.pyx``; see
``fuseplan.kernels`` for backend selection.  All arrays are indexed by
node position in the subgraph view's topological order.
"""

from fractions import Fraction
from math import ceil, gcd


def derive_dim(kernels, strides, cons_indptr, cons_idx, out_tile, lcm_cap,
               prod_indptr, prod_idx):
    """Backward tile/offset derivation along one spatial dimension.

    Nodes without in-view consumers take ``out_tile`` as both their update
    offset and tile; every other node's offset is the LCM of each consumer's
    (offset * stride) and its tile is the largest consumer input window,
    widened where a reconvergent path makes a consumer read at a lag behind
    the producer's head (steady-state head analysis).

    Returns (delta, tile, err_pos); err_pos is -1 on success, else the
    position whose offset exceeded ``lcm_cap``.
    """
    n = len(kernels)
    delta = [0] * n
    tile = [0] * n
    for i in range(n - 1, -1, -1):
        lo, hi = cons_indptr[i], cons_indptr[i + 1]
        if lo == hi:
            delta[i] = out_tile[i]
            tile[i] = out_tile[i]
            continue
        d = 1
        for k in range(lo, hi):
            v = cons_idx[k]
            step = delta[v] * strides[v]
            d = d * step // gcd(d, step)
            if d > lcm_cap:
                return delta, tile, i
        req = d  # tile >= delta even for kernel < stride
        for k in range(lo, hi):
            v = cons_idx[k]
            window = kernels[v] + (d // strides[v] - 1) * strides[v]
            if window > req:
                req = window
        delta[i] = d
        tile[i] = req

    # steady-state heads: how far each node's output frontier sits behind an
    # unbounded source wavefront; a consumer whose head lags (through a
    # longer parallel path) still reads old producer data, so the producer's
    # window must additionally span that gap plus one of its own updates
    heads = [None] * n
    for i in range(n):
        lo, hi = prod_indptr[i], prod_indptr[i + 1]
        if lo == hi:
            heads[i] = Fraction(0)  # measured relative to the wavefront
            continue
        best = None
        for k in range(lo, hi):
            u = prod_idx[k]
            cand = (heads[u] - kernels[i]) / strides[i] + 1
            if best is None or cand < best:
                best = cand
        heads[i] = best
    for i in range(n):
        for k in range(cons_indptr[i], cons_indptr[i + 1]):
            v = cons_idx[k]
            gap = heads[i] - strides[v] * heads[v]
            need = ceil(gap) + delta[i]
            if need > tile[i]:
                tile[i] = need
    return delta, tile, -1


def solve_update_counts(n, strides, delta, edge_src, edge_dst):
    """Minimal positive integer update counts satisfying, per edge (u, v),
    upd[u] * delta[u] == upd[v] * delta[v] * stride[v].

    Propagates rationals over the undirected constraint graph and clears
    denominators; returns None when the constraints are inconsistent.
    """
    num = [0] * n
    den = [0] * n
    adj = [[] for _ in range(n)]
    for e in range(len(edge_src)):
        u, v = edge_src[e], edge_dst[e]
        adj[u].append((v, 1))
        adj[v].append((u, 0))
    for root in range(n):
        if den[root]:
            continue
        num[root] = den[root] = 1
        stack = [root]
        while stack:
            u = stack.pop()
            for v, forward in adj[u]:
                if forward:
                    # u produces for v: upd_v = upd_u * d_u / (d_v * s_v)
                    nn = num[u] * delta[u]
                    dd = den[u] * delta[v] * strides[v]
                else:
                    # u consumes from v: upd_v = upd_u * d_u * s_u / d_v
                    nn = num[u] * delta[u] * strides[u]
                    dd = den[u] * delta[v]
                cd = gcd(nn, dd)
                nn //= cd
                dd //= cd
                if den[v] == 0:
                    num[v], den[v] = nn, dd
                    stack.append(v)
                elif num[v] != nn or den[v] != dd:
                    return None
    scale = 1
    for d in den:
        scale = scale * d // gcd(scale, d)
    vals = [num[i] * (scale // den[i]) for i in range(n)]
    overall = 0
    for v in vals:
        overall = gcd(overall, v)
    if overall > 1:
        vals = [v // overall for v in vals]
    return vals
