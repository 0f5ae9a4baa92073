# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled schedule-derivation kernels; behavioural twin of _kernels_py."""

from libc.stdlib cimport free, malloc


cdef long long _gcd(long long a, long long b) noexcept nogil:
    cdef long long t
    while b:
        t = a % b
        a = b
        b = t
    return a


def derive_dim(kernels, strides, cons_indptr, cons_idx, out_tile, lcm_cap,
               prod_indptr, prod_idx):
    cdef Py_ssize_t n = len(kernels)
    cdef long long[::1] fv = kernels
    cdef long long[::1] sv = strides
    cdef long long[::1] indptr = cons_indptr
    cdef long long[::1] idx = cons_idx
    cdef long long[::1] tile0 = out_tile
    cdef long long[::1] pptr = prod_indptr
    cdef long long[::1] pidx = prod_idx
    cdef long long cap = lcm_cap
    cdef long long *delta = <long long *> malloc(n * sizeof(long long))
    cdef long long *tile = <long long *> malloc(n * sizeof(long long))
    # steady-state head offsets as reduced fractions (num/den)
    cdef long long *hnum = <long long *> malloc(n * sizeof(long long))
    cdef long long *hden = <long long *> malloc(n * sizeof(long long))
    if delta == NULL or tile == NULL or hnum == NULL or hden == NULL:
        free(delta); free(tile); free(hnum); free(hden)
        raise MemoryError()
    cdef Py_ssize_t i, k, v, u
    cdef long long d, step, req, window, g, nn, dd, gn, gd, need
    cdef bint first
    cdef Py_ssize_t err = -1
    try:
        for i in range(n - 1, -1, -1):
            if indptr[i] == indptr[i + 1]:
                delta[i] = tile0[i]
                tile[i] = tile0[i]
                continue
            d = 1
            for k in range(indptr[i], indptr[i + 1]):
                v = <Py_ssize_t> idx[k]
                step = delta[v] * sv[v]
                d = d // _gcd(d, step) * step
                if d > cap:
                    err = i
                    break
            if err >= 0:
                break
            req = d
            for k in range(indptr[i], indptr[i + 1]):
                v = <Py_ssize_t> idx[k]
                window = fv[v] + (d // sv[v] - 1) * sv[v]
                if window > req:
                    req = window
            delta[i] = d
            tile[i] = req
        if err >= 0:
            out_delta = [delta[i] if i > err else 0 for i in range(n)]
            out_tile_l = [tile[i] if i > err else 0 for i in range(n)]
            return out_delta, out_tile_l, err

        # heads relative to the source wavefront: head_v = min over producers
        # of (head_u - F_v)/s_v + 1; sources sit at zero
        for i in range(n):
            if pptr[i] == pptr[i + 1]:
                hnum[i] = 0
                hden[i] = 1
                continue
            first = True
            for k in range(pptr[i], pptr[i + 1]):
                u = <Py_ssize_t> pidx[k]
                # (hnum[u]/hden[u] - F_i)/s_i + 1
                nn = hnum[u] - fv[i] * hden[u] + sv[i] * hden[u]
                dd = hden[u] * sv[i]
                g = _gcd(nn if nn >= 0 else -nn, dd)
                if g > 1:
                    nn = nn // g
                    dd = dd // g
                if first or nn * hden[i] < hnum[i] * dd:
                    hnum[i] = nn
                    hden[i] = dd
                    first = False
        # widen windows across lagging (reconvergent) consumers
        for i in range(n):
            for k in range(indptr[i], indptr[i + 1]):
                v = <Py_ssize_t> idx[k]
                # gap = head_i - s_v * head_v, then ceil (C division truncates
                # toward zero, so only a positive remainder rounds up)
                gn = hnum[i] * hden[v] - sv[v] * hnum[v] * hden[i]
                gd = hden[i] * hden[v]
                need = gn / gd + (1 if gn % gd > 0 else 0) + delta[i]
                if need > tile[i]:
                    tile[i] = need
        out_delta = [delta[i] for i in range(n)]
        out_tile_l = [tile[i] for i in range(n)]
        return out_delta, out_tile_l, err
    finally:
        free(delta); free(tile); free(hnum); free(hden)


def solve_update_counts(n_py, strides, delta, edge_src, edge_dst):
    cdef Py_ssize_t n = n_py
    cdef long long[::1] sv = strides
    cdef long long[::1] dv = delta
    cdef long long[::1] src = edge_src
    cdef long long[::1] dst = edge_dst
    cdef Py_ssize_t m = len(edge_src)
    cdef long long *num = <long long *> malloc(n * sizeof(long long))
    cdef long long *den = <long long *> malloc(n * sizeof(long long))
    # adjacency in CSR form over both edge directions
    cdef long long *deg = <long long *> malloc(n * sizeof(long long))
    cdef long long *aptr = <long long *> malloc((n + 1) * sizeof(long long))
    cdef long long *anode = <long long *> malloc(2 * m * sizeof(long long)) if m else NULL
    cdef long long *afwd = <long long *> malloc(2 * m * sizeof(long long)) if m else NULL
    cdef long long *stack = <long long *> malloc(n * sizeof(long long))
    if num == NULL or den == NULL or deg == NULL or aptr == NULL or stack == NULL or \
            (m and (anode == NULL or afwd == NULL)):
        free(num); free(den); free(deg); free(aptr); free(anode); free(afwd); free(stack)
        raise MemoryError()
    cdef Py_ssize_t i, e, top, root
    cdef long long u, v, nn, dd, cd, pos
    cdef bint ok = True
    try:
        for i in range(n):
            num[i] = 0
            den[i] = 0
            deg[i] = 0
        for e in range(m):
            deg[src[e]] += 1
            deg[dst[e]] += 1
        aptr[0] = 0
        for i in range(n):
            aptr[i + 1] = aptr[i] + deg[i]
            deg[i] = 0
        for e in range(m):
            u = src[e]
            v = dst[e]
            pos = aptr[u] + deg[u]
            anode[pos] = v
            afwd[pos] = 1
            deg[u] += 1
            pos = aptr[v] + deg[v]
            anode[pos] = u
            afwd[pos] = 0
            deg[v] += 1
        for root in range(n):
            if den[root] != 0:
                continue
            num[root] = 1
            den[root] = 1
            top = 0
            stack[top] = root
            top += 1
            while top and ok:
                top -= 1
                u = stack[top]
                for e in range(aptr[u], aptr[u + 1]):
                    v = anode[e]
                    if afwd[e]:
                        nn = num[u] * dv[u]
                        dd = den[u] * dv[v] * sv[v]
                    else:
                        nn = num[u] * dv[u] * sv[u]
                        dd = den[u] * dv[v]
                    cd = _gcd(nn, dd)
                    nn = nn // cd
                    dd = dd // cd
                    if den[v] == 0:
                        num[v] = nn
                        den[v] = dd
                        stack[top] = v
                        top += 1
                    elif num[v] != nn or den[v] != dd:
                        ok = False
                        break
            if not ok:
                break
        if not ok:
            return None
        nn = 1
        for i in range(n):
            nn = nn // _gcd(nn, den[i]) * den[i]
        vals = [0] * n
        dd = 0
        for i in range(n):
            cd = num[i] * (nn // den[i])
            vals[i] = cd
            dd = _gcd(dd, cd)
        if dd > 1:
            for i in range(n):
                vals[i] = vals[i] // dd
        return vals
    finally:
        free(num); free(den); free(deg); free(aptr); free(anode); free(afwd); free(stack)
