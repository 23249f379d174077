"""Pure-Python fallback for the compiled kernels in ``_kernels.pyx``.

Same signatures, same algorithms, same return types. Used when the
extension is not built or when ``RFIMLAB_PURE=1`` is set.
"""
from collections import deque

import numpy as np


def _neighbor_table(nr, nc):
    # direction order: 0 right, 1 left, 2 down, 3 up  (d ^ 1 is the reverse)
    n = nr * nc
    nbr = [-1] * (4 * n)
    for r in range(nr):
        for c in range(nc):
            v = r * nc + c
            if c + 1 < nc:
                nbr[4 * v] = v + 1
            if c > 0:
                nbr[4 * v + 1] = v - 1
            if r + 1 < nr:
                nbr[4 * v + 2] = v + nc
            if r > 0:
                nbr[4 * v + 3] = v - nc
    return nbr


def _sink_bfs(nbr, cap, sinkcap, height, n, tol):
    queue = deque()
    for v in range(n):
        if sinkcap[v] > tol:
            height[v] = 1
            queue.append(v)
        else:
            height[v] = n + 1
    while queue:
        u = queue.popleft()
        hu = height[u] + 1
        for d in range(4):
            v = nbr[4 * u + d]
            if v >= 0 and height[v] == n + 1 and cap[4 * v + (d ^ 1)] > tol:
                height[v] = hu
                queue.append(v)


def grid_min_cut(terminal, edge_cap):
    """Minimum s-t cut on a 4-connected grid (FIFO push-relabel).

    See ``_kernels.grid_min_cut``.
    """
    terminal = np.ascontiguousarray(terminal, dtype=np.float64)
    nr, nc = terminal.shape
    n = nr * nc
    flat = terminal.ravel().tolist()
    scale = max([abs(edge_cap)] + [abs(t) for t in flat])
    tol = 1e-12 * scale if scale > 0 else 0.0

    nbr = _neighbor_table(nr, nc)
    cap = [edge_cap if u >= 0 else 0.0 for u in nbr]
    excess = [t if t > 0 else 0.0 for t in flat]
    sinkcap = [-t if t < 0 else 0.0 for t in flat]
    height = [0] * n
    _sink_bfs(nbr, cap, sinkcap, height, n, tol)

    queue = deque(v for v in range(n) if excess[v] > tol and height[v] <= n)
    inq = [False] * n
    for v in queue:
        inq[v] = True
    flow = 0.0
    relabels = 0
    while queue:
        v = queue.popleft()
        inq[v] = False
        while excess[v] > tol and height[v] <= n:
            if height[v] == 1 and sinkcap[v] > tol:
                delta = min(excess[v], sinkcap[v])
                sinkcap[v] -= delta
                excess[v] -= delta
                flow += delta
                continue
            for d in range(4):
                u = nbr[4 * v + d]
                a = 4 * v + d
                if u < 0 or cap[a] <= tol or height[u] != height[v] - 1:
                    continue
                delta = min(excess[v], cap[a])
                cap[a] -= delta
                cap[4 * u + (d ^ 1)] += delta
                excess[v] -= delta
                excess[u] += delta
                if not inq[u] and excess[u] > tol and height[u] <= n:
                    queue.append(u)
                    inq[u] = True
                if excess[v] <= tol:
                    break
            if excess[v] <= tol:
                break
            minh = 0 if sinkcap[v] > tol else n + 1
            for d in range(4):
                u = nbr[4 * v + d]
                if u >= 0 and cap[4 * v + d] > tol and height[u] < minh:
                    minh = height[u]
            height[v] = minh + 1 if minh < n else n + 1
            relabels += 1
            if relabels >= n:
                relabels = 0
                _sink_bfs(nbr, cap, sinkcap, height, n, tol)

    _sink_bfs(nbr, cap, sinkcap, height, n, tol)
    side = (np.asarray(height, dtype=np.int64) > n).astype(np.uint8).reshape(nr, nc)
    return side, flow


def grid_bfs(mask, sources):
    """Multi-source BFS through ``mask`` cells. See ``_kernels.grid_bfs``."""
    mask = np.asarray(mask, dtype=bool)
    nr, nc = mask.shape
    n = nr * nc
    m = mask.ravel().tolist()
    src = np.asarray(sources, dtype=bool).ravel().tolist()
    nbr = _neighbor_table(nr, nc)
    dist = [-1] * n
    par = [-1] * n
    queue = deque()
    for v in range(n):
        if src[v] and m[v]:
            dist[v] = 0
            queue.append(v)
    while queue:
        u = queue.popleft()
        for d in range(4):
            v = nbr[4 * u + d]
            if v >= 0 and dist[v] < 0 and m[v]:
                dist[v] = dist[u] + 1
                par[v] = u
                queue.append(v)
    return (np.asarray(dist, dtype=np.int64).reshape(nr, nc),
            np.asarray(par, dtype=np.int64).reshape(nr, nc))


def _segment_intervals(pts, a, u, length, r, tol):
    """Parameter interval [t_lo, t_hi] of each curve segment inside the cylinder."""
    p0 = pts[:-1] - a
    step = pts[1:] - pts[:-1]
    z0 = p0 @ u
    dz = step @ u
    w0 = p0 - np.outer(z0, u)
    w1 = step - np.outer(dz, u)
    qa = np.einsum("ij,ij->i", w1, w1)
    qb = 2.0 * np.einsum("ij,ij->i", w0, w1)
    qc = np.einsum("ij,ij->i", w0, w0) - (r + tol) ** 2

    t_lo = np.zeros(len(z0))
    t_hi = np.ones(len(z0))
    flat = np.abs(dz) < 1e-300
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(flat, 0.0, (-tol - z0) / np.where(flat, 1.0, dz))
        t2 = np.where(flat, 1.0, (length + tol - z0) / np.where(flat, 1.0, dz))
    lo_s = np.minimum(t1, t2)
    hi_s = np.maximum(t1, t2)
    outside_slab = flat & ((z0 < -tol) | (z0 > length + tol))
    t_lo = np.maximum(t_lo, np.where(flat, 0.0, lo_s))
    t_hi = np.minimum(t_hi, np.where(flat, 1.0, hi_s))

    still = qa < 1e-300
    disc = qb * qb - 4.0 * qa * qc
    with np.errstate(divide="ignore", invalid="ignore"):
        sq = np.sqrt(np.maximum(disc, 0.0))
        r1 = (-qb - sq) / (2.0 * np.where(still, 1.0, qa))
        r2 = (-qb + sq) / (2.0 * np.where(still, 1.0, qa))
    empty = outside_slab | (still & (qc > 0.0)) | (~still & (disc < 0.0))
    t_lo = np.where(still, t_lo, np.maximum(t_lo, r1))
    t_hi = np.where(still, t_hi, np.minimum(t_hi, r2))
    empty |= t_lo > t_hi
    return t_lo, t_hi, z0, dz, empty


def cylinders_crossed(pts, a, b, radius, tol):
    """Batched cylinder-crossing test. See ``_kernels.cylinders_crossed``."""
    pts = np.asarray(pts, dtype=np.float64)
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    radius = np.asarray(radius, dtype=np.float64)
    out = np.zeros(len(a), dtype=bool)
    if len(pts) < 2:
        return out
    ptol = 1e-12
    for k in range(len(a)):
        axis = b[k] - a[k]
        length = float(np.sqrt(axis @ axis))
        if length <= 0.0:
            continue
        u = axis / length
        t_lo, t_hi, z0, dz, empty = _segment_intervals(pts, a[k], u, length, radius[k], tol)
        za = z0 + t_lo * dz
        zb = z0 + t_hi * dz
        chain = prev_end = lo = hi = False
        for i in range(len(z0)):
            if empty[i]:
                chain = prev_end = False
                continue
            if not (chain and prev_end and t_lo[i] <= ptol):
                lo = hi = False
            chain = True
            if za[i] <= tol or zb[i] <= tol:
                lo = True
            if za[i] >= length - tol or zb[i] >= length - tol:
                hi = True
            if lo and hi:
                out[k] = True
                break
            prev_end = t_hi[i] >= 1.0 - ptol
    return out


def simplex_exchange(K, mu_init, tol, maxiter):
    """Pairwise-exchange descent on the simplex. See ``_kernels.simplex_exchange``."""
    K = np.ascontiguousarray(K, dtype=np.float64)
    mu = np.array(mu_init, dtype=np.float64, copy=True)
    g = K @ mu
    it = 0
    while it < maxiter:
        support = mu > 0.0
        gs = np.where(support, g, -np.inf)
        i = int(np.argmax(gs))
        j = int(np.argmin(g))
        gap = gs[i] - g[j]
        if gap <= tol or i == j:
            break
        q = K[i, i] + K[j, j] - 2.0 * K[i, j]
        t = mu[i]
        if q > 0.0 and gap / q < t:
            t = gap / q
        if t >= mu[i]:
            t = mu[i]
            mu[i] = 0.0
        else:
            mu[i] -= t
        mu[j] += t
        g += t * (K[:, j] - K[:, i])
        it += 1
        if it % 4096 == 0:
            g = K @ mu
    g = K @ mu
    energy = float(mu @ g)
    gap = float(g[mu > 0].max() - g.min())
    return mu, energy, gap, it
