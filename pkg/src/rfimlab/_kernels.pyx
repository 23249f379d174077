# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops.

Every function here has a line-for-line counterpart in ``_pykernels`` with
the same signature and semantics; ``_backend`` picks one at import time.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, INFINITY

cnp.import_array()

ctypedef cnp.int64_t i64


cdef inline int _rev(int d) noexcept nogil:
    return d ^ 1


cdef void _neighbors(i64[::1] nbr, int nr, int nc) noexcept nogil:
    # direction order: 0 right, 1 left, 2 down, 3 up  (d ^ 1 is the reverse)
    cdef int r, c
    cdef i64 v
    for r in range(nr):
        for c in range(nc):
            v = r * nc + c
            nbr[4 * v + 0] = v + 1 if c + 1 < nc else -1
            nbr[4 * v + 1] = v - 1 if c > 0 else -1
            nbr[4 * v + 2] = v + nc if r + 1 < nr else -1
            nbr[4 * v + 3] = v - nc if r > 0 else -1


cdef i64 _sink_bfs(i64[::1] nbr, double[::1] cap, double[::1] sinkcap,
                   i64[::1] height, i64[::1] queue, i64 n, double tol) noexcept nogil:
    """Exact distance-to-sink labels in the residual graph; unreachable -> n + 1."""
    cdef i64 v, u, head = 0, tail = 0, reached = 0
    cdef int d
    for v in range(n):
        if sinkcap[v] > tol:
            height[v] = 1
            queue[tail] = v
            tail += 1
        else:
            height[v] = n + 1
    while head < tail:
        u = queue[head]
        head += 1
        reached += 1
        for d in range(4):
            v = nbr[4 * u + d]
            if v >= 0 and height[v] == n + 1 and cap[4 * v + _rev(d)] > tol:
                height[v] = height[u] + 1
                queue[tail] = v
                tail += 1
    return reached


def grid_min_cut(const double[:, ::1] terminal, double edge_cap):
    """Minimum s-t cut on a 4-connected grid.

    ``terminal[r, c] > 0`` is a source arc of that capacity, ``< 0`` a sink
    arc of capacity ``-terminal[r, c]``. Every grid edge has capacity
    ``edge_cap`` in both directions.

    Returns ``(source_side, flow)`` where ``source_side`` is the maximal
    source set of a minimum cut (vertices that cannot reach the sink in the
    residual graph of a maximum preflow).
    """
    cdef int nr = terminal.shape[0], nc = terminal.shape[1]
    cdef i64 n = <i64>nr * nc
    cdef i64 v, u, qhead, qtail, qcount, relabels = 0, minh
    cdef int d, r, c
    cdef double delta, flow = 0.0, scale = fabs(edge_cap), t

    nbr_a = np.empty(4 * n, dtype=np.int64)
    cap_a = np.zeros(4 * n, dtype=np.float64)
    exc_a = np.zeros(n, dtype=np.float64)
    snk_a = np.zeros(n, dtype=np.float64)
    h_a = np.empty(n, dtype=np.int64)
    q_a = np.empty(n + 1, dtype=np.int64)
    bq_a = np.empty(n, dtype=np.int64)
    inq_a = np.zeros(n, dtype=np.uint8)
    cdef i64[::1] nbr = nbr_a
    cdef double[::1] cap = cap_a
    cdef double[::1] excess = exc_a
    cdef double[::1] sinkcap = snk_a
    cdef i64[::1] height = h_a
    cdef i64[::1] queue = q_a
    cdef i64[::1] bqueue = bq_a
    cdef unsigned char[::1] inq = inq_a

    for r in range(nr):
        for c in range(nc):
            t = terminal[r, c]
            if fabs(t) > scale:
                scale = fabs(t)
    cdef double tol = 1e-12 * scale if scale > 0 else 0.0

    with nogil:
        _neighbors(nbr, nr, nc)
        for v in range(n):
            for d in range(4):
                if nbr[4 * v + d] >= 0:
                    cap[4 * v + d] = edge_cap
            t = terminal[v // nc, v % nc]
            if t > 0:
                excess[v] = t
            else:
                sinkcap[v] = -t

        _sink_bfs(nbr, cap, sinkcap, height, bqueue, n, tol)
        qhead = 0
        qtail = 0
        qcount = 0
        for v in range(n):
            if excess[v] > tol and height[v] <= n:
                queue[qtail] = v
                qtail = (qtail + 1) % (n + 1)
                qcount += 1
                inq[v] = 1

        while qcount > 0:
            v = queue[qhead]
            qhead = (qhead + 1) % (n + 1)
            qcount -= 1
            inq[v] = 0
            while excess[v] > tol and height[v] <= n:
                if height[v] == 1 and sinkcap[v] > tol:
                    delta = excess[v] if excess[v] < sinkcap[v] else sinkcap[v]
                    sinkcap[v] -= delta
                    excess[v] -= delta
                    flow += delta
                    continue
                for d in range(4):
                    u = nbr[4 * v + d]
                    if u < 0 or cap[4 * v + d] <= tol or height[u] != height[v] - 1:
                        continue
                    delta = excess[v] if excess[v] < cap[4 * v + d] else cap[4 * v + d]
                    cap[4 * v + d] -= delta
                    cap[4 * u + _rev(d)] += delta
                    excess[v] -= delta
                    excess[u] += delta
                    if inq[u] == 0 and excess[u] > tol and height[u] <= n:
                        queue[qtail] = u
                        qtail = (qtail + 1) % (n + 1)
                        qcount += 1
                        inq[u] = 1
                    if excess[v] <= tol:
                        break
                if excess[v] <= tol:
                    break
                minh = n + 1
                if sinkcap[v] > tol:
                    minh = 0
                for d in range(4):
                    u = nbr[4 * v + d]
                    if u >= 0 and cap[4 * v + d] > tol and height[u] < minh:
                        minh = height[u]
                height[v] = minh + 1 if minh < n else n + 1
                relabels += 1
                if relabels >= n:
                    relabels = 0
                    # stale queue entries are skipped by the height test
                    _sink_bfs(nbr, cap, sinkcap, height, bqueue, n, tol)

        _sink_bfs(nbr, cap, sinkcap, height, bqueue, n, tol)

    side = (h_a > n).astype(np.uint8).reshape(nr, nc)
    return side, flow


def grid_bfs(const unsigned char[:, ::1] mask, const unsigned char[:, ::1] sources):
    """Multi-source BFS through ``mask`` cells (4-neighbour).

    Returns ``(dist, parent)`` as int64 arrays; ``dist == -1`` marks
    unreachable cells and ``parent`` holds the flat index of the predecessor
    (``-1`` at sources and unreachable cells).
    """
    cdef int nr = mask.shape[0], nc = mask.shape[1]
    cdef i64 n = <i64>nr * nc
    cdef i64 v, u, head = 0, tail = 0
    cdef int d
    nbr_a = np.empty(4 * n, dtype=np.int64)
    dist_a = np.full(n, -1, dtype=np.int64)
    par_a = np.full(n, -1, dtype=np.int64)
    q_a = np.empty(max(n, 1), dtype=np.int64)
    cdef i64[::1] nbr = nbr_a
    cdef i64[::1] dist = dist_a
    cdef i64[::1] par = par_a
    cdef i64[::1] queue = q_a
    with nogil:
        _neighbors(nbr, nr, nc)
        for v in range(n):
            if sources[v // nc, v % nc] and mask[v // nc, v % nc]:
                dist[v] = 0
                queue[tail] = v
                tail += 1
        while head < tail:
            u = queue[head]
            head += 1
            for d in range(4):
                v = nbr[4 * u + d]
                if v >= 0 and dist[v] < 0 and mask[v // nc, v % nc]:
                    dist[v] = dist[u] + 1
                    par[v] = u
                    queue[tail] = v
                    tail += 1
    return dist_a.reshape(nr, nc), par_a.reshape(nr, nc)


def cylinders_crossed(const double[:, ::1] pts, const double[:, ::1] a, const double[:, ::1] b,
                      const double[::1] radius, double tol):
    """For each cylinder (axis a[k] -> b[k], radius[k]) decide whether some
    maximal sub-path of the polygonal curve ``pts`` lying inside it touches
    both bases."""
    cdef Py_ssize_t m = a.shape[0], n = pts.shape[0], dim = pts.shape[1]
    cdef Py_ssize_t k, i, j
    cdef double length, z0, dz, qa, qb, qc, disc, sq, t_lo, t_hi, t1, t2, tmp
    cdef double za, zb, w0j, w1j, rr, ptol = 1e-12
    cdef bint chain, lo, hi, prev_end
    out_a = np.zeros(m, dtype=np.uint8)
    u_a = np.empty(dim, dtype=np.float64)
    cdef unsigned char[::1] out = out_a
    cdef double[::1] u = u_a
    if n < 2:
        return out_a.astype(bool)
    with nogil:
        for k in range(m):
            length = 0.0
            for j in range(dim):
                u[j] = b[k, j] - a[k, j]
                length += u[j] * u[j]
            length = sqrt(length)
            if length <= 0.0:
                continue
            for j in range(dim):
                u[j] /= length
            rr = radius[k] + tol
            chain = False
            prev_end = False
            lo = False
            hi = False
            for i in range(n - 1):
                z0 = 0.0
                dz = 0.0
                for j in range(dim):
                    z0 += (pts[i, j] - a[k, j]) * u[j]
                    dz += (pts[i + 1, j] - pts[i, j]) * u[j]
                qa = 0.0
                qb = 0.0
                qc = 0.0
                for j in range(dim):
                    w0j = (pts[i, j] - a[k, j]) - z0 * u[j]
                    w1j = (pts[i + 1, j] - pts[i, j]) - dz * u[j]
                    qa += w1j * w1j
                    qb += 2.0 * w0j * w1j
                    qc += w0j * w0j
                qc -= rr * rr
                t_lo = 0.0
                t_hi = 1.0
                # axial slab
                if fabs(dz) < 1e-300:
                    if z0 < -tol or z0 > length + tol:
                        t_lo = 1.0
                        t_hi = 0.0
                else:
                    t1 = (-tol - z0) / dz
                    t2 = (length + tol - z0) / dz
                    if t1 > t2:
                        tmp = t1
                        t1 = t2
                        t2 = tmp
                    if t1 > t_lo:
                        t_lo = t1
                    if t2 < t_hi:
                        t_hi = t2
                # lateral surface
                if t_lo <= t_hi:
                    if qa < 1e-300:
                        if qc > 0.0:
                            t_lo = 1.0
                            t_hi = 0.0
                    else:
                        disc = qb * qb - 4.0 * qa * qc
                        if disc < 0.0:
                            t_lo = 1.0
                            t_hi = 0.0
                        else:
                            sq = sqrt(disc)
                            t1 = (-qb - sq) / (2.0 * qa)
                            t2 = (-qb + sq) / (2.0 * qa)
                            if t1 > t_lo:
                                t_lo = t1
                            if t2 < t_hi:
                                t_hi = t2
                if t_lo > t_hi:
                    chain = False
                    prev_end = False
                    continue
                if not (chain and prev_end and t_lo <= ptol):
                    lo = False
                    hi = False
                chain = True
                za = z0 + t_lo * dz
                zb = z0 + t_hi * dz
                if za <= tol or zb <= tol:
                    lo = True
                if za >= length - tol or zb >= length - tol:
                    hi = True
                if lo and hi:
                    out[k] = 1
                    break
                prev_end = t_hi >= 1.0 - ptol
    return out_a.astype(bool)


def simplex_exchange(const double[:, ::1] K, const double[::1] mu_init, double tol, i64 maxiter):
    """Pairwise-exchange descent for min mu^T K mu over the probability simplex.

    Moves mass from the support coordinate with the largest gradient to the
    coordinate with the smallest, with exact line search. Stops when that
    gap is <= ``tol``. Returns ``(mu, energy, gap, iterations)``.
    """
    cdef Py_ssize_t n = K.shape[0], k, i, j
    cdef i64 it = 0
    cdef double gi, gj, gap = INFINITY, q, t, energy
    mu_a = np.array(mu_init, dtype=np.float64, copy=True)
    g_a = np.asarray(K) @ mu_a
    cdef double[::1] mu = mu_a
    cdef double[::1] g = g_a
    with nogil:
        while it < maxiter:
            gi = -INFINITY
            gj = INFINITY
            i = -1
            j = -1
            for k in range(n):
                if mu[k] > 0.0 and g[k] > gi:
                    gi = g[k]
                    i = k
                if g[k] < gj:
                    gj = g[k]
                    j = k
            gap = gi - gj
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
            for k in range(n):
                g[k] += t * (K[k, j] - K[k, i])
            it += 1
            if it % 4096 == 0:
                for k in range(n):
                    q = 0.0
                    for i in range(n):
                        q += K[k, i] * mu[i]
                    g[k] = q
    g_a = np.asarray(K) @ mu_a
    energy = float(mu_a @ g_a)
    support = mu_a > 0
    gap = float(g_a[support].max() - g_a.min())
    return mu_a, energy, gap, int(it)
