"""Independent reference implementations used by the tests.

Each oracle recomputes a quantity by a different route from the package:
brute force, exhaustive search or dense sampling. None of them calls the
code under test beyond plain data containers.
"""
from __future__ import annotations

import itertools
from collections import deque

import numpy as np


# -- lattice ---------------------------------------------------------------------

def perimeter_of(cells) -> int:
    cells = set(cells)
    return sum((x + dx, y + dy) not in cells for x, y in cells for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)))


def _connected(cells) -> bool:
    cells = set(cells)
    if not cells:
        return False
    start = next(iter(cells))
    seen = {start}
    todo = [start]
    while todo:
        x, y = todo.pop()
        for q in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if q in cells and q not in seen:
                seen.add(q)
                todo.append(q)
    return len(seen) == len(cells)


def simply_connected(cells) -> bool:
    """Connected, and the complement inside the inflated bounding box is connected."""
    cells = set(cells)
    if not _connected(cells):
        return False
    xs = [c[0] for c in cells]
    ys = [c[1] for c in cells]
    box = {(x, y) for x in range(min(xs) - 1, max(xs) + 2) for y in range(min(ys) - 1, max(ys) + 2)}
    return _connected(box - cells)


def polyominoes_by_growth(perimeter_max: int) -> set:
    """Fixed polyominoes with bounding-box half-perimeter w + h <= perimeter_max / 2,
    normalised to min corner (0, 0).

    Grows every shape one cell at a time. Any connected set has perimeter
    >= 2 (w + h) and the bounding box only grows, so the pruning loses
    nothing relevant.
    """
    def norm(cells):
        mx = min(c[0] for c in cells)
        my = min(c[1] for c in cells)
        return frozenset((x - mx, y - my) for x, y in cells)

    def fits(cells):
        w = max(c[0] for c in cells) + 1
        h = max(c[1] for c in cells) + 1
        return 2 * (w + h) <= perimeter_max

    level = {norm([(0, 0)])}
    out = set(level)
    while level:
        nxt = set()
        for shape in level:
            for x, y in shape:
                for q in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
                    if q not in shape:
                        g = norm(shape | {q})
                        if g not in out and fits(g):
                            nxt.add(g)
        out |= nxt
        level = nxt
    return out


def simply_connected_containing_origin(perimeter_max: int) -> set:
    """Simply connected sets containing the origin with perimeter <= perimeter_max."""
    out = set()
    for shape in polyominoes_by_growth(perimeter_max):
        if perimeter_of(shape) > perimeter_max or not simply_connected(shape):
            continue
        for cx, cy in shape:
            out.add(frozenset((x - cx, y - cy) for x, y in shape))
    return out


# -- coarse graining -------------------------------------------------------------

def coarse_grain_recount(cells, k: int) -> set:
    """Per-tile majority count, tile by tile, from the cell list."""
    if k == 0:
        return set(cells)
    t = 2 ** k
    counts = {}
    for x, y in cells:
        key = (x // t, y // t)
        counts[key] = counts.get(key, 0) + 1
    out = set()
    for (i, j), c in counts.items():
        if c >= 2 ** (2 * k - 1):
            out |= {(i * t + a, j * t + b) for a in range(t) for b in range(t)}
    return out


def corridor_violations_brute(h: np.ndarray, L: int, ell: int, k: int, N: int, c: float) -> int:
    """Simply connected sets inside the box with perimeter ell whose level-k
    corridor sums exceed c, counted one set at a time.

    Field values outside the box count as zero.
    """
    shapes = {S for S in simply_connected_containing_origin(ell) if perimeter_of(S) == ell}
    sets = set()
    for S in shapes:
        for dx in range(-2 * L, 2 * L + 1):
            for dy in range(-2 * L, 2 * L + 1):
                G = frozenset((x + dx, y + dy) for x, y in S)
                if all(abs(x) <= L and abs(y) <= L for x, y in G):
                    sets.add(G)

    def total(cells):
        return sum(h[x + L, y + L] for x, y in cells if abs(x) <= L and abs(y) <= L)

    bad = 0
    for G in sets:
        if k < N:
            A, B = coarse_grain_recount(G, k + 1), coarse_grain_recount(G, k)
            sums = [total(A - B), total(B - A)]
        else:
            sums = [total(coarse_grain_recount(G, k))]
        bad += any(abs(v) > c for v in sums)
    return bad


# -- ground states ---------------------------------------------------------------

def brute_energy_min(h: np.ndarray, J: float, eps: float, eta: float, sign: int, boundary: int):
    """Exhaustive minimum of the energy on a (2L+1)^2 box, one configuration at a time."""
    n = h.shape[0]
    f = eta + sign * eps * h
    best = None
    for bits in itertools.product((-1, 1), repeat=n * n):
        s = np.array(bits, dtype=float).reshape(n, n)
        e = 0.0
        e -= J * (s[1:, :] * s[:-1, :]).sum() + J * (s[:, 1:] * s[:, :-1]).sum()
        e -= J * boundary * (s[0, :].sum() + s[-1, :].sum() + s[:, 0].sum() + s[:, -1].sum())
        e -= (f * s).sum()
        if best is None or e < best:
            best = e
    return best


# -- capacity --------------------------------------------------------------------

def simplex_grid_min_energy(K: np.ndarray, step: float = 1e-3) -> float:
    """Minimum of mu^T K mu over the simplex, exhaustive on a grid.

    The first n-2 weights run over a grid of the given step; along the
    remaining edge mu = (head, t, rest - t) the one-dimensional quadratic
    is minimised exactly, so grid error enters only through the head.
    """
    n = K.shape[0]
    if n == 1:
        return float(K[0, 0])
    g = np.arange(0.0, 1.0 + step / 2, step)
    if n == 2:
        heads = np.zeros((1, 0))
    else:
        heads = np.stack(np.meshgrid(*([g] * (n - 2)), indexing="ij"), -1).reshape(-1, n - 2)
        heads = heads[heads.sum(axis=1) <= 1.0 + 1e-12]
    rest = np.clip(1.0 - heads.sum(axis=1), 0.0, None)
    base = np.zeros((len(heads), n))
    base[:, : n - 2] = heads
    base[:, n - 1] = rest
    d = np.zeros(n)
    d[n - 2], d[n - 1] = 1.0, -1.0
    a = float(d @ K @ d)
    b = 2.0 * (base @ K @ d)
    c = np.einsum("ij,jk,ik->i", base, K, base)
    cands = [np.zeros_like(rest), rest]
    if a > 0:
        cands.append(np.clip(-b / (2 * a), 0.0, rest))
    best = min(float(np.min(c + b * t + a * t * t)) for t in cands)
    return best


# -- crossings -------------------------------------------------------------------

def bfs_crossing_length(mask: np.ndarray, src: np.ndarray, dst: np.ndarray):
    """Fewest vertices on a 4-connected path inside ``mask`` from src to dst (None if none)."""
    dist = -np.ones(mask.shape, dtype=int)
    q = deque()
    for i, j in np.argwhere(mask & src):
        dist[i, j] = 1
        q.append((i, j))
    while q:
        i, j = q.popleft()
        if dst[i, j]:
            return int(dist[i, j])
        for a, b in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
            if 0 <= a < mask.shape[0] and 0 <= b < mask.shape[1] and mask[a, b] and dist[a, b] < 0:
                dist[a, b] = dist[i, j] + 1
                q.append((a, b))
    return None


# -- cylinders -------------------------------------------------------------------

def _inside_interval(p0, p1, a, u, length, r, tol):
    """Parameter interval of t in [0, 1] with p0 + t (p1 - p0) inside the cylinder.

    The cylinder is convex, so the set is an interval: the slab condition
    is linear in t and the radial one quadratic.
    """
    v = p1 - p0
    w = p0 - a
    z0, dz = float(w @ u), float(v @ u)
    lo, hi = 0.0, 1.0
    for bound, sign in ((-tol, 1.0), (length + tol, -1.0)):
        # sign * (z0 + t dz - bound) >= 0
        c0, c1 = sign * (z0 - bound), sign * dz
        if abs(c1) < 1e-15:
            if c0 < 0:
                return None
        elif c1 > 0:
            lo = max(lo, -c0 / c1)
        else:
            hi = min(hi, -c0 / c1)
    wp = w - z0 * u
    vp = v - dz * u
    A, B, C = float(vp @ vp), 2.0 * float(wp @ vp), float(wp @ wp) - (r + tol) ** 2
    if A < 1e-15:
        if C > 0:
            return None
    else:
        disc = B * B - 4 * A * C
        if disc < 0:
            return None
        sq = np.sqrt(disc)
        lo, hi = max(lo, (-B - sq) / (2 * A)), min(hi, (-B + sq) / (2 * A))
    return (lo, hi) if lo <= hi else None


def cylinder_crossed_exact(points, a, b, r, tol=1e-9) -> bool:
    """Crossing test from exact per-segment inside intervals.

    A maximal inside sub-path is a run of segments whose intervals join at
    shared vertices; along it the axial coordinate is piecewise linear, so
    its extremes sit at interval ends.
    """
    pts = np.asarray(points, dtype=float)
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    length = float(np.linalg.norm(b - a))
    u = (b - a) / length
    zmin = zmax = None
    prev_reaches_end = False
    for i in range(len(pts) - 1):
        iv = _inside_interval(pts[i], pts[i + 1], a, u, length, r, tol)
        if iv is None:
            zmin = zmax = None
            prev_reaches_end = False
            continue
        t0, t1 = iv
        zs = [float((pts[i] + t * (pts[i + 1] - pts[i]) - a) @ u) for t in (t0, t1)]
        if not (prev_reaches_end and t0 == 0.0):
            zmin = zmax = None
        zmin = min(zs) if zmin is None else min(zmin, *zs)
        zmax = max(zs) if zmax is None else max(zmax, *zs)
        if zmin <= tol and zmax >= length - tol:
            return True
        prev_reaches_end = t1 == 1.0
        if not prev_reaches_end:
            zmin = zmax = None
    return False
