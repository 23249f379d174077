"""Capacity, coverings, straight runs and sparsity of polygonal curves.

Curves live in R^d as point sequences with a fixed step delta. The
truncated Riesz capacity of a finite set A is

    Cap_{s;l}(A) = 1 / min_mu sum_{x,y} mu_x mu_y max(|x - y|, l)^(-s)

over probability vectors mu on A. A gamma-straight run at scale L is a
crossing of a cylinder of length L and radius 9 L / (2 sqrt(gamma)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import mpmath
import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist, pdist

from . import _backend

CROSS_TOL = 1e-9
NEST_TOL = 1e-9
CAPACITY_TOL = 1e-8
MAX_CAPACITY_POINTS = 10_000
MPMATH_DPS = 60


class CurveError(ValueError):
    pass


class ScaleDomainError(ValueError):
    pass


def _diameter(points: np.ndarray) -> float:
    n = len(points)
    if n < 2:
        return 0.0
    if n <= 3000:
        return float(pdist(points).max())
    # the diameter is attained on the convex hull
    from scipy.spatial import ConvexHull, QhullError
    try:
        hull = points[ConvexHull(points).vertices]
    except (QhullError, ValueError):
        hull = points
        if len(hull) > 3000:
            lo, hi = hull.min(axis=0), hull.max(axis=0)
            return float(np.linalg.norm(hi - lo))
    return float(pdist(hull).max())


class PolygonalCurve:
    """Point sequence in R^d whose consecutive points are delta apart."""

    def __init__(self, points, delta: float, check: bool = True):
        pts = np.array(points, dtype=np.float64, copy=True)
        if pts.ndim != 2 or len(pts) < 2:
            raise CurveError("a curve needs at least 2 points in an (n, d) array")
        if not delta > 0:
            raise CurveError("delta must be > 0")
        if check:
            steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
            bad = np.abs(steps - delta) > 1e-9 * delta
            if bad.any():
                i = int(np.argmax(bad))
                raise CurveError(f"step {i} has length {steps[i]!r}, expected {delta!r}")
        pts.setflags(write=False)
        self._points = pts
        self.delta = float(delta)
        self._diam = None

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def dim(self) -> int:
        return self._points.shape[1]

    def __len__(self) -> int:
        return len(self._points)

    @property
    def diameter(self) -> float:
        if self._diam is None:
            self._diam = _diameter(self._points)
        return self._diam

    @property
    def length(self) -> float:
        return self.delta * (len(self._points) - 1)

    def __repr__(self) -> str:
        return f"PolygonalCurve(n={len(self)}, d={self.dim}, delta={self.delta:g})"


@dataclass(frozen=True)
class CurveSystem:
    """Curves sharing one step length inside [-window, window]^d,
    optionally outside the open square (-hole, hole)^d."""
    curves: tuple
    delta: float
    window: float = math.inf
    hole: float = 0.0

    def __post_init__(self):
        tol = 1e-9 * max(1.0, self.delta)
        for c in self.curves:
            if abs(c.delta - self.delta) > 1e-12 * self.delta:
                raise CurveError("curves in a system must share delta")
            norm = np.abs(c.points).max(axis=1)
            if norm.max() > self.window + tol or (self.hole > 0 and norm.min() < self.hole - tol):
                raise CurveError("curve leaves the system window")

    def __len__(self) -> int:
        return len(self.curves)

    def __iter__(self):
        return iter(self.curves)


@dataclass(frozen=True, eq=False)
class Cylinder:
    """Closed cylinder with axis [a, b] and radius r (flat bases).

    ``k`` optionally records the scale index of a straight run.
    """
    a: tuple
    b: tuple
    radius: float
    k: int | None = None

    def __post_init__(self):
        a = tuple(float(v) for v in self.a)
        b = tuple(float(v) for v in self.b)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if len(a) != len(b):
            raise CurveError("axis endpoints differ in dimension")
        if not self.radius > 0:
            raise CurveError("radius must be > 0")
        if not self.length > 0:
            raise CurveError("cylinder axis has zero length")

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.subtract(self.b, self.a)))

    @property
    def aspect(self) -> float:
        return self.length / self.radius

    @property
    def axis(self) -> np.ndarray:
        return np.subtract(self.b, self.a) / self.length

    def contains_point(self, p, tol: float = NEST_TOL) -> bool:
        u = self.axis
        w = np.subtract(p, self.a)
        z = float(w @ u)
        rad = float(np.linalg.norm(w - z * u))
        return -tol <= z <= self.length + tol and rad <= self.radius + tol


# -- capacity -----------------------------------------------------------------

@dataclass(frozen=True)
class CapacityResult:
    value: float
    weights: np.ndarray = field(repr=False)
    s: float
    ell: float
    residual: float
    energy: float
    n_points: int


def riesz_kernel(points: np.ndarray, s: float, ell: float) -> np.ndarray:
    d = cdist(points, points)
    return np.maximum(d, ell) ** (-s)


def _subsample(points: np.ndarray, max_points: int) -> np.ndarray:
    if len(points) <= max_points:
        return points
    idx = np.linspace(0, len(points) - 1, max_points).round().astype(int)
    return points[np.unique(idx)]


def capacity(points, s: float, ell: float, restarts: int = 3, seed: int = 0,
             tol: float = CAPACITY_TOL, maxiter: int = 1_000_000,
             max_points: int = MAX_CAPACITY_POINTS) -> CapacityResult:
    """Truncated Riesz capacity Cap_{s;ell} of a finite point set.

    Minimises mu^T K mu over the simplex by pairwise exchange from the
    uniform start plus ``restarts`` random Dirichlet starts; the lowest
    energy wins. Sets above ``max_points`` are thinned to evenly spaced
    points in the given order, which can only lower the capacity.
    """
    if not s > 0 or not ell > 0:
        raise CurveError("s and ell must be > 0")
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if len(pts) == 0:
        raise CurveError("capacity of an empty set")
    pts = _subsample(pts, max_points)
    n = len(pts)
    K = riesz_kernel(pts, s, ell)
    rng = np.random.default_rng(seed)
    starts = [np.full(n, 1.0 / n)] + [rng.dirichlet(np.ones(n)) for _ in range(restarts if n > 1 else 0)]
    best = None
    for mu0 in starts:
        mu, energy, gap, _ = _backend.simplex_exchange(K, mu0, tol * ell ** (-s), maxiter)
        if best is None or energy < best[1]:
            best = (np.asarray(mu), energy, gap)
    mu, energy, gap = best
    mu = np.clip(mu, 0.0, None)
    mu /= mu.sum()
    return CapacityResult(1.0 / energy, mu, s, ell, float(gap), float(energy), n)


def greedy_cover(points, ell: float) -> list[np.ndarray]:
    """Partition into clusters of diameter <= ell.

    Seed each cluster with the first uncovered point, then add uncovered
    points within ell of the seed, nearest first, while every member stays
    within ell of the newcomer.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = len(pts)
    tree = cKDTree(pts)
    covered = np.zeros(n, dtype=bool)
    clusters = []
    for i in range(n):
        if covered[i]:
            continue
        cand = np.asarray(tree.query_ball_point(pts[i], ell * (1 + 1e-12)), dtype=np.int64)
        cand = cand[~covered[cand]]
        order = np.argsort(np.linalg.norm(pts[cand] - pts[i], axis=1), kind="stable")
        members = [i]
        covered[i] = True
        for j in cand[order]:
            if covered[j]:
                continue
            if np.all(np.linalg.norm(pts[members] - pts[j], axis=1) <= ell):
                members.append(int(j))
                covered[j] = True
        clusters.append(np.asarray(members, dtype=np.int64))
    return clusters


def covering_number(points, ell: float) -> int:
    """Greedy upper bound on the number of diameter-ell sets covering ``points``."""
    return len(greedy_cover(points, ell))


def covering_bounds(points, ell: float, s: float, **kw) -> tuple[float, int]:
    """(Cap_{s;ell} * ell^(-s), greedy count): a certified sandwich for N(A, ell)."""
    cap = capacity(points, s, ell, **kw).value
    return cap * ell ** (-s), covering_number(points, ell)


def cover_energy_sum(points, clusters, s: float, ell: float) -> float:
    """sum_j max(diam B_j, ell)^s over a covering."""
    pts = np.asarray(points, dtype=np.float64)
    return float(sum(max(_diameter(pts[c]), ell) ** s for c in clusters))


# -- cylinders and straight runs ------------------------------------------------

def cylinder_crossed(curve: PolygonalCurve, c: Cylinder, tol: float = CROSS_TOL) -> bool:
    """Does some maximal sub-path of the curve inside ``c`` touch both bases?"""
    out = _backend.cylinders_crossed(np.ascontiguousarray(curve.points),
                                     np.asarray([c.a]), np.asarray([c.b]),
                                     np.asarray([c.radius]), tol)
    return bool(out[0])


def run_radius(L: float, gamma: float) -> float:
    return 9.0 * L / (2.0 * math.sqrt(gamma))


def lattice_directions(d: int, max_norm: int) -> np.ndarray:
    """Unit vectors of primitive integer vectors with sup-norm <= max_norm (both signs)."""
    r = range(-max_norm, max_norm + 1)
    out = []
    for v in product(r, repeat=d):
        if any(v) and math.gcd(*[abs(x) for x in v]) == 1:
            out.append(v)
    out = np.asarray(out, dtype=np.float64)
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def admissible_scales(gamma: float, delta: float) -> list[int]:
    """Scale indices k >= 1 with gamma^(-k) >= delta."""
    if not gamma > 1:
        raise CurveError("gamma must be > 1")
    out = []
    k = 1
    while gamma ** (-k) >= delta * (1 - 1e-12):
        out.append(k)
        k += 1
    return out


def candidate_axes(curve: PolygonalCurve, gamma: float, k: int, direction_cap: int = 6,
                   lattice_anchors: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Candidate axes [a, a + L u] at scale L = gamma^(-k).

    Anchors a are the curve vertices and, optionally, the points of the
    lattice (L / gamma) Z^d within reach of the curve; directions u come
    from primitive integer vectors of sup-norm <= min(ceil(gamma), cap).
    Axes whose endpoints are farther than radius + delta from every curve
    vertex cannot be crossed and are dropped.
    """
    L = gamma ** (-k)
    r = run_radius(L, gamma)
    pts = curve.points
    d = curve.dim
    dirs = lattice_directions(d, max(1, min(int(math.ceil(gamma)), direction_cap)))
    anchors = [pts]
    if lattice_anchors:
        g = L / gamma
        reach = r + curve.delta
        span = int(math.ceil(reach / g))
        # lattice points within a sup-ball of each vertex, then deduplicated
        base = np.round(pts / g).astype(np.int64)
        base = np.unique(base, axis=0)
        offs = np.asarray(list(product(range(-span, span + 1), repeat=d)), dtype=np.int64)
        if len(base) * len(offs) <= 2_000_000:
            cells = np.unique((base[:, None, :] + offs[None, :, :]).reshape(-1, d), axis=0)
            anchors.append(cells.astype(np.float64) * g)
    A = np.concatenate(anchors)
    A = np.unique(np.round(A / (curve.delta * 1e-9)) * (curve.delta * 1e-9), axis=0)
    tree = cKDTree(pts)
    near, _ = tree.query(A, distance_upper_bound=r + curve.delta)
    A = A[np.isfinite(near)]
    if len(A) == 0:
        return np.empty((0, d)), np.empty((0, d))
    A2 = np.repeat(A, len(dirs), axis=0)
    B2 = A2 + L * np.tile(dirs, (len(A), 1))
    dist_b, _ = tree.query(B2, distance_upper_bound=r + curve.delta)
    keep = np.isfinite(dist_b)
    return A2[keep], B2[keep]


def detect_straight_runs(curve: PolygonalCurve, gamma: float, k: int, delta: float | None = None,
                         direction_cap: int = 6, lattice_anchors: bool = True,
                         chunk: int = 20_000) -> list[Cylinder]:
    """All crossed candidate cylinders of length gamma^(-k) and radius 9L/(2 sqrt gamma)."""
    if not gamma > 1:
        raise CurveError("gamma must be > 1")
    delta = curve.delta if delta is None else delta
    L = gamma ** (-k)
    if k < 1 or L < delta * (1 - 1e-12):
        raise CurveError(f"scale gamma^-{k} = {L:g} is below delta = {delta:g} or k < 1")
    A, B = candidate_axes(curve, gamma, k, direction_cap, lattice_anchors)
    r = run_radius(L, gamma)
    pts = np.ascontiguousarray(curve.points)
    runs = []
    for lo in range(0, len(A), chunk):
        a = np.ascontiguousarray(A[lo:lo + chunk])
        b = np.ascontiguousarray(B[lo:lo + chunk])
        hit = _backend.cylinders_crossed(pts, a, b, np.full(len(a), r), CROSS_TOL)
        for i in np.flatnonzero(hit):
            runs.append(Cylinder(tuple(a[i]), tuple(b[i]), r, k))
    return runs


def _frames(cyls) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    a = np.asarray([c.a for c in cyls], dtype=np.float64)
    b = np.asarray([c.b for c in cyls], dtype=np.float64)
    length = np.linalg.norm(b - a, axis=1)
    u = (b - a) / length[:, None]
    r = np.asarray([c.radius for c in cyls], dtype=np.float64)
    return a, u, length, r


def _probe_points(small) -> np.ndarray:
    """Points whose inclusion in a convex set certifies the small cylinder's inclusion.

    In d = 2 these are the four rectangle corners (exact). In d >= 3 the
    two axis endpoints are returned and the caller inflates by the radius.
    """
    a, u, length, r = _frames(small)
    b = a + length[:, None] * u
    if a.shape[1] == 2:
        n = np.stack([-u[:, 1], u[:, 0]], axis=1) * r[:, None]
        return np.stack([a + n, a - n, b + n, b - n], axis=1)
    return np.stack([a, b], axis=1)


def containment_matrix(small, big, tol: float = NEST_TOL) -> np.ndarray:
    """M[i, j] = small[i] is contained in big[j].

    Exact for d = 2; for d >= 3 a conservative (sufficient) test that
    inflates each base disc to a ball.
    """
    if not small or not big:
        return np.zeros((len(small), len(big)), dtype=bool)
    P = _probe_points(small)  # (ns, q, d)
    a, u, length, R = _frames(big)
    d = a.shape[1]
    inflate = 0.0 if d == 2 else np.asarray([c.radius for c in small])[:, None, None]
    w = P[:, None, :, :] - a[None, :, None, :]  # (ns, nb, q, d)
    z = np.einsum("ijqd,jd->ijq", w, u)
    rad = np.linalg.norm(w - z[..., None] * u[None, :, None, :], axis=-1)
    ok_z = (z >= inflate - tol) & (z <= length[None, :, None] - inflate + tol)
    ok_r = rad + inflate <= R[None, :, None] + tol
    return np.all(ok_z & ok_r, axis=2)


def cylinder_contains(big: Cylinder, small: Cylinder, tol: float = NEST_TOL) -> bool:
    return bool(containment_matrix([small], [big], tol)[0, 0])


def _best_container_dense(small, big, score, tol: float = NEST_TOL, budget: int = 500_000):
    """Reference version of ``_best_container`` via the full containment matrix."""
    ns = len(small)
    best_j = np.zeros(ns, dtype=np.int64)
    best_v = np.zeros(ns, dtype=np.int64)
    step = max(1, budget // max(1, len(big)))
    for lo in range(0, ns, step):
        M = containment_matrix(small[lo:lo + step], big, tol)
        cand = np.where(M, score[None, :], 0)
        j = np.argmax(cand, axis=1)
        best_j[lo:lo + step] = j
        best_v[lo:lo + step] = cand[np.arange(len(j)), j]
    return best_j, best_v


def _pairs_contained(P, a, u, length, R, tol) -> np.ndarray:
    """Row-wise: are all probe points P[i] inside the cylinder (a[i], u[i], length[i], R[i])?"""
    w = P - a[:, None, :]
    z = np.einsum("iqd,id->iq", w, u)
    rad = np.linalg.norm(w - z[..., None] * u[:, None, :], axis=-1)
    ok = (z >= -tol) & (z <= length[:, None] + tol) & (rad <= R[:, None] + tol)
    return ok.all(axis=1)


def _direction_groups(u: np.ndarray) -> dict:
    keys = np.round(u, 9)
    groups: dict = {}
    for i, key in enumerate(map(tuple, keys)):
        groups.setdefault(key, []).append(i)
    return {k: np.asarray(v, dtype=np.int64) for k, v in groups.items()}


def _best_container(small, big, score, tol: float = NEST_TOL):
    """For each small cylinder, a containing big cylinder of highest score.

    Returns (index, score) with score 0 where nothing contains it. In d = 2
    a rectangle lies in a big cylinder of direction u iff the big anchor
    (a.u, a.n) falls in an axis-aligned box fixed by the small corners, so
    candidates with one (small direction, big direction) pair are answered
    by Chebyshev nearest-neighbour queries on a rescaled KD-tree.
    """
    ns = len(small)
    best_j = np.zeros(ns, dtype=np.int64)
    best_v = np.zeros(ns, dtype=np.int64)
    if ns == 0 or len(big) == 0:
        return best_j, best_v
    if len(small[0].a) != 2:
        return _best_container_dense(small, big, score, tol)
    corners = _probe_points(small)  # (ns, 4, 2)
    sa, su, _, _ = _frames(small)
    ba, bu, blen, bR = _frames(big)
    score = np.asarray(score)
    levels = sorted(set(score.tolist()), reverse=True)
    small_groups = _direction_groups(su)
    for bkey, bidx in _direction_groups(bu).items():
        u = np.asarray(bkey)
        n = np.array([-u[1], u[0]])
        z0 = ba[bidx] @ u
        w0 = ba[bidx] @ n
        Lb = blen[bidx[0]]
        R = bR[bidx[0]]
        for sidx in small_groups.values():
            todo = sidx[best_v[sidx] < levels[0]]
            if len(todo) == 0:
                continue
            cz = corners[todo] @ u
            cw = corners[todo] @ n
            zmin, zmax = cz.min(axis=1), cz.max(axis=1)
            wmin, wmax = cw.min(axis=1), cw.max(axis=1)
            hz = (Lb - (zmax - zmin)).max() / 2.0 + tol
            hw = (2.0 * R - (wmax - wmin)).max() / 2.0 + tol
            if hz <= 0 or hw <= 0:
                continue
            qz = (zmin + zmax - Lb) / 2.0
            qw = (wmin + wmax) / 2.0
            for v in levels:
                if v <= 0:
                    break
                sel = score[bidx] >= v
                pool = bidx[sel]
                if len(pool) == 0:
                    continue
                open_ = best_v[todo] < v
                if not open_.any():
                    continue
                tree = cKDTree(np.c_[z0[sel], w0[sel] * (hz / hw)])
                q = np.c_[qz[open_], qw[open_] * (hz / hw)]
                dist, hit = tree.query(q, p=np.inf, distance_upper_bound=hz)
                found = np.isfinite(dist)
                rows = todo[open_][found]
                cand = pool[hit[found]]
                # exact re-check of each proposed pair
                ok = _pairs_contained(corners[rows], ba[cand], bu[cand], blen[cand], bR[cand], tol)
                rows, cand = rows[ok], cand[ok]
                upd = score[cand] > best_v[rows]
                best_v[rows[upd]] = score[cand[upd]]
                best_j[rows[upd]] = cand[upd]
    return best_j, best_v


@dataclass(frozen=True)
class SparsityResult:
    k0: int
    witness: tuple = ()
    gamma: float = 0.0
    delta: float = 0.0
    scales: tuple = ()
    run_counts: tuple = ()

    @property
    def chain_length(self) -> int:
        return len(self.witness)


def sparsity_k0(curve: PolygonalCurve, gamma: float, delta: float | None = None,
                direction_cap: int = 6, lattice_anchors: bool = True) -> SparsityResult:
    """Least k0 for which the curve's straight runs are (gamma, k0)-sparse down to delta.

    A violating chain is a nested sequence of runs at scales
    gamma^(-k_1) > ... > gamma^(-k_n) with 1 <= k_1 < ... < k_n <= 2n. Every
    chain ending at run r can be shortened from the front, so with
    n(r) = longest chain ending at r, the largest violating length is
    n* = max{n(r) : k(r) <= 2 n(r)} and k0 = 2 n* + 1 (0 when no run
    qualifies). The witness is a chain of length n*.
    """
    if not gamma > 1:
        raise CurveError("gamma must be > 1")
    delta = curve.delta if delta is None else delta
    scales = admissible_scales(gamma, delta)
    runs = {k: detect_straight_runs(curve, gamma, k, delta, direction_cap, lattice_anchors)
            for k in scales}
    counts = tuple(len(runs[k]) for k in scales)
    best_len: dict[int, np.ndarray] = {}
    best_prev: dict[int, np.ndarray] = {}  # flattened (scale, index) of the predecessor
    flat = [(k, i) for k in scales for i in range(len(runs[k]))]
    offsets = {}
    pos = 0
    for k in scales:
        offsets[k] = pos
        pos += len(runs[k])
    for k in scales:
        n = len(runs[k])
        length = np.ones(n, dtype=np.int64)
        prev = np.full(n, -1, dtype=np.int64)
        for kp in scales:
            if kp >= k or not runs[kp] or not n:
                continue
            j, val = _best_container(runs[k], runs[kp], best_len[kp])
            better = val + 1 > length
            better &= val > 0
            length[better] = val[better] + 1
            prev[better] = offsets[kp] + j[better]
        best_len[k] = length
        best_prev[k] = prev
    n_star, end = 0, None
    for k in scales:
        for i, nl in enumerate(best_len[k]):
            if k <= 2 * nl and nl > n_star:
                n_star, end = int(nl), (k, i)
    if end is None:
        return SparsityResult(0, (), gamma, delta, tuple(scales), counts)
    chain = []
    k, i = end
    while True:
        chain.append(runs[k][i])
        p = int(best_prev[k][i])
        if p < 0:
            break
        k, i = flat[p]
    return SparsityResult(2 * n_star + 1, tuple(reversed(chain)), gamma, delta, tuple(scales), counts)


def verify_chain(curve: PolygonalCurve, chain, gamma: float, delta: float) -> bool:
    """Independent re-check of a violating chain (scales, nesting, crossings)."""
    n = len(chain)
    if n == 0:
        return False
    ks = [c.k for c in chain]
    if any(b <= a for a, b in zip(ks, ks[1:])) or ks[0] < 1 or ks[-1] > 2 * n:
        return False
    if gamma ** (-ks[-1]) < delta * (1 - 1e-12):
        return False
    for c in chain:
        L = gamma ** (-c.k)
        if abs(c.length - L) > 1e-9 * L or abs(c.radius - run_radius(L, gamma)) > 1e-9 * L:
            return False
        if not sampled_cylinder_crossed(curve, c):
            return False
    for big, small in zip(chain, chain[1:]):
        if not all(big.contains_point(p) for p in _probe_points([small])[0]):
            return False
    return True


def sampled_cylinder_crossed(curve: PolygonalCurve, c: Cylinder, per_step: int = 64,
                             tol: float = CROSS_TOL) -> bool:
    """Crossing test on a dense resampling of the curve (independent of the kernel)."""
    pts = curve.points
    t = np.linspace(0.0, 1.0, per_step + 1)[:-1]
    dense = (pts[:-1, None, :] + t[None, :, None] * np.diff(pts, axis=0)[:, None, :]).reshape(-1, pts.shape[1])
    dense = np.vstack([dense, pts[-1:]])
    u = c.axis
    w = dense - np.asarray(c.a)
    z = w @ u
    rad = np.linalg.norm(w - z[:, None] * u, axis=1)
    slack = 2.0 * curve.delta / per_step  # a sample can miss a base by at most one sub-step
    inside = (z >= -tol - slack) & (z <= c.length + tol + slack) & (rad <= c.radius + tol)
    lo = hi = False
    for i in range(len(dense)):
        if not inside[i]:
            lo = hi = False
            continue
        lo |= z[i] <= tol + slack
        hi |= z[i] >= c.length - tol - slack
        if lo and hi:
            return True
    return False


# -- scale parameters -------------------------------------------------------------

@dataclass(frozen=True)
class ScaleParams:
    """Scale factor and exponent for the sparsity-capacity bound.

    The ``*_mp`` fields are mpmath values; floats are rounded copies.
    """
    eps_h2: float
    sigma: float
    d: int
    K: float
    K0: float
    K1: float
    kappa: float
    gamma0_mp: object
    gamma_mp: object
    m: int
    beta_mp: object
    s_mp: object

    @property
    def gamma0(self) -> float:
        return float(self.gamma0_mp)

    @property
    def gamma(self) -> float:
        return float(self.gamma_mp)

    @property
    def beta(self) -> float:
        return float(self.beta_mp)

    @property
    def s(self) -> float:
        return float(self.s_mp)

    @property
    def alpha_mp(self):
        return self.s_mp - 1

    @property
    def alpha(self) -> float:
        return float(self.alpha_mp)

    def invariant_report(self) -> dict:
        with mpmath.workdps(MPMATH_DPS):
            g, m, s = self.gamma_mp, mpmath.mpf(self.m), self.s_mp
            target = m * (1 + 1 / m) ** (mpmath.mpf(3) / 8)
            gs = g ** s
            eps = mpmath.mpf(self.eps_h2)
            return {
                "gamma_minus_quarter_integral": (g - mpmath.mpf(1) / 4) == mpmath.floor(g - mpmath.mpf(1) / 4),
                "gamma_in_range": self.gamma0_mp < g < 2 * self.gamma0_mp,
                "m_is_gamma_minus_quarter": m == g - mpmath.mpf(1) / 4,
                "beta_formula": abs(self.beta_mp - mpmath.sqrt(m * (m + 1))) <= mpmath.mpf(10) ** -40 * self.beta_mp,
                "gamma_s_residual": float(abs(gs - target)),
                "gamma_s_below_beta": gs < self.beta_mp,
                "s_above_one": s > 1,
                "alpha_lower_bound": s - 1 >= mpmath.mpf(self.kappa) * eps ** 2 / mpmath.log(1 / eps) ** 3,
            }

    def invariants_hold(self, tol: float = 1e-12) -> bool:
        r = self.invariant_report()
        return all(v for k, v in r.items() if k != "gamma_s_residual") and r["gamma_s_residual"] <= tol


def documented_kappa(K: float) -> float:
    """kappa with s - 1 >= kappa eps^2 / log(1/eps)^3 whenever gamma < 2 K eps^-2 log^2 eps.

    From s - 1 >= 1 / (16 m log m) >= 1 / (16 gamma log gamma) and
    log(2 K eps^-2 log^2 eps) <= (max(log 2K, 0) / log 10 + 2 + 2/e) log(1/eps)
    for eps < 1/10.
    """
    return 1.0 / (32.0 * K * (max(math.log(2.0 * K), 0.0) / math.log(10.0) + 2.0 + 2.0 / math.e))


def _gamma_ok(gamma, eps, sigma, d, K0, K1) -> bool:
    g = mpmath.mpf(gamma)
    ineq = 4 * d * mpmath.log(g) + K1 - K0 * eps * mpmath.sqrt(g) < mpmath.log(mpmath.mpf(1) / 8)
    past_peak = mpmath.sqrt(g) > 8 * d / (K0 * eps)
    big = g > max(4 * d, sigma ** 2)
    return bool(ineq and past_peak and big)


def choose_scale_params(eps_h2: float, sigma: float = 1.0, d: int = 2, K0: float | None = None,
                        Kd: float | None = None, slack: float = 1.0, K: float | None = None) -> ScaleParams:
    """Scale factor gamma, exponent s and derived constants for closeness eps_h2.

    gamma0 = K eps^-2 log^2 eps with K the smallest value (to bisection
    precision) for which gamma0 satisfies
    gamma^(4d) exp(K1 - K0 eps sqrt(gamma)) < 1/8 and lies past the
    exponent's peak and above max(4d, sigma^2). Defaults: K0 = 1/(40 sigma),
    K1 = log(9^d) + slack. Then gamma = floor(gamma0 - 1/4) + 5/4, m = gamma - 1/4,
    beta = sqrt(m(m+1)) and gamma^s = m (1 + 1/m)^(3/8).
    """
    if not 0 < eps_h2 < 0.1:
        raise ScaleDomainError(f"eps_h2 must lie in (0, 1/10), got {eps_h2}")
    if sigma < 1:
        raise ScaleDomainError("sigma must be >= 1")
    if d < 1:
        raise ScaleDomainError("d must be >= 1")
    K0 = 1.0 / (40.0 * sigma) if K0 is None else float(K0)
    Kd = 9.0 ** d if Kd is None else float(Kd)
    K1 = math.log(Kd) + slack
    with mpmath.workdps(MPMATH_DPS):
        eps = mpmath.mpf(eps_h2)
        unit = mpmath.log(eps) ** 2 / eps ** 2
        if K is None:
            lo, hi = mpmath.mpf(0), mpmath.mpf(1)
            while not _gamma_ok(hi * unit, eps, sigma, d, K0, K1):
                hi *= 2
            for _ in range(200):
                mid = (lo + hi) / 2
                if _gamma_ok(mid * unit, eps, sigma, d, K0, K1):
                    hi = mid
                else:
                    lo = mid
                if hi - lo <= hi * mpmath.mpf(10) ** -30:
                    break
            K = hi
        else:
            K = mpmath.mpf(K)
            if not _gamma_ok(K * unit, eps, sigma, d, K0, K1):
                raise ScaleDomainError(f"K={K} gives gamma0 violating the scale inequality")
        gamma0 = K * unit
        quarter = mpmath.mpf(1) / 4
        m = int(mpmath.floor(gamma0 - quarter)) + 1
        gamma = mpmath.mpf(m) + quarter
        mm = mpmath.mpf(m)
        beta = mpmath.sqrt(mm * (mm + 1))
        s = mpmath.log(mm * (1 + 1 / mm) ** (mpmath.mpf(3) / 8)) / mpmath.log(gamma)
        if not gamma < 2 * gamma0:
            raise ScaleDomainError("gamma0 too small to fit gamma in (gamma0, 2 gamma0)")
        Kf = float(K)
        return ScaleParams(eps_h2, sigma, d, Kf, K0, K1, documented_kappa(Kf),
                           +gamma0, +gamma, m, +beta, +s)


def explicit_scale_params(m: int, eps_h2: float = 0.05, sigma: float = 1.0, d: int = 2) -> ScaleParams:
    """ScaleParams for gamma = m + 1/4 directly (skips the choice of gamma0).

    Useful for exercising the bound at scale factors where straight runs
    are detectable; gamma0 is recorded as gamma itself.
    """
    with mpmath.workdps(MPMATH_DPS):
        mm = mpmath.mpf(m)
        gamma = mm + mpmath.mpf(1) / 4
        beta = mpmath.sqrt(mm * (mm + 1))
        s = mpmath.log(mm * (1 + 1 / mm) ** (mpmath.mpf(3) / 8)) / mpmath.log(gamma)
        return ScaleParams(eps_h2, sigma, d, float("nan"), float("nan"), float("nan"), 0.0,
                           +gamma, +gamma, int(m), +beta, +s)


def capacity_lower_bound(diam: float, params: ScaleParams, k0: int) -> float:
    """((gamma/m - 1) diam)^s (gamma^(s k0) + beta / (1 - gamma^s / beta))^(-1)."""
    if k0 < 0 or diam < 0:
        raise ScaleDomainError("k0 and diam must be >= 0")
    with mpmath.workdps(MPMATH_DPS):
        g, m, s, beta = params.gamma_mp, mpmath.mpf(params.m), params.s_mp, params.beta_mp
        gs = g ** s
        if not gs < beta:
            raise ScaleDomainError("requires gamma^s < beta")
        if not (g / 2 <= m <= g):
            raise ScaleDomainError("requires m in [gamma/2, gamma]")
        val = ((g / m - 1) * mpmath.mpf(diam)) ** s / (g ** (s * k0) + beta / (1 - gs / beta))
        return float(val)


# -- T statistic ----------------------------------------------------------------

@dataclass(frozen=True)
class TStatistic:
    value: float
    vacuous: bool
    n_qualifying: int
    argmin: int | None = None


def T_statistic(system, s: float, r: float, delta: float, **capacity_kw) -> TStatistic:
    """Minimum Cap_{s;delta} over curves of diameter >= r (vacuous: +inf)."""
    best, arg, count = math.inf, None, 0
    for i, c in enumerate(system):
        if c.diameter < r:
            continue
        count += 1
        v = capacity(c.points, s, delta, **capacity_kw).value
        if v < best:
            best, arg = v, i
    return TStatistic(best, count == 0, count, arg)


# -- random curves for batteries ---------------------------------------------------

def random_lattice_walk(n_steps: int, delta: float, rng: np.random.Generator, d: int = 2,
                        self_avoiding: bool = False) -> PolygonalCurve:
    """Nearest-neighbour walk on delta Z^d (optionally non-backtracking)."""
    moves = np.vstack([np.eye(d, dtype=np.int64), -np.eye(d, dtype=np.int64)])
    pos = np.zeros((n_steps + 1, d), dtype=np.int64)
    seen = {tuple(pos[0])}
    last = -1
    for i in range(n_steps):
        choices = [j for j in range(2 * d) if j != (last + d) % (2 * d) or last < 0]
        if self_avoiding:
            free = [j for j in choices if tuple(pos[i] + moves[j]) not in seen]
            choices = free or choices
        j = int(rng.choice(choices))
        pos[i + 1] = pos[i] + moves[j]
        seen.add(tuple(pos[i + 1]))
        last = j
    return PolygonalCurve(pos * delta, delta)


# -- sparsity tails --------------------------------------------------------------

def system_k0(system, gamma: float, delta: float | None = None, direction_cap: int = 6,
              lattice_anchors: bool = True) -> int:
    """k0 of a curve system: the largest k0 over its curves (0 when empty)."""
    delta = system.delta if delta is None else delta
    return max((sparsity_k0(c, gamma, delta, direction_cap, lattice_anchors).k0 for c in system), default=0)


@dataclass(frozen=True)
class K0Tail:
    k0s: np.ndarray
    thresholds: np.ndarray
    frequencies: np.ndarray  # P(k0 > N) per threshold N
    slope: float  # least-squares slope of log frequency against N (nan if < 2 points)
    intercept: float
    r_squared: float  # nan if < 3 distinct points


def k0_tail(k0s, thresholds=None) -> K0Tail:
    """Empirical P(k0 > N) and its log-linear fit over the N with nonzero frequency."""
    k0s = np.asarray(k0s, dtype=np.int64)
    if k0s.size == 0:
        raise ValueError("no k0 samples")
    if thresholds is None:
        thresholds = np.arange(0, int(k0s.max()) + 1)
    thresholds = np.asarray(thresholds, dtype=np.int64)
    freqs = np.array([(k0s > N).mean() for N in thresholds])
    keep = freqs > 0
    slope = intercept = r2 = float("nan")
    if keep.sum() >= 2:
        x, y = thresholds[keep].astype(float), np.log(freqs[keep])
        slope, intercept = (float(v) for v in np.polyfit(x, y, 1))
        if keep.sum() >= 3:
            resid = y - (slope * x + intercept)
            ss = float(((y - y.mean()) ** 2).sum())
            r2 = 1.0 - float((resid ** 2).sum()) / ss if ss > 0 else 1.0
    return K0Tail(k0s, thresholds, freqs, slope, intercept, r2)
