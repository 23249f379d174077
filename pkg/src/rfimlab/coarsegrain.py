"""Majority-rule coarse graining of lattice sets and the checks built on it.

``coarse_grain(G, k)`` is the union of the tiles [m 2^k, (m+1) 2^k)^2 that
hold at least 2^(2k-1) vertices of G. Every level is computed from G
itself, never from the previous level.
"""
from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, sparse

from .lattice import (Box, LatticeError, VertexSet, constant_sign_components,
                      is_simply_connected, mask_perimeter, perimeter, simply_connected_shapes)
from .parallel import map_replicates
from .rfim import ModelError, ModelParams, RandomField, ground_state_pair, sample_field

_CROSS = ndimage.generate_binary_structure(2, 1)


def admissibility_threshold(k: int) -> float:
    """Minimum count of a tile of side 2^k (2^(2k-1); 1/2 at k = 0)."""
    return 2.0 ** (2 * k - 1)


def _aligned_window(G: VertexSet, k: int) -> tuple[int, int, np.ndarray]:
    """G's mask on the smallest window aligned to the 2^k tiling."""
    t = 1 << k
    x0, x1, y0, y1 = G.bounds()
    ax0 = (x0 // t) * t
    ay0 = (y0 // t) * t
    ax1 = ((x1 // t) + 1) * t - 1
    ay1 = ((y1 // t) + 1) * t - 1
    return ax0, ay0, G.window(ax0, ax1, ay0, ay1)


def tile_counts(G: VertexSet, k: int) -> tuple[tuple[int, int], np.ndarray]:
    """Counts |s n G| for the tiles covering G's bounding box.

    Returns the tile index (floor(x / 2^k), floor(y / 2^k)) of the first
    tile and the count array.
    """
    if k < 0:
        raise LatticeError("k must be >= 0")
    t = 1 << k
    if not G.area:
        return (0, 0), np.zeros((0, 0), dtype=np.int64)
    ax0, ay0, w = _aligned_window(G, k)
    nx, ny = w.shape[0] // t, w.shape[1] // t
    counts = w.reshape(nx, t, ny, t).sum(axis=(1, 3))
    return (ax0 // t, ay0 // t), counts


def coarse_grain(G: VertexSet, k: int) -> VertexSet:
    """Union of the admissible tiles of side 2^k; k = 0 returns G."""
    if k < 0:
        raise LatticeError("k must be >= 0")
    if k == 0 or not G.area:
        return G
    t = 1 << k
    (tx, ty), counts = tile_counts(G, k)
    adm = counts >= (1 << (2 * k - 1))
    mask = np.repeat(np.repeat(adm, t, axis=0), t, axis=1)
    return VertexSet(mask, (tx * t, ty * t))


@dataclass(frozen=True)
class CoarseSequence:
    gamma: VertexSet
    levels: tuple
    confinement: Box | None = None

    @property
    def k_max(self) -> int:
        return len(self.levels) - 1

    def __getitem__(self, k: int) -> VertexSet:
        return self.levels[k]


def coarse_sequence(G: VertexSet, k_max: int, confinement: Box | None = None) -> CoarseSequence:
    """Levels G_0 .. G_kmax, each from G directly, then optionally cut to the box."""
    if k_max < 0:
        raise LatticeError("k_max must be >= 0")
    levels = [coarse_grain(G, k) for k in range(k_max + 1)]
    if confinement is not None:
        levels = [lv.intersect_box(confinement) for lv in levels]
    return CoarseSequence(G, tuple(levels), confinement)


# -- coarse-graining inequalities -------------------------------------------------

@dataclass(frozen=True)
class KeyLemma1Report:
    k: int
    perimeter: int
    area: int
    boundary_k: int
    gain: int  # |G_k minus G_(k-1)|
    loss: int  # |G_(k-1) minus G_k|
    area_k: int
    in_domain: bool  # the inequalities are claimed for k > 1 only

    @property
    def boundary_ok(self) -> bool:
        return self.boundary_k < 8 * self.perimeter

    @property
    def difference_ok(self) -> bool:
        bound = 16 * (1 << self.k) * self.perimeter
        return self.gain < bound and self.loss < bound

    @property
    def area_ok(self) -> bool:
        return self.area_k < 32 * (1 << self.k) * self.perimeter + self.area

    @property
    def holds(self) -> bool:
        return self.boundary_ok and self.difference_ok and self.area_ok

    @property
    def passes(self) -> bool:
        """Verdict used for pass/fail: True outside the lemma's domain."""
        return self.holds or not self.in_domain

    @property
    def ratios(self) -> dict:
        p = max(self.perimeter, 1)
        return {
            "boundary": self.boundary_k / p,
            "difference": max(self.gain, self.loss) / ((1 << self.k) * p),
            "area_excess": (self.area_k - self.area) / ((1 << self.k) * p),
        }


def _level_pair(G: VertexSet, k: int):
    """(G_(k-1), G_k) as masks on one window; G_(-1) is taken to be G."""
    _, _, w = _aligned_window(G, k)
    prev = w if k == 0 else _level_on(w, k - 1)
    cur = _level_on(w, k)
    return prev, cur


def _level_on(w: np.ndarray, k: int) -> np.ndarray:
    # w is aligned to a tiling at least as coarse as 2^k
    if k == 0:
        return w
    t = 1 << k
    nx, ny = w.shape[0] // t, w.shape[1] // t
    adm = w.reshape(nx, t, ny, t).sum(axis=(1, 3)) >= (1 << (2 * k - 1))
    return np.repeat(np.repeat(adm, t, axis=0), t, axis=1)


def key_lemma1_check(G: VertexSet, k: int) -> KeyLemma1Report:
    if k < 0:
        raise LatticeError("k must be >= 0")
    if not G.area:
        raise LatticeError("key lemma check needs a nonempty set")
    prev, cur = _level_pair(G, k)
    return KeyLemma1Report(
        k=k,
        perimeter=perimeter(G),
        area=G.area,
        boundary_k=mask_perimeter(cur),
        gain=int((cur & ~prev).sum()),
        loss=int((prev & ~cur).sum()),
        area_k=int(cur.sum()),
        in_domain=k > 1,
    )


def boundary_component_count(G: VertexSet, k: int) -> int:
    """Number of connected components of the edge boundary of G_k.

    Boundary edges are joined when they share a corner of the dual
    lattice, i.e. the count of closed boundary contours.
    """
    Gk = coarse_grain(G, k)
    if not Gk.area:
        return 0
    m = np.pad(Gk.mask, 1)
    # dual-lattice corners touched by each boundary edge; union-find over corners
    parent: dict = {}

    def find(a):
        while parent.setdefault(a, a) != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    edges = []
    # vertical neighbours (i, j)-(i+1, j): dual edge between corners (i+1, j) and (i+1, j+1)
    for i, j in np.argwhere(m[1:, :] != m[:-1, :]):
        edges.append(((i + 1, j), (i + 1, j + 1)))
    for i, j in np.argwhere(m[:, 1:] != m[:, :-1]):
        edges.append(((i, j + 1), (i + 1, j + 1)))
    for a, b in edges:
        union(a, b)
    return len({find(a) for a, _ in edges})


# -- coarse image counting ----------------------------------------------------------

@dataclass(frozen=True)
class ImageCount:
    ell: int
    k: int
    images: int
    starting_sets: int

    @property
    def normalized_log(self) -> float:
        """log(images) 2^k / (ell k + ell log ell)."""
        return math.log(self.images) * (1 << self.k) / (self.ell * self.k + self.ell * math.log(self.ell))


def count_coarse_images(ell: int, k: int, cap: int | None = None) -> ImageCount:
    """Distinct G_k over simply connected G containing the origin with |dG| = ell."""
    if ell < 4:
        raise LatticeError("ell must be >= 4")
    kw = {} if cap is None else {"cap": cap}
    images = set()
    count = 0
    for shape in simply_connected_shapes(ell, exact=True, **kw):
        for (cx, cy) in shape.points():
            G = shape.translate(-cx, -cy)
            images.add(coarse_grain(G, k))
            count += 1
    return ImageCount(ell, k, len(images), count)


# -- corridor events -------------------------------------------------------------

@dataclass(frozen=True)
class CorridorSpec:
    ell: int
    N: int
    c: float
    J: float
    eps: float

    @property
    def levels(self) -> tuple[int, ...]:
        return tuple(range(1, self.N + 1))


def corridor_constants(ell: int, p: ModelParams) -> CorridorSpec:
    """N = floor(log2 ell) and c = J ell / (8 N eps)."""
    if ell < 2:
        raise LatticeError("ell must be >= 2")
    if not p.eps > 0:
        raise ModelError("corridor constants need eps > 0")
    N = int(ell).bit_length() - 1
    return CorridorSpec(ell, N, p.J * ell / (8.0 * N * p.eps), p.J, p.eps)


def _corridor_shapes(ell: int, cap: int | None = None) -> list[VertexSet]:
    kw = {} if cap is None else {"cap": cap}
    return simply_connected_shapes(ell, exact=True, **kw)


@lru_cache(maxsize=32)
def _corridor_plan(ell: int, N: int, k: int, L: int, cap: int | None):
    """Sparse (part-row, vertex) incidence for all level-k corridor parts.

    Returns the matrix and, per row, the index of the translate it belongs
    to. Coarse levels are cut to the box, which is the same as a zero field
    outside it. Coarse graining at levels <= j commutes with shifts by
    multiples of 2^j, so translates are built residue by residue.
    """
    side = 2 * L + 1
    t = 1 << (k + 1) if k < N else 1 << k
    rows, cols, owner = [], [], []
    n_rows = 0
    n_sets = 0
    for shape in _corridor_shapes(ell, cap):
        for rx in range(t):
            for ry in range(t):
                G = shape.translate(rx, ry)
                if k < N:
                    A = coarse_grain(G, k + 1)
                    B = coarse_grain(G, k)
                    parts = [A - B, B - A]
                else:
                    parts = [coarse_grain(G, k)]
                parts = [np.argwhere(q.mask) + np.asarray(q.origin) for q in parts if q.area]
                gx0, gx1, gy0, gy1 = G.bounds()
                ax = np.arange(-((L + gx0) // t), (L - gx1) // t + 1) * t
                ay = np.arange(-((L + gy0) // t), (L - gy1) // t + 1) * t
                if len(ax) == 0 or len(ay) == 0:
                    continue
                aa, bb = np.meshgrid(ax, ay, indexing="ij")
                shifts = np.c_[aa.ravel(), bb.ravel()]
                ids = n_sets + np.arange(len(shifts))
                n_sets += len(shifts)
                for pts in parts:
                    xs = shifts[:, :1] + pts[None, :, 0]
                    ys = shifts[:, 1:] + pts[None, :, 1]
                    keep = (np.abs(xs) <= L) & (np.abs(ys) <= L)
                    r = np.broadcast_to((n_rows + np.arange(len(shifts)))[:, None], xs.shape)
                    rows.append(r[keep])
                    cols.append(((xs + L) * side + ys + L)[keep])
                    owner.append(ids)
                    n_rows += len(shifts)
    if n_rows == 0:
        return sparse.csr_matrix((0, side * side)), np.zeros(0, dtype=np.int64), n_sets
    M = sparse.csr_matrix((np.ones(sum(len(r) for r in rows)), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n_rows, side * side))
    return M, np.concatenate(owner), n_sets


def corridor_violations(h: RandomField, spec: CorridorSpec, k: int, cap: int | None = None) -> int:
    """Number of simply connected G inside the box with |dG| = ell whose
    level-k corridor sums exceed c.

    Level k < N uses |sum over G_(k+1) minus G_k| and |sum over G_k minus G_(k+1)|;
    level k = N uses |sum over G_N|.
    """
    if not 1 <= k <= spec.N:
        raise LatticeError(f"corridor level must lie in [1, {spec.N}]")
    M, owner, n_sets = _corridor_plan(spec.ell, spec.N, k, h.L, cap)
    if M.shape[0] == 0:
        return 0
    bad_rows = np.abs(M @ h.values.ravel()) > spec.c
    return int(np.unique(owner[bad_rows]).size)


@dataclass(frozen=True)
class CorridorFrequencies:
    spec: CorridorSpec
    L: int
    n: int
    seed: int
    indicators: np.ndarray = field(repr=False)  # (n, N) bool: some violation at level k

    @property
    def frequencies(self) -> np.ndarray:
        return self.indicators.mean(axis=0)

    @property
    def any_frequency(self) -> float:
        return float(self.indicators.any(axis=1).mean())


def _corridor_row(args):
    L, p, spec, seed, r, distribution, cap = args
    h = sample_field(L, distribution, seed, r)
    return [corridor_violations(h, spec, k, cap) > 0 for k in spec.levels]


def corridor_event_frequencies(p: ModelParams, L: int, ell: int, n: int, seed: int,
                               distribution: str = "gaussian", cap: int | None = None,
                               threads: int = 1) -> CorridorFrequencies:
    """Per level k, the frequency over n fields that some G violates the corridor bound."""
    spec = corridor_constants(ell, p)
    args = [(L, p, spec, seed, r, distribution, cap) for r in range(n)]
    rows = map_replicates(_corridor_row, args, threads)
    return CorridorFrequencies(spec, L, n, seed, np.asarray(rows, dtype=bool).reshape(n, spec.N))


# -- Q-event scan ----------------------------------------------------------------

@dataclass(frozen=True)
class Violator:
    gamma: VertexSet
    field_sum: float
    threshold: float
    source: str  # "enumerated" or "ground-state"

    def reverify(self, h: RandomField, p: ModelParams) -> bool:
        box = h.box
        m = self.gamma.box_mask(box)
        if int(m.sum()) != self.gamma.area:
            return False
        s = float(h.values[m].sum())
        return (abs(s) >= p.J / (2.0 * p.eps) * perimeter(self.gamma)
                and is_simply_connected(self.gamma))


@dataclass(frozen=True)
class QScanReport:
    """Violators of the field-versus-perimeter bound.

    ``exhaustive`` is True: every shape within the budget was tried at
    every placement. ``complete`` is always False, since larger sets are
    only probed through ground-state components.
    """
    perimeter_budget: int
    violators: tuple
    sets_tested: int
    ground_state_probed: bool
    truncated: bool = False
    exhaustive: bool = True
    complete: bool = False

    @property
    def found(self) -> bool:
        return bool(self.violators)


def scan_q_event(h: RandomField, p: ModelParams, perimeter_budget: int,
                 include_ground_state: bool = True, cap: int | None = None,
                 max_report: int = 1000) -> QScanReport:
    """Simply connected G inside the box with |sum_G h| >= (J / 2 eps) |dG|.

    Exhaustive over all shapes with |dG| <= budget at every translate inside
    the box, plus the simply connected constant-sign components of the
    plus and minus ground states of h (with eta = 0 and the opposed field
    sign). The report lists at most ``max_report`` violators.
    """
    if not p.eps > 0:
        raise ModelError("the scan needs eps > 0")
    kw = {} if cap is None else {"cap": cap}
    L = h.L
    side = 2 * L + 1
    ratio = p.J / (2.0 * p.eps)
    found = []
    seen = set()
    tested = 0
    truncated = False
    for shape in simply_connected_shapes(perimeter_budget, **kw):
        w, hgt = shape.mask.shape
        if w > side or hgt > side:
            continue
        thr = ratio * perimeter(shape)
        # field sum for every placement: one shifted slice per cell
        sums = np.zeros((side - w + 1, side - hgt + 1))
        for i, j in np.argwhere(shape.mask):
            sums += h.values[i:i + side - w + 1, j:j + side - hgt + 1]
        tested += sums.size
        for a, b in np.argwhere(np.abs(sums) >= thr):
            if len(found) >= max_report:
                truncated = True
                break
            G = VertexSet(shape.mask, (int(a) - L, int(b) - L))
            seen.add(G)
            found.append(Violator(G, float(sums[a, b]), thr, "enumerated"))
    if include_ground_state:
        gp = ModelParams(p.J, p.eps, 0.0, "opposed")
        for sigma in ground_state_pair(h, gp):
            for comp, _ in constant_sign_components(sigma.spins, sigma.box):
                if perimeter(comp) <= perimeter_budget or comp in seen:
                    continue
                if not is_simply_connected(comp):
                    continue
                tested += 1
                s = float(h.values[comp.box_mask(sigma.box)].sum())
                thr = ratio * perimeter(comp)
                if abs(s) >= thr:
                    if len(found) >= max_report:
                        truncated = True
                        continue
                    seen.add(comp)
                    found.append(Violator(comp, s, thr, "ground-state"))
    return QScanReport(perimeter_budget, tuple(found), tested, include_ground_state, truncated)


def q_event_restricted(h: RandomField, p: ModelParams, perimeter_budget: int, cap: int | None = None) -> bool:
    """Budget-restricted Q event: some simply connected G inside the box with
    |dG| <= budget has |sum_G h| >= (J / 2 eps) |dG|."""
    return scan_q_event(h, p, perimeter_budget, include_ground_state=False, cap=cap, max_report=1).found


def disagreement_cluster(L: int, p: ModelParams, seed: int, replicate: int,
                         distribution: str = "gaussian") -> VertexSet | None:
    """Largest 4-connected component of one disagreement set (None if empty)."""
    from .disagreement import sample_disagreement
    D = sample_disagreement(L, p, seed, replicate, distribution)
    if not D.size:
        return None
    labels, count = ndimage.label(D.mask, structure=_CROSS)
    sizes = ndimage.sum(np.ones_like(labels), labels, index=np.arange(1, count + 1))
    k = int(np.argmax(sizes)) + 1
    return VertexSet.from_box_mask(labels == k, D.box)


def random_cluster_shapes(n: int, seed: int, L: int = 12, p: ModelParams | None = None,
                          distribution: str = "gaussian") -> list[VertexSet]:
    """Largest disagreement clusters of independent fields, skipping empty sets."""
    p = ModelParams(1.0, 1.0) if p is None else p
    out = []
    r = 0
    while len(out) < n:
        G = disagreement_cluster(L, p, seed, r, distribution)
        r += 1
        if G is not None:
            out.append(G)
        if r > 100 * n and len(out) < n:
            raise ModelError("too few nonempty disagreement sets; raise eps")
    return out
