"""Zero-temperature disagreement percolation: crossings, rectangles, curve systems.

The disagreement set of a field is where the plus- and minus-boundary
ground states differ. By the monotone coupling this is exactly
``{s+ = +1, s- = -1}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy import ndimage

from . import _backend
from .lattice import Box, VertexSet
from .parallel import map_replicates
from .rfim import (ModelError, ModelParams, SpinConfiguration, binomial_half_width,
                   ground_state_pair, sample_field)
from .tortuosity import CurveSystem, K0Tail, PolygonalCurve, k0_tail, system_k0

_FOUR = ndimage.generate_binary_structure(2, 1)


class GeometryError(ValueError):
    """Rectangle or family geometry outside an operation's contract."""


@dataclass(frozen=True)
class DisagreementSet:
    L: int
    mask: np.ndarray = field(repr=False)
    seed: int | None = None
    replicate: int | None = None
    params: ModelParams | None = None

    @property
    def box(self) -> Box:
        return Box(self.L)

    @property
    def size(self) -> int:
        return int(self.mask.sum())

    def __len__(self) -> int:
        return self.size

    def vertex_set(self) -> VertexSet:
        return VertexSet.from_box_mask(self.mask, self.box)

    def __contains__(self, p) -> bool:
        x, y = p
        return self.box.contains(x, y) and bool(self.mask[x + self.L, y + self.L])

    def restrict(self, L: int) -> "DisagreementSet":
        """The same set viewed on the smaller box Lambda(L)."""
        if L > self.L:
            raise GeometryError(f"cannot restrict L={self.L} set to larger box L={L}")
        c = self.L - L
        return DisagreementSet(L, self.mask[c:c + 2 * L + 1, c:c + 2 * L + 1].copy(),
                               self.seed, self.replicate, self.params)

    @classmethod
    def from_points(cls, L: int, points) -> "DisagreementSet":
        box = Box(L)
        m = np.zeros(box.shape, dtype=bool)
        for x, y in points:
            if not box.contains(x, y):
                raise GeometryError(f"point {(x, y)} outside Lambda({L})")
            m[x + L, y + L] = True
        return cls(L, m)

    @classmethod
    def full(cls, L: int) -> "DisagreementSet":
        return cls(L, np.ones(Box(L).shape, dtype=bool))


@dataclass(frozen=True)
class CrossingReport:
    crossed: bool
    length: int | None = None
    path: tuple[tuple[int, int], ...] = ()

    def indicator(self, bound: float) -> bool:
        return self.crossed and self.length <= bound


@dataclass(frozen=True)
class LatticeRectangle:
    """Axis-aligned rectangle [x0, x1] x [y0, y1] of lattice vertices.

    Side lengths are vertex counts. The two short sides are the designated
    crossing sides (for a square, the left and right columns).
    """
    x0: int
    x1: int
    y0: int
    y1: int

    def __post_init__(self):
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise GeometryError(f"empty rectangle {self}")

    @classmethod
    def from_center(cls, cx2: int, cy2: int, width: int, height: int) -> "LatticeRectangle":
        """Rectangle with the given vertex-count sides and doubled centre (cx2, cy2)."""
        if (cx2 - (width - 1)) % 2 or (cy2 - (height - 1)) % 2:
            raise GeometryError("centre and side lengths do not fit the lattice")
        x0 = (cx2 - (width - 1)) // 2
        y0 = (cy2 - (height - 1)) // 2
        return cls(x0, x0 + width - 1, y0, y0 + height - 1)

    @property
    def width(self) -> int:
        return self.x1 - self.x0 + 1

    @property
    def height(self) -> int:
        return self.y1 - self.y0 + 1

    @property
    def short(self) -> int:
        return min(self.width, self.height)

    @property
    def long(self) -> int:
        return max(self.width, self.height)

    @property
    def horizontal(self) -> bool:
        """Long axis along x (ties count as horizontal)."""
        return self.width >= self.height

    @property
    def center2(self) -> tuple[int, int]:
        """Twice the centre, so it stays integral."""
        return self.x0 + self.x1, self.y0 + self.y1

    @property
    def center(self) -> tuple[float, float]:
        cx, cy = self.center2
        return cx / 2.0, cy / 2.0

    def contains(self, other: "LatticeRectangle") -> bool:
        return (self.x0 <= other.x0 and other.x1 <= self.x1
                and self.y0 <= other.y0 and other.y1 <= self.y1)

    def l1_distance(self, other: "LatticeRectangle") -> int:
        gx = max(0, other.x0 - self.x1, self.x0 - other.x1)
        gy = max(0, other.y0 - self.y1, self.y0 - other.y1)
        return gx + gy

    def max_norm_range(self) -> tuple[int, int]:
        """Min and max of max(|x|, |y|) over the rectangle's vertices."""
        def nearest(a, b):
            return 0 if a <= 0 <= b else min(abs(a), abs(b))
        lo = max(nearest(self.x0, self.x1), nearest(self.y0, self.y1))
        hi = max(abs(self.x0), abs(self.x1), abs(self.y0), abs(self.y1))
        return lo, hi


# -- disagreement sets ---------------------------------------------------------

def disagreement_set(plus: SpinConfiguration, minus: SpinConfiguration, seed=None,
                     replicate=None, params=None) -> DisagreementSet:
    if plus.boundary != "plus" or minus.boundary != "minus":
        raise ModelError("expected (plus-boundary, minus-boundary) configurations")
    if plus.L != minus.L:
        raise ModelError(f"box mismatch: L={plus.L} vs L={minus.L}")
    if np.any(plus.spins < minus.spins):
        raise ModelError("configurations violate the monotone coupling")
    return DisagreementSet(plus.L, plus.spins != minus.spins, seed, replicate, params)


def sample_disagreement(L: int, p: ModelParams, seed: int, replicate: int = 0,
                        distribution: str = "gaussian") -> DisagreementSet:
    h = sample_field(L, distribution, seed, replicate)
    plus, minus = ground_state_pair(h, p)
    return disagreement_set(plus, minus, seed, replicate, p)


def _trace(parent: np.ndarray, end: int, shape, L: int) -> tuple[tuple[int, int], ...]:
    path = []
    v = end
    while v >= 0:
        r, c = divmod(v, shape[1])
        path.append((r - L, c - L))
        v = int(parent.flat[v])
    return tuple(reversed(path))


def _crossing(mask: np.ndarray, sources: np.ndarray, targets: np.ndarray, L: int) -> CrossingReport:
    dist, parent = _backend.grid_bfs(np.ascontiguousarray(mask, dtype=np.uint8),
                                     np.ascontiguousarray(sources & mask, dtype=np.uint8))
    reach = np.where(targets & (dist >= 0), dist, np.iinfo(np.int64).max)
    end = int(np.argmin(reach))
    if reach.flat[end] == np.iinfo(np.int64).max:
        return CrossingReport(False)
    path = _trace(parent, end, mask.shape, L)
    return CrossingReport(True, len(path), path)


def _max_norm_grid(L: int) -> np.ndarray:
    r = np.abs(np.arange(-L, L + 1))
    return np.maximum(r[:, None], r[None, :])


def annulus_crossing(D: DisagreementSet, ell: int, alpha: float) -> tuple[CrossingReport, bool]:
    """Shortest disagreement path across Lambda(2 ell) minus Lambda(ell).

    The path runs from the ring at max-norm ell+1 to the ring at 2 ell and
    its length counts vertices. The event indicator is crossed and
    length <= ell^(1 + alpha).
    """
    if ell < 1:
        raise GeometryError("ell must be >= 1")
    if D.L < 2 * ell:
        raise GeometryError(f"disagreement set on L={D.L} does not cover Lambda({2 * ell})")
    D = D.restrict(2 * ell) if D.L > 2 * ell else D
    norm = _max_norm_grid(2 * ell)
    region = D.mask & (norm > ell)
    rep = _crossing(region, norm == ell + 1, norm == 2 * ell, 2 * ell)
    return rep, rep.indicator(ell ** (1.0 + alpha))


def rectangle_crossing(D: DisagreementSet, R: LatticeRectangle) -> CrossingReport:
    """Shortest disagreement path inside R joining its two short sides."""
    box = D.box
    if not (box.contains(R.x0, R.y0) and box.contains(R.x1, R.y1)):
        raise GeometryError(f"{R} is not inside Lambda({D.L})")
    L = D.L
    sub = D.mask[R.x0 + L:R.x1 + L + 1, R.y0 + L:R.y1 + L + 1]
    src = np.zeros(sub.shape, dtype=bool)
    dst = np.zeros(sub.shape, dtype=bool)
    if R.horizontal:
        src[0, :] = True
        dst[-1, :] = True
    else:
        src[:, 0] = True
        dst[:, -1] = True
    rep = _crossing(sub, src, dst, 0)
    if not rep.crossed:
        return rep
    path = tuple((x + R.x0, y + R.y0) for x, y in rep.path)
    return CrossingReport(True, rep.length, path)


def rectangle_crossed(D: DisagreementSet, R: LatticeRectangle) -> bool:
    return rectangle_crossing(D, R).crossed


def shrink_rectangle(R: LatticeRectangle, ell: int | None = None,
                     aspect: int = 200) -> LatticeRectangle:
    """Concentric 3a x 15a rectangle for an a x (aspect a) input.

    The long axis of the output is parallel to R's long side, so a crossing
    of R between its short sides contains a crossing of the output between
    its short sides. Exact centring needs the side difference (aspect - 15) a
    to be even. With ``ell`` the output must lie in Lambda(2 ell) minus Lambda(ell).
    """
    a = R.short
    if R.long != aspect * a:
        raise GeometryError(f"input must have aspect 1:{aspect}, got {R.width}x{R.height}")
    if ((aspect - 15) * a) % 2:
        raise GeometryError(f"short side a={a} gives no lattice rectangle with the same centre")
    cx2, cy2 = R.center2
    w, h = (15 * a, 3 * a) if R.horizontal else (3 * a, 15 * a)
    out = LatticeRectangle.from_center(cx2, cy2, w, h)
    if ell is not None:
        lo, hi = out.max_norm_range()
        if lo <= ell or hi > 2 * ell:
            raise GeometryError(f"{out} leaves the annulus Lambda({2 * ell}) minus Lambda({ell})")
    return out


# -- rectangle families --------------------------------------------------------

def family_violations(family, ell: int) -> list[str]:
    """Conditions of the well-separated rectangle family that ``family`` violates.

    Checks side ratio 1:5, short side in [10, ell/160], pairwise l1 distance
    >= 60 max short side, and containment in [-7 ell/4, 7 ell/4]^2 minus
    the open square (-5 ell/4, 5 ell/4)^2.
    """
    out = []
    for i, R in enumerate(family):
        if R.long != 5 * R.short:
            out.append(f"rectangle {i}: sides {R.width}x{R.height} are not in ratio 1:5")
        if not 10 <= R.short <= ell / 160.0:
            out.append(f"rectangle {i}: short side {R.short} outside [10, {ell / 160.0:g}]")
        lo, hi = R.max_norm_range()
        if hi > 7.0 * ell / 4.0 or lo < 5.0 * ell / 4.0:
            out.append(f"rectangle {i}: not inside the annulus [{5 * ell / 4:g}, {7 * ell / 4:g}]")
    for (i, A), (j, B) in combinations(enumerate(family), 2):
        need = 60 * max(A.short, B.short)
        if A.l1_distance(B) < need:
            out.append(f"rectangles {i},{j}: l1 distance {A.l1_distance(B)} < {need}")
    return out


def validate_family(family, ell: int) -> None:
    bad = family_violations(family, ell)
    if bad:
        raise GeometryError("; ".join(bad))


@dataclass(frozen=True)
class CrossingStatistics:
    ell: int
    n: int
    seed: int
    family: tuple[LatticeRectangle, ...]
    indicators: np.ndarray = field(repr=False)  # (n, |family|) bool

    @property
    def frequencies(self) -> np.ndarray:
        return self.indicators.mean(axis=0)

    @property
    def half_widths(self) -> np.ndarray:
        return np.array([binomial_half_width(f, self.n) for f in self.frequencies])

    @property
    def joint_frequency(self) -> float:
        return float(self.indicators.all(axis=1).mean())

    @property
    def joint_half_width(self) -> float:
        return binomial_half_width(self.joint_frequency, self.n)

    @property
    def rho_hat(self) -> float:
        return self.joint_frequency ** (1.0 / len(self.family))

    def ci(self, i: int) -> tuple[float, float]:
        f, w = self.frequencies[i], self.half_widths[i]
        return max(0.0, f - w), min(1.0, f + w)


def _crossing_row(args):
    ell, p, family, seed, r, distribution = args
    D = sample_disagreement(2 * ell, p, seed, r, distribution)
    return [rectangle_crossed(D, R) for R in family]


def estimate_crossing_statistics(p: ModelParams, ell: int, family, n: int, seed: int,
                                 distribution: str = "gaussian", validate: bool = True,
                                 threads: int = 1) -> CrossingStatistics:
    """Single and joint crossing frequencies of ``family`` over ``n`` fields on Lambda(2 ell)."""
    family = tuple(family)
    if not family:
        raise GeometryError("empty rectangle family")
    if validate:
        validate_family(family, ell)
    box = Box(2 * ell)
    for R in family:
        if not (box.contains(R.x0, R.y0) and box.contains(R.x1, R.y1)):
            raise GeometryError(f"{R} is not inside Lambda({2 * ell})")
    rows = map_replicates(_crossing_row, [(ell, p, family, seed, r, distribution) for r in range(n)], threads)
    return CrossingStatistics(ell, n, seed, family, np.asarray(rows, dtype=bool).reshape(n, len(family)))


# -- continuum rescaling -------------------------------------------------------

def _bfs_tree(mask: np.ndarray, src: tuple[int, int]):
    s = np.zeros(mask.shape, dtype=np.uint8)
    s[src] = 1
    return _backend.grid_bfs(np.ascontiguousarray(mask, dtype=np.uint8), s)


def _cell_path(parent: np.ndarray, end: tuple[int, int], shape) -> list[tuple[int, int]]:
    path = []
    v = end[0] * shape[1] + end[1]
    while v >= 0:
        path.append(divmod(v, shape[1]))
        v = int(parent.flat[v])
    return path[::-1]


def _spread(points: list, k: int) -> list:
    if len(points) <= k:
        return points
    idx = np.linspace(0, len(points) - 1, k).round().astype(int)
    return [points[i] for i in sorted(set(idx.tolist()))]


def cluster_contacts(cluster: np.ndarray, ring: np.ndarray) -> list[tuple[int, int]]:
    """Contact cells of a cluster: its cells on the clipping rings plus its
    endpoints (degree <= 1); if that gives fewer than two, the two ends of
    a double-sweep diameter are added."""
    pad = np.pad(cluster, 1)
    deg = (pad[2:, 1:-1].astype(int) + pad[:-2, 1:-1] + pad[1:-1, 2:] + pad[1:-1, :-2])
    cells = [tuple(int(v) for v in c) for c in np.argwhere(cluster & (ring | (deg <= 1)))]
    if len(cells) >= 2:
        return cells
    start = cells[0] if cells else tuple(int(v) for v in np.argwhere(cluster)[0])
    d, _ = _bfs_tree(cluster, start)
    far = tuple(int(v) for v in np.unravel_index(int(np.argmax(d)), d.shape))
    d2, _ = _bfs_tree(cluster, far)
    other = tuple(int(v) for v in np.unravel_index(int(np.argmax(d2)), d2.shape))
    return list(dict.fromkeys(cells + [far, other]))


def rescale_to_curve_system(D: DisagreementSet, ell: int, max_contacts: int = 8) -> CurveSystem:
    """Curves from the disagreement set, dilated by 4/ell and clipped to
    [-7, 7]^2 minus (-5, 5)^2.

    Per 4-connected cluster of the clipped set: pick its contact points
    (see ``cluster_contacts``; at most ``max_contacts``, evenly spaced) and
    emit one shortest in-cluster path per pair of contacts, deduplicated
    up to reversal. Step length is delta = 4/ell.
    """
    if D.L < 2 * ell:
        raise GeometryError(f"disagreement set on L={D.L} does not cover Lambda({2 * ell})")
    D = D.restrict(2 * ell) if D.L > 2 * ell else D
    L = D.L
    scale = 4.0 / ell
    norm = _max_norm_grid(L)
    lo = int(np.ceil(5 * ell / 4.0))
    hi = int(np.floor(7 * ell / 4.0))
    clipped = D.mask & (norm >= lo) & (norm <= hi)
    ring = (norm == lo) | (norm == hi)
    labels, count = ndimage.label(clipped, structure=_FOUR)
    seen = set()
    curves = []
    for lab in range(1, count + 1):
        cluster = labels == lab
        contacts = _spread(cluster_contacts(cluster, ring), max_contacts)
        for i, a in enumerate(contacts):
            if i + 1 >= len(contacts):
                break
            _, parent = _bfs_tree(cluster, a)
            for b in contacts[i + 1:]:
                cells = _cell_path(parent, b, cluster.shape)
                if len(cells) < 2:
                    continue
                key = tuple(cells)
                if key in seen or key[::-1] in seen:
                    continue
                seen.add(key)
                pts = (np.asarray(cells, dtype=np.float64) - L) * scale
                curves.append(PolygonalCurve(pts, scale))
    return CurveSystem(tuple(curves), scale, window=7.0, hole=5.0)


def lattice_to_continuum(x: int, y: int, ell: int) -> tuple[float, float]:
    return 4.0 * x / ell, 4.0 * y / ell


# -- sparsity of disagreement curves ---------------------------------------------

def _k0_row(args):
    ell, p, seed, r, distribution, gamma, direction_cap, max_contacts, lattice_anchors = args
    D = sample_disagreement(2 * ell, p, seed, r, distribution)
    return system_k0(rescale_to_curve_system(D, ell, max_contacts), gamma,
                     direction_cap=direction_cap, lattice_anchors=lattice_anchors)


def k0_tail_experiment(p: ModelParams, ell: int, n: int, seed: int, gamma: float,
                       distribution: str = "gaussian", direction_cap: int = 2,
                       max_contacts: int = 4, lattice_anchors: bool = False,
                       threads: int = 1) -> K0Tail:
    """Tail of the sparsity level k0 over disagreement curve systems at scale ell.

    Candidate axes default to curve-vertex anchors only, which keeps a
    system to seconds; the run detector's default adds lattice anchors.
    """
    args = [(ell, p, seed, r, distribution, gamma, direction_cap, max_contacts, lattice_anchors)
            for r in range(n)]
    return k0_tail(map_replicates(_k0_row, args, threads))
