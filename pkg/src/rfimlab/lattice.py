"""Lattice geometry on Z^2: boxes, vertex sets, edge boundaries, simple
connectivity, polyomino enumeration and the hole-descent procedure.

Coordinates are integer pairs ``(x, y)``. A ``Box`` of half-side ``L`` is
stored as an array indexed ``[x + L, y + L]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy import ndimage

FOUR_NEIGHBOURS = ((1, 0), (-1, 0), (0, 1), (0, -1))
_CROSS = ndimage.generate_binary_structure(2, 1)

#: enumeration grows exponentially; larger budgets must be requested explicitly
ENUMERATION_PERIMETER_CAP = 16


class LatticeError(ValueError):
    pass


@dataclass(frozen=True)
class Box:
    """The square Lambda(L) = {-L..L}^2."""

    L: int

    def __post_init__(self):
        if self.L < 0:
            raise LatticeError(f"box half-side must be >= 0, got {self.L}")

    @property
    def side(self) -> int:
        return 2 * self.L + 1

    @property
    def n_vertices(self) -> int:
        return self.side ** 2

    @property
    def shape(self) -> tuple[int, int]:
        return (self.side, self.side)

    def contains(self, x: int, y: int) -> bool:
        return abs(x) <= self.L and abs(y) <= self.L

    def index(self, x: int, y: int) -> tuple[int, int]:
        return (x + self.L, y + self.L)

    def vertex_set(self) -> "VertexSet":
        return VertexSet(np.ones(self.shape, dtype=bool), (-self.L, -self.L))

    def n_internal_edges(self) -> int:
        return 2 * self.side * (self.side - 1)

    def n_boundary_edges(self) -> int:
        """Edges joining the box to Z^2 minus the box."""
        return 4 * self.side


class VertexSet:
    """Finite subset of Z^2 stored as a dense boolean grid over its bounding box.

    ``mask[i, j]`` is membership of ``(origin[0] + i, origin[1] + j)``.
    Instances are immutable, hashable and compare by membership.
    """

    __slots__ = ("_mask", "_origin", "_area", "_key")

    def __init__(self, mask, origin=(0, 0)):
        mask = np.asarray(mask, dtype=bool)
        if mask.ndim != 2:
            raise LatticeError("vertex-set mask must be 2-dimensional")
        if mask.any():
            rows = np.flatnonzero(mask.any(axis=1))
            cols = np.flatnonzero(mask.any(axis=0))
            mask = mask[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]
            origin = (int(origin[0]) + int(rows[0]), int(origin[1]) + int(cols[0]))
        else:
            mask = np.zeros((0, 0), dtype=bool)
            origin = (0, 0)
        mask = mask.copy()
        mask.flags.writeable = False
        self._mask = mask
        self._origin = (int(origin[0]), int(origin[1]))
        self._area = int(mask.sum())
        self._key = None

    @classmethod
    def from_points(cls, points) -> "VertexSet":
        pts = np.asarray(list(points), dtype=np.int64).reshape(-1, 2)
        if len(pts) == 0:
            return cls(np.zeros((0, 0), dtype=bool))
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        mask = np.zeros(tuple(hi - lo + 1), dtype=bool)
        mask[pts[:, 0] - lo[0], pts[:, 1] - lo[1]] = True
        return cls(mask, (int(lo[0]), int(lo[1])))

    @classmethod
    def from_box_mask(cls, mask, box: Box) -> "VertexSet":
        return cls(mask, (-box.L, -box.L))

    @property
    def mask(self) -> np.ndarray:
        return self._mask

    @property
    def origin(self) -> tuple[int, int]:
        return self._origin

    @property
    def area(self) -> int:
        return self._area

    def __len__(self) -> int:
        return self._area

    def __bool__(self) -> bool:
        return self._area > 0

    def points(self) -> list[tuple[int, int]]:
        ii, jj = np.nonzero(self._mask)
        return [(int(i) + self._origin[0], int(j) + self._origin[1]) for i, j in zip(ii, jj)]

    def point_array(self) -> np.ndarray:
        ii, jj = np.nonzero(self._mask)
        return np.column_stack([ii + self._origin[0], jj + self._origin[1]]).astype(np.int64)

    def __iter__(self):
        return iter(self.points())

    def __contains__(self, p) -> bool:
        i = p[0] - self._origin[0]
        j = p[1] - self._origin[1]
        return 0 <= i < self._mask.shape[0] and 0 <= j < self._mask.shape[1] and bool(self._mask[i, j])

    def _canonical(self):
        if self._key is None:
            self._key = (self._origin, self._mask.shape, np.packbits(self._mask).tobytes())
        return self._key

    def __eq__(self, other) -> bool:
        if not isinstance(other, VertexSet):
            return NotImplemented
        return self._canonical() == other._canonical()

    def __hash__(self) -> int:
        return hash(self._canonical())

    def __repr__(self) -> str:
        return f"VertexSet(area={self._area}, origin={self._origin}, shape={self._mask.shape})"

    def bounds(self) -> tuple[int, int, int, int]:
        """``(xmin, xmax, ymin, ymax)``; raises on the empty set."""
        if not self._area:
            raise LatticeError("empty vertex set has no bounds")
        return (self._origin[0], self._origin[0] + self._mask.shape[0] - 1,
                self._origin[1], self._origin[1] + self._mask.shape[1] - 1)

    def window(self, xmin: int, xmax: int, ymin: int, ymax: int) -> np.ndarray:
        """Membership mask over the given window (clipping members outside it)."""
        out = np.zeros((xmax - xmin + 1, ymax - ymin + 1), dtype=bool)
        if not self._area:
            return out
        x0, x1, y0, y1 = self.bounds()
        ax0, ax1 = max(x0, xmin), min(x1, xmax)
        ay0, ay1 = max(y0, ymin), min(y1, ymax)
        if ax0 > ax1 or ay0 > ay1:
            return out
        out[ax0 - xmin:ax1 - xmin + 1, ay0 - ymin:ay1 - ymin + 1] = \
            self._mask[ax0 - x0:ax1 - x0 + 1, ay0 - y0:ay1 - y0 + 1]
        return out

    def box_mask(self, box: Box) -> np.ndarray:
        return self.window(-box.L, box.L, -box.L, box.L)

    def translate(self, dx: int, dy: int) -> "VertexSet":
        return VertexSet(self._mask, (self._origin[0] + dx, self._origin[1] + dy))

    def _binary(self, other: "VertexSet", op) -> "VertexSet":
        if not self._area and not other._area:
            return VertexSet(np.zeros((0, 0), dtype=bool))
        boxes = [s.bounds() for s in (self, other) if s._area]
        xmin = min(b[0] for b in boxes)
        xmax = max(b[1] for b in boxes)
        ymin = min(b[2] for b in boxes)
        ymax = max(b[3] for b in boxes)
        a = self.window(xmin, xmax, ymin, ymax)
        b = other.window(xmin, xmax, ymin, ymax)
        return VertexSet(op(a, b), (xmin, ymin))

    def __or__(self, other):
        return self._binary(other, np.logical_or)

    def __and__(self, other):
        return self._binary(other, np.logical_and)

    def __sub__(self, other):
        return self._binary(other, lambda a, b: a & ~b)

    def issubset(self, other: "VertexSet") -> bool:
        return (self - other).area == 0

    def intersect_box(self, box: Box) -> "VertexSet":
        return VertexSet(self.box_mask(box), (-box.L, -box.L))


@dataclass(frozen=True)
class EdgeSet:
    """Set of nearest-neighbour edges, each stored as a sorted vertex pair."""

    edges: frozenset

    def __post_init__(self):
        for (a, b) in self.edges:
            if abs(a[0] - b[0]) + abs(a[1] - b[1]) != 1:
                raise LatticeError(f"{a}-{b} is not a nearest-neighbour edge")

    def __len__(self) -> int:
        return len(self.edges)

    def __iter__(self):
        return iter(self.edges)

    @property
    def perimeter(self) -> int:
        return len(self.edges)


def _edge(a, b):
    return (a, b) if a <= b else (b, a)


def edge_boundary(A: VertexSet) -> EdgeSet:
    """Edges of Z^2 with exactly one endpoint in ``A`` (never clipped to a box)."""
    out = set()
    for (x, y) in A.points():
        for dx, dy in FOUR_NEIGHBOURS:
            q = (x + dx, y + dy)
            if q not in A:
                out.add(_edge((x, y), q))
    return EdgeSet(frozenset(out))


def perimeter(A: VertexSet) -> int:
    """``|edge_boundary(A)|`` computed on the mask."""
    if not A.area:
        return 0
    m = np.pad(A.mask, 1)
    return int((m[1:, :] != m[:-1, :]).sum() + (m[:, 1:] != m[:, :-1]).sum())


def mask_perimeter(mask: np.ndarray) -> int:
    """Full-lattice perimeter of a boolean mask (cells outside the mask are absent)."""
    m = np.pad(np.asarray(mask, dtype=bool), 1)
    return int((m[1:, :] != m[:-1, :]).sum() + (m[:, 1:] != m[:, :-1]).sum())


def is_connected(A: VertexSet) -> bool:
    if not A.area:
        return False
    _, n = ndimage.label(A.mask, structure=_CROSS)
    return n == 1


def holes(A: VertexSet) -> list[VertexSet]:
    """Finite components of Z^2 minus A (complement analysed on the bounding box inflated by 1)."""
    if not A.area:
        return []
    comp = ~np.pad(A.mask, 1)
    labels, n = ndimage.label(comp, structure=_CROSS)
    outside = labels[0, 0]
    ox, oy = A.origin[0] - 1, A.origin[1] - 1
    return [VertexSet(labels == k, (ox, oy)) for k in range(1, n + 1) if k != outside]


def is_simply_connected(A: VertexSet) -> bool:
    """Connected, and with connected complement in Z^2."""
    if not A.area:
        raise LatticeError("simple connectivity is undefined for the empty set")
    if not is_connected(A):
        return False
    comp = ~np.pad(A.mask, 1)
    _, n = ndimage.label(comp, structure=_CROSS)
    return n == 1


def _bbox_ok(cells, pmax):
    xs = [c[0] for c in cells]
    ys = [c[1] for c in cells]
    return 2 * ((max(xs) - min(xs) + 1) + (max(ys) - min(ys) + 1)) <= pmax


def fixed_polyominoes(perimeter_max: int) -> Iterator[tuple[tuple[int, int], ...]]:
    """Redelmeier enumeration of fixed polyominoes whose bounding box
    semi-perimeter allows a perimeter <= ``perimeter_max``.

    Each polyomino is produced exactly once, anchored so that its
    lexicographically smallest ``(y, x)`` cell is the origin.
    """
    origin = (0, 0)

    def allowed(c):
        return c[1] > 0 or (c[1] == 0 and c[0] >= 0)

    poly: list[tuple[int, int]] = []
    seen = {origin}

    def grow(untried: list):
        while untried:
            cell = untried.pop()
            poly.append(cell)
            if _bbox_ok(poly, perimeter_max):
                yield tuple(poly)
                fresh = []
                for dx, dy in FOUR_NEIGHBOURS:
                    nb = (cell[0] + dx, cell[1] + dy)
                    if allowed(nb) and nb not in seen:
                        fresh.append(nb)
                for nb in fresh:
                    seen.add(nb)
                yield from grow(untried + fresh)
                for nb in fresh:
                    seen.discard(nb)
            poly.pop()

    yield from grow([origin])


def enumerate_simply_connected(perimeter_max: int, cap: int = ENUMERATION_PERIMETER_CAP) -> Iterator[VertexSet]:
    """Every simply connected finite A containing the origin with |dA| <= perimeter_max.

    Each set is yielded once, in a deterministic order.
    """
    if perimeter_max < 4:
        raise LatticeError("perimeter_max must be >= 4")
    if perimeter_max > cap:
        raise LatticeError(f"perimeter_max={perimeter_max} exceeds the enumeration cap {cap}")
    for cells in fixed_polyominoes(perimeter_max):
        shape = VertexSet.from_points(cells)
        if perimeter(shape) > perimeter_max or not is_simply_connected(shape):
            continue
        for (cx, cy) in sorted(cells):
            yield shape.translate(-cx, -cy)


def simply_connected_shapes(perimeter_max: int, cap: int = ENUMERATION_PERIMETER_CAP,
                            exact: bool = False) -> list[VertexSet]:
    """One representative per translation class (anchored polyomino), optionally
    restricted to perimeter exactly ``perimeter_max``."""
    if perimeter_max < 4:
        raise LatticeError("perimeter_max must be >= 4")
    if perimeter_max > cap:
        raise LatticeError(f"perimeter_max={perimeter_max} exceeds the enumeration cap {cap}")
    out = []
    for cells in fixed_polyominoes(perimeter_max):
        shape = VertexSet.from_points(cells)
        p = perimeter(shape)
        if p > perimeter_max or (exact and p != perimeter_max):
            continue
        if is_simply_connected(shape):
            out.append(shape)
    return out


def constant_sign_components(spins: np.ndarray, box: Box | None = None) -> list[tuple[VertexSet, int]]:
    """Maximal connected constant-sign subsets of a +-1 array on a box.

    Components are ordered by sign (+ first) then by label order.
    """
    spins = np.asarray(spins)
    if box is None:
        box = Box((spins.shape[0] - 1) // 2)
    out = []
    for sign in (1, -1):
        labels, n = ndimage.label(spins == sign, structure=_CROSS)
        if n == 0:
            continue
        slices = ndimage.find_objects(labels)
        for k, sl in enumerate(slices, start=1):
            sub = labels[sl] == k
            out.append((VertexSet(sub, (sl[0].start - box.L, sl[1].start - box.L)), sign))
    return out


def component_of(spins: np.ndarray, box: Box, x: int, y: int) -> tuple[VertexSet, int]:
    sign = int(spins[box.index(x, y)])
    labels, _ = ndimage.label(spins == sign, structure=_CROSS)
    k = labels[box.index(x, y)]
    return VertexSet.from_box_mask(labels == k, box), sign


def hole_descent(spins: np.ndarray, box: Box | None = None, start=(0, 0)) -> tuple[VertexSet, int]:
    """Descend from ``start`` through holes until a simply connected
    constant-sign component is reached.

    While the current component has a hole, jump to the smallest vertex of
    its first hole; each step moves strictly inside the previous region.
    """
    spins = np.asarray(spins)
    if box is None:
        box = Box((spins.shape[0] - 1) // 2)
    v = start
    while True:
        comp, sign = component_of(spins, box, *v)
        hs = holes(comp)
        if not hs:
            return comp, sign
        v = min(hs[0].points())


def isoperimetric_holds(A: VertexSet) -> bool:
    """|dA| >= sqrt(|A|) / 4 (the weak form used in the lower-bound argument)."""
    return perimeter(A) >= 0.25 * np.sqrt(A.area)
