"""Grid geometry: occupancy maps, supercover line of sight, BFS distances and
the egocentric view window.

Cells are ``(row, col)`` tuples. Headings are integers 0..3 for North, East,
South, West; North decreases the row index.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Optional

import numpy as np

NORTH, EAST, SOUTH, WEST = 0, 1, 2, 3
HEADING_NAMES = ("N", "E", "S", "W")
# forward unit vector per heading, in (drow, dcol)
FORWARD = ((-1, 0), (0, 1), (1, 0), (0, -1))
# the agent's right-hand side per heading
RIGHT = ((0, 1), (1, 0), (0, -1), (-1, 0))

Cell = tuple[int, int]


@dataclass(frozen=True, eq=False)
class GridMap:
    """Occupancy grid. ``occupied[r, c]`` is True for walls and obstacles."""

    occupied: np.ndarray
    cell_size_m: float = 0.25

    def __post_init__(self) -> None:
        occ = np.asarray(self.occupied, dtype=bool)
        occ.setflags(write=False)
        object.__setattr__(self, "occupied", occ)

    @property
    def height(self) -> int:
        return self.occupied.shape[0]

    @property
    def width(self) -> int:
        return self.occupied.shape[1]

    def in_bounds(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def is_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and not self.occupied[cell]

    def padded(self, pad: int) -> np.ndarray:
        """Occupancy with ``pad`` rings of occupied cells around it (cached)."""
        cache = self.__dict__.setdefault("_padded", {})
        if pad not in cache:
            h, w = self.occupied.shape
            out = np.ones((h + 2 * pad, w + 2 * pad), dtype=bool)
            out[pad:pad + h, pad:pad + w] = self.occupied
            out.setflags(write=False)
            cache[pad] = out
        return cache[pad]

    def free_cells(self) -> list[Cell]:
        return [(int(r), int(c)) for r, c in zip(*np.nonzero(~self.occupied))]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridMap):
            return NotImplemented
        return self.cell_size_m == other.cell_size_m and np.array_equal(self.occupied, other.occupied)

    __hash__ = None  # type: ignore[assignment]

    @classmethod
    def from_ascii(cls, rows: Iterable[str], cell_size_m: float = 0.25) -> "GridMap":
        """Build a map from strings where ``#`` marks an occupied cell."""
        return cls(np.array([[ch == "#" for ch in row] for row in rows], dtype=bool), cell_size_m)


# ---------------------------------------------------------------- line of sight

@lru_cache(maxsize=None)
def supercover_between(dr: int, dc: int) -> tuple[Cell, ...]:
    """Offsets of cells strictly between ``(0, 0)`` and ``(dr, dc)`` whose closed
    square touches the segment joining the two cell centres.

    Corner touches count, so a segment passing exactly through a lattice corner
    picks up both cells adjacent to it. Computed with exact rationals.
    """
    cells = []
    for i in range(min(0, dr), max(0, dr) + 1):
        for j in range(min(0, dc), max(0, dc) + 1):
            if (i, j) in ((0, 0), (dr, dc)):
                continue
            lo, hi = Fraction(0), Fraction(1)
            for d, k in ((dr, i), (dc, j)):
                if d == 0:
                    if abs(k) * 2 > 1:
                        lo, hi = Fraction(1), Fraction(0)
                    continue
                a, b = Fraction(2 * k - 1, 2 * d), Fraction(2 * k + 1, 2 * d)
                lo, hi = max(lo, min(a, b)), min(hi, max(a, b))
            if lo <= hi:
                cells.append((i, j))
    return tuple(cells)


def line_of_sight(grid: GridMap, a: Cell, b: Cell) -> bool:
    """True iff no occupied cell strictly between ``a`` and ``b`` touches the
    segment between their centres. Endpoint occupancy is ignored."""
    ar, ac = a
    for dr, dc in supercover_between(b[0] - ar, b[1] - ac):
        if grid.occupied[ar + dr, ac + dc]:
            return False
    return True


# ---------------------------------------------------------------- shortest paths

def distance_field(grid: GridMap, sources: Iterable[Cell]) -> np.ndarray:
    """Multi-source BFS over 4-connected free cells; -1 marks unreachable."""
    h, w = grid.occupied.shape
    occ = grid.occupied.ravel().tolist()  # plain lists: element access on arrays is slow
    dist = [-1] * (h * w)
    queue: deque[int] = deque()
    for cell in sources:
        if grid.is_free(cell) and dist[cell[0] * w + cell[1]] < 0:
            dist[cell[0] * w + cell[1]] = 0
            queue.append(cell[0] * w + cell[1])
    while queue:
        i = queue.popleft()
        d = dist[i] + 1
        r, c = divmod(i, w)
        for j, ok in ((i - w, r > 0), (i + 1, c < w - 1), (i + w, r < h - 1), (i - 1, c > 0)):
            if ok and not occ[j] and dist[j] < 0:
                dist[j] = d
                queue.append(j)
    return np.array(dist, dtype=np.int64).reshape(h, w)


def geodesic_distance(grid: GridMap, start: Cell, goal_region: Iterable[Cell]) -> Optional[int]:
    """Shortest 4-connected path length from ``start`` to any cell of
    ``goal_region``, or None when no path exists."""
    d = int(distance_field(grid, goal_region)[start])
    return None if d < 0 else d


def is_connected(grid: GridMap) -> bool:
    free = grid.free_cells()
    if not free:
        return False
    return int((distance_field(grid, free[:1]) >= 0).sum()) == len(free)


# ---------------------------------------------------------------- view window

@dataclass(frozen=True)
class ViewGeometry:
    """Precomputed egocentric window offsets for a K x K view.

    Window cell ``(i, j)`` sits ``K-1-i`` cells ahead and ``j - K//2`` cells to
    the right of the agent, so the agent occupies ``(K-1, K//2)``.
    """

    k: int
    offsets: np.ndarray = field(repr=False)  # (4, K*K, 2) world offsets per heading
    between: np.ndarray = field(repr=False)  # (4, K*K, L, 2) supercover offsets
    between_valid: np.ndarray = field(repr=False)  # (4, K*K, L)


@lru_cache(maxsize=None)
def view_geometry(k: int) -> ViewGeometry:
    if k < 1 or k % 2 == 0:
        raise ValueError(f"view window size must be odd and positive, got {k}")
    offsets = np.zeros((4, k * k, 2), dtype=np.int64)
    covers = []
    for h in range(4):
        (fr, fc), (rr, rc) = FORWARD[h], RIGHT[h]
        row_cover = []
        for i in range(k):
            for j in range(k):
                ahead, right = k - 1 - i, j - k // 2
                dr, dc = ahead * fr + right * rr, ahead * fc + right * rc
                offsets[h, i * k + j] = (dr, dc)
                row_cover.append(supercover_between(dr, dc))
        covers.append(row_cover)
    length = max(1, max(len(c) for row in covers for c in row))
    between = np.zeros((4, k * k, length, 2), dtype=np.int64)
    valid = np.zeros((4, k * k, length), dtype=bool)
    for h, row_cover in enumerate(covers):
        for n, cover in enumerate(row_cover):
            if cover:
                between[h, n, : len(cover)] = cover
                valid[h, n, : len(cover)] = True
    for arr in (offsets, between, valid):
        arr.setflags(write=False)
    return ViewGeometry(k, offsets, between, valid)


@lru_cache(maxsize=None)
def flat_view_offsets(k: int, padded_width: int) -> tuple[np.ndarray, np.ndarray]:
    """Window and supercover offsets as flat indices into a raveled map of
    width ``padded_width``, shapes (4, K*K) and (4, K*K, L)."""
    geo = view_geometry(k)
    window = geo.offsets[..., 0] * padded_width + geo.offsets[..., 1]
    between = geo.between[..., 0] * padded_width + geo.between[..., 1]
    for arr in (window, between):
        arr.setflags(write=False)
    return window, between


def window_cells(k: int, cell: Cell, heading: int) -> np.ndarray:
    """World coordinates (K*K, 2) covered by the window, row-major."""
    return view_geometry(k).offsets[heading] + np.asarray(cell)


def window_visibility(grid: GridMap, k: int, cell: Cell, heading: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(world_cells, in_bounds, visible)`` for every window cell.

    Out-of-bounds cells are never visible; out-of-bounds cells on a sight line
    block it like walls.
    """
    geo = view_geometry(k)
    world = geo.offsets[heading] + np.asarray(cell)
    h, w = grid.occupied.shape
    inb = (world[:, 0] >= 0) & (world[:, 0] < h) & (world[:, 1] >= 0) & (world[:, 1] < w)
    pad = k
    occ_pad = grid.padded(pad)
    idx = geo.between[heading] + (np.asarray(cell) + pad)
    blocked = occ_pad[idx[..., 0], idx[..., 1]] & geo.between_valid[heading]
    visible = inb & ~blocked.any(axis=1)
    return world, inb, visible
