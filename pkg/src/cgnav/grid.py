"""Ground-truth occupancy grids, the plain-text grid format and grid queries."""

from __future__ import annotations

import enum
import heapq
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels

FREE_CHAR = "."
OCCUPIED_CHAR = "#"
UNKNOWN_CHAR = "?"


class CellState(enum.IntEnum):
    FREE = 0
    OCCUPIED = 1


class GridFormatError(ValueError):
    """Raised for malformed grid files; the message names the offending line."""


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """Binary occupancy grid indexed ``[row, col]``.

    World ``(x, y)`` lies in cell ``(col, row) = (floor(x / res), floor(y / res))``.
    Row 0 is the first map line of the text format.
    """

    occupied: np.ndarray
    resolution: float

    def __post_init__(self):
        occ = np.array(self.occupied, dtype=bool, copy=True)
        if occ.ndim != 2 or occ.shape[0] < 1 or occ.shape[1] < 1:
            raise ValueError(f"grid must be 2-D with at least one cell, got shape {occ.shape}")
        if not self.resolution > 0:
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        occ.flags.writeable = False
        object.__setattr__(self, "occupied", occ)
        object.__setattr__(self, "resolution", float(self.resolution))

    @classmethod
    def empty(cls, width: int, height: int, resolution: float) -> OccupancyGrid:
        return cls(np.zeros((height, width), dtype=bool), resolution)

    @property
    def width(self) -> int:
        return self.occupied.shape[1]

    @property
    def height(self) -> int:
        return self.occupied.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.occupied.shape

    @property
    def extent(self) -> tuple[float, float]:
        """World size ``(x_max, y_max)`` in meters."""
        return self.width * self.resolution, self.height * self.resolution

    def __eq__(self, other):
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return self.resolution == other.resolution and np.array_equal(self.occupied, other.occupied)

    def __hash__(self):
        return hash((self.resolution, self.occupied.shape, self.occupied.tobytes()))

    def cell_of(self, position) -> tuple[int, int]:
        """``(row, col)`` containing a world position (may be out of bounds)."""
        x, y = position
        return math.floor(y / self.resolution), math.floor(x / self.resolution)

    def contains(self, position) -> bool:
        r, c = self.cell_of(position)
        return 0 <= r < self.height and 0 <= c < self.width

    def is_free(self, position) -> bool:
        """False for occupied cells and for anything outside the grid."""
        if not self.contains(position):
            return False
        r, c = self.cell_of(position)
        return not self.occupied[r, c]

    def cell_center(self, row: int, col: int) -> np.ndarray:
        return np.array([(col + 0.5) * self.resolution, (row + 0.5) * self.resolution])

    def as_uint8(self) -> np.ndarray:
        return self.occupied.astype(np.uint8)


@dataclass(frozen=True)
class GoalRegion:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"goal radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    def distance(self, position) -> float:
        return math.hypot(position[0] - self.center[0], position[1] - self.center[1])

    def contains(self, position) -> bool:
        return self.distance(position) <= self.radius


def format_grid(occupied: np.ndarray, resolution: float, unknown: np.ndarray | None = None) -> str:
    """Serialize to the text format; ``unknown`` cells are written as ``?``."""
    h, w = occupied.shape
    chars = np.where(occupied, OCCUPIED_CHAR, FREE_CHAR)
    if unknown is not None:
        chars = np.where(unknown, UNKNOWN_CHAR, chars)
    lines = [f"{w} {h} {resolution!r}"]
    lines.extend("".join(row) for row in chars)
    return "\n".join(lines) + "\n"


def parse_grid(text: str, allow_unknown: bool = False):
    """Parse the text format.

    Returns ``(occupied, unknown, resolution)``; ``unknown`` is ``None`` unless
    ``allow_unknown`` is set.
    """
    lines = text.splitlines()
    if not lines:
        raise GridFormatError("line 1: missing header 'W H RES'")
    parts = lines[0].split()
    if len(parts) != 3:
        raise GridFormatError(f"line 1: header must be 'W H RES', got {lines[0]!r}")
    try:
        w, h = int(parts[0]), int(parts[1])
        res = float(parts[2])
    except ValueError as exc:
        raise GridFormatError(f"line 1: cannot parse header {lines[0]!r}") from exc
    if w < 1 or h < 1 or not res > 0 or not math.isfinite(res):
        raise GridFormatError(f"line 1: invalid dimensions or resolution in {lines[0]!r}")
    body = lines[1:]
    while len(body) > h and body[-1] == "":
        body.pop()
    if len(body) != h:
        raise GridFormatError(f"line {len(body) + 2}: expected {h} rows, found {len(body)}")
    legal = {FREE_CHAR, OCCUPIED_CHAR} | ({UNKNOWN_CHAR} if allow_unknown else set())
    occupied = np.zeros((h, w), dtype=bool)
    unknown = np.zeros((h, w), dtype=bool)
    for r, row in enumerate(body):
        lineno = r + 2
        if len(row) != w:
            raise GridFormatError(f"line {lineno}: expected {w} cells, found {len(row)}")
        bad = set(row) - legal
        if bad:
            raise GridFormatError(f"line {lineno}: illegal cell character {sorted(bad)[0]!r}")
        chars = np.frombuffer(row.encode("ascii"), dtype="S1")
        occupied[r] = chars == OCCUPIED_CHAR.encode()
        unknown[r] = chars == UNKNOWN_CHAR.encode()
    return occupied, (unknown if allow_unknown else None), res


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    with open(tmp, "w", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def save_grid(grid: OccupancyGrid, path) -> None:
    atomic_write_text(path, format_grid(grid.occupied, grid.resolution))


def load_grid(path) -> OccupancyGrid:
    occupied, _, res = parse_grid(Path(path).read_text())
    return OccupancyGrid(occupied, res)


def _check_inside(grid: OccupancyGrid, p, name: str) -> None:
    x, y = p
    xmax, ymax = grid.extent
    if not (0.0 <= x < xmax and 0.0 <= y < ymax):
        raise ValueError(f"{name} {tuple(p)} lies outside the grid [0, {xmax}) x [0, {ymax})")


def segment_collides(grid: OccupancyGrid, p0, p1) -> bool:
    """True iff any cell containing a point of segment ``p0``-``p1`` is occupied."""
    _check_inside(grid, p0, "p0")
    _check_inside(grid, p1, "p1")
    res = grid.resolution
    return bool(_kernels.segment_blocked(grid.as_uint8(), p0[0] / res, p0[1] / res,
                                         p1[0] / res, p1[1] / res))


def supercover(p0, p1, resolution: float) -> list[tuple[int, int]]:
    """Ordered ``(row, col)`` cells touched by the segment from ``p0`` to ``p1``."""
    rows, cols, n = _kernels.segment_cells(p0[0] / resolution, p0[1] / resolution,
                                           p1[0] / resolution, p1[1] / resolution)
    return list(zip(rows[:n].tolist(), cols[:n].tolist()))


_MOVES = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def free_neighbors(occupied: np.ndarray, r: int, c: int):
    """8-connected free neighbours with unit step costs; diagonals may not cut corners."""
    h, w = occupied.shape
    for dr, dc in _MOVES:
        rr, cc = r + dr, c + dc
        if not (0 <= rr < h and 0 <= cc < w) or occupied[rr, cc]:
            continue
        if dr and dc and (occupied[r + dr, c] or occupied[r, c + dc]):
            continue
        yield rr, cc, (math.sqrt(2.0) if dr and dc else 1.0)


def goal_cells(grid: OccupancyGrid, goal: GoalRegion) -> np.ndarray:
    """Mask of cells whose centers lie inside the goal disc."""
    res = grid.resolution
    ys = (np.arange(grid.height) + 0.5) * res
    xs = (np.arange(grid.width) + 0.5) * res
    gx, gy = goal.center
    return (xs[None, :] - gx) ** 2 + (ys[:, None] - gy) ** 2 <= goal.radius ** 2


def shortest_path_oracle(grid: OccupancyGrid, start, goal: GoalRegion) -> float | None:
    """Length (m) of a shortest 8-connected free-cell path from the start cell
    to any free cell centred in the goal region, or ``None`` if unreachable."""
    _check_inside(grid, start, "start")
    sr, sc = grid.cell_of(start)
    occ = grid.occupied
    if occ[sr, sc]:
        raise ValueError(f"start {tuple(start)} lies in an occupied cell")
    target = goal_cells(grid, goal) & ~occ
    if not target.any():
        return None
    dist = {(sr, sc): 0.0}
    heap = [(0.0, sr, sc)]
    while heap:
        d, r, c = heapq.heappop(heap)
        if d > dist[(r, c)]:
            continue
        if target[r, c]:
            return d * grid.resolution
        for rr, cc, step in free_neighbors(occ, r, c):
            nd = d + step
            if nd < dist.get((rr, cc), math.inf):
                dist[(rr, cc)] = nd
                heapq.heappush(heap, (nd, rr, cc))
    return None


def reachable_mask(occupied: np.ndarray, start_cell: tuple[int, int]) -> np.ndarray:
    """Flood fill with the same connectivity as :func:`shortest_path_oracle`."""
    seen = np.zeros(occupied.shape, dtype=bool)
    r0, c0 = start_cell
    if occupied[r0, c0]:
        return seen
    seen[r0, c0] = True
    stack = [(r0, c0)]
    while stack:
        r, c = stack.pop()
        for rr, cc, _ in free_neighbors(occupied, r, c):
            if not seen[rr, cc]:
                seen[rr, cc] = True
                stack.append((rr, cc))
    return seen
