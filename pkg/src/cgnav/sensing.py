"""Occluded circular field-of-view sensing and the accumulated context map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grid import OccupancyGrid, format_grid, parse_grid

UNKNOWN = -1


@dataclass(frozen=True)
class SensorModel:
    range: float = 1.0
    ray_count: int = 360

    def __post_init__(self):
        if not self.range > 0:
            raise ValueError(f"sensor range must be positive, got {self.range}")
        if self.ray_count < 8:
            raise ValueError(f"ray_count must be at least 8, got {self.ray_count}")


@dataclass(frozen=True, eq=False)
class Observation:
    """Cells seen at one time step: ``cells[i] = (row, col)`` with ``states[i]`` 0/1."""

    cells: np.ndarray
    states: np.ndarray
    t: int = 0

    def __len__(self):
        return len(self.states)

    @classmethod
    def empty(cls, t: int = 0) -> Observation:
        return cls(np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=np.int8), t)

    def mask(self, shape) -> np.ndarray:
        m = np.zeros(shape, dtype=bool)
        m[self.cells[:, 0], self.cells[:, 1]] = True
        return m


def sense(grid: OccupancyGrid, position, sensor: SensorModel, t: int = 0) -> Observation:
    """Ray-cast ``sensor.ray_count`` rays of length ``sensor.range``.

    Each ray reports the cells it passes through, nearest first, up to and
    including the first occupied cell.
    """
    if not grid.contains(position):
        raise ValueError(f"sensor position {tuple(position)} is outside the grid")
    if not grid.is_free(position):
        raise ValueError(f"sensor position {tuple(position)} is inside an obstacle")
    res = grid.resolution
    seen = _kernels.cast_rays(grid.as_uint8(), position[0] / res, position[1] / res,
                              sensor.range / res, sensor.ray_count)
    rows, cols = np.nonzero(seen)
    cells = np.stack([rows, cols], axis=1).astype(np.int64)
    states = grid.occupied[rows, cols].astype(np.int8)
    return Observation(cells, states, t)


@dataclass(frozen=True, eq=False)
class ContextMap:
    """Tri-state map: ``state`` is -1 (unknown), 0 (free) or 1 (occupied)."""

    state: np.ndarray
    resolution: float

    @classmethod
    def unknown(cls, height: int, width: int, resolution: float) -> ContextMap:
        return cls(np.full((height, width), UNKNOWN, dtype=np.int8), resolution)

    @classmethod
    def like(cls, grid: OccupancyGrid) -> ContextMap:
        return cls.unknown(grid.height, grid.width, grid.resolution)

    @property
    def shape(self):
        return self.state.shape

    @property
    def known(self) -> np.ndarray:
        return self.state != UNKNOWN

    @property
    def occupied(self) -> np.ndarray:
        return self.state == 1

    def known_count(self) -> int:
        return int(np.count_nonzero(self.known))

    def __eq__(self, other):
        if not isinstance(other, ContextMap):
            return NotImplemented
        return self.resolution == other.resolution and np.array_equal(self.state, other.state)

    def to_text(self) -> str:
        return format_grid(self.occupied, self.resolution, unknown=~self.known)

    @classmethod
    def from_text(cls, text: str) -> ContextMap:
        occ, unk, res = parse_grid(text, allow_unknown=True)
        state = np.where(unk, UNKNOWN, occ.astype(np.int8)).astype(np.int8)
        return cls(state, res)


class ContextConflictError(ValueError):
    """An observation disagrees with an already-known cell."""


def accumulate(context: ContextMap, obs: Observation) -> ContextMap:
    """Union of ``context`` and ``obs``; returns a new map."""
    if len(obs) == 0:
        return ContextMap(context.state.copy(), context.resolution)
    h, w = context.shape
    r, c = obs.cells[:, 0], obs.cells[:, 1]
    if r.min() < 0 or c.min() < 0 or r.max() >= h or c.max() >= w:
        raise ValueError(f"observation cells fall outside the {h}x{w} context")
    prev = context.state[r, c]
    clash = (prev != UNKNOWN) & (prev != obs.states)
    if clash.any():
        i = int(np.argmax(clash))
        raise ContextConflictError(
            f"cell {(int(r[i]), int(c[i]))} already known as {int(prev[i])}, observed {int(obs.states[i])}")
    state = context.state.copy()
    state[r, c] = obs.states
    return ContextMap(state, context.resolution)


def explored_area(context: ContextMap) -> float:
    """Known area in square meters."""
    return context.known_count() * context.resolution ** 2
