"""Procedural environments: random clutter, straight walls and U-shaped traps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.ndimage import binary_dilation

from . import _kernels
from .grid import GoalRegion, OccupancyGrid, goal_cells, reachable_mask


class ScenarioGenerationError(RuntimeError):
    def __init__(self, seed: int, attempts: int, reason: str = "start and goal not connected"):
        super().__init__(f"scenario seed {seed}: {reason} after {attempts} attempts")
        self.seed = seed
        self.attempts = attempts


@dataclass(frozen=True)
class RandomBlocks:
    count: int
    size_range: tuple[int, int] = (2, 6)


@dataclass(frozen=True)
class Walls:
    count: int
    length_range: tuple[int, int] = (5, 20)


@dataclass(frozen=True)
class UTrap:
    """Three-sided enclosure astride the start-goal segment, open towards the start.

    ``opening`` is the interior width and ``depth`` the side-wall length, both
    in cells; ``placement`` is the fraction of the start-goal segment at which
    the trap is centred. Walls grow outwards to ``thickness`` cells.
    """

    opening: int = 6
    depth: int = 10
    placement: float = 0.5
    thickness: int = 1


Motif = Union[RandomBlocks, Walls, UTrap]


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int = 0
    size: tuple[int, int] = (100, 100)
    resolution: float = 0.1
    start: tuple[float, float] = (1.5, 5.0)
    goal: tuple[float, float] = (8.5, 5.0)
    goal_radius: float = 0.3
    motifs: tuple[Motif, ...] = field(default_factory=tuple)
    obstacle_density: float = 0.0
    id: str = "scenario"

    def validate(self) -> None:
        w, h = self.size
        if w < 1 or h < 1:
            raise ValueError(f"{self.id}: size must be positive, got {self.size}")
        if not self.resolution > 0:
            raise ValueError(f"{self.id}: resolution must be positive")
        if not 0.0 <= self.obstacle_density <= 1.0:
            raise ValueError(f"{self.id}: obstacle_density must lie in [0, 1]")
        if not self.goal_radius > 0:
            raise ValueError(f"{self.id}: goal_radius must be positive")
        xmax, ymax = w * self.resolution, h * self.resolution
        for name, p in (("start", self.start), ("goal", self.goal)):
            if not (0 <= p[0] < xmax and 0 <= p[1] < ymax):
                raise ValueError(f"{self.id}: {name} {p} outside the {xmax} x {ymax} m arena")
        for m in self.motifs:
            if isinstance(m, UTrap):
                if m.opening < 1 or m.depth < 1 or m.thickness < 1 or not 0.0 <= m.placement <= 1.0:
                    raise ValueError(f"{self.id}: invalid UTrap {m}")
            elif isinstance(m, RandomBlocks):
                if m.count < 0 or not 1 <= m.size_range[0] <= m.size_range[1]:
                    raise ValueError(f"{self.id}: invalid RandomBlocks {m}")
            elif isinstance(m, Walls):
                if m.count < 0 or not 1 <= m.length_range[0] <= m.length_range[1]:
                    raise ValueError(f"{self.id}: invalid Walls {m}")
            else:
                raise TypeError(f"{self.id}: unknown motif {m!r}")


MAX_ATTEMPTS = 25
_START_CLEARANCE = 3  # cells kept free around the start


def _rasterize(mask: np.ndarray, p0, p1) -> None:
    h, w = mask.shape
    rows, cols, n = _kernels.segment_cells(p0[0], p0[1], p1[0], p1[1])
    for r, c in zip(rows[:n], cols[:n]):
        if 0 <= r < h and 0 <= c < w:
            mask[r, c] = True


def utrap_masks(spec: ScenarioSpec, trap: UTrap) -> tuple[np.ndarray, np.ndarray]:
    """``(walls, interior)`` cell masks for ``trap`` in ``spec``'s arena."""
    w, h = spec.size
    res = spec.resolution
    s = np.asarray(spec.start, float) / res
    g = np.asarray(spec.goal, float) / res
    d = g - s
    norm = math.hypot(*d)
    u = d / norm if norm > 0 else np.array([1.0, 0.0])
    v = np.array([-u[1], u[0]])
    center = np.floor(s + trap.placement * d) + 0.5
    half_w = (trap.opening + 1) / 2.0
    half_d = trap.depth / 2.0
    a = center - half_d * u - half_w * v
    b = center + half_d * u - half_w * v
    b2 = center + half_d * u + half_w * v
    a2 = center - half_d * u + half_w * v
    walls = np.zeros((h, w), dtype=bool)
    _rasterize(walls, a, b)
    _rasterize(walls, b, b2)
    _rasterize(walls, b2, a2)
    cy, cx = np.mgrid[0:h, 0:w] + 0.5
    rel_x = cx - center[0]
    rel_y = cy - center[1]
    along = rel_x * u[0] + rel_y * u[1]
    across = rel_x * v[0] + rel_y * v[1]
    interior = (along >= -half_d) & (along < half_d) & (np.abs(across) < half_w) & ~walls
    if trap.thickness > 1:
        walls = _dilate(walls, trap.thickness - 1) & ~interior
    return walls, interior


def _protected(spec: ScenarioSpec) -> np.ndarray:
    w, h = spec.size
    res = spec.resolution
    prot = np.zeros((h, w), dtype=bool)
    sc, sr = int(spec.start[0] // res), int(spec.start[1] // res)
    k = _START_CLEARANCE
    prot[max(0, sr - k):sr + k + 1, max(0, sc - k):sc + k + 1] = True
    grid = OccupancyGrid.empty(w, h, res)
    big_goal = GoalRegion(spec.goal, spec.goal_radius + 2 * res)
    prot |= goal_cells(grid, big_goal)
    gc, gr = int(spec.goal[0] // res), int(spec.goal[1] // res)
    prot[gr, gc] = True
    return prot


def _place_rect(occ, keepout, rng, rh, rw) -> bool:
    h, w = occ.shape
    if rh > h or rw > w:
        return False
    for _ in range(50):
        r = int(rng.integers(0, h - rh + 1))
        c = int(rng.integers(0, w - rw + 1))
        if not keepout[r:r + rh, c:c + rw].any():
            occ[r:r + rh, c:c + rw] = True
            return True
    return False


def _attempt(spec: ScenarioSpec, attempt: int):
    w, h = spec.size
    rng = np.random.default_rng([spec.seed, attempt])
    occ = np.zeros((h, w), dtype=bool)
    keepout = _protected(spec)
    for m in spec.motifs:
        if isinstance(m, UTrap):
            walls, interior = utrap_masks(spec, m)
            if (walls & keepout).any():
                raise ValueError(f"{spec.id}: UTrap {m} overlaps the start or goal clearance")
            occ |= walls
            keepout = keepout | _dilate(walls | interior, 2)
    for m in spec.motifs:
        if isinstance(m, RandomBlocks):
            lo, hi = m.size_range
            for _ in range(m.count):
                rh, rw = rng.integers(lo, hi + 1, size=2)
                _place_rect(occ, keepout, rng, int(rh), int(rw))
        elif isinstance(m, Walls):
            lo, hi = m.length_range
            for _ in range(m.count):
                length = int(rng.integers(lo, hi + 1))
                if rng.random() < 0.5:
                    _place_rect(occ, keepout, rng, 1, length)
                else:
                    _place_rect(occ, keepout, rng, length, 1)
    target = int(round(spec.obstacle_density * w * h))
    tries = 0
    while occ.sum() < target and tries < 20 * w * h:
        rh, rw = rng.integers(2, 6, size=2)
        _place_rect(occ, keepout, rng, int(rh), int(rw))
        tries += 1
    return occ


def _dilate(mask: np.ndarray, k: int) -> np.ndarray:
    return binary_dilation(mask, structure=np.ones((2 * k + 1, 2 * k + 1), bool))


def generate_scenario(spec: ScenarioSpec, max_attempts: int = MAX_ATTEMPTS):
    """Build ``(grid, start, goal_region)``; a pure function of ``spec``.

    Retries with fresh clutter until the start reaches the goal region through
    free cells; raises :class:`ScenarioGenerationError` otherwise.
    """
    spec.validate()
    w, h = spec.size
    goal = GoalRegion(spec.goal, spec.goal_radius)
    start = (float(spec.start[0]), float(spec.start[1]))
    for attempt in range(max_attempts):
        occ = _attempt(spec, attempt)
        grid = OccupancyGrid(occ, spec.resolution)
        reach = reachable_mask(occ, grid.cell_of(start))
        if (reach & goal_cells(grid, goal)).any():
            return grid, start, goal
    raise ScenarioGenerationError(spec.seed, max_attempts)
