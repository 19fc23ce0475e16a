"""Context-generative default policy.

A mean path is planned with RRT* on the predicted map, pruned by line of
sight, smoothed with a clamped B-spline and resampled at the robot's top
speed. The default policy is an isotropic-per-waypoint Gaussian around that
mean whose spread grows along the horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline
from scipy.ndimage import binary_dilation

from . import _kernels
from .grid import GoalRegion, OccupancyGrid, goal_cells
from .prediction import PredictedMap


@dataclass(frozen=True)
class PlannerParams:
    max_iterations: int = 2000
    step_size: float = 0.2
    goal_bias: float = 0.1
    rewire_radius: float = 0.5
    seed: int = 0
    obstacle_inflation: float = 0.1

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if not 0.0 <= self.goal_bias <= 1.0:
            raise ValueError("goal_bias must lie in [0, 1]")
        if self.max_iterations < 0 or self.rewire_radius < 0 or self.obstacle_inflation < 0:
            raise ValueError("max_iterations, rewire_radius and obstacle_inflation must be >= 0")


@dataclass(frozen=True)
class SplineParams:
    degree: int = 3
    samples_per_span: int = 8
    control_point_spacing: float = 0.2

    def __post_init__(self):
        if self.degree < 2:
            raise ValueError("spline degree must be >= 2")
        if self.samples_per_span < 1 or not self.control_point_spacing > 0:
            raise ValueError("samples_per_span and control_point_spacing must be positive")


@dataclass(frozen=True)
class CovarianceSchedule:
    """Linear growth of the per-waypoint standard deviation along the horizon."""

    sigma_start: float = 0.02
    sigma_end: float = 0.3

    def __post_init__(self):
        if not (self.sigma_start > 0 and self.sigma_end >= self.sigma_start):
            raise ValueError("need 0 < sigma_start <= sigma_end")

    def sigmas(self, horizon: int) -> np.ndarray:
        """Standard deviations for waypoints ``1 .. horizon - 1``."""
        if horizon < 2:
            raise ValueError(f"horizon must be >= 2, got {horizon}")
        if horizon == 2:
            return np.array([self.sigma_start])
        k = np.arange(1, horizon)
        return self.sigma_start + (self.sigma_end - self.sigma_start) * k / (horizon - 1)


@dataclass(frozen=True, eq=False)
class GeometricPath:
    """Waypoints with a flag per waypoint; ``feasible[i]`` is False when the
    segment ending at waypoint ``i`` is the straight fallback to the goal."""

    points: np.ndarray
    feasible_mask: np.ndarray

    @property
    def feasible(self) -> bool:
        return bool(self.feasible_mask.all())

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.points, axis=0), axis=1).sum())

    def __len__(self):
        return len(self.points)


def _planning_occupancy(grid: OccupancyGrid, inflation: float, start, goal: GoalRegion | None) -> np.ndarray:
    occ = grid.occupied
    k = int(math.ceil(inflation / grid.resolution - 1e-9))
    if k > 0:
        inflated = binary_dilation(occ, structure=np.ones((2 * k + 1, 2 * k + 1), bool))
        # the robot may already sit inside an inflation margin; let it leave
        r, c = grid.cell_of(start)
        near = np.zeros_like(occ)
        near[max(0, r - k - 1):r + k + 2, max(0, c - k - 1):c + k + 2] = True
        inflated &= ~(near & ~occ)
    else:
        inflated = occ.copy()
    if goal is not None:
        inflated &= ~goal_cells(grid, goal)
    return inflated.astype(np.uint8)


def planning_grid(grid: OccupancyGrid, inflation: float, start, goal: GoalRegion | None = None) -> OccupancyGrid:
    """Occupancy used for planning: inflated obstacles, cleared goal region."""
    return OccupancyGrid(_planning_occupancy(grid, inflation, start, goal).astype(bool), grid.resolution)


def _as_grid(m) -> OccupancyGrid:
    return m.grid if isinstance(m, PredictedMap) else m


def plan_geometric_path(map_, start, goal: GoalRegion, params: PlannerParams,
                        rng: np.random.Generator | None = None) -> GeometricPath:
    """Plan from ``start`` to ``goal`` on the predicted map.

    On success every segment is collision-free on the inflated map. Otherwise
    the path runs to the tree node nearest the goal and then straight to the
    goal center, with that last waypoint flagged infeasible.
    """
    grid = _as_grid(map_)
    start = np.asarray(start, dtype=float)
    if goal.contains(start):
        return GeometricPath(start[None, :].copy(), np.ones(1, dtype=bool))
    if not grid.is_free(start):
        raise ValueError(f"start {tuple(start)} is in collision on the planning map")
    if rng is None:
        rng = np.random.default_rng(params.seed)
    res = grid.resolution
    occ = _planning_occupancy(grid, params.obstacle_inflation, start, goal)
    s = start / res
    g = np.asarray(goal.center) / res
    if not _kernels.segment_blocked(occ, s[0], s[1], g[0], g[1]):
        return GeometricPath(np.array([start, goal.center]), np.ones(2, dtype=bool))
    rand = rng.random((params.max_iterations, 3))
    xs, ys, parent, n, goal_node = _kernels.rrt_star(
        occ, s[0], s[1], g[0], g[1], goal.radius / res, params.step_size / res,
        params.goal_bias, params.rewire_radius / res, rand)
    reached = goal_node >= 0
    if not reached:
        d2 = (xs[:n] - g[0]) ** 2 + (ys[:n] - g[1]) ** 2
        goal_node = int(np.argmin(d2))
    chain = []
    i = goal_node
    while i >= 0:
        chain.append(i)
        i = parent[i]
    chain.reverse()
    cx = np.ascontiguousarray(xs[chain])
    cy = np.ascontiguousarray(ys[chain])
    if len(chain) > 2:
        keep = _kernels.shortcut(occ, cx, cy)
        cx, cy = cx[keep], cy[keep]
    pts = np.stack([cx, cy], axis=1) * res
    pts[0] = start
    flags = np.ones(len(pts), dtype=bool)
    end = pts[-1] / res
    if np.hypot(*(end - g)) > 1e-9:
        last_ok = not _kernels.segment_blocked(occ, end[0], end[1], g[0], g[1])
        pts = np.vstack([pts, goal.center])
        flags = np.append(flags, bool(reached and last_ok))
    if reached and not flags[-1]:
        # goal node is inside the goal disc already; drop the blocked tail
        pts, flags = pts[:-1], flags[:-1]
    return GeometricPath(pts, flags)


def _densify(points: np.ndarray, spacing: float):
    """Insert points along each segment; returns (points, index of each original point)."""
    out = [points[0]]
    orig = [0]
    for a, b in zip(points[:-1], points[1:]):
        seg = np.linalg.norm(b - a)
        k = max(1, int(math.ceil(seg / spacing - 1e-9)))
        for j in range(1, k + 1):
            out.append(a + (b - a) * j / k)
        orig.append(len(out) - 1)
    return np.array(out), orig


def _eval_bspline(ctrl: np.ndarray, degree: int, samples_per_span: int):
    m = len(ctrl)
    d = min(degree, m - 1)
    n_spans = m - d
    interior = np.arange(1, n_spans) / n_spans
    knots = np.concatenate([np.zeros(d + 1), interior, np.ones(d + 1)])
    spline = BSpline(knots, ctrl, d)
    us, spans = [], []
    for s in range(n_spans):
        u = np.linspace(s / n_spans, (s + 1) / n_spans, samples_per_span + 1)[:-1]
        us.append(u)
        spans.append(np.full(len(u), s))
    us.append(np.array([1.0]))
    spans.append(np.array([n_spans - 1]))
    u = np.concatenate(us)
    curve = spline(u)
    curve[0] = ctrl[0]
    curve[-1] = ctrl[-1]
    return curve, np.concatenate(spans), d


def smooth_path(path, sp: SplineParams, map_) -> np.ndarray:
    """Clamped B-spline through the densified polyline, resampled densely.

    Spans whose samples collide on ``map_`` are repaired locally by raising the
    multiplicity of the corners that control them to the spline degree, which
    pins that part of the curve onto the original polyline.
    """
    pts = np.asarray(path, dtype=float)
    if len(pts) <= 2:
        return pts.copy()
    grid = _as_grid(map_)
    occ = grid.as_uint8()
    res = grid.resolution
    ctrl, orig = _densify(pts, sp.control_point_spacing)
    corners = set(orig[1:-1])
    mult = {c: 1 for c in corners}
    while True:
        expanded, owner = [], []
        for i, p in enumerate(ctrl):
            for _ in range(mult.get(i, 1)):
                expanded.append(p)
                owner.append(i)
        curve, spans, d = _eval_bspline(np.array(expanded), sp.degree, sp.samples_per_span)
        g = curve / res
        bad = set()
        for k in range(len(curve) - 1):
            if _kernels.segment_blocked(occ, g[k, 0], g[k, 1], g[k + 1, 0], g[k + 1, 1]):
                bad.add(int(spans[k]))
                bad.add(int(spans[k + 1]))
        if not bad:
            return curve
        changed = False
        for s in bad:
            for e in range(s, min(s + d + 1, len(owner))):
                c = owner[e]
                if c in corners and mult[c] < d:
                    mult[c] = d
                    changed = True
        if not changed:
            return pts.copy()


def resample(points: np.ndarray, spacing: float, count: int, flags: np.ndarray | None = None):
    """Points at arc length ``0, spacing, 2 spacing, ...`` (``count`` of them),
    padded with the final point; also returns the flag of the segment each
    resampled point lies on."""
    pts = np.asarray(points, dtype=float)
    if flags is None:
        flags = np.ones(len(pts), dtype=bool)
    if len(pts) == 1:
        return np.repeat(pts, count, axis=0), np.repeat(flags[:1], count)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    s = np.minimum(np.arange(count) * spacing, total)
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(seg[idx] > 0, (s - cum[idx]) / seg[idx], 0.0)
    out = pts[idx] + frac[:, None] * (pts[idx + 1] - pts[idx])
    out[s >= total] = pts[-1]
    out[0] = pts[0]
    seg_flags = flags[idx + 1].copy()
    seg_flags[0] = True
    return out, seg_flags


@dataclass(frozen=True, eq=False)
class MeanTrajectory:
    waypoints: np.ndarray
    feasible: np.ndarray


@dataclass(frozen=True, eq=False)
class TrajectoryDistribution:
    """Gaussian over the ``H - 1`` free waypoints of a horizon-``H`` trajectory.

    Waypoint 0 is pinned at the current position. ``sigmas[k - 1]`` is the
    standard deviation of both coordinates of waypoint ``k``.
    """

    mean: MeanTrajectory
    sigmas: np.ndarray
    epsilon: float
    dt: float
    v_max: float

    @property
    def horizon(self) -> int:
        return len(self.mean.waypoints)

    @property
    def dim(self) -> int:
        return 2 * (self.horizon - 1)

    @property
    def max_step(self) -> float:
        return self.v_max * self.dt

    @property
    def log_det(self) -> float:
        return float(4.0 * np.log(self.sigmas).sum())

    @property
    def log_normalization(self) -> float:
        return 0.5 * (self.dim * math.log(2.0 * math.pi) + self.log_det)

    @property
    def normalization(self) -> float:
        return math.exp(self.log_normalization)

    def mahalanobis(self, tau) -> np.ndarray:
        tau = self._check(tau)
        z = (tau[..., 1:, :] - self.mean.waypoints[1:]) / self.sigmas[:, None]
        return np.sqrt((z ** 2).sum(axis=(-1, -2)))

    def _check(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        if tau.shape[-2:] != self.mean.waypoints.shape:
            raise ValueError(f"trajectory shape {tau.shape[-2:]} does not match {self.mean.waypoints.shape}")
        return tau


def default_epsilon(horizon: int) -> float:
    return 3.0 * math.sqrt(2 * (horizon - 1))


def build_default_policy(path, horizon: int, dt: float, v_max: float,
                         schedule: CovarianceSchedule, epsilon: float | None = None) -> TrajectoryDistribution:
    """Resample ``path`` at ``v_max * dt`` and truncate/pad to ``horizon`` waypoints."""
    if horizon < 2:
        raise ValueError(f"horizon must be >= 2, got {horizon}")
    if isinstance(path, GeometricPath):
        pts, flags = path.points, path.feasible_mask
    else:
        pts, flags = np.asarray(path, dtype=float), None
    way, feas = resample(pts, v_max * dt, horizon, flags)
    if flags is not None and not flags.all() and feas.all():
        # the infeasible suffix lies beyond the horizon; the truncated mean
        # still leads into it, so its last waypoint carries the flag
        feas[-1] = False
    return TrajectoryDistribution(
        mean=MeanTrajectory(way, feas),
        sigmas=schedule.sigmas(horizon),
        epsilon=default_epsilon(horizon) if epsilon is None else float(epsilon),
        dt=float(dt),
        v_max=float(v_max),
    )


def log_density(q: TrajectoryDistribution, tau) -> np.ndarray:
    m = q.mahalanobis(tau)
    return -0.5 * m ** 2 - q.log_normalization


def density(q: TrajectoryDistribution, tau):
    """Gaussian density of trajectory ``tau`` (or a batch ``(..., H, 2)``)."""
    tau = q._check(tau)
    if not np.allclose(tau[..., 0, :], q.mean.waypoints[0], rtol=0.0, atol=1e-9):
        raise ValueError("trajectory must start at the mean's first waypoint")
    out = np.exp(-0.5 * q.mahalanobis(tau) ** 2) / q.normalization
    return float(out) if np.ndim(out) == 0 else out


def clamp_steps(origin: np.ndarray, raw: np.ndarray, max_step: float) -> np.ndarray:
    """Chain waypoints from ``origin`` limiting each displacement to ``max_step``.

    ``raw`` has shape ``(L, K, 2)``; returns ``(L, K + 1, 2)`` including origin.
    """
    n, k, _ = raw.shape
    out = np.empty((n, k + 1, 2))
    out[:, 0] = origin
    for i in range(k):
        d = raw[:, i] - out[:, i]
        norm = np.linalg.norm(d, axis=1)
        scale = np.where(norm > max_step, max_step / np.maximum(norm, 1e-300), 1.0)
        out[:, i + 1] = out[:, i] + d * scale[:, None]
    return out


def sample_trajectories(q: TrajectoryDistribution, count: int, seed=None,
                        max_redraws: int = 100) -> np.ndarray:
    """Draw ``count`` trajectories ``(count, H, 2)`` from ``q``.

    Draws are speed-clamped step by step and redrawn while their Mahalanobis
    distance exceeds ``q.epsilon``; slots still rejected after ``max_redraws``
    rounds receive the mean.
    """
    if count < 1:
        raise ValueError("need at least one sample")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    mean = q.mean.waypoints
    out = np.empty((count, q.horizon, 2))
    pending = np.arange(count)
    for _ in range(max_redraws):
        z = rng.standard_normal((len(pending), q.horizon - 1, 2))
        raw = mean[1:] + q.sigmas[:, None] * z
        traj = clamp_steps(mean[0], raw, q.max_step)
        ok = q.mahalanobis(traj) <= q.epsilon
        out[pending[ok]] = traj[ok]
        pending = pending[~ok]
        if len(pending) == 0:
            break
    out[pending] = mean
    return out


def trajectories_to_actions(traj: np.ndarray, dt: float) -> np.ndarray:
    return np.diff(traj, axis=-2) / dt


def dump_csv_rows(q: TrajectoryDistribution, samples: np.ndarray | None = None) -> list[list]:
    """Debug rows ``(sample, k, x, y, sigma_k)``; sample -1 is the mean."""
    sig = np.concatenate([[0.0], q.sigmas])
    rows = [[-1, k, *q.mean.waypoints[k], sig[k]] for k in range(q.horizon)]
    if samples is not None:
        for i, tr in enumerate(samples):
            rows.extend([i, k, *tr[k], sig[k]] for k in range(q.horizon))
    return rows
