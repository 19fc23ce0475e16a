"""Closed-loop navigation episodes and their CSV/JSON log format."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .default_policy import (CovarianceSchedule, GeometricPath, PlannerParams, SplineParams,
                             build_default_policy, plan_geometric_path, planning_grid, smooth_path)
from .grid import GoalRegion, OccupancyGrid, atomic_write_text, segment_collides
from .policy_search import (RationalityParams, RewardParams, RobotState, estimate_kl,
                            select_action, step_dynamics)
from .prediction import InpaintParams, PredictorKind, map_accuracy, predict
from .sensing import ContextMap, SensorModel, accumulate, explored_area, sense

SUCCESS = "success"
COLLISION = "collision"
TIMEOUT = "timeout"
ERROR = "error"

CSV_COLUMNS = ("t", "x", "y", "vx", "vy", "dist_to_goal", "explored_m2", "m_acc", "kl", "wall_ms")


@dataclass(frozen=True)
class NavigationParams:
    sensor: SensorModel = field(default_factory=SensorModel)
    inpaint: InpaintParams = field(default_factory=InpaintParams)
    planner: PlannerParams = field(default_factory=PlannerParams)
    spline: SplineParams = field(default_factory=SplineParams)
    covariance: CovarianceSchedule = field(default_factory=CovarianceSchedule)
    epsilon: float | None = None
    rationality: RationalityParams = field(default_factory=RationalityParams)
    reward: RewardParams = field(default_factory=RewardParams)
    max_steps: int = 500


@dataclass
class StepRecord:
    t: int
    x: float
    y: float
    vx: float
    vy: float
    dist_to_goal: float
    explored_m2: float
    m_acc: float
    kl: float
    wall_ms: float

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass
class EpisodeLog:
    """One navigation run. The last record is the terminal state (zero action)."""

    scenario_id: str
    predictor: str
    seed: int
    records: list[StepRecord] = field(default_factory=list)
    outcome: str = TIMEOUT
    trial: int = 0
    reveal_fraction: float | None = None
    error: str | None = None

    @property
    def steps(self) -> int:
        return max(len(self.records) - 1, 0)

    @property
    def success(self) -> bool:
        return self.outcome == SUCCESS

    def positions(self) -> np.ndarray:
        return np.array([[r.x, r.y] for r in self.records]).reshape(-1, 2)

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def summary(self) -> dict:
        from .metrics import path_length

        return {
            "scenario_id": self.scenario_id,
            "predictor": self.predictor,
            "trial": self.trial,
            "reveal_fraction": self.reveal_fraction,
            "seed": self.seed,
            "outcome": self.outcome,
            "path_length": path_length(self) if self.records else 0.0,
            "steps": self.steps,
            "error": self.error,
        }

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.records:
            row = asdict(r)
            if not timing:
                row["wall_ms"] = 0.0
            writer.writerow([row["t"]] + [repr(float(row[c])) for c in CSV_COLUMNS[1:]])
        return buf.getvalue()

    def save(self, stem, timing: bool = True) -> None:
        """Write ``<stem>.csv`` then ``<stem>.json`` (the summary marks completion)."""
        stem = str(stem)
        atomic_write_text(stem + ".csv", self.to_csv(timing))
        atomic_write_text(stem + ".json", json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, stem) -> EpisodeLog:
        stem = str(stem)
        meta = json.loads(Path(stem + ".json").read_text())
        records = []
        with open(stem + ".csv", newline="") as fh:
            for row in csv.DictReader(fh):
                records.append(StepRecord(int(row["t"]), *(float(row[c]) for c in CSV_COLUMNS[1:])))
        return cls(scenario_id=meta["scenario_id"], predictor=meta["predictor"], seed=meta["seed"],
                   records=records, outcome=meta["outcome"], trial=meta.get("trial", 0),
                   reveal_fraction=meta.get("reveal_fraction"), error=meta.get("error"))


def _rng(seed: int, t: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, t, stream]))


def plan_default_policy(pmap, position, goal: GoalRegion, params: NavigationParams, rng):
    """Plan, smooth and wrap the mean path into the trajectory distribution."""
    path = plan_geometric_path(pmap, position, goal, params.planner, rng)
    if len(path) > 2:
        ok = path.feasible_mask
        n_ok = len(ok) if ok.all() else int(np.argmin(ok))
        grid = planning_grid(pmap.grid, params.planner.obstacle_inflation, position, goal)
        head = smooth_path(path.points[:n_ok], params.spline, grid)
        pts = np.vstack([head, path.points[n_ok:]])
        flags = np.concatenate([np.ones(len(head), bool), ok[n_ok:]])
        path = GeometricPath(pts, flags)
    rat = params.rationality
    return build_default_policy(path, rat.horizon, rat.dt, rat.v_max, params.covariance, params.epsilon)


def navigate_episode(grid: OccupancyGrid, start, goal: GoalRegion, predictor: PredictorKind,
                     params: NavigationParams = NavigationParams(), seed: int = 0,
                     initial_context: ContextMap | None = None, scenario_id: str = "",
                     trial: int = 0, reveal_fraction: float | None = None,
                     keep_contexts: bool = False) -> EpisodeLog:
    """Run sense, predict, plan, select and act until success, collision or timeout.

    Motion is executed on the true grid; a step whose segment meets a true
    obstacle (or leaves the arena) ends the episode as a collision. With
    ``keep_contexts`` the per-step context maps are attached as ``log.contexts``.
    """
    predictor = PredictorKind(predictor)
    log = EpisodeLog(scenario_id, predictor.value, int(seed), trial=trial, reveal_fraction=reveal_fraction)
    contexts = []
    context = initial_context if initial_context is not None else ContextMap.like(grid)
    if context.shape != grid.shape:
        raise ValueError(f"initial context shape {context.shape} does not match grid {grid.shape}")
    state = RobotState((float(start[0]), float(start[1])), 0)
    rat = params.rationality
    nan = math.nan
    while True:
        tic = time.perf_counter()
        t = state.t
        pos = state.position
        obs = sense(grid, pos, params.sensor, t)
        context = accumulate(context, obs)
        if keep_contexts:
            contexts.append(context)
        area = explored_area(context)
        pmap = predict(predictor, context, obs, grid, params.inpaint)
        macc = map_accuracy(pmap, grid)
        dist = goal.distance(pos)
        if goal.contains(pos) or t >= params.max_steps:
            log.outcome = SUCCESS if goal.contains(pos) else TIMEOUT
            wall = (time.perf_counter() - tic) * 1e3
            log.records.append(StepRecord(t, pos[0], pos[1], 0.0, 0.0, dist, area, macc, nan, wall))
            break
        q = plan_default_policy(pmap, pos, goal, params, _rng(seed, t, 0))
        actions, samples = select_action(pos, goal, q, pmap, params.reward, rat, _rng(seed, t, 1))
        a = actions[0]
        kl = estimate_kl(samples.weights)
        nxt = step_dynamics(state, a, rat.dt, rat.v_max)
        wall = (time.perf_counter() - tic) * 1e3
        applied = (np.asarray(nxt.position) - np.asarray(pos)) / rat.dt
        log.records.append(StepRecord(t, pos[0], pos[1], float(applied[0]), float(applied[1]),
                                      dist, area, macc, kl, wall))
        if not grid.contains(nxt.position) or segment_collides(grid, pos, nxt.position):
            log.outcome = COLLISION
            log.records.append(StepRecord(nxt.t, nxt.position[0], nxt.position[1], 0.0, 0.0,
                                          goal.distance(nxt.position), area, macc, nan, 0.0))
            break
        state = nxt
    if keep_contexts:
        log.contexts = contexts
    return log
