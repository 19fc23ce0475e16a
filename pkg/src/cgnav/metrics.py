"""Episode metrics: path length, navigation efficiency, map accuracy and aggregation."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .grid import OccupancyGrid
from .prediction import InpaintParams, PredictorKind, map_accuracy, predict
from .sensing import ContextMap, SensorModel, accumulate, sense


def path_length(log) -> float:
    """Total distance travelled over the executed steps, whatever the outcome."""
    if not log.records:
        raise ValueError("path length of an empty log")
    p = log.positions()
    return float(np.sum(np.hypot(*np.diff(p, axis=0).T))) if len(p) > 1 else 0.0


def navigation_efficiency(log) -> np.ndarray:
    """Progress toward the goal since the start per square meter explored so far."""
    d = log.series("dist_to_goal")
    area = log.series("explored_m2")
    if len(d) == 0:
        raise ValueError("navigation efficiency of an empty log")
    if (area <= 0).any():
        raise ValueError("explored area must be positive at every step")
    return (d[0] - d) / area


def regression(dist) -> float:
    """Largest rise of a distance-to-goal series above its running minimum (m)."""
    d = np.asarray(dist, dtype=float)
    if len(d) == 0:
        return 0.0
    return float(np.max(d - np.minimum.accumulate(d)))


def is_non_monotone(dist, threshold: float = 0.2) -> bool:
    """True when the robot moved away from the goal by more than ``threshold`` meters."""
    return regression(dist) > threshold


def replay_contexts(log, grid: OccupancyGrid, sensor: SensorModel = SensorModel(),
                    initial_context: ContextMap | None = None):
    """Rebuild ``(context, observation)`` at each logged state by re-sensing the truth."""
    context = initial_context if initial_context is not None else ContextMap.like(grid)
    out = []
    for r in log.records:
        pos = (r.x, r.y)
        if not grid.contains(pos) or not grid.is_free(pos):
            break  # post-collision terminal state: nothing to sense
        obs = sense(grid, pos, sensor, r.t)
        context = accumulate(context, obs)
        out.append((context, obs))
    return out


def accuracy_series(log, grid: OccupancyGrid | None = None, predictor=None,
                    sensor: SensorModel = SensorModel(), params: InpaintParams | None = None,
                    initial_context: ContextMap | None = None) -> np.ndarray:
    """Map accuracy per step.

    Without ``predictor`` the logged values are returned. Otherwise the
    contexts are replayed from the logged states against ``grid`` and fed to
    ``predictor``.
    """
    if predictor is None:
        return log.series("m_acc")
    if grid is None:
        raise ValueError("replaying accuracy needs the ground-truth grid")
    kind = PredictorKind(predictor)
    return np.array([map_accuracy(predict(kind, ctx, obs, grid, params), grid)
                     for ctx, obs in replay_contexts(log, grid, sensor, initial_context)])


@dataclass(frozen=True)
class SummaryRow:
    map_id: str
    predictor: str
    reveal_fraction: float | None
    trials: int
    success_rate: float
    mean_path_length: float
    mean_steps: float
    mean_final_m_acc: float

    HEADER = ("map_id", "predictor", "reveal_fraction", "trials", "success_rate",
              "mean_path_length", "mean_steps", "mean_final_m_acc")

    def as_row(self) -> list[str]:
        f = "" if self.reveal_fraction is None else repr(float(self.reveal_fraction))
        return [self.map_id, self.predictor, f, str(self.trials), repr(self.success_rate),
                repr(self.mean_path_length), repr(self.mean_steps), repr(self.mean_final_m_acc)]


def _mean(values) -> float:
    # fsum makes the mean independent of input order
    return math.fsum(values) / len(values)


def aggregate(logs) -> list[SummaryRow]:
    """One row per (map, predictor, reveal fraction), sorted by those keys."""
    logs = list(logs)
    if not logs:
        raise ValueError("nothing to aggregate")
    groups = defaultdict(list)
    for log in logs:
        groups[(log.scenario_id, log.predictor, log.reveal_fraction)].append(log)

    def key(k):
        return (k[0], k[1], -1.0 if k[2] is None else k[2])

    rows = []
    for k in sorted(groups, key=key):
        g = groups[k]
        rows.append(SummaryRow(
            map_id=k[0], predictor=k[1], reveal_fraction=k[2], trials=len(g),
            success_rate=sum(x.success for x in g) / len(g),
            mean_path_length=_mean([path_length(x) for x in g]),
            mean_steps=_mean([float(x.steps) for x in g]),
            mean_final_m_acc=_mean([x.records[-1].m_acc for x in g]),
        ))
    return rows
