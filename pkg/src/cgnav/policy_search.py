"""Bounded-rational action selection by importance sampling around the default policy."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .default_policy import TrajectoryDistribution, sample_trajectories, trajectories_to_actions
from .grid import GoalRegion
from .prediction import PredictedMap


@dataclass(frozen=True)
class RobotState:
    position: tuple[float, float]
    t: int = 0


@dataclass(frozen=True)
class RationalityParams:
    beta: float = 0.04
    samples: int = 100
    horizon: int = 10
    dt: float = 0.5
    v_max: float = 1.0

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.samples < 1 or self.horizon < 2 or not self.dt > 0 or not self.v_max > 0:
            raise ValueError("need samples >= 1, horizon >= 2, dt > 0, v_max > 0")


@dataclass(frozen=True)
class RewardParams:
    w_goal: float = 1.0
    w_collision: float = 100.0
    w_unreliable: float = 5.0
    collision_radius: float = 0.1

    def __post_init__(self):
        if min(self.w_goal, self.w_collision, self.w_unreliable, self.collision_radius) < 0:
            raise ValueError("reward weights and collision_radius must be non-negative")


@dataclass(frozen=True, eq=False)
class WeightedSampleSet:
    """Sampled trajectories with their returns and (max-shifted) weights."""

    trajectories: np.ndarray
    actions: np.ndarray
    returns: np.ndarray
    weights: np.ndarray

    @property
    def normalized_weights(self) -> np.ndarray:
        return self.weights / self.weights.sum()


def _norm(x: float, y: float) -> float:
    # plain sqrt rather than math.hypot so compiled rollouts agree bit for bit
    return math.sqrt(x * x + y * y)


def clamp_velocity(a, v_max: float = 1.0) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    n = _norm(float(a[0]), float(a[1]))
    return a * (v_max / n) if n > v_max else a.copy()


def step_dynamics(s: RobotState, a, dt: float, v_max: float = 1.0) -> RobotState:
    """Single integrator with the speed clamped to ``v_max``."""
    v = clamp_velocity(a, v_max)
    x, y = s.position
    return RobotState((x + v[0] * dt, y + v[1] * dt), s.t + 1)


def _layers(pmap: PredictedMap):
    occ = pmap.occupied
    return (occ & ~pmap.imagined).astype(np.uint8), (occ & pmap.imagined).astype(np.uint8)


def reward(prev, nxt, goal: GoalRegion, pmap: PredictedMap, rp: RewardParams) -> float:
    """One-step reward for moving from ``prev`` to ``nxt`` on the predicted map.

    ``-w_goal * distance`` to the goal center, minus ``w_collision`` if the
    step meets an observed obstacle (segment or proximity), minus
    ``w_unreliable`` if it meets an imagined one first.
    """
    res = pmap.resolution
    obs_occ, img_occ = _layers(pmap)
    col, unrel = _kernels.step_penalties(obs_occ, img_occ, prev[0] / res, prev[1] / res,
                                         nxt[0] / res, nxt[1] / res, rp.collision_radius / res)
    r = -rp.w_goal * _norm(nxt[0] - goal.center[0], nxt[1] - goal.center[1])
    if col:
        r -= rp.w_collision
    if unrel:
        r -= rp.w_unreliable
    return r


def rollout(s: RobotState, actions, goal: GoalRegion, pmap: PredictedMap, rp: RewardParams,
            dt: float, v_max: float = 1.0) -> float:
    """Sum of one-step rewards along ``actions`` from ``s``."""
    total = 0.0
    for a in np.asarray(actions, dtype=float):
        nxt = step_dynamics(s, a, dt, v_max)
        total += reward(s.position, nxt.position, goal, pmap, rp)
        s = nxt
    return total


def rollout_batch(position, actions: np.ndarray, goal: GoalRegion, pmap: PredictedMap,
                  rp: RewardParams, dt: float, v_max: float = 1.0) -> np.ndarray:
    """:func:`rollout` for a batch ``(L, H - 1, 2)`` of action sequences."""
    obs_occ, img_occ = _layers(pmap)
    acts = np.ascontiguousarray(actions, dtype=float)
    return _kernels.rollout_batch(obs_occ, img_occ, float(position[0]), float(position[1]), acts,
                                  dt, v_max, goal.center[0], goal.center[1], pmap.resolution,
                                  rp.w_goal, rp.w_collision, rp.w_unreliable, rp.collision_radius)


def importance_weights(returns, beta: float) -> np.ndarray:
    """``exp(beta * (J - max J))``: the best sample always has weight 1."""
    j = np.asarray(returns, dtype=float)
    return np.exp(beta * (j - j.max()))


def weighted_action(actions, returns, beta: float) -> np.ndarray:
    """Self-normalized importance-sampling estimate of the optimal action sequence."""
    w = importance_weights(returns, beta)
    a = np.asarray(actions, dtype=float)
    return np.tensordot(w, a, axes=1) / w.sum()


def select_action(position, goal: GoalRegion, q: TrajectoryDistribution, pmap: PredictedMap,
                  rp: RewardParams, rat: RationalityParams, seed=None):
    """Sample ``rat.samples`` trajectories from ``q``, score them by rollout and
    return ``(expected action sequence, WeightedSampleSet)``."""
    traj = sample_trajectories(q, rat.samples, seed)
    actions = trajectories_to_actions(traj, q.dt)
    returns = rollout_batch(position, actions, goal, pmap, rp, q.dt, q.v_max)
    w = importance_weights(returns, rat.beta)
    expected = np.tensordot(w, actions, axes=1) / w.sum()
    return expected, WeightedSampleSet(traj, actions, returns, w)


def estimate_kl(weights) -> float:
    """KL divergence of the self-normalized weights from uniform."""
    w = np.asarray(getattr(weights, "weights", weights), dtype=float)
    if w.ndim != 1 or len(w) == 0 or (w < 0).any() or not w.sum() > 0:
        raise ValueError("weights must be a non-empty vector of non-negative numbers with positive sum")
    if (w == w[0]).all():
        return 0.0  # exact for uniform weights, where the sum below rounds to ~1e-16
    p = w / w.sum()
    nz = p > 0
    kl = float(np.sum(p[nz] * np.log(len(p) * p[nz])))
    return max(kl, 0.0)
