from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cgnav.default_policy import (CovarianceSchedule, GeometricPath, PlannerParams, SplineParams,
                                  build_default_policy, default_epsilon, density, log_density,
                                  plan_geometric_path, sample_trajectories, smooth_path)
from cgnav.grid import GoalRegion, OccupancyGrid, segment_collides
from cgnav.prediction import PredictedMap

from oracles import discrete_turning, mvn_density


def free_map(w=40, h=40, res=0.1):
    return PredictedMap(np.zeros((h, w), bool), np.ones((h, w), bool), res)


# ---------------------------------------------------------------- planning

def test_free_map_path_is_nearly_straight():
    pm = free_map()
    start, goal = np.array([0.35, 0.35]), GoalRegion((3.55, 3.15), 0.1)
    path = plan_geometric_path(pm, start, goal, PlannerParams())
    smooth = smooth_path(path.points, SplineParams(), pm)
    length = np.linalg.norm(np.diff(smooth, axis=0), axis=1).sum()
    assert path.feasible
    assert length <= 1.05 * np.linalg.norm(np.array(goal.center) - start)


def test_planner_goes_around_a_wall():
    occ = np.zeros((40, 40), bool)
    occ[5:35, 20] = True
    pm = PredictedMap(occ, np.zeros_like(occ), 0.1)
    start, goal = (0.55, 2.05), GoalRegion((3.55, 2.05), 0.15)
    path = plan_geometric_path(pm, start, goal, PlannerParams(max_iterations=4000), np.random.default_rng(0))
    assert path.feasible
    assert goal.contains(path.points[-1]) or np.allclose(path.points[-1], goal.center)
    for a, b in zip(path.points[:-1], path.points[1:]):
        assert not segment_collides(pm.grid, a, b)


def test_enclosed_goal_falls_back():
    occ = np.zeros((40, 40), bool)
    occ[25:36, 25] = occ[25:36, 35] = occ[25, 25:36] = occ[35, 25:36] = True
    pm = PredictedMap(occ, np.zeros_like(occ), 0.1)
    goal = GoalRegion((3.05, 3.05), 0.2)
    path = plan_geometric_path(pm, (0.5, 0.5), goal, PlannerParams(max_iterations=500), np.random.default_rng(1))
    assert not path.feasible
    assert not path.feasible_mask[-1]
    np.testing.assert_array_equal(path.points[-1], goal.center)


def test_start_inside_goal():
    path = plan_geometric_path(free_map(), (1.0, 1.0), GoalRegion((1.05, 1.0), 0.2), PlannerParams())
    assert len(path) == 1 and path.feasible


def test_start_in_collision_raises():
    occ = np.ones((5, 5), bool)
    with pytest.raises(ValueError, match="collision"):
        plan_geometric_path(PredictedMap(occ, occ, 0.1), (0.25, 0.25), GoalRegion((0.45, 0.45), 0.01),
                            PlannerParams())


@pytest.mark.parametrize("bad", [dict(step_size=0), dict(goal_bias=1.5), dict(max_iterations=-1)])
def test_planner_params_validation(bad):
    with pytest.raises(ValueError):
        PlannerParams(**bad)


# ---------------------------------------------------------------- smoothing

def test_collinear_points_stay_on_the_line():
    pts = np.array([[0.1, 0.1], [0.9, 0.5], [1.7, 0.9], [3.3, 1.7]])
    out = smooth_path(pts, SplineParams(), free_map())
    d = pts[-1] - pts[0]
    n = np.array([-d[1], d[0]]) / np.linalg.norm(d)
    assert np.max(np.abs((out - pts[0]) @ n)) < 1e-9
    np.testing.assert_array_equal(out[0], pts[0])
    np.testing.assert_array_equal(out[-1], pts[-1])


def test_two_waypoints_unchanged():
    pts = np.array([[0.2, 0.3], [2.0, 1.1]])
    np.testing.assert_array_equal(smooth_path(pts, SplineParams(), free_map()), pts)


def test_jagged_l_turns_less_than_polyline():
    # raw RRT*-like L: steps no longer than the planner step (0.2 m) that
    # zig-zag around two perpendicular legs
    leg = np.arange(0, 11) * 0.18
    jag = np.where(np.arange(11) % 2 == 1, 0.08, 0.0)
    first = np.stack([0.5 + leg, 0.5 + jag], axis=1)
    second = np.stack([first[-1, 0] + jag[1:], 0.5 + leg[1:]], axis=1)
    pts = np.vstack([first, second])
    assert np.linalg.norm(np.diff(pts, axis=0), axis=1).max() <= 0.2
    out = smooth_path(pts, SplineParams(), free_map())
    assert discrete_turning(out) < discrete_turning(pts)
    np.testing.assert_array_equal(out[[0, -1]], pts[[0, -1]])


def test_colliding_corner_is_repaired():
    # an obstacle hugging the inside of the corner: the curve must not cut it
    occ = np.zeros((40, 40), bool)
    occ[6:9, 21:24] = True
    pm = PredictedMap(occ, np.zeros_like(occ), 0.1)
    pts = np.array([[0.5, 0.5], [2.5, 0.5], [2.5, 2.5]])
    out = smooth_path(pts, SplineParams(), pm)
    for a, b in zip(out[:-1], out[1:]):
        assert not segment_collides(pm.grid, a, b)


# ---------------------------------------------------------------- distribution

def straight_policy(horizon, sigma_start=0.02, sigma_end=0.3, epsilon=None, v_max=1.0, dt=0.5):
    return build_default_policy(np.array([[0.0, 0.0], [20.0, 0.0]]), horizon, dt, v_max,
                                CovarianceSchedule(sigma_start, sigma_end), epsilon)


def test_mean_has_h_waypoints_spaced_by_speed():
    q = straight_policy(10)
    w = q.mean.waypoints
    assert w.shape == (10, 2)
    np.testing.assert_allclose(np.diff(w[:, 0]), 0.5)


def test_short_path_is_padded():
    q = build_default_policy(np.array([[0.0, 0.0], [0.7, 0.0]]), 5, 0.5, 1.0, CovarianceSchedule())
    np.testing.assert_allclose(q.mean.waypoints[:, 0], [0.0, 0.5, 0.7, 0.7, 0.7])


def test_truncated_fallback_is_flagged():
    path = GeometricPath(np.array([[0.0, 0.0], [5.0, 0.0], [9.0, 0.0]]), np.array([True, True, False]))
    q = build_default_policy(path, 4, 0.5, 1.0, CovarianceSchedule())
    assert not q.mean.feasible.all()
    q = build_default_policy(path, 30, 0.5, 1.0, CovarianceSchedule())
    # waypoint 10 sits on the vertex where the fallback segment starts
    assert q.mean.feasible[:10].all() and not q.mean.feasible[10:].any()


def test_sigma_schedule():
    s = CovarianceSchedule(0.02, 0.3).sigmas(10)
    assert len(s) == 9 and (s > 0).all() and (np.diff(s) >= 0).all()
    assert s[-1] == pytest.approx(0.3)
    with pytest.raises(ValueError):
        CovarianceSchedule(0.0, 0.1)


def test_normalization_closed_form_h2_unit_sigma():
    q = straight_policy(2, 1.0, 1.0)
    assert q.normalization == pytest.approx(2 * math.pi, rel=1e-15)
    assert density(q, q.mean.waypoints) == 1.0 / q.normalization


def test_one_sigma_offset():
    q = straight_policy(4)
    tau = q.mean.waypoints.copy()
    tau[2, 1] += q.sigmas[1]
    assert density(q, tau) == pytest.approx(math.exp(-0.5) / q.normalization, rel=1e-12)


@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 6))
def test_density_matches_independent_mvn(seed, horizon):
    rng = np.random.default_rng(seed)
    q = straight_policy(horizon, 0.3, 0.6)
    tau = q.mean.waypoints + np.vstack([np.zeros((1, 2)), rng.normal(0, 0.4, (horizon - 1, 2))])
    cov = np.diag(np.repeat(q.sigmas ** 2, 2))
    ref = mvn_density(tau[1:].ravel(), q.mean.waypoints[1:].ravel(), cov)
    assert density(q, tau) == pytest.approx(ref, rel=1e-9)
    assert log_density(q, tau) == pytest.approx(math.log(ref), rel=1e-9)


def test_density_rejects_wrong_start():
    q = straight_policy(3)
    tau = q.mean.waypoints + 1.0
    with pytest.raises(ValueError):
        density(q, tau)


# ---------------------------------------------------------------- sampling

def test_degenerate_covariance_gives_the_mean():
    q = straight_policy(6, 1e-12, 1e-12)
    s = sample_trajectories(q, 50, seed=0)
    assert np.abs(s - q.mean.waypoints).max() < 1e-6


def test_sampling_deterministic():
    q = straight_policy(6)
    np.testing.assert_array_equal(sample_trajectories(q, 30, seed=9), sample_trajectories(q, 30, seed=9))


def test_sample_mean_standard_error():
    # a short path pads the mean with its end point, so the speed clamp never binds
    q = build_default_policy(np.array([[0.0, 0.0], [0.7, 0.0]]), 5, 1.0, 100.0,
                             CovarianceSchedule(0.1, 0.4), math.inf)
    n = 10 ** 4
    s = sample_trajectories(q, n, seed=2)
    err = np.abs(s.mean(axis=0)[1:] - q.mean.waypoints[1:])
    assert (err <= 3 * q.sigmas[:, None] / math.sqrt(n)).all()


@settings(max_examples=50)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 10), st.floats(0.01, 0.5), st.floats(0.5, 4.0))
def test_samples_respect_bounds(seed, horizon, sigma, eps_scale):
    q = straight_policy(horizon, sigma / 4, sigma, epsilon=eps_scale * math.sqrt(2 * (horizon - 1)))
    s = sample_trajectories(q, 64, seed=seed)
    assert s.shape == (64, horizon, 2)
    assert (s[:, 0] == q.mean.waypoints[0]).all()
    steps = np.linalg.norm(np.diff(s, axis=1), axis=2)
    assert (steps <= q.max_step * (1 + 1e-12)).all()
    assert (q.mahalanobis(s) <= q.epsilon).all()
    assert (log_density(q, s) <= log_density(q, q.mean.waypoints)).all()


def test_default_epsilon():
    assert default_epsilon(10) == pytest.approx(3 * math.sqrt(18))
