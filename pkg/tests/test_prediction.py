from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cgnav.grid import OccupancyGrid
from cgnav.prediction import (ConfusionCounts, InpaintParams, PredictedMap, PredictorKind, confusion,
                              inpaint, map_accuracy, predict)
from cgnav.sensing import UNKNOWN, ContextMap, Observation, SensorModel, accumulate, sense

KINDS = list(PredictorKind)


def _wall_context(row: int):
    truth = np.zeros((12, 12), bool)
    truth[row, :] = True
    state = truth.astype(np.int8)
    state[:, 6:] = UNKNOWN
    return OccupancyGrid(truth, 0.1), ContextMap(state, 0.1)


def _picture(occ):
    return ["".join("#" if v else "." for v in row) for row in occ]


@pytest.mark.parametrize("row", [4, 5])
def test_half_revealed_wall_is_continued(row):
    """Hand run of the fill on a 12x12 wall fixture, left half known.

    Sources (5x5, stride 2) are the windows at column 0 and rows 0, 2, 4, 6:
    all-free plus the wall at two local offsets. The first targets lie in
    column 6 next to the frontier. Targets whose known cells match no source
    exactly are deferred; a neighbouring target with the wall at a matching
    offset then pastes the wall row across, extent 6 reaches column 11, and
    dilation by one cell thickens only the imagined part.
    """
    truth, ctx = _wall_context(row)
    occ = inpaint(ctx, InpaintParams())
    expected = truth.occupied.copy()
    expected[row - 1:row + 2, 6:] = True
    assert _picture(occ) == _picture(expected)
    # the wall runs at least dilation_radius cells past the frontier
    assert occ[row, 6] and occ[row, 7]


def test_wall_continuation_small_patches():
    truth, ctx = _wall_context(5)
    occ = inpaint(ctx, InpaintParams(patch_size=3, search_stride=1, dilation_radius=0, bridge_radius=0))
    assert np.array_equal(occ, truth.occupied)


def test_extent_limits_the_fill():
    truth, ctx = _wall_context(5)
    occ = inpaint(ctx, InpaintParams(extent=2, dilation_radius=0, bridge_radius=0))
    assert occ[5, 6] and occ[5, 7] and not occ[5, 8:].any()


def test_gate_keeps_corner_sources_from_inventing_walls():
    # a lone corner as the only structure: free space must not grow walls
    state = np.zeros((14, 14), np.int8)
    state[3, 3:6] = 1
    state[3:6, 3] = 1
    state[:, 8:] = UNKNOWN
    occ = inpaint(ContextMap(state, 0.1), InpaintParams(dilation_radius=0, bridge_radius=0))
    assert not occ[:, 8:].any()


def test_bridge_closes_small_gaps_only_in_imagined_cells():
    state = np.zeros((9, 12), np.int8)
    state[4, :4] = 1
    state[4, 8:] = 1
    state[4, 4:8] = UNKNOWN
    occ = inpaint(ContextMap(state, 0.1), InpaintParams(extent=0, dilation_radius=0, bridge_radius=2))
    assert occ[4].all()
    assert np.array_equal(occ[state >= 0], state[state >= 0] == 1)


@pytest.mark.parametrize("kind", KINDS)
def test_fully_known_context_is_returned(kind):
    rng = np.random.default_rng(1)
    truth = OccupancyGrid(rng.random((10, 10)) < 0.3, 0.1)
    ctx = ContextMap(truth.occupied.astype(np.int8), 0.1)
    obs = Observation(np.argwhere(np.ones((10, 10), bool)), truth.occupied.ravel().astype(np.int8))
    pm = predict(kind, ctx, obs, truth)
    assert np.array_equal(pm.occupied, truth.occupied) and pm.imagined_count() == 0


def test_ci_with_empty_observation_is_all_free_imagined():
    truth = OccupancyGrid(np.ones((4, 4), bool), 0.1)
    ctx = ContextMap(truth.occupied.astype(np.int8), 0.1)
    pm = predict("ci", ctx, Observation.empty(), truth)
    assert not pm.occupied.any() and pm.imagined.all()


def test_oracle_needs_truth():
    with pytest.raises(ValueError, match="ground-truth"):
        predict("oracle", ContextMap.unknown(3, 3, 0.1), Observation.empty())


def test_parse_kind_aliases():
    assert PredictorKind.parse("Context-Generative") is PredictorKind.CONTEXT_GENERATIVE
    assert PredictorKind.parse("cn") is PredictorKind.CONTEXT_NEUTRAL
    with pytest.raises(ValueError):
        PredictorKind.parse("diffusion")


def test_serialization_and_provenance():
    pm = PredictedMap(np.array([[True, False]]), np.array([[False, True]]), 0.5)
    assert pm.to_text() == "2 1 0.5\n#.\n"
    assert pm.provenance_text() == "oi\n"


@pytest.mark.parametrize("bad", [dict(patch_size=4), dict(patch_size=1), dict(search_stride=0),
                                 dict(extent=-1), dict(max_mismatch=1.5)])
def test_inpaint_params_validation(bad):
    with pytest.raises(ValueError):
        InpaintParams(**bad)


def _history(seed):
    rng = np.random.default_rng(seed)
    occ = rng.random((24, 24)) < 0.15
    occ[12, 12] = False
    g = OccupancyGrid(occ, 0.1)
    ctx = ContextMap.like(g)
    pos = np.array([1.25, 1.25])
    obs = None
    for t in range(int(rng.integers(1, 6))):
        obs = sense(g, pos, SensorModel(range=0.6), t)
        ctx = accumulate(ctx, obs)
        nxt = pos + rng.normal(0, 0.15, 2)
        if g.contains(nxt) and g.is_free(nxt):
            pos = nxt
    return g, ctx, obs


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(KINDS))
def test_provenance_and_observed_fidelity(seed, kind):
    g, ctx, obs = _history(seed)
    pm = predict(kind, ctx, obs, g)
    assert pm.imagined.shape == g.shape and pm.imagined.dtype == bool
    observed = pm.observed
    assert confusion(pm, g, observed).accuracy == 1.0 if observed.any() else True
    if kind is not PredictorKind.CONTEXT_IGNORANT:
        assert np.array_equal(observed, ctx.known)
    assert np.array_equal(predict(kind, ctx, obs, g).occupied, pm.occupied)


@given(st.integers(0, 2 ** 32 - 1))
def test_oracle_is_perfect_and_cn_sees_more_than_ci(seed):
    g, ctx, obs = _history(seed)
    assert map_accuracy(predict("oracle", ctx, obs, g), g) == 1.0
    ci, cn = predict("ci", ctx, obs, g), predict("cn", ctx, obs, g)
    assert (ci.observed <= cn.observed).all()


# ---------------------------------------------------------------- confusion

def test_confusion_examples():
    free = OccupancyGrid(np.zeros((2, 3), bool), 0.1)
    assert confusion(np.zeros((2, 3), bool), free) == ConfusionCounts(0, 6, 0, 0)
    assert confusion(np.ones((2, 3), bool), free) == ConfusionCounts(0, 0, 6, 0)
    assert ConfusionCounts(6, 2, 1, 1).accuracy == 0.8


def test_confusion_shape_mismatch():
    with pytest.raises(ValueError):
        confusion(np.zeros((2, 2), bool), OccupancyGrid(np.zeros((3, 3), bool), 0.1))


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 9), st.integers(1, 9))
def test_confusion_sums_to_total(seed, h, w):
    rng = np.random.default_rng(seed)
    truth = OccupancyGrid(rng.random((h, w)) < 0.5, 0.1)
    pred = rng.random((h, w)) < 0.5
    cc = confusion(pred, truth)
    assert cc.total == h * w
    assert cc.accuracy == np.mean(pred == truth.occupied)
