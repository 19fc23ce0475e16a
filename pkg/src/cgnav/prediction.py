"""Map predictors behind one interface, plus the confusion-based accuracy metric.

Four predictor kinds are supported:

* ``CONTEXT_IGNORANT`` keeps only the current field of view; everything else
  is imagined free.
* ``CONTEXT_NEUTRAL`` keeps the whole accumulated context; unknown cells are
  imagined free.
* ``CONTEXT_GENERATIVE`` keeps the context and extrapolates unknown cells near
  it by patch-based inpainting.
* ``ORACLE`` copies the ground truth (testing only).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import binary_closing, binary_dilation, distance_transform_cdt

from . import _kernels
from .grid import OccupancyGrid, format_grid
from .sensing import ContextMap, Observation


class PredictorKind(str, enum.Enum):
    CONTEXT_IGNORANT = "ci"
    CONTEXT_NEUTRAL = "cn"
    CONTEXT_GENERATIVE = "cg"
    ORACLE = "oracle"

    @classmethod
    def parse(cls, name: str) -> PredictorKind:
        aliases = {
            "context_ignorant": cls.CONTEXT_IGNORANT,
            "context_neutral": cls.CONTEXT_NEUTRAL,
            "context_generative": cls.CONTEXT_GENERATIVE,
        }
        key = str(name).strip().lower().replace("-", "_")
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown predictor kind {name!r}") from None


@dataclass(frozen=True)
class InpaintParams:
    """Patch-match inpainting settings (all sizes in cells).

    ``extent`` bounds how far from known cells the fill reaches; cells beyond
    it stay free. ``seed`` is carried for configuration symmetry only: the
    fill itself has no random choices.
    """

    patch_size: int = 5
    search_stride: int = 2
    dilation_radius: int = 1
    extent: int = 6
    max_mismatch: float = 0.0
    bridge_radius: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.patch_size < 3 or self.patch_size % 2 == 0:
            raise ValueError(f"patch_size must be odd and >= 3, got {self.patch_size}")
        if self.search_stride < 1:
            raise ValueError("search_stride must be >= 1")
        if min(self.dilation_radius, self.extent, self.bridge_radius) < 0:
            raise ValueError("dilation_radius, extent and bridge_radius must be non-negative")
        if not 0.0 <= self.max_mismatch <= 1.0:
            raise ValueError("max_mismatch must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class PredictedMap:
    """Binary map plus provenance: ``imagined[r, c]`` is True for cells not observed."""

    occupied: np.ndarray
    imagined: np.ndarray
    resolution: float

    @property
    def observed(self) -> np.ndarray:
        return ~self.imagined

    @property
    def grid(self) -> OccupancyGrid:
        return OccupancyGrid(self.occupied, self.resolution)

    @property
    def shape(self):
        return self.occupied.shape

    def imagined_count(self) -> int:
        return int(np.count_nonzero(self.imagined))

    def to_text(self) -> str:
        return format_grid(self.occupied, self.resolution)

    def provenance_text(self) -> str:
        return "".join("".join(np.where(row, "i", "o")) + "\n" for row in self.imagined)


def _sources(values: np.ndarray, patch: int, stride: int) -> np.ndarray:
    """Distinct fully-known patches on the stride lattice, most frequent first
    (ties in first-seen scan order), so equally good matches resolve to the
    commonest pattern."""
    h, w = values.shape
    if h < patch or w < patch:
        return np.zeros((0, patch, patch), dtype=np.int8)
    windows = sliding_window_view(values, (patch, patch))[::stride, ::stride]
    flat = windows.reshape(-1, patch * patch)
    flat = flat[(flat >= 0).all(axis=1)]
    if len(flat) == 0:
        return np.zeros((0, patch, patch), dtype=np.int8)
    _, first, counts = np.unique(flat, axis=0, return_index=True, return_counts=True)
    order = np.lexsort((first, -counts))
    return np.ascontiguousarray(flat[first[order]].reshape(-1, patch, patch), dtype=np.int8)


def _square(k: int) -> np.ndarray:
    return np.ones((2 * k + 1, 2 * k + 1), dtype=bool)


def inpaint(context: ContextMap, params: InpaintParams) -> np.ndarray:
    """Occupancy (bool) with unknown cells filled by patch matching and dilation."""
    values = context.state.astype(np.int8, copy=True)
    known = values >= 0
    if known.all():
        return values == 1
    if not known.any():
        return np.zeros(values.shape, dtype=bool)
    half = params.patch_size // 2
    sources = _sources(values, params.patch_size, params.search_stride)
    allowed = distance_transform_cdt(~known, metric="chessboard") <= params.extent
    _kernels.inpaint(values, allowed, sources, half, params.max_mismatch)
    occupied = values == 1
    imagined = ~known
    k = params.dilation_radius
    if k > 0:
        grown = binary_dilation(occupied & imagined, structure=_square(k))
        occupied = occupied | (grown & imagined)
    b = params.bridge_radius
    if b > 0:
        # gaps of up to 2b unknown cells between obstacles are bridged
        # without thickening what was observed
        bridged = binary_closing(occupied, structure=_square(b), border_value=0)
        occupied = occupied | (bridged & imagined)
    return occupied


def predict(kind: PredictorKind, context: ContextMap, current_obs: Observation,
            ground_truth: OccupancyGrid | None = None,
            params: InpaintParams | None = None) -> PredictedMap:
    kind = PredictorKind(kind)
    shape = context.shape
    if ground_truth is not None and ground_truth.shape != shape:
        raise ValueError(f"context shape {shape} does not match world shape {ground_truth.shape}")
    known = context.known
    if kind is PredictorKind.CONTEXT_IGNORANT:
        observed = current_obs.mask(shape)
        occupied = np.zeros(shape, dtype=bool)
        occupied[current_obs.cells[:, 0], current_obs.cells[:, 1]] = current_obs.states == 1
    elif kind is PredictorKind.CONTEXT_NEUTRAL:
        observed = known
        occupied = context.occupied
    elif kind is PredictorKind.CONTEXT_GENERATIVE:
        observed = known
        occupied = inpaint(context, params or InpaintParams())
    elif kind is PredictorKind.ORACLE:
        if ground_truth is None:
            raise ValueError("the oracle predictor needs the ground-truth grid")
        observed = known
        occupied = ground_truth.occupied.copy()
    else:  # pragma: no cover
        raise ValueError(kind)
    return PredictedMap(np.asarray(occupied, dtype=bool), ~observed, context.resolution)


@dataclass(frozen=True)
class ConfusionCounts:
    n_tp: int
    n_tn: int
    n_fp: int
    n_fn: int

    @property
    def total(self) -> int:
        return self.n_tp + self.n_tn + self.n_fp + self.n_fn

    @property
    def accuracy(self) -> float:
        return (self.n_tp + self.n_tn) / self.total


def confusion(predicted, truth: OccupancyGrid, region: np.ndarray | None = None) -> ConfusionCounts:
    """Confusion counts with occupied as the positive class."""
    pred = predicted.occupied if isinstance(predicted, (PredictedMap, OccupancyGrid)) else np.asarray(predicted, bool)
    gt = truth.occupied
    if pred.shape != gt.shape:
        raise ValueError(f"predicted shape {pred.shape} does not match truth shape {gt.shape}")
    if region is not None:
        pred, gt = pred[region], gt[region]
    return ConfusionCounts(
        n_tp=int(np.count_nonzero(pred & gt)),
        n_tn=int(np.count_nonzero(~pred & ~gt)),
        n_fp=int(np.count_nonzero(pred & ~gt)),
        n_fn=int(np.count_nonzero(~pred & gt)),
    )


def map_accuracy(predicted, truth: OccupancyGrid) -> float:
    return confusion(predicted, truth).accuracy
