"""Bounded-rational navigation in unknown occupancy grids with context-aware map prediction."""

from .grid import CellState, GoalRegion, OccupancyGrid, load_grid, save_grid, segment_collides, shortest_path_oracle
from .prediction import InpaintParams, PredictedMap, PredictorKind, map_accuracy, predict
from .scenario import RandomBlocks, ScenarioSpec, UTrap, Walls, generate_scenario
from .sensing import ContextMap, Observation, SensorModel, accumulate, explored_area, sense

__version__ = "0.1.0"

__all__ = [
    "CellState", "GoalRegion", "OccupancyGrid", "load_grid", "save_grid", "segment_collides",
    "shortest_path_oracle", "InpaintParams", "PredictedMap", "PredictorKind", "map_accuracy", "predict",
    "RandomBlocks", "ScenarioSpec", "UTrap", "Walls", "generate_scenario", "ContextMap", "Observation",
    "SensorModel", "accumulate", "explored_area", "sense",
]
