from project.mvs.cost import INVALID_COST, CostVolume, aggregate_cost, sweep_stage
from project.mvs.errors import EmptyCostVolumeError, ScheduleError, SweepError
from project.mvs.features import extract_features
from project.mvs.io import read_height_map, write_height_map
from project.mvs.multistage import run_multistage, run_stages
from project.mvs.regression import HeightMap, soft_argmin, zscore_costs
from project.mvs.schedule import HeightPlaneSchedule, SweepConfig, build_schedule

__all__ = [
    "INVALID_COST",
    "CostVolume",
    "EmptyCostVolumeError",
    "HeightMap",
    "HeightPlaneSchedule",
    "ScheduleError",
    "SweepConfig",
    "SweepError",
    "aggregate_cost",
    "build_schedule",
    "extract_features",
    "read_height_map",
    "run_multistage",
    "run_stages",
    "soft_argmin",
    "sweep_stage",
    "write_height_map",
    "zscore_costs",
]
