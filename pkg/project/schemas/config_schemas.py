from dataclasses import dataclass, field
from typing import Optional


@dataclass
class AppSection:
    name: str


@dataclass
class LoggerSection:
    format: str
    level: str = "INFO"


@dataclass
class RuntimeSection:
    threads: int = 1
    seed: int = 0


@dataclass
class SweepSection:
    scales: list[float] = field(default_factory=lambda: [0.0625, 0.25, 1.0])
    plane_counts: list[int] = field(default_factory=lambda: [64, 32, 8])
    # None = (d_max - d_min) / plane_count
    intervals: list[Optional[float]] = field(default_factory=lambda: [None, 5.0, 2.5])
    aggregation_radius: int = 2
    temperature: float = 1.0
    zscore_costs: bool = True
    min_valid_views: int = 2


@dataclass
class PipelineSection:
    block_size: float = 3000.0
    pad: int = 16
    consistency_threshold: float = 1.0
    height_threshold: Optional[float] = None
    min_consistent_views: int = 1
    cell_size: float = 5.0
    warping: str = "rpc"
    dem_path: Optional[str] = None
    dem_margin: float = 0.0


@dataclass
class PinholeSection:
    fit_grid: list[int] = field(default_factory=lambda: [10, 10, 10])
    check_grid: list[int] = field(default_factory=lambda: [20, 20, 20])
    refine: bool = True


@dataclass
class SyntheticSection:
    center_lat: float = 40.0
    center_lon: float = 116.5
    size_px: int = 1024
    gsd: float = 2.5
    base_height: float = 100.0
    relief: float = 300.0
    n_bumps: int = 6
    ramp: bool = False
    view_angles: list[float] = field(default_factory=lambda: [0.0, 22.0, -22.0])
    orbit_height: float = 500000.0
    cell_size: float = 5.0


@dataclass
class Config:
    app: AppSection
    logger: LoggerSection
    runtime: RuntimeSection
    sweep: SweepSection
    pipeline: PipelineSection
    pinhole: PinholeSection
    synthetic: SyntheticSection
