from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from project.mvs.errors import ScheduleError

logger = logging.getLogger(__name__)


class Centering(str, Enum):
    GLOBAL = "global-range"
    PREVIOUS = "previous-height-map"


@dataclass(frozen=True)
class SweepConfig:
    scales: tuple[float, ...] = (0.0625, 0.25, 1.0)
    plane_counts: tuple[int, ...] = (64, 32, 8)
    # None: (d_max - d_min) / plane_count
    intervals: tuple[Optional[float], ...] = (None, 5.0, 2.5)
    aggregation_radius: int = 2
    temperature: float = 1.0
    zscore_costs: bool = True
    min_valid_views: int = 2
    # reference plus at most view_count - 1 sources; None uses every view
    view_count: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))
        object.__setattr__(self, "plane_counts", tuple(int(c) for c in self.plane_counts))
        object.__setattr__(self, "intervals", tuple(None if i is None else float(i) for i in self.intervals))
        n = len(self.scales)
        if n == 0 or len(self.plane_counts) != n or len(self.intervals) != n:
            raise ScheduleError("scales, plane_counts and intervals must have the same non-zero length")
        if any(b <= a for a, b in zip(self.scales, self.scales[1:])) or self.scales[-1] != 1.0:
            raise ScheduleError(f"scales must ascend to 1, got {self.scales}")
        for s in self.scales:
            factor = 1.0 / s
            if s <= 0 or abs(factor - round(factor)) > 1e-9:
                raise ScheduleError(f"scale {s} is not the inverse of an integer")
        if any(c < 2 for c in self.plane_counts):
            raise ScheduleError("every stage needs at least 2 planes")
        if any(i is not None and i <= 0 for i in self.intervals):
            raise ScheduleError("plane intervals must be positive")
        if any(i is None for i in self.intervals[1:]):
            raise ScheduleError("refinement stages need an explicit interval")
        if self.aggregation_radius < 0:
            raise ScheduleError("aggregation radius must be non-negative")
        if not self.temperature > 0:
            raise ScheduleError("temperature must be positive")
        if self.min_valid_views < 1:
            raise ScheduleError("min_valid_views must be at least 1")
        if self.view_count is not None and self.view_count < 2:
            raise ScheduleError("a sweep needs at least 2 views")

    @classmethod
    def from_config(cls, section, **overrides) -> "SweepConfig":
        values = dict(
            scales=tuple(section.scales),
            plane_counts=tuple(section.plane_counts),
            intervals=tuple(section.intervals),
            aggregation_radius=section.aggregation_radius,
            temperature=section.temperature,
            zscore_costs=section.zscore_costs,
            min_valid_views=section.min_valid_views,
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass(frozen=True)
class StageSpec:
    scale: float
    plane_count: int
    interval: float
    centering: Centering

    @property
    def factor(self) -> int:
        return int(round(1.0 / self.scale))

    @property
    def half_span(self) -> float:
        return (self.plane_count - 1) * self.interval / 2.0


@dataclass(frozen=True)
class HeightPlaneSchedule:
    d_min: float
    d_max: float
    stages: tuple[StageSpec, ...] = field(default_factory=tuple)

    def global_planes(self) -> np.ndarray:
        """Stage-1 planes: inclusive uniform samples of [d_min, d_max]."""
        return np.linspace(self.d_min, self.d_max, self.stages[0].plane_count)

    def planes_around(self, stage: int, center: np.ndarray) -> np.ndarray:
        """Per-pixel planes (D, H, W) centered on ``center`` and kept inside [d_min, d_max].

        The window is shifted, not cut, when it would cross a bound, so every
        pixel keeps ``plane_count`` distinct planes at the stage interval.
        """
        spec = self.stages[stage]
        center = np.asarray(center, dtype=np.float64)
        span = 2.0 * spec.half_span
        offsets = (np.arange(spec.plane_count) - (spec.plane_count - 1) / 2.0) * spec.interval
        if span >= self.d_max - self.d_min:
            planes = center[None] + offsets[:, None, None]
            return np.clip(planes, self.d_min, self.d_max)
        mid = np.clip(center, self.d_min + spec.half_span, self.d_max - spec.half_span)
        return mid[None] + offsets[:, None, None]

    def to_dict(self) -> dict:
        return {
            "d_min": self.d_min,
            "d_max": self.d_max,
            "stages": [
                {
                    "scale": s.scale,
                    "plane_count": s.plane_count,
                    "interval": s.interval,
                    "centering": s.centering.value,
                }
                for s in self.stages
            ],
        }


def build_schedule(d_min: float, d_max: float, cfg: SweepConfig = SweepConfig()) -> HeightPlaneSchedule:
    if not (math.isfinite(d_min) and math.isfinite(d_max)) or d_min >= d_max:
        raise ScheduleError(f"height range must satisfy d_min < d_max, got [{d_min}, {d_max}]")
    stages = []
    for i, (scale, count, interval) in enumerate(zip(cfg.scales, cfg.plane_counts, cfg.intervals)):
        if i == 0:
            stages.append(
                StageSpec(
                    scale=scale,
                    plane_count=count,
                    interval=(d_max - d_min) / count if interval is None else interval,
                    centering=Centering.GLOBAL,
                )
            )
        else:
            stages.append(StageSpec(scale=scale, plane_count=count, interval=interval, centering=Centering.PREVIOUS))
    schedule = HeightPlaneSchedule(d_min=float(d_min), d_max=float(d_max), stages=tuple(stages))
    logger.debug("Plane schedule: %s", schedule.to_dict())
    return schedule
