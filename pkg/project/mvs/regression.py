from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from project.mvs.cost import INVALID_COST, CostVolume


@dataclass
class HeightMap:
    height: np.ndarray
    valid: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        self.height = np.asarray(self.height, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool) & np.isfinite(self.height)

    @property
    def shape(self) -> tuple[int, int]:
        return self.height.shape

    def stats(self) -> dict:
        h = self.height[self.valid]
        return {
            "valid_pixels": int(h.size),
            "total_pixels": int(self.height.size),
            "min": float(h.min()) if h.size else None,
            "max": float(h.max()) if h.size else None,
            "mean": float(h.mean()) if h.size else None,
        }


def zscore_costs(vol: CostVolume) -> CostVolume:
    """Standardize each pixel's valid costs along the plane axis."""
    valid = vol.valid
    n = valid.sum(axis=0)
    safe_n = np.maximum(n, 1)
    masked = np.where(valid, vol.values, 0.0)
    mean = masked.sum(axis=0) / safe_n
    var = np.where(valid, (vol.values - mean) ** 2, 0.0).sum(axis=0) / safe_n
    std = np.sqrt(var)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(std > 0, (vol.values - mean) / std, 0.0)
    return vol.with_values(np.where(valid, z, INVALID_COST))


def soft_argmin(vol: CostVolume, temperature: float = 1.0) -> HeightMap:
    """Softmax(-cost / temperature) expectation of plane heights over valid planes."""
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    valid = vol.valid
    any_valid = valid.any(axis=0)
    cost = np.where(valid, vol.values, np.inf)
    c_min = np.where(any_valid, cost.min(axis=0), 0.0)
    with np.errstate(invalid="ignore", over="ignore"):
        weights = np.where(valid, np.exp(-(cost - c_min) / temperature), 0.0)
    heights = vol.heights()
    num = (weights * heights).sum(axis=0)
    den = weights.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        height = np.where(any_valid, num / den, np.nan)
    height = np.clip(height, heights.min(axis=0), heights.max(axis=0))
    return HeightMap(height=height, valid=any_valid)
