from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from project.mvs.errors import EmptyCostVolumeError, SweepError
from project.pinhole.camera import ProjectionMatrix
from project.pinhole.homography import homography_grid
from project.rpc.model import RpcModel
from project.utils.parallel import parallel_map
from project.warp.resample import resample_bilinear
from project.warp.warping import CoordMap, PixelRect, warp_grid

logger = logging.getLogger(__name__)

INVALID_COST = 1e6


@dataclass
class CostVolume:
    """Plane-major cost volume.

    ``values`` and ``valid_count`` are (D, H, W); ``plane_heights`` is (D,)
    when all pixels share the planes and (D, H, W) otherwise.
    """

    values: np.ndarray
    plane_heights: np.ndarray
    valid_count: np.ndarray
    min_valid_views: int = 2

    def __post_init__(self):
        if self.values.ndim != 3 or self.values.shape != self.valid_count.shape:
            raise SweepError(f"cost {self.values.shape} and view counts {self.valid_count.shape} disagree")
        if self.plane_heights.shape not in ((self.values.shape[0],), self.values.shape):
            raise SweepError(f"plane heights {self.plane_heights.shape} do not fit cost {self.values.shape}")

    @property
    def plane_count(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[1], self.values.shape[2]

    @property
    def valid(self) -> np.ndarray:
        return self.valid_count >= self.min_valid_views

    def heights(self) -> np.ndarray:
        """Plane heights broadcast to (D, H, W)."""
        if self.plane_heights.ndim == 1:
            return np.broadcast_to(self.plane_heights[:, None, None], self.values.shape)
        return self.plane_heights

    def with_values(self, values: np.ndarray) -> "CostVolume":
        return CostVolume(values, self.plane_heights, self.valid_count, self.min_valid_views)


class PlaneWarper(ABC):
    """Source coordinates of every reference pixel on a height plane."""

    @property
    @abstractmethod
    def n_sources(self) -> int:
        ...

    @abstractmethod
    def coord_map(self, k: int, hei) -> CoordMap:
        ...


class RpcPlaneWarper(PlaneWarper):
    def __init__(
        self,
        ref: RpcModel,
        sources: Sequence[RpcModel],
        ref_shape: tuple[int, int],
        source_shapes: Sequence[tuple[int, ...]],
        use_iterative: bool = False,
    ):
        self.ref = ref
        self.sources = list(sources)
        self.rect = PixelRect(0, 0, ref_shape[1], ref_shape[0])
        self.source_shapes = list(source_shapes)
        self.use_iterative = use_iterative

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    def coord_map(self, k: int, hei) -> CoordMap:
        return warp_grid(self.sources[k], self.ref, self.rect, hei, self.source_shapes[k], self.use_iterative)


class HomographyPlaneWarper(PlaneWarper):
    """Warping through fitted pin-hole cameras sharing one local frame."""

    def __init__(
        self,
        ref: ProjectionMatrix,
        sources: Sequence[ProjectionMatrix],
        ref_shape: tuple[int, int],
        source_shapes: Sequence[tuple[int, ...]],
    ):
        self.ref = ref
        self.sources = list(sources)
        self.rect = PixelRect(0, 0, ref_shape[1], ref_shape[0])
        self.source_shapes = list(source_shapes)

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    def coord_map(self, k: int, hei) -> CoordMap:
        return homography_grid(self.ref, self.sources[k], self.rect, hei, self.source_shapes[k])


def _variance_cost(samples: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean over channels of the per-pixel variance across views.

    ``samples`` is (V, C, H, W), ``mask`` (V, H, W). Views are sorted per
    sample first, so the result does not depend on the source order.
    """
    x = np.where(mask[:, None], samples, np.nan)
    x = np.sort(x, axis=0)
    count = mask.sum(axis=0)
    d = x - x[0]
    n = np.maximum(count, 1)[None].astype(np.float64)
    mean_d = np.nansum(d, axis=0) / n
    mean_d2 = np.nansum(d * d, axis=0) / n
    var = np.maximum(mean_d2 - mean_d * mean_d, 0.0)
    return var.mean(axis=0), count


def sweep_stage(
    ref_feats: np.ndarray,
    src_feats: Sequence[np.ndarray],
    rpcs: Optional[Sequence[RpcModel]],
    planes,
    min_valid_views: int = 2,
    warper: Optional[PlaneWarper] = None,
    threads: int = 1,
) -> CostVolume:
    """Variance cost of every reference pixel on every plane.

    ``rpcs`` = [reference, *sources] at the feature resolution; ignored when
    ``warper`` is given. ``planes`` is (D,) or per-pixel (D, H, W).
    """
    ref_feats = np.asarray(ref_feats, dtype=np.float64)
    shape = ref_feats.shape[-2:]
    if not src_feats:
        raise SweepError("plane sweep needs at least one source view")
    if warper is None:
        if rpcs is None or len(rpcs) != len(src_feats) + 1:
            raise SweepError("rpcs must hold the reference model followed by one model per source")
        warper = RpcPlaneWarper(rpcs[0], rpcs[1:], shape, [f.shape for f in src_feats])
    planes = np.asarray(planes, dtype=np.float64)
    if not np.all(np.isfinite(planes)):
        raise SweepError("plane heights must be finite")

    ref_mask = np.ones(shape, dtype=bool)

    def plane_cost(d: int):
        samples = [ref_feats]
        masks = [ref_mask]
        for k, feats in enumerate(src_feats):
            warped, mask = resample_bilinear(feats, warper.coord_map(k, planes[d]))
            samples.append(warped)
            masks.append(mask)
        cost, count = _variance_cost(np.stack(samples), np.stack(masks))
        return np.where(count >= min_valid_views, cost, INVALID_COST), count

    results = parallel_map(plane_cost, range(planes.shape[0]), threads)
    values = np.stack([r[0] for r in results])
    counts = np.stack([r[1] for r in results]).astype(np.int32)
    vol = CostVolume(values=values, plane_heights=planes, valid_count=counts, min_valid_views=min_valid_views)
    if not vol.valid.any():
        raise EmptyCostVolumeError(f"no pixel of the {shape[1]}x{shape[0]} tile is seen by {min_valid_views} views")
    logger.debug(
        "Swept %d planes over %dx%d px, %.1f%% valid cells",
        vol.plane_count,
        shape[1],
        shape[0],
        100.0 * vol.valid.mean(),
    )
    return vol


def aggregate_cost(vol: CostVolume, radius: int) -> CostVolume:
    """Per-plane box filter over valid cells, normalized by the number of valid cells in the window."""
    if radius < 0:
        raise ValueError("aggregation radius must be non-negative")
    if radius == 0:
        return vol
    valid = vol.valid
    size = (1, 2 * radius + 1, 2 * radius + 1)
    num = ndimage.uniform_filter(np.where(valid, vol.values, 0.0), size=size, mode="constant")
    den = ndimage.uniform_filter(valid.astype(np.float64), size=size, mode="constant")
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(valid & (den > 0), num / den, INVALID_COST)
    return vol.with_values(values)
