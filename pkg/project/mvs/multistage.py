"""Coarse-to-fine plane sweep over the image pyramid."""

from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from project.mvs.cost import HomographyPlaneWarper, PlaneWarper, RpcPlaneWarper, aggregate_cost, sweep_stage
from project.mvs.errors import SweepError
from project.mvs.features import extract_features, rescale_map
from project.mvs.regression import HeightMap, soft_argmin, zscore_costs
from project.mvs.schedule import HeightPlaneSchedule, SweepConfig, build_schedule
from project.pinhole.camera import ProjectionMatrix
from project.rpc.model import RpcModel

logger = logging.getLogger(__name__)


def common_height_range(rpcs: Sequence[RpcModel]) -> tuple[float, float]:
    """Intersection of the models' valid height ranges."""
    lo = max(m.height_range[0] for m in rpcs)
    hi = min(m.height_range[1] for m in rpcs)
    if not lo < hi:
        raise SweepError(f"view height ranges do not overlap ([{lo}, {hi}])")
    return lo, hi


def _fill_invalid(hmap: HeightMap, fallback: float) -> np.ndarray:
    """Heights with invalid pixels replaced by their nearest valid neighbour."""
    if hmap.valid.all():
        return hmap.height
    if not hmap.valid.any():
        return np.full(hmap.shape, fallback)
    _, (rows, cols) = ndimage.distance_transform_edt(~hmap.valid, return_indices=True)
    return hmap.height[rows, cols]


def _stage_warper(
    stage_scale: float,
    rpcs: Sequence[RpcModel],
    cameras: Optional[Sequence[ProjectionMatrix]],
    ref_shape: tuple[int, int],
    source_shapes: Sequence[tuple[int, ...]],
) -> PlaneWarper:
    if cameras is not None:
        scaled = [c.scaled(stage_scale) for c in cameras]
        return HomographyPlaneWarper(scaled[0], scaled[1:], ref_shape, source_shapes)
    scaled = [m.scaled(stage_scale) for m in rpcs]
    return RpcPlaneWarper(scaled[0], scaled[1:], ref_shape, source_shapes)


def run_stages(
    ref_img: np.ndarray,
    src_imgs: Sequence[np.ndarray],
    rpcs: Sequence[RpcModel],
    cfg: SweepConfig = SweepConfig(),
    heights: Optional[tuple[float, float]] = None,
    cameras: Optional[Sequence[ProjectionMatrix]] = None,
    threads: int = 1,
) -> tuple[list[HeightMap], HeightPlaneSchedule]:
    """Height map of every stage, coarsest first, plus the schedule used.

    ``rpcs`` and ``cameras`` list the reference first, then the sources in
    the order of ``src_imgs``.
    """
    if len(rpcs) != len(src_imgs) + 1:
        raise SweepError(f"{len(src_imgs) + 1} images but {len(rpcs)} RPC models")
    if cameras is not None and len(cameras) != len(rpcs):
        raise SweepError(f"{len(rpcs)} views but {len(cameras)} cameras")
    if not src_imgs:
        raise SweepError("multi-stage sweep needs at least one source image")
    if cfg.view_count is not None and len(rpcs) > cfg.view_count:
        logger.debug("Using %d of %d views", cfg.view_count, len(rpcs))
        src_imgs = list(src_imgs)[: cfg.view_count - 1]
        rpcs = list(rpcs)[: cfg.view_count]
        if cameras is not None:
            cameras = list(cameras)[: cfg.view_count]

    d_min, d_max = common_height_range(rpcs) if heights is None else heights
    schedule = build_schedule(d_min, d_max, cfg)
    ref_pyramid = extract_features(ref_img, cfg.scales)
    src_pyramids = [extract_features(img, cfg.scales) for img in src_imgs]

    maps: list[HeightMap] = []
    for i, stage in enumerate(schedule.stages):
        ref_feats = ref_pyramid[i]
        src_feats = [p[i] for p in src_pyramids]
        shape = ref_feats.shape[-2:]
        if min(shape) < 1:
            raise SweepError(f"image too small for pyramid scale {stage.scale}")
        warper = _stage_warper(stage.scale, rpcs, cameras, shape, [f.shape for f in src_feats])

        if i == 0:
            planes = schedule.global_planes()
        else:
            prev = maps[-1]
            center = rescale_map(
                _fill_invalid(prev, (d_min + d_max) / 2.0),
                schedule.stages[i - 1].factor,
                stage.factor,
                shape,
            )
            planes = schedule.planes_around(i, center)

        vol = sweep_stage(ref_feats, src_feats, None, planes, cfg.min_valid_views, warper=warper, threads=threads)
        vol = aggregate_cost(vol, cfg.aggregation_radius)
        if cfg.zscore_costs:
            vol = zscore_costs(vol)
        hmap = soft_argmin(vol, cfg.temperature)
        hmap.scale = stage.scale
        maps.append(hmap)
        logger.info(
            "Stage %d/%d: scale %.4g, %d planes, interval %.3f m, %d/%d valid px",
            i + 1,
            len(schedule.stages),
            stage.scale,
            stage.plane_count,
            stage.interval,
            int(hmap.valid.sum()),
            hmap.valid.size,
        )
    return maps, schedule


def run_multistage(
    ref_img: np.ndarray,
    src_imgs: Sequence[np.ndarray],
    rpcs: Sequence[RpcModel],
    cfg: SweepConfig = SweepConfig(),
    heights: Optional[tuple[float, float]] = None,
    cameras: Optional[Sequence[ProjectionMatrix]] = None,
    threads: int = 1,
) -> HeightMap:
    """Full-resolution height map of the reference view."""
    maps, _ = run_stages(ref_img, src_imgs, rpcs, cfg, heights, cameras, threads)
    return maps[-1]
