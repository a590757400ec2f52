"""Block-wise DSM production: crops, multi-stage sweeps, consistency filter, fusion, mosaic."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from project.config import default_config
from project.errors import SatMvsError
from project.geo.blocks import (
    Aoi,
    DemHeightSource,
    ElevationSource,
    GeoBlock,
    RpcHeightSource,
    block_tiles,
    compute_crop,
    resolve_block,
    uniform_crops,
)
from project.geo.consistency import geometric_consistency_filter
from project.geo.dsm import Dsm, DsmGrid, fuse_dsm, mosaic_dsms, write_dsm
from project.geo.errors import GeometryMismatchError, NoOverlapError
from project.geo.metrics import DsmMetrics, evaluate_dsm, write_metrics
from project.geo.utm import geodetic_to_utm
from project.mvs.io import write_height_map
from project.mvs.multistage import run_multistage
from project.mvs.regression import HeightMap
from project.mvs.schedule import SweepConfig
from project.pinhole.camera import LocalFrame
from project.pinhole.fitting import fit_pinhole
from project.rpc.fitting import GridSpec
from project.rpc.model import RpcModel
from project.schemas.config_schemas import Config
from project.utils.parallel import parallel_map
from project.warp.warping import PixelRect

logger = logging.getLogger(__name__)


class View(NamedTuple):
    image: np.ndarray
    rpc: RpcModel
    name: str = ""


@dataclass
class BlockResult:
    block_id: int
    bounds: Aoi
    status: str  # ok | skipped | failed
    # None when the block heights could not be resolved
    block: Optional[GeoBlock] = None
    # on a window of the mosaic grid
    dsm: Optional[Dsm] = None
    height_maps: list[tuple[int, HeightMap]] = field(default_factory=list)
    error: Optional[str] = None


@dataclass
class PipelineResult:
    dsm: Dsm
    blocks: list[BlockResult]
    runtime_s: float
    metrics: Optional[DsmMetrics] = None

    @property
    def failures(self) -> list[dict]:
        return [{"block_id": b.block_id, "error": b.error or ""} for b in self.blocks if b.status == "failed"]


def dsm_grid_for_aoi(aoi: Aoi, cell_size: float) -> DsmGrid:
    """Snapped UTM grid covering the AOI; the zone follows the AOI center."""
    lat = np.array([aoi.lat_min, aoi.lat_min, aoi.lat_max, aoi.lat_max])
    lon = np.array([aoi.lon_min, aoi.lon_max, aoi.lon_max, aoi.lon_min])
    center_lat, center_lon = aoi.center()
    zone_of = geodetic_to_utm(center_lat, center_lon)
    utm = geodetic_to_utm(lat, lon, zone=zone_of.zone, northern=zone_of.northern)
    e, n = np.asarray(utm.easting), np.asarray(utm.northing)
    return DsmGrid.from_bounds(zone_of.zone, zone_of.northern, e.min(), e.max(), n.min(), n.max(), cell_size)


def _crop(image: np.ndarray, rect: PixelRect) -> np.ndarray:
    return np.asarray(image[rect.y0 : rect.y0 + rect.height, rect.x0 : rect.x0 + rect.width], dtype=np.float64)


def _clip_heights(block: GeoBlock, rpcs: Sequence[RpcModel]) -> tuple[float, float]:
    lo = max([block.h_min] + [m.height_range[0] for m in rpcs])
    hi = min([block.h_max] + [m.height_range[1] for m in rpcs])
    if not lo < hi:
        raise GeometryMismatchError(f"block heights [{block.h_min}, {block.h_max}] m fall outside the RPC ranges")
    return lo, hi


def block_grid(grid: DsmGrid, block: GeoBlock) -> DsmGrid:
    """Window of the mosaic grid over the block, one cell of margin for the curved UTM edges."""
    lat, lon = block.corners()
    utm = geodetic_to_utm(lat, lon, zone=grid.zone, northern=grid.northern)
    e, n = np.asarray(utm.easting), np.asarray(utm.northing)
    m = grid.cell_size
    return grid.window_for_bounds(e.min() - m, e.max() + m, n.min() - m, n.max() + m)


def process_block(
    block: GeoBlock,
    views: Sequence[View],
    grid: DsmGrid,
    config: Config,
    threads: int = 1,
) -> BlockResult:
    """Height maps and DSM of one block; the DSM covers only the block window of ``grid``."""
    params = config.pipeline
    grid = block_grid(grid, block)
    crops = []
    for i, view in enumerate(views):
        try:
            crops.append(compute_crop(view.rpc, block, params.pad, i))
        except GeometryMismatchError as e:
            logger.warning("Block %d: view %d skipped (%s)", block.block_id, i, e)
    crops = [c for c in uniform_crops(crops, [views[c.view_index].image.shape for c in crops]) if c is not None]
    if len(crops) < 2:
        logger.warning("Block %d is seen by %d view(s); skipped", block.block_id, len(crops))
        return BlockResult(
            block.block_id, block.bounds, "skipped", block=block, dsm=Dsm.empty(grid), error="fewer than 2 views"
        )

    indices = [c.view_index for c in crops]
    images = [_crop(views[c.view_index].image, c.rect) for c in crops]
    rpcs = [views[c.view_index].rpc.shifted(c.rect.x0, c.rect.y0) for c in crops]
    heights = _clip_heights(block, rpcs)
    sweep_cfg = SweepConfig.from_config(config.sweep)

    cameras = None
    if params.warping == "homography":
        lat_c = (block.lat_min + block.lat_max) / 2.0
        lon_c = (block.lon_min + block.lon_max) / 2.0
        frame = LocalFrame.at(lat_c, lon_c, (heights[0] + heights[1]) / 2.0)
        cameras = []
        for rpc, img in zip(rpcs, images):
            cam, report = fit_pinhole(
                rpc,
                PixelRect(0, 0, img.shape[1], img.shape[0]),
                heights,
                grid=GridSpec(*config.pinhole.fit_grid),
                check_grid=GridSpec(*config.pinhole.check_grid),
                refine=config.pinhole.refine,
                frame=frame,
            )
            logger.debug("Block %d: pinhole fit max error %.4f px", block.block_id, report.max_err)
            cameras.append(cam)

    maps = []
    for r in range(len(images)):
        order = [r] + [k for k in range(len(images)) if k != r]
        maps.append(
            run_multistage(
                images[r],
                [images[k] for k in order[1:]],
                [rpcs[k] for k in order],
                sweep_cfg,
                heights=heights,
                cameras=[cameras[k] for k in order] if cameras is not None else None,
                threads=threads,
            )
        )
    filtered = [
        geometric_consistency_filter(
            maps,
            rpcs,
            r,
            threshold=params.consistency_threshold,
            height_threshold=params.height_threshold,
            min_consistent_views=params.min_consistent_views,
        )
        for r in range(len(maps))
    ]
    dsm = fuse_dsm(
        filtered,
        rpcs,
        grid,
        bounds=(block.lat_min, block.lat_max, block.lon_min, block.lon_max),
    )
    logger.info(
        "Block %d: %d views, %d DSM cells filled",
        block.block_id,
        len(images),
        int(dsm.valid.sum()),
    )
    return BlockResult(
        block.block_id, block.bounds, "ok", block=block, dsm=dsm, height_maps=list(zip(indices, filtered))
    )


def elevation_source(config: Config, views: Sequence[View]) -> ElevationSource:
    if config.pipeline.dem_path:
        return DemHeightSource(config.pipeline.dem_path, config.pipeline.dem_margin)
    return RpcHeightSource([v.rpc for v in views])


def run_pipeline(
    views: Sequence[View],
    aoi: Aoi,
    config: Optional[Config] = None,
    gt: Optional[Dsm] = None,
    threads: Optional[int] = None,
) -> PipelineResult:
    """DSM of ``aoi`` from all views; block failures are logged and the run continues."""
    start = time.perf_counter()
    config = config or default_config()
    threads = config.runtime.threads if threads is None else threads
    if len(views) < 2:
        raise GeometryMismatchError("the pipeline needs at least two views")
    aoi = Aoi(*aoi).check()
    grid = dsm_grid_for_aoi(aoi, config.pipeline.cell_size)
    tiles = block_tiles(aoi, config.pipeline.block_size)
    source = elevation_source(config, views)

    outer, inner = (threads, 1) if len(tiles) > 1 else (1, threads)

    def run(item: tuple[int, Aoi]) -> BlockResult:
        block_id, bounds = item
        block = None
        try:
            block = resolve_block(block_id, bounds, source)
            return process_block(block, views, grid, config, inner)
        except SatMvsError as e:
            logger.warning("Block %d failed: %s", block_id, e)
            return BlockResult(block_id, bounds, "failed", block=block, error=f"{type(e).__name__}: {e}")

    results = parallel_map(run, list(enumerate(tiles)), outer)
    dsm = mosaic_dsms([r.dsm for r in results if r.dsm is not None], grid)

    metrics = None
    if gt is not None:
        try:
            metrics = evaluate_dsm(dsm, gt)
        except NoOverlapError as e:
            logger.warning("DSM not evaluated: %s", e)
    runtime = time.perf_counter() - start
    logger.info(
        "Pipeline finished in %.1f s: %d blocks, %d failed",
        runtime,
        len(results),
        sum(r.status == "failed" for r in results),
    )
    return PipelineResult(dsm=dsm, blocks=results, runtime_s=runtime, metrics=metrics)


def save_result(result: PipelineResult, out_dir: Union[str, Path], height_maps: bool = True) -> Path:
    """dsm.asc (+ sidecar), metrics.json and optional per-block PFM height maps."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_dsm(result.dsm, out_dir / "dsm.asc")
    if height_maps:
        for block in result.blocks:
            for view_index, hmap in block.height_maps:
                write_height_map(out_dir / "heights" / f"block{block.block_id:03d}_view{view_index}.pfm", hmap)
    write_metrics(
        out_dir / "metrics.json",
        result.metrics,
        result.runtime_s,
        result.failures,
        extra={"blocks": [{"block_id": b.block_id, "status": b.status} for b in result.blocks]},
    )
    return out_dir
