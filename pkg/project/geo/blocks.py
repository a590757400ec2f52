"""Block partition of an area of interest and per-view crop computation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional, Protocol, Sequence, Union

import numpy as np

from project.geo.dsm import AsciiGrid, read_ascii_raster
from project.geo.errors import EmptyAoiError, GeometryMismatchError, NoOverlapError
from project.geo.utm import geodetic_to_utm
from project.rpc.model import RpcModel
from project.warp.warping import PixelRect

logger = logging.getLogger(__name__)

FLAT_HEIGHT_PAD = 0.5


class Aoi(NamedTuple):
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def check(self) -> "Aoi":
        values = (self.lat_min, self.lat_max, self.lon_min, self.lon_max)
        if not all(math.isfinite(v) for v in values):
            raise EmptyAoiError(f"AOI bounds must be finite: {self}")
        if not (self.lat_min < self.lat_max and self.lon_min < self.lon_max):
            raise EmptyAoiError(f"empty AOI {self}")
        return self

    def center(self) -> tuple[float, float]:
        return (self.lat_min + self.lat_max) / 2.0, (self.lon_min + self.lon_max) / 2.0


@dataclass(frozen=True)
class GeoBlock:
    block_id: int
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float
    h_min: float
    h_max: float

    def __post_init__(self):
        if not (self.lat_min < self.lat_max and self.lon_min < self.lon_max):
            raise EmptyAoiError(f"block {self.block_id} has empty bounds")
        if not self.h_min <= self.h_max:
            raise GeometryMismatchError(f"block {self.block_id}: h_min {self.h_min} > h_max {self.h_max}")

    @property
    def bounds(self) -> Aoi:
        return Aoi(self.lat_min, self.lat_max, self.lon_min, self.lon_max)

    def corners(self) -> tuple[np.ndarray, np.ndarray]:
        lat = np.array([self.lat_min, self.lat_min, self.lat_max, self.lat_max])
        lon = np.array([self.lon_min, self.lon_max, self.lon_max, self.lon_min])
        return lat, lon


class ElevationSource(Protocol):
    def height_bounds(self, bounds: Aoi) -> tuple[float, float]:
        ...


class RpcHeightSource:
    """Heights from the intersection of the views' RPC height ranges."""

    def __init__(self, rpcs: Sequence[RpcModel]):
        if not rpcs:
            raise GeometryMismatchError("at least one RPC model is required")
        self.h_min = max(m.height_range[0] for m in rpcs)
        self.h_max = min(m.height_range[1] for m in rpcs)
        if not self.h_min < self.h_max:
            raise GeometryMismatchError("RPC height ranges do not overlap")

    def height_bounds(self, bounds: Aoi) -> tuple[float, float]:
        return self.h_min, self.h_max


class DemHeightSource:
    """Coarse DEM in geographic coordinates: xllcorner is a longitude, yllcorner a latitude."""

    def __init__(self, dem: Union[AsciiGrid, str, Path], margin: float = 0.0):
        self.dem = dem if isinstance(dem, AsciiGrid) else read_ascii_raster(dem)
        self.margin = float(margin)
        cell = self.dem.cellsize
        self.lon = self.dem.xllcorner + (np.arange(self.dem.ncols) + 0.5) * cell
        self.lat = self.dem.top - (np.arange(self.dem.nrows) + 0.5) * cell

    def height_bounds(self, bounds: Aoi) -> tuple[float, float]:
        """Min/max over every DEM cell whose footprint overlaps ``bounds``."""
        half = self.dem.cellsize / 2.0
        rows = (self.lat + half > bounds.lat_min) & (self.lat - half < bounds.lat_max)
        cols = (self.lon + half > bounds.lon_min) & (self.lon - half < bounds.lon_max)
        window = self.dem.values[np.ix_(rows, cols)]
        window = window[np.isfinite(window)]
        if window.size == 0:
            raise NoOverlapError(f"DEM has no valid cells over {tuple(bounds)}")
        h_min = float(window.min()) - self.margin
        h_max = float(window.max()) + self.margin
        if h_min == h_max:
            h_min, h_max = h_min - FLAT_HEIGHT_PAD, h_max + FLAT_HEIGHT_PAD
        return h_min, h_max


def meters_per_degree(lat: float, lon: float) -> tuple[float, float]:
    """Ground meters per degree of latitude and of longitude around (lat, lon)."""
    d = 1e-3
    lats = np.array([lat - d, lat + d, lat, lat])
    lons = np.array([lon, lon, lon - d, lon + d])
    utm = geodetic_to_utm(lats, lons)
    e, n = np.asarray(utm.easting), np.asarray(utm.northing)
    per_lat = math.hypot(e[1] - e[0], n[1] - n[0]) / (2 * d)
    per_lon = math.hypot(e[3] - e[2], n[3] - n[2]) / (2 * d)
    return per_lat, per_lon


def _edges(lo: float, hi: float, step: float) -> list[float]:
    count = max(1, math.ceil((hi - lo) / step - 1e-6))
    return [lo + i * step for i in range(count)] + [hi]


def block_tiles(aoi: Aoi, block_size: float) -> list[Aoi]:
    """Bounds of regular tiles of about ``block_size`` meters, north to south, west to east."""
    aoi = Aoi(*aoi).check()
    if not block_size > 0:
        raise ValueError("block size must be positive")
    per_lat, per_lon = meters_per_degree(*aoi.center())
    lat_edges = _edges(aoi.lat_min, aoi.lat_max, block_size / per_lat)
    lon_edges = _edges(aoi.lon_min, aoi.lon_max, block_size / per_lon)
    tiles = [
        Aoi(lat_lo, lat_hi, lon_lo, lon_hi)
        for lat_hi, lat_lo in zip(lat_edges[::-1][:-1], lat_edges[::-1][1:])
        for lon_lo, lon_hi in zip(lon_edges[:-1], lon_edges[1:])
    ]
    logger.info("AOI split into %d blocks (%d x %d)", len(tiles), len(lat_edges) - 1, len(lon_edges) - 1)
    return tiles


def resolve_block(block_id: int, bounds: Aoi, source: ElevationSource) -> GeoBlock:
    h_min, h_max = source.height_bounds(bounds)
    return GeoBlock(block_id, bounds.lat_min, bounds.lat_max, bounds.lon_min, bounds.lon_max, h_min, h_max)


def block_partition(aoi: Aoi, block_size: float, source: ElevationSource) -> list[GeoBlock]:
    """Regular blocks of about ``block_size`` meters, edge blocks truncated to the AOI."""
    return [resolve_block(i, tile, source) for i, tile in enumerate(block_tiles(aoi, block_size))]


@dataclass(frozen=True)
class CropSpec:
    view_index: int
    rect: PixelRect
    # bounding rectangle of the projected block before padding and resizing
    footprint: tuple[float, float, float, float]


def compute_crop(
    rpc: RpcModel,
    block: GeoBlock,
    pad: int = 0,
    view_index: int = 0,
) -> CropSpec:
    """Bounding rectangle of the block corners projected at h_min and h_max, padded."""
    lat, lon = block.corners()
    lat = np.concatenate([lat, lat])
    lon = np.concatenate([lon, lon])
    hei = np.repeat([block.h_min, block.h_max], 4)
    samp, line = rpc.project(lat, lon, hei, strict=False)
    if not (np.all(np.isfinite(samp)) and np.all(np.isfinite(line))):
        raise GeometryMismatchError(f"block {block.block_id} does not project into view {view_index}")
    s_min, s_max = float(samp.min()), float(samp.max())
    l_min, l_max = float(line.min()), float(line.max())
    x0 = math.floor(s_min) - pad
    y0 = math.floor(l_min) - pad
    x1 = math.ceil(s_max) + pad
    y1 = math.ceil(l_max) + pad
    return CropSpec(
        view_index=view_index,
        rect=PixelRect(x0, y0, x1 - x0 + 1, y1 - y0 + 1),
        footprint=(s_min, s_max, l_min, l_max),
    )


def uniform_crops(crops: Sequence[CropSpec], image_shapes: Sequence[tuple[int, int]]) -> list[Optional[CropSpec]]:
    """Grow every crop to the largest width/height, then slide it inside its image.

    A crop that does not intersect its image at all becomes None.
    """
    if not crops:
        return []
    width = max(c.rect.width for c in crops)
    height = max(c.rect.height for c in crops)
    out: list[Optional[CropSpec]] = []
    for crop, (rows, cols) in zip(crops, image_shapes):
        r = crop.rect
        if r.x0 + r.width <= 0 or r.y0 + r.height <= 0 or r.x0 >= cols or r.y0 >= rows:
            out.append(None)
            continue
        w = min(width, cols)
        h = min(height, rows)
        x0 = r.x0 - (w - r.width) // 2
        y0 = r.y0 - (h - r.height) // 2
        x0 = min(max(x0, 0), cols - w)
        y0 = min(max(y0, 0), rows - h)
        out.append(CropSpec(crop.view_index, PixelRect(int(x0), int(y0), int(w), int(h)), crop.footprint))
    return out
