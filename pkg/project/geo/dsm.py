from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from project.geo.errors import GeometryMismatchError, RasterFormatError
from project.geo.utm import geodetic_to_utm, utm_epsg

logger = logging.getLogger(__name__)

NODATA = -9999.0
_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")


@dataclass(frozen=True)
class DsmGrid:
    """Regular north-up UTM raster; the origin is the north-west corner."""

    zone: int
    northern: bool
    origin_easting: float
    origin_northing: float
    cell_size: float
    rows: int
    cols: int

    def __post_init__(self):
        if not self.cell_size > 0:
            raise GeometryMismatchError(f"cell size must be positive, got {self.cell_size}")
        if self.rows < 0 or self.cols < 0:
            raise GeometryMismatchError("grid dimensions must be non-negative")

    @classmethod
    def from_bounds(
        cls,
        zone: int,
        northern: bool,
        e_min: float,
        e_max: float,
        n_min: float,
        n_max: float,
        cell_size: float,
    ) -> "DsmGrid":
        """Smallest grid snapped to multiples of ``cell_size`` covering the bounds."""
        west = math.floor(e_min / cell_size) * cell_size
        north = math.ceil(n_max / cell_size) * cell_size
        cols = max(1, int(math.ceil((e_max - west) / cell_size - 1e-9)))
        rows = max(1, int(math.ceil((north - n_min) / cell_size - 1e-9)))
        return cls(zone, northern, float(west), float(north), float(cell_size), rows, cols)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """(easting, northing) of every cell center, each shaped (rows, cols)."""
        e = self.origin_easting + (np.arange(self.cols) + 0.5) * self.cell_size
        n = self.origin_northing - (np.arange(self.rows) + 0.5) * self.cell_size
        return np.meshgrid(e, n)

    def cell_index(self, easting, northing) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(row, col, inside) of the cells containing the given points."""
        col = np.floor((np.asarray(easting) - self.origin_easting) / self.cell_size)
        row = np.floor((self.origin_northing - np.asarray(northing)) / self.cell_size)
        with np.errstate(invalid="ignore"):
            inside = (col >= 0) & (col < self.cols) & (row >= 0) & (row < self.rows)
        row = np.where(inside, row, 0).astype(np.int64)
        col = np.where(inside, col, 0).astype(np.int64)
        return row, col, inside

    def window(self, row0: int, col0: int, rows: int, cols: int) -> "DsmGrid":
        """Sub-grid starting at cell (row0, col0), clipped to this grid."""
        r0, c0 = max(0, row0), max(0, col0)
        r1, c1 = min(self.rows, row0 + rows), min(self.cols, col0 + cols)
        return replace(
            self,
            origin_easting=self.origin_easting + c0 * self.cell_size,
            origin_northing=self.origin_northing - r0 * self.cell_size,
            rows=max(0, r1 - r0),
            cols=max(0, c1 - c0),
        )

    def window_for_bounds(self, e_min: float, e_max: float, n_min: float, n_max: float) -> "DsmGrid":
        """Cells of this grid touched by the UTM bounds."""
        col0 = math.floor((e_min - self.origin_easting) / self.cell_size)
        col1 = math.floor((e_max - self.origin_easting) / self.cell_size) + 1
        row0 = math.floor((self.origin_northing - n_max) / self.cell_size)
        row1 = math.floor((self.origin_northing - n_min) / self.cell_size) + 1
        return self.window(row0, col0, row1 - row0, col1 - col0)

    def offset_in(self, parent: "DsmGrid") -> tuple[int, int]:
        """(row, col) of this grid's north-west cell inside ``parent``."""
        if (self.zone, self.northern, self.cell_size) != (parent.zone, parent.northern, parent.cell_size):
            raise GeometryMismatchError("grids differ in zone, hemisphere or cell size")
        row = (parent.origin_northing - self.origin_northing) / self.cell_size
        col = (self.origin_easting - parent.origin_easting) / self.cell_size
        r, c = round(row), round(col)
        aligned = abs(row - r) < 1e-6 and abs(col - c) < 1e-6
        if not aligned or r < 0 or c < 0 or r + self.rows > parent.rows or c + self.cols > parent.cols:
            raise GeometryMismatchError(f"{self.shape} grid at ({row:g}, {col:g}) is not a window of {parent.shape}")
        return r, c


@dataclass
class Dsm:
    """Heights on a :class:`DsmGrid`; NaN marks empty cells in memory."""

    grid: DsmGrid
    values: np.ndarray
    nodata: float = NODATA

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise GeometryMismatchError(f"values shape {self.values.shape} does not match grid {self.grid.shape}")

    @classmethod
    def empty(cls, grid: DsmGrid) -> "Dsm":
        return cls(grid=grid, values=np.full(grid.shape, np.nan))

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.values)

    def stats(self) -> dict:
        valid = self.values[self.valid]
        return {
            "valid_cells": int(valid.size),
            "total_cells": int(self.values.size),
            "min": float(valid.min()) if valid.size else None,
            "max": float(valid.max()) if valid.size else None,
        }


# --- ESRI ASCII grid -------------------------------------------------------


@dataclass(frozen=True)
class AsciiGrid:
    """Raw ASCII raster: header numbers plus values with NaN nodata (row 0 is north)."""

    xllcorner: float
    yllcorner: float
    cellsize: float
    values: np.ndarray

    @property
    def nrows(self) -> int:
        return self.values.shape[0]

    @property
    def ncols(self) -> int:
        return self.values.shape[1]

    @property
    def top(self) -> float:
        return self.yllcorner + self.nrows * self.cellsize


def read_ascii_raster(path: Union[str, Path]) -> AsciiGrid:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as e:
        raise RasterFormatError(f"cannot read {path}: {e}") from e

    header: dict[str, float] = {}
    body_start = 0
    for i, line in enumerate(lines):
        parts = line.split()
        if len(parts) == 2 and parts[0].lower() in _HEADER_KEYS + ("xllcenter", "yllcenter"):
            try:
                header[parts[0].lower()] = float(parts[1])
            except ValueError as e:
                raise RasterFormatError(f"{path}: bad header value {line!r}") from e
            body_start = i + 1
        else:
            break

    for key in ("ncols", "nrows", "cellsize"):
        if key not in header:
            raise RasterFormatError(f"{path}: missing header key {key}")
    cellsize = header["cellsize"]
    if "xllcorner" not in header and "xllcenter" in header:
        header["xllcorner"] = header["xllcenter"] - cellsize / 2
    if "yllcorner" not in header and "yllcenter" in header:
        header["yllcorner"] = header["yllcenter"] - cellsize / 2
    if "xllcorner" not in header or "yllcorner" not in header:
        raise RasterFormatError(f"{path}: missing lower-left corner")

    nrows, ncols = int(header["nrows"]), int(header["ncols"])
    try:
        flat = np.array(" ".join(lines[body_start:]).split(), dtype=np.float64)
    except ValueError as e:
        raise RasterFormatError(f"{path}: non-numeric raster value") from e
    if flat.size != nrows * ncols:
        raise RasterFormatError(f"{path}: expected {nrows * ncols} values, found {flat.size}")
    values = flat.reshape(nrows, ncols)
    if "nodata_value" in header:
        values[values == header["nodata_value"]] = np.nan
    return AsciiGrid(header["xllcorner"], header["yllcorner"], cellsize, values)


def write_ascii_raster(
    path: Union[str, Path],
    values: np.ndarray,
    xllcorner: float,
    yllcorner: float,
    cellsize: float,
    nodata: float = NODATA,
) -> Path:
    values = np.asarray(values, dtype=np.float64)
    out = np.where(np.isfinite(values), values, nodata)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [" ".join(f"{v:.4f}" for v in row) for row in out]
    header = (
        f"ncols {values.shape[1]}\n"
        f"nrows {values.shape[0]}\n"
        f"xllcorner {xllcorner!r}\n"
        f"yllcorner {yllcorner!r}\n"
        f"cellsize {cellsize!r}\n"
        f"NODATA_value {nodata:g}\n"
    )
    path.write_text(header + "\n".join(rows) + "\n")
    return path


def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(path.suffix + ".json")


def write_dsm(dsm: Dsm, path: Union[str, Path]) -> Path:
    """ASCII grid plus a JSON sidecar with the UTM zone."""
    path = Path(path)
    g = dsm.grid
    write_ascii_raster(
        path,
        dsm.values,
        g.origin_easting,
        g.origin_northing - g.rows * g.cell_size,
        g.cell_size,
        dsm.nodata,
    )
    sidecar = {
        "zone": g.zone,
        "northern": g.northern,
        "epsg": utm_epsg(g.zone, g.northern),
        "cell_size": g.cell_size,
        "nodata": dsm.nodata,
        **dsm.stats(),
    }
    _sidecar_path(path).write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return path


def read_dsm(path: Union[str, Path], zone: Optional[int] = None, northern: Optional[bool] = None) -> Dsm:
    path = Path(path)
    raster = read_ascii_raster(path)
    sidecar = _sidecar_path(path)
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        zone = meta["zone"] if zone is None else zone
        northern = meta["northern"] if northern is None else northern
    if zone is None:
        raise RasterFormatError(f"{path}: UTM zone unknown (no sidecar and no override)")
    grid = DsmGrid(
        zone=int(zone),
        northern=True if northern is None else bool(northern),
        origin_easting=raster.xllcorner,
        origin_northing=raster.top,
        cell_size=raster.cellsize,
        rows=raster.nrows,
        cols=raster.ncols,
    )
    return Dsm(grid=grid, values=raster.values)


# --- fusion ------------------------------------------------------------------


def _cell_medians(cells: np.ndarray, heights: np.ndarray, n_cells: int) -> np.ndarray:
    out = np.full(n_cells, np.nan)
    if cells.size == 0:
        return out
    order = np.lexsort((heights, cells))
    cells, heights = cells[order], heights[order]
    unique, start, counts = np.unique(cells, return_index=True, return_counts=True)
    lo = heights[start + (counts - 1) // 2]
    hi = heights[start + counts // 2]
    out[unique] = (lo + hi) / 2.0
    return out


def fuse_dsm(
    height_maps: Sequence,
    rpcs: Sequence,
    grid: DsmGrid,
    bounds: Optional[tuple[float, float, float, float]] = None,
) -> Dsm:
    """Bin every valid height-map pixel into ``grid`` and take the per-cell median.

    ``rpcs[i]`` must describe the pixel frame of ``height_maps[i]``.
    ``bounds`` = (lat_min, lat_max, lon_min, lon_max) drops points outside a block.
    """
    if len(height_maps) != len(rpcs):
        raise GeometryMismatchError(f"{len(height_maps)} height maps but {len(rpcs)} RPC models")

    all_cells: list[np.ndarray] = []
    all_heights: list[np.ndarray] = []
    for hmap, rpc in zip(height_maps, rpcs):
        valid = np.asarray(hmap.valid, dtype=bool) & np.isfinite(hmap.height)
        if not valid.any():
            continue
        line, samp = np.nonzero(valid)
        hei = np.asarray(hmap.height, dtype=np.float64)[valid]
        lat, lon = rpc.localize_any(samp.astype(np.float64), line.astype(np.float64), hei)
        keep = np.isfinite(lat) & np.isfinite(lon)
        if bounds is not None:
            lat_min, lat_max, lon_min, lon_max = bounds
            with np.errstate(invalid="ignore"):
                keep &= (lat >= lat_min) & (lat <= lat_max) & (lon >= lon_min) & (lon <= lon_max)
        if not keep.any():
            continue
        utm = geodetic_to_utm(lat[keep], lon[keep], zone=grid.zone, northern=grid.northern)
        row, col, inside = grid.cell_index(utm.easting, utm.northing)
        all_cells.append((row * grid.cols + col)[inside])
        all_heights.append(hei[keep][inside])

    if all_cells:
        cells = np.concatenate(all_cells)
        heights = np.concatenate(all_heights)
    else:
        cells = np.empty(0, dtype=np.int64)
        heights = np.empty(0)
    values = _cell_medians(cells, heights, grid.rows * grid.cols).reshape(grid.shape)
    logger.debug("Fused %d points into %d cells", heights.size, int(np.isfinite(values).sum()))
    return Dsm(grid=grid, values=values)


def mosaic_dsms(dsms: Sequence[Dsm], grid: DsmGrid) -> Dsm:
    """Per-cell median of block DSMs laid on windows of ``grid``; independent of input order.

    Only valid cells are gathered, so memory follows the filled block windows
    and not the number of blocks times the mosaic size.
    """
    cells: list[np.ndarray] = []
    heights: list[np.ndarray] = []
    for dsm in dsms:
        row0, col0 = dsm.grid.offset_in(grid)
        rows, cols = np.nonzero(dsm.valid)
        cells.append((rows + row0) * grid.cols + (cols + col0))
        heights.append(dsm.values[rows, cols])
    if not cells:
        return Dsm.empty(grid)
    values = _cell_medians(np.concatenate(cells), np.concatenate(heights), grid.rows * grid.cols)
    return Dsm(grid=grid, values=values.reshape(grid.shape))
