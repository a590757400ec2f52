"""RPC-to-pinhole fitting and its error study.

Control points are virtual: image grid nodes localized through the RPC at grid
heights, expressed in a local UTM frame centered on the patch. The camera is
solved by the normalized DLT and optionally refined by Levenberg-Marquardt on
the reprojection error.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import least_squares

from project.pinhole.camera import LocalFrame, ProjectionMatrix
from project.pinhole.errors import DegenerateConfigurationError, PinholeFitError
from project.rpc.fitting import GridSpec
from project.rpc.model import RpcModel
from project.utils.parallel import parallel_map
from project.warp.warping import PixelRect

logger = logging.getLogger(__name__)

DEFAULT_FIT_GRID = GridSpec(10, 10, 10)
DEFAULT_CHECK_GRID = GridSpec(20, 20, 20)
MIN_CONTROL_POINTS = 6
COPLANAR_TOL = 1e-9


@dataclass
class FitReport:
    min_err: float
    max_err: float
    mean_err: float
    rms_err: float
    patch_size: tuple[int, int]
    check_grid: tuple[int, int, int]
    fit_grid: Optional[tuple[int, int, int]] = None
    # per-cell max over heights, rows follow image lines
    error_raster: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    raster_samp: np.ndarray = field(default_factory=lambda: np.zeros(0))
    raster_line: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def to_dict(self) -> dict:
        return {
            "patch_size": list(self.patch_size),
            "fit_grid": list(self.fit_grid) if self.fit_grid else None,
            "check_grid": list(self.check_grid),
            "min_err": self.min_err,
            "max_err": self.max_err,
            "mean_err": self.mean_err,
            "rms_err": self.rms_err,
        }

    def write_json(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return path

    def write_csv(self, path: Union[str, Path]) -> Path:
        """Error surface as x, y, err rows (patch coordinates, pixels)."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["x", "y", "err"])
            for i, y in enumerate(self.raster_line):
                for j, x in enumerate(self.raster_samp):
                    writer.writerow([f"{x:.3f}", f"{y:.3f}", f"{self.error_raster[i, j]:.9f}"])
        return path


def _patch_ranges(patch: PixelRect) -> tuple[tuple[float, float], tuple[float, float]]:
    return (
        (float(patch.x0), float(patch.x0 + patch.width - 1)),
        (float(patch.y0), float(patch.y0 + patch.height - 1)),
    )


def _virtual_points(m: RpcModel, patch: PixelRect, heights, grid: GridSpec):
    samp_range, line_range = _patch_ranges(patch)
    samp, line, hei = grid.nodes(samp_range, line_range, (float(heights[0]), float(heights[1])))
    lat, lon = m.localize_any(samp, line, hei, strict=False)
    return samp, line, hei, lat, lon


def default_frame(m: RpcModel, patch: PixelRect, heights) -> LocalFrame:
    """Frame centered on the ground point under the patch center at mid height."""
    h_mid = (float(heights[0]) + float(heights[1])) / 2.0
    s = patch.x0 + (patch.width - 1) / 2.0
    l = patch.y0 + (patch.height - 1) / 2.0
    lat, lon = m.localize_any(np.array([s]), np.array([l]), np.array([h_mid]), strict=True)
    return LocalFrame.at(float(lat[0]), float(lon[0]), h_mid)


def _normalizer(points: np.ndarray) -> np.ndarray:
    """Similarity moving the centroid to 0 with mean distance sqrt(dim)."""
    dim = points.shape[1]
    centroid = points.mean(axis=0)
    dist = np.sqrt(((points - centroid) ** 2).sum(axis=1)).mean()
    scale = np.sqrt(dim) / dist if dist > 0 else 1.0
    t = np.eye(dim + 1)
    t[:dim, :dim] *= scale
    t[:dim, dim] = -scale * centroid
    return t


def _homogeneous(points: np.ndarray) -> np.ndarray:
    return np.hstack([points, np.ones((points.shape[0], 1))])


def dlt(ground: np.ndarray, image: np.ndarray) -> np.ndarray:
    """Normalized DLT: (n, 3) ground and (n, 2) image points to a 3x4 matrix."""
    n = ground.shape[0]
    if n < MIN_CONTROL_POINTS:
        raise DegenerateConfigurationError(f"{n} control points, need at least {MIN_CONTROL_POINTS}")
    centered = ground - ground.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[0] == 0 or sv[-1] / sv[0] < COPLANAR_TOL:
        raise DegenerateConfigurationError("control points are coplanar")

    t3 = _normalizer(ground)
    t2 = _normalizer(image)
    xg = (t3 @ _homogeneous(ground).T).T
    xi = (t2 @ _homogeneous(image).T).T

    a = np.zeros((2 * n, 12))
    a[0::2, 0:4] = xg
    a[0::2, 8:12] = -xi[:, 0:1] * xg
    a[1::2, 4:8] = xg
    a[1::2, 8:12] = -xi[:, 1:2] * xg
    _, s, vt = np.linalg.svd(a, full_matrices=False)
    if s[-2] <= s[0] * 1e-12:
        raise PinholeFitError("DLT system is rank deficient")
    p_n = vt[-1].reshape(3, 4)
    return np.linalg.inv(t2) @ p_n @ t3


def _refine(p: np.ndarray, ground: np.ndarray, image: np.ndarray) -> np.ndarray:
    t3 = _normalizer(ground)
    t2 = _normalizer(image)
    xg = (t3 @ _homogeneous(ground).T).T
    xi = (t2 @ _homogeneous(image).T).T[:, :2]
    p_n = t2 @ p @ np.linalg.inv(t3)
    p_n = p_n / np.linalg.norm(p_n)

    def residuals(v):
        q = v.reshape(3, 4)
        proj = xg @ q.T
        return (proj[:, :2] / proj[:, 2:3] - xi).ravel()

    result = least_squares(residuals, p_n.ravel(), method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return np.linalg.inv(t2) @ result.x.reshape(3, 4) @ t3


def _reprojection_errors(cam: ProjectionMatrix, samp, line, hei, lat, lon) -> np.ndarray:
    s, l = cam.project(lat, lon, hei)
    return np.hypot(s - samp, l - line)


def fit_pinhole(
    m: RpcModel,
    patch: PixelRect,
    heights: Optional[tuple[float, float]] = None,
    grid: GridSpec = DEFAULT_FIT_GRID,
    check_grid: GridSpec = DEFAULT_CHECK_GRID,
    refine: bool = True,
    frame: Optional[LocalFrame] = None,
) -> tuple[ProjectionMatrix, FitReport]:
    """Fit a 3×4 camera to ``m`` over ``patch`` × ``heights``; report errors on ``check_grid``."""
    heights = m.height_range if heights is None else (float(heights[0]), float(heights[1]))
    if patch.width < 1 or patch.height < 1:
        raise DegenerateConfigurationError(f"empty patch {patch}")
    if frame is None:
        frame = default_frame(m, patch, heights)

    samp, line, hei, lat, lon = _virtual_points(m, patch, heights, grid)
    ok = np.isfinite(lat) & np.isfinite(lon)
    x, y, z = frame.to_local(lat[ok], lon[ok], hei[ok])
    ground = np.column_stack([x, y, z])
    image = np.column_stack([samp[ok], line[ok]])

    p = dlt(ground, image)
    if refine:
        p = _refine(p, ground, image)
    # keep control points in front of the camera (w > 0)
    if np.median(_homogeneous(ground) @ p[2]) < 0:
        p = -p
    cam = ProjectionMatrix(p, frame)
    report = fitting_error_report(m, cam, patch, heights, check_grid)
    report.fit_grid = (grid.nx, grid.ny, grid.nz)
    logger.info(
        "Pinhole fit on %dx%d px patch: max %.5f px, mean %.5f px",
        patch.width,
        patch.height,
        report.max_err,
        report.mean_err,
    )
    return cam, report


def fitting_error_report(
    m: RpcModel,
    cam: ProjectionMatrix,
    patch: PixelRect,
    heights: Optional[tuple[float, float]] = None,
    check_grid: GridSpec = DEFAULT_CHECK_GRID,
) -> FitReport:
    heights = m.height_range if heights is None else heights
    samp, line, hei, lat, lon = _virtual_points(m, patch, heights, check_grid)
    err = _reprojection_errors(cam, samp, line, hei, lat, lon)
    finite = err[np.isfinite(err)]
    if finite.size == 0:
        raise PinholeFitError("no check point could be localized")
    cube = err.reshape(check_grid.nx, check_grid.ny, check_grid.nz)
    with np.errstate(invalid="ignore"):
        raster = np.max(cube, axis=2).T
    s_axis = samp.reshape(cube.shape)[:, 0, 0]
    l_axis = line.reshape(cube.shape)[0, :, 0]
    return FitReport(
        min_err=float(finite.min()),
        max_err=float(finite.max()),
        mean_err=float(finite.mean()),
        rms_err=float(np.sqrt(np.mean(finite**2))),
        patch_size=(patch.width, patch.height),
        check_grid=(check_grid.nx, check_grid.ny, check_grid.nz),
        error_raster=raster,
        raster_samp=s_axis - patch.x0,
        raster_line=l_axis - patch.y0,
    )


def centered_patch(m: RpcModel, size: int) -> PixelRect:
    """Square patch of side ``size`` centered on the model's image offset."""
    x0 = int(round(m.samp_off - (size - 1) / 2.0))
    y0 = int(round(m.line_off - (size - 1) / 2.0))
    return PixelRect(x0, y0, int(size), int(size))


def pinhole_fit_sweep(
    m: RpcModel,
    sizes: Sequence[int],
    heights: Optional[tuple[float, float]] = None,
    grid: GridSpec = DEFAULT_FIT_GRID,
    check_grid: GridSpec = DEFAULT_CHECK_GRID,
    refine: bool = True,
    threads: int = 1,
) -> list[FitReport]:
    """One FitReport per square patch size, all centered on the same image point."""
    if not sizes:
        raise ValueError("at least one patch size is required")
    for size in sizes:
        if int(size) < 2:
            raise ValueError(f"invalid patch size {size}")

    def run(size: int) -> FitReport:
        return fit_pinhole(m, centered_patch(m, size), heights, grid, check_grid, refine)[1]

    return parallel_map(run, [int(s) for s in sizes], threads)
