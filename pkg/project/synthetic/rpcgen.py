from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from project.geo.utm import LocalUtmFrame
from project.rpc.errors import FitError, RpcValidationError
from project.rpc.fitting import GridSpec, InverseFitReport, fit_inverse_rpc, fit_rational
from project.rpc.model import RpcModel
from project.synthetic.errors import GenerationError
from project.synthetic.projectors import AnalyticProjector

logger = logging.getLogger(__name__)

FORWARD_GRID = GridSpec(15, 15, 11)
MAX_FORWARD_RESIDUAL_PX = 0.02


@dataclass(frozen=True)
class GroundCube:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float
    h_min: float
    h_max: float

    def __post_init__(self):
        if not (self.lat_min < self.lat_max and self.lon_min < self.lon_max and self.h_min < self.h_max):
            raise ValueError(f"empty ground cube {self}")

    @classmethod
    def around(cls, frame: LocalUtmFrame, half_x: float, half_y: float, h_min: float, h_max: float) -> "GroundCube":
        """Geodetic box enclosing the local square [-half_x, half_x] × [-half_y, half_y]."""
        xs = np.array([-half_x, half_x, half_x, -half_x, 0.0, 0.0, -half_x, half_x])
        ys = np.array([-half_y, -half_y, half_y, half_y, -half_y, half_y, 0.0, 0.0])
        lat, lon = frame.to_geodetic(xs, ys)
        return cls(float(lat.min()), float(lat.max()), float(lon.min()), float(lon.max()), h_min, h_max)

    def center(self) -> tuple[float, float, float]:
        return (
            (self.lat_min + self.lat_max) / 2.0,
            (self.lon_min + self.lon_max) / 2.0,
            (self.h_min + self.h_max) / 2.0,
        )


@dataclass(frozen=True)
class GenerationReport:
    forward_max_px: float
    forward_rms_px: float
    inverse: Optional[InverseFitReport]


def _offset_scale(lo: float, hi: float) -> tuple[float, float]:
    return (lo + hi) / 2.0, max((hi - lo) / 2.0, 1e-12)


def gen_rpc_from_projector(
    proj: AnalyticProjector,
    cube: GroundCube,
    with_inverse: bool = True,
    grid: GridSpec = FORWARD_GRID,
    max_residual_px: float = MAX_FORWARD_RESIDUAL_PX,
) -> tuple[RpcModel, GenerationReport]:
    """Fit forward (and inverse) RPC polynomials to an analytic projector over ``cube``."""
    lat_off, lat_scale = _offset_scale(cube.lat_min, cube.lat_max)
    lon_off, lon_scale = _offset_scale(cube.lon_min, cube.lon_max)
    hei_off, hei_scale = _offset_scale(cube.h_min, cube.h_max)

    lat_n, lon_n, hei_n = grid.nodes((-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0))
    lat = lat_n * lat_scale + lat_off
    lon = lon_n * lon_scale + lon_off
    hei = hei_n * hei_scale + hei_off
    samp, line = proj.forward(lat, lon, hei)
    if not (np.all(np.isfinite(samp)) and np.all(np.isfinite(line))):
        raise GenerationError("projector is not finite over the ground cube")

    samp_off, samp_scale = _offset_scale(float(samp.min()), float(samp.max()))
    line_off, line_scale = _offset_scale(float(line.min()), float(line.max()))
    try:
        samp_num, samp_den = fit_rational(lon_n, lat_n, hei_n, (samp - samp_off) / samp_scale)
        line_num, line_den = fit_rational(lon_n, lat_n, hei_n, (line - line_off) / line_scale)
        model = RpcModel(
            line_off=line_off,
            line_scale=line_scale,
            samp_off=samp_off,
            samp_scale=samp_scale,
            lat_off=lat_off,
            lat_scale=lat_scale,
            lon_off=lon_off,
            lon_scale=lon_scale,
            hei_off=hei_off,
            hei_scale=hei_scale,
            samp_num=samp_num,
            samp_den=samp_den,
            line_num=line_num,
            line_den=line_den,
            height_range=(cube.h_min, cube.h_max),
        )
    except (FitError, RpcValidationError) as e:
        raise GenerationError(f"forward fit failed: {e}") from e

    c_lat_n, c_lon_n, c_hei_n = grid.midpoints((-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0))
    c_lat = c_lat_n * lat_scale + lat_off
    c_lon = c_lon_n * lon_scale + lon_off
    c_hei = c_hei_n * hei_scale + hei_off
    true_samp, true_line = proj.forward(c_lat, c_lon, c_hei)
    fit_samp, fit_line = model.project(c_lat, c_lon, c_hei, strict=False)
    residual = np.hypot(fit_samp - true_samp, fit_line - true_line)
    max_px = float(np.max(residual)) if np.all(np.isfinite(residual)) else float("inf")
    rms_px = float(np.sqrt(np.mean(residual**2)))
    if not max_px <= max_residual_px:
        raise GenerationError(
            f"forward RPC residual {max_px:.4f} px exceeds {max_residual_px} px; the cube is too large for a cubic fit"
        )

    inverse_report = None
    if with_inverse:
        try:
            model, inverse_report = fit_inverse_rpc(model)
        except FitError as e:
            raise GenerationError(f"inverse fit failed: {e}") from e

    logger.info("Synthetic RPC generated: forward residual max %.2e px, rms %.2e px", max_px, rms_px)
    return model, GenerationReport(forward_max_px=max_px, forward_rms_px=rms_px, inverse=inverse_report)
