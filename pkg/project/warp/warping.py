"""Warping pixels between two RPC views through a horizontal height plane."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np

from project.rpc.errors import DegenerateProjectionError, HeightOutOfRangeError, MissingInverseError
from project.rpc.model import DEN_EPS, ImagePoint, RpcModel
from project.warp.tensor import build_coeff_tensor, contract_batch, contract_gradient, point_tensor

logger = logging.getLogger(__name__)


class PixelRect(NamedTuple):
    """Pixel window: top-left corner (x0, y0) plus width and height."""

    x0: int
    y0: int
    width: int
    height: int

    def grid(self) -> tuple[np.ndarray, np.ndarray]:
        xs = np.arange(self.x0, self.x0 + self.width, dtype=np.float64)
        ys = np.arange(self.y0, self.y0 + self.height, dtype=np.float64)
        samp, line = np.meshgrid(xs, ys)
        return samp, line


@dataclass(frozen=True)
class CoordMap:
    """Source coordinates for each pixel of a reference window."""

    samp: np.ndarray
    line: np.ndarray
    valid: np.ndarray

    @property
    def shape(self) -> tuple[int, ...]:
        return self.samp.shape

    @classmethod
    def identity(cls, height: int, width: int) -> "CoordMap":
        samp, line = PixelRect(0, 0, width, height).grid()
        return cls(samp, line, np.ones((height, width), dtype=bool))


@dataclass(frozen=True)
class ModelTensors:
    forward: np.ndarray  # (4, 4, 4, 4): samp_num, samp_den, line_num, line_den
    inverse: Optional[np.ndarray]  # (4, 4, 4, 4): lat_num, lat_den, lon_num, lon_den


@lru_cache(maxsize=128)
def model_tensors(m: RpcModel) -> ModelTensors:
    forward = np.stack([build_coeff_tensor(getattr(m, name)) for name in ("samp_num", "samp_den", "line_num", "line_den")])
    inverse = None
    if m.has_inverse:
        inverse = np.stack(
            [build_coeff_tensor(getattr(m, name)) for name in ("inv_lat_num", "inv_lat_den", "inv_lon_num", "inv_lon_den")]
        )
    return ModelTensors(forward=forward, inverse=inverse)


def check_height(m: RpcModel, hei) -> None:
    hei = np.asarray(hei, dtype=np.float64)
    finite = hei[np.isfinite(hei)]
    if finite.size == 0:
        return
    h_min, h_max = m.height_range
    if finite.min() < h_min or finite.max() > h_max:
        raise HeightOutOfRangeError(
            f"height [{finite.min():.3f}, {finite.max():.3f}] m outside model range [{h_min:.3f}, {h_max:.3f}] m"
        )


def _contract_quad(tensors: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Four contractions of the same points; returns (4, M)."""
    return contract_batch(tensors, np.broadcast_to(x, (4,) + x.shape))


def _ground_from_image(from_m: RpcModel, samp, line, hei, use_iterative: bool):
    """Normalized ground (lat_n, lon_n) of from_m plus a degeneracy mask."""
    samp_n, line_n = from_m.normalize_image(samp, line)
    hei_n = from_m.normalize_height(hei)
    tensors = model_tensors(from_m)
    if tensors.inverse is not None:
        f = _contract_quad(tensors.inverse, point_tensor(samp_n, line_n, hei_n))
        bad = (np.abs(f[1]) < DEN_EPS) | (np.abs(f[3]) < DEN_EPS)
        with np.errstate(divide="ignore", invalid="ignore"):
            lat_n = f[0] / f[1]
            lon_n = f[2] / f[3]
        return lat_n, lon_n, bad
    if not use_iterative:
        raise MissingInverseError("model has no inverse coefficients and iterative localization is disabled")
    lat, lon = from_m.localize(samp, line, hei, strict=False)
    lat_n, lon_n, _ = from_m.normalize_ground(lat, lon, hei)
    return lat_n, lon_n, ~(np.isfinite(lat_n) & np.isfinite(lon_n))


def _rebase_ground(from_m: RpcModel, to_m: RpcModel, lat_n, lon_n, hei):
    """X0: normalized ground of from_m expressed in to_m's normalization."""
    lat_n2 = (lat_n * from_m.lat_scale + (from_m.lat_off - to_m.lat_off)) / to_m.lat_scale
    lon_n2 = (lon_n * from_m.lon_scale + (from_m.lon_off - to_m.lon_off)) / to_m.lon_scale
    return lat_n2, lon_n2, to_m.normalize_height(hei)


def _warp_flat(from_m: RpcModel, to_m: RpcModel, samp, line, hei, use_iterative: bool):
    """Flat arrays in, flat (samp, line, degenerate) out."""
    lat_n, lon_n, bad = _ground_from_image(from_m, samp, line, hei, use_iterative)
    lat_n2, lon_n2, hei_n2 = _rebase_ground(from_m, to_m, lat_n, lon_n, hei)
    f = _contract_quad(model_tensors(to_m).forward, point_tensor(lon_n2, lat_n2, hei_n2))
    bad = bad | (np.abs(f[1]) < DEN_EPS) | (np.abs(f[3]) < DEN_EPS) | ~np.isfinite(f).all(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        samp_n = f[0] / f[1]
        line_n = f[2] / f[3]
    samp_out, line_out = to_m.denormalize_image(samp_n, line_n)
    return samp_out, line_out, bad


def warp_point(
    src: RpcModel,
    ref: RpcModel,
    q_s: ImagePoint,
    hei: float,
    use_iterative: bool = False,
) -> ImagePoint:
    """Pixel of ``src`` at height ``hei`` to the corresponding pixel of ``ref``."""
    check_height(src, hei)
    check_height(ref, hei)
    samp, line, bad = _warp_flat(
        src,
        ref,
        np.array([q_s[0]], dtype=np.float64),
        np.array([q_s[1]], dtype=np.float64),
        np.array([hei], dtype=np.float64),
        use_iterative,
    )
    if bad[0]:
        raise DegenerateProjectionError(f"warp of {tuple(q_s)} at {hei} m hits a vanishing denominator")
    return ImagePoint(float(samp[0]), float(line[0]))


def _bounds_mask(m: RpcModel, samp, line, src_shape) -> np.ndarray:
    if src_shape is not None:
        rows, cols = src_shape[-2], src_shape[-1]
        return (samp >= 0) & (samp <= cols - 1) & (line >= 0) & (line <= rows - 1)
    s_min, s_max, l_min, l_max = m.image_domain()
    return (samp >= s_min) & (samp <= s_max) & (line >= l_min) & (line <= l_max)


def warp_grid(
    src: RpcModel,
    ref: RpcModel,
    ref_rect: PixelRect,
    hei,
    src_shape: Optional[tuple[int, ...]] = None,
    use_iterative: bool = False,
) -> CoordMap:
    """Source coordinates of every reference pixel of ``ref_rect`` on the plane ``hei``.

    ``hei`` is a scalar or a per-pixel (height, width) array. Pixels that leave
    the source raster (``src_shape``) or the source model's image domain, or
    hit a vanishing denominator, are masked instead of raising.
    """
    check_height(src, hei)
    check_height(ref, hei)
    samp_r, line_r = ref_rect.grid()
    hei_grid = np.broadcast_to(np.asarray(hei, dtype=np.float64), samp_r.shape)
    samp, line, bad = _warp_flat(
        ref, src, samp_r.ravel(), line_r.ravel(), hei_grid.ravel(), use_iterative
    )
    samp = samp.reshape(samp_r.shape)
    line = line.reshape(samp_r.shape)
    valid = ~bad.reshape(samp_r.shape) & np.isfinite(samp) & np.isfinite(line) & np.isfinite(hei_grid)
    with np.errstate(invalid="ignore"):
        valid &= _bounds_mask(src, samp, line, src_shape)
    return CoordMap(samp=samp, line=line, valid=valid)


def _inverse_height_derivative(from_m: RpcModel, samp, line, hei, use_iterative: bool):
    """(lat_n, lon_n) of from_m and their derivatives w.r.t. height in meters."""
    samp_n, line_n = from_m.normalize_image(samp, line)
    hei_n = from_m.normalize_height(hei)
    tensors = model_tensors(from_m)
    if tensors.inverse is not None:
        x = point_tensor(samp_n, line_n, hei_n)
        xb = np.broadcast_to(x, (4,) + x.shape)
        f = contract_batch(tensors.inverse, xb)
        g = contract_gradient(tensors.inverse, xb)[..., 3] / from_m.hei_scale
        lat_n = f[0] / f[1]
        lon_n = f[2] / f[3]
        d_lat = (g[0] * f[1] - f[0] * g[1]) / (f[1] * f[1])
        d_lon = (g[2] * f[3] - f[2] * g[3]) / (f[3] * f[3])
        return lat_n, lon_n, d_lat, d_lon
    if not use_iterative:
        raise MissingInverseError("model has no inverse coefficients and iterative localization is disabled")
    lat, lon = from_m.localize(samp, line, hei, strict=True)
    lat_n, lon_n, h_n = from_m.normalize_ground(lat, lon, hei)
    # implicit differentiation of F(lat_n, lon_n, h_n) = const
    _, _, jac, _ = from_m.forward_jacobian(lat_n, lon_n, h_n)
    a, b, c = jac[..., 0, 0], jac[..., 0, 1], jac[..., 0, 2]
    d, e, f_ = jac[..., 1, 0], jac[..., 1, 1], jac[..., 1, 2]
    det = a * e - b * d
    d_lat = -(e * c - b * f_) / det / from_m.hei_scale
    d_lon = -(a * f_ - d * c) / det / from_m.hei_scale
    return lat_n, lon_n, d_lat, d_lon


def jacobian_wrt_height(
    src: RpcModel,
    ref: RpcModel,
    q_s,
    hei,
    use_iterative: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic d(samp_ref, line_ref)/d hei of :func:`warp_point`, in pixels per meter.

    ``q_s`` is an ImagePoint or a pair of arrays; the result broadcasts to match.
    """
    check_height(src, hei)
    check_height(ref, hei)
    samp = np.asarray(q_s[0], dtype=np.float64)
    line = np.asarray(q_s[1], dtype=np.float64)
    samp, line, hei_b = np.broadcast_arrays(samp, line, np.asarray(hei, dtype=np.float64))
    shape = samp.shape
    samp, line, hei_b = samp.ravel(), line.ravel(), hei_b.ravel()

    with np.errstate(divide="ignore", invalid="ignore"):
        lat_n, lon_n, d_lat, d_lon = _inverse_height_derivative(src, samp, line, hei_b, use_iterative)
        lat_n2, lon_n2, hei_n2 = _rebase_ground(src, ref, lat_n, lon_n, hei_b)
        d_lat2 = d_lat * src.lat_scale / ref.lat_scale
        d_lon2 = d_lon * src.lon_scale / ref.lon_scale
        d_hei2 = 1.0 / ref.hei_scale

        x = point_tensor(lon_n2, lat_n2, hei_n2)
        xb = np.broadcast_to(x, (4,) + x.shape)
        tensors = model_tensors(ref).forward
        f = contract_batch(tensors, xb)
        g = contract_gradient(tensors, xb)
        # chain through X = (1, lon_n, lat_n, hei_n)
        df = g[..., 1] * d_lon2 + g[..., 2] * d_lat2 + g[..., 3] * d_hei2
        d_samp_n = (df[0] * f[1] - f[0] * df[1]) / (f[1] * f[1])
        d_line_n = (df[2] * f[3] - f[2] * df[3]) / (f[3] * f[3])

    if np.any((np.abs(f[1]) < DEN_EPS) | (np.abs(f[3]) < DEN_EPS)):
        raise DegenerateProjectionError("height Jacobian hits a vanishing forward denominator")
    d_samp = (d_samp_n * ref.samp_scale).reshape(shape)
    d_line = (d_line_n * ref.line_scale).reshape(shape)
    if d_samp.ndim == 0:
        return float(d_samp), float(d_line)
    return d_samp, d_line
