from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from project.geo.errors import GeometryMismatchError
from project.pinhole.camera import ProjectionMatrix
from project.pinhole.errors import DegenerateHomographyError
from project.warp.warping import CoordMap, PixelRect

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e12


def homography_for_plane(p_ref: ProjectionMatrix, p_src: ProjectionMatrix, hei: float) -> np.ndarray:
    """Reference pixel -> source pixel mapping induced by the plane of height ``hei``."""
    if p_ref.frame != p_src.frame:
        raise GeometryMismatchError("projection matrices live in different local frames")
    z = float(hei) - p_ref.frame.h0
    h_ref = p_ref.homography_at(z)
    h_src = p_src.homography_at(z)
    cond_ref = np.linalg.cond(h_ref)
    if not np.isfinite(cond_ref) or cond_ref > MAX_CONDITION:
        raise DegenerateHomographyError(f"plane {hei} m passes through the reference camera center")
    if not np.linalg.cond(h_src) <= MAX_CONDITION:
        raise DegenerateHomographyError(f"plane {hei} m passes through the source camera center")
    h = h_src @ np.linalg.inv(h_ref)
    if abs(h[2, 2]) > 1e-15:
        return h / h[2, 2]
    return h / np.linalg.norm(h)


def apply_homography(h: np.ndarray, samp, line) -> tuple[np.ndarray, np.ndarray]:
    samp = np.asarray(samp, dtype=np.float64)
    line = np.asarray(line, dtype=np.float64)
    u = h[0, 0] * samp + h[0, 1] * line + h[0, 2]
    v = h[1, 0] * samp + h[1, 1] * line + h[1, 2]
    w = h[2, 0] * samp + h[2, 1] * line + h[2, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        return u / w, v / w


def homography_grid(
    p_ref: ProjectionMatrix,
    p_src: ProjectionMatrix,
    ref_rect: PixelRect,
    hei,
    src_shape: Optional[tuple[int, ...]] = None,
) -> CoordMap:
    """Fitted-homography counterpart of ``warp_grid``.

    A scalar ``hei`` goes through one plane-induced homography; a per-pixel
    height array is handled by back-projecting each pixel onto its own plane.
    """
    samp_r, line_r = ref_rect.grid()
    hei = np.asarray(hei, dtype=np.float64)
    if hei.ndim == 0:
        samp, line = apply_homography(homography_for_plane(p_ref, p_src, float(hei)), samp_r, line_r)
        finite_h = np.ones(samp_r.shape, dtype=bool)
    else:
        if p_ref.frame != p_src.frame:
            raise GeometryMismatchError("projection matrices live in different local frames")
        z = np.broadcast_to(hei, samp_r.shape) - p_ref.frame.h0
        x, y = p_ref.backproject_local(samp_r, line_r, z)
        samp, line = p_src.project_local(x, y, z)
        finite_h = np.isfinite(z)
    valid = finite_h & np.isfinite(samp) & np.isfinite(line)
    if src_shape is not None:
        rows, cols = src_shape[-2], src_shape[-1]
        with np.errstate(invalid="ignore"):
            valid &= (samp >= 0) & (samp <= cols - 1) & (line >= 0) & (line <= rows - 1)
    return CoordMap(samp=samp, line=line, valid=valid)
