from __future__ import annotations

import logging
import math
from typing import Optional, Sequence

import numpy as np

from project.geo.errors import GeometryMismatchError
from project.mvs.regression import HeightMap
from project.rpc.model import RpcModel
from project.warp.resample import resample_bilinear
from project.warp.warping import CoordMap

logger = logging.getLogger(__name__)

FULL_SUPPORT = 1.0 - 1e-9


def reproject_through_view(
    ref_map: HeightMap,
    ref_rpc: RpcModel,
    src_map: HeightMap,
    src_rpc: RpcModel,
) -> tuple[np.ndarray, np.ndarray]:
    """Round-trip pixel distance and height difference of every reference pixel via one view.

    Reference pixel -> ground at its height -> source pixel -> source height
    (bilinear) -> ground -> reference pixel. Non-finite where the chain leaves
    a raster or meets an invalid source height.
    """
    rows, cols = ref_map.shape
    line, samp = np.mgrid[0:rows, 0:cols].astype(np.float64)
    hei = np.where(ref_map.valid, ref_map.height, np.nan)

    lat, lon = ref_rpc.localize_any(samp, line, hei)
    s_src, l_src = src_rpc.project(lat, lon, hei, strict=False)
    cmap = CoordMap(samp=s_src, line=l_src, valid=np.isfinite(s_src) & np.isfinite(l_src))
    src_h, inside = resample_bilinear(np.where(src_map.valid, src_map.height, 0.0), cmap)
    support, _ = resample_bilinear(src_map.valid.astype(np.float64), cmap)
    ok = inside & (support >= FULL_SUPPORT)
    src_h = np.where(ok, src_h, np.nan)

    lat2, lon2 = src_rpc.localize_any(s_src, l_src, src_h)
    s_back, l_back = ref_rpc.project(lat2, lon2, src_h, strict=False)
    dist = np.hypot(s_back - samp, l_back - line)
    return dist, np.abs(src_h - hei)


def geometric_consistency_filter(
    height_maps: Sequence[HeightMap],
    rpcs: Sequence[RpcModel],
    ref_index: int,
    threshold: float = 1.0,
    height_threshold: Optional[float] = None,
    min_consistent_views: int = 1,
) -> HeightMap:
    """Keep reference pixels whose round trip through enough other views lands within ``threshold`` px.

    An infinite pixel threshold without a height threshold disables the filter.
    """
    if len(height_maps) != len(rpcs):
        raise GeometryMismatchError(f"{len(height_maps)} height maps but {len(rpcs)} RPC models")
    if not 0 <= ref_index < len(height_maps):
        raise GeometryMismatchError(f"reference index {ref_index} out of range")
    ref = height_maps[ref_index]
    if math.isinf(threshold) and height_threshold is None:
        return HeightMap(ref.height.copy(), ref.valid.copy(), ref.scale)

    consistent = np.zeros(ref.shape, dtype=np.int32)
    for j, (hmap, rpc) in enumerate(zip(height_maps, rpcs)):
        if j == ref_index:
            continue
        dist, dh = reproject_through_view(ref, rpcs[ref_index], hmap, rpc)
        with np.errstate(invalid="ignore"):
            ok = dist < threshold
            if height_threshold is not None:
                ok &= dh < height_threshold
        consistent += ok

    valid = ref.valid & (consistent >= min_consistent_views)
    logger.debug(
        "Consistency filter on view %d kept %d of %d pixels",
        ref_index,
        int(valid.sum()),
        int(ref.valid.sum()),
    )
    return HeightMap(np.where(valid, ref.height, np.nan), valid, ref.scale)
