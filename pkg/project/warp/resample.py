from __future__ import annotations

import numpy as np

from project.warp.warping import CoordMap


def resample_bilinear(img, cmap: CoordMap) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear gather of ``img`` at ``cmap`` coordinates.

    ``img`` is (H, W) or channels-first (C, H, W). Pixel centers sit on
    integer coordinates. Output is 0 and the mask False wherever the map is
    invalid or a support pixel falls outside the raster.
    """
    img = np.asarray(img, dtype=np.float64)
    rows, cols = img.shape[-2], img.shape[-1]
    x = np.asarray(cmap.samp, dtype=np.float64)
    y = np.asarray(cmap.line, dtype=np.float64)

    with np.errstate(invalid="ignore"):
        mask = (
            np.asarray(cmap.valid, dtype=bool)
            & np.isfinite(x)
            & np.isfinite(y)
            & (x >= 0)
            & (x <= cols - 1)
            & (y >= 0)
            & (y <= rows - 1)
        )
    xs = np.where(mask, x, 0.0)
    ys = np.where(mask, y, 0.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    # at the last row/column the weight of the missing neighbour is exactly 0
    x1 = np.minimum(x0 + 1, cols - 1)
    y1 = np.minimum(y0 + 1, rows - 1)
    fx = xs - x0
    fy = ys - y0

    top = (1.0 - fx) * img[..., y0, x0] + fx * img[..., y0, x1]
    bottom = (1.0 - fx) * img[..., y1, x0] + fx * img[..., y1, x1]
    out = (1.0 - fy) * top + fy * bottom
    out = np.where(mask, out, 0.0)
    return out, mask
