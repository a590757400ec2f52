from project.warp.resample import resample_bilinear
from project.warp.tensor import (
    CoeffTensor,
    build_coeff_tensor,
    contract,
    contract_batch,
    contract_literal,
    point_tensor,
)
from project.warp.warping import CoordMap, PixelRect, jacobian_wrt_height, warp_grid, warp_point

__all__ = [
    "CoeffTensor",
    "CoordMap",
    "PixelRect",
    "build_coeff_tensor",
    "contract",
    "contract_batch",
    "contract_literal",
    "jacobian_wrt_height",
    "point_tensor",
    "resample_bilinear",
    "warp_grid",
    "warp_point",
]
