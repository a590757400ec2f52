from project.rpc.errors import (
    DegenerateProjectionError,
    FitError,
    HeightOutOfRangeError,
    LocalizationError,
    MissingInverseError,
    RpcError,
    RpcParseError,
    RpcValidationError,
)
from project.rpc.fitting import GridSpec, InverseFitReport, fit_inverse_rpc, fit_rational
from project.rpc.io import load_rpc, parse_rpc, save_rpc, serialize_rpc
from project.rpc.model import (
    GroundPoint,
    ImagePoint,
    RpcModel,
    denormalize_ground,
    denormalize_image,
    localize_inverse_fitted,
    localize_iterative,
    normalize_ground,
    normalize_image,
    project_forward,
)
from project.rpc.polynomial import Poly20, eval_poly20

__all__ = [
    "DegenerateProjectionError",
    "FitError",
    "GridSpec",
    "GroundPoint",
    "HeightOutOfRangeError",
    "ImagePoint",
    "InverseFitReport",
    "LocalizationError",
    "MissingInverseError",
    "Poly20",
    "RpcError",
    "RpcModel",
    "RpcParseError",
    "RpcValidationError",
    "denormalize_ground",
    "denormalize_image",
    "eval_poly20",
    "fit_inverse_rpc",
    "fit_rational",
    "load_rpc",
    "localize_inverse_fitted",
    "localize_iterative",
    "normalize_ground",
    "normalize_image",
    "parse_rpc",
    "project_forward",
    "save_rpc",
    "serialize_rpc",
]
