from project.geo.blocks import (
    Aoi,
    CropSpec,
    DemHeightSource,
    GeoBlock,
    RpcHeightSource,
    block_partition,
    block_tiles,
    compute_crop,
    uniform_crops,
)
from project.geo.consistency import geometric_consistency_filter
from project.geo.dsm import Dsm, DsmGrid, fuse_dsm, mosaic_dsms, read_dsm, write_dsm
from project.geo.errors import (
    EmptyAoiError,
    GeoError,
    GeometryMismatchError,
    NoOverlapError,
    PolarLatitudeError,
    RasterFormatError,
)
from project.geo.metrics import DsmMetrics, evaluate_dsm, write_metrics
from project.geo.pipeline import PipelineResult, View, run_pipeline, save_result
from project.geo.utm import LocalUtmFrame, geodetic_to_utm, utm_to_geodetic

__all__ = [
    "Aoi",
    "CropSpec",
    "DemHeightSource",
    "Dsm",
    "DsmGrid",
    "DsmMetrics",
    "EmptyAoiError",
    "GeoBlock",
    "GeoError",
    "GeometryMismatchError",
    "LocalUtmFrame",
    "NoOverlapError",
    "PipelineResult",
    "PolarLatitudeError",
    "RasterFormatError",
    "RpcHeightSource",
    "View",
    "block_partition",
    "block_tiles",
    "compute_crop",
    "evaluate_dsm",
    "fuse_dsm",
    "geodetic_to_utm",
    "geometric_consistency_filter",
    "mosaic_dsms",
    "read_dsm",
    "run_pipeline",
    "save_result",
    "uniform_crops",
    "utm_to_geodetic",
    "write_dsm",
    "write_metrics",
]
