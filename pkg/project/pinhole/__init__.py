from project.pinhole.camera import LocalFrame, ProjectionMatrix
from project.pinhole.errors import DegenerateConfigurationError, DegenerateHomographyError, PinholeFitError
from project.pinhole.fitting import FitReport, fit_pinhole, fitting_error_report, pinhole_fit_sweep
from project.pinhole.homography import apply_homography, homography_for_plane, homography_grid

__all__ = [
    "DegenerateConfigurationError",
    "DegenerateHomographyError",
    "FitReport",
    "LocalFrame",
    "PinholeFitError",
    "ProjectionMatrix",
    "apply_homography",
    "fit_pinhole",
    "fitting_error_report",
    "homography_for_plane",
    "homography_grid",
    "pinhole_fit_sweep",
]
