from project.errors import SatMvsError


class PinholeFitError(SatMvsError):
    """Base exception for pin-hole camera fitting errors"""


class DegenerateConfigurationError(PinholeFitError, ValueError):
    """Error when control points are coplanar or too few for an 11-parameter fit"""


class DegenerateHomographyError(PinholeFitError):
    """Error when the sweep plane passes through a camera center"""
