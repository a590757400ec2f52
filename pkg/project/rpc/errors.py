from project.errors import SatMvsError


class RpcError(SatMvsError):
    """Base exception for RPC model errors"""


class RpcParseError(RpcError, ValueError):
    """Error when RPC text metadata cannot be parsed"""


class RpcValidationError(RpcError, ValueError):
    """Error when RPC parameters violate model invariants"""


class DegenerateProjectionError(RpcError):
    """Error when a rational polynomial denominator vanishes"""


class LocalizationError(RpcError):
    """Error when iterative image-to-ground localization does not converge"""


class FitError(RpcError):
    """Error when a rational polynomial least-squares fit is ill-posed"""


class MissingInverseError(RpcError):
    """Error when inverse coefficients are required but absent"""


class HeightOutOfRangeError(RpcError, ValueError):
    """Error when a height plane lies outside the model's valid elevation span"""
