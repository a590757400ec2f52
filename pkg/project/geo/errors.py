from project.errors import SatMvsError


class GeoError(SatMvsError):
    """Base class for geographic pipeline errors"""


class EmptyAoiError(GeoError, ValueError):
    pass


class PolarLatitudeError(GeoError, ValueError):
    pass


class GeometryMismatchError(GeoError, ValueError):
    pass


class NoOverlapError(GeoError):
    pass


class RasterFormatError(GeoError, ValueError):
    pass
