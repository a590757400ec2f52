from project.errors import SatMvsError


class SweepError(SatMvsError):
    """Base exception for plane-sweep height estimation errors"""


class EmptyCostVolumeError(SweepError):
    """Error when no plane of a tile is seen by enough views"""


class ScheduleError(SweepError, ValueError):
    """Error when a height-plane schedule or sweep configuration is invalid"""
