"""WGS-84 UTM conversion with the Krüger n-series (sixth order)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from project.geo.errors import PolarLatitudeError

WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563
K0 = 0.9996
FALSE_EASTING = 500000.0
FALSE_NORTHING_SOUTH = 10000000.0
MAX_LATITUDE = 84.0

_N = WGS84_F / (2.0 - WGS84_F)
_E = math.sqrt(WGS84_F * (2.0 - WGS84_F))
_E2 = _E * _E
_RECTIFYING_A = WGS84_A / (1.0 + _N) * (1.0 + _N**2 / 4.0 + _N**4 / 64.0 + _N**6 / 256.0)


def _series(n: float) -> tuple[np.ndarray, np.ndarray]:
    n2, n3, n4, n5, n6 = n**2, n**3, n**4, n**5, n**6
    alpha = np.array(
        [
            n / 2 - 2 * n2 / 3 + 5 * n3 / 16 + 41 * n4 / 180 - 127 * n5 / 288 + 7891 * n6 / 37800,
            13 * n2 / 48 - 3 * n3 / 5 + 557 * n4 / 1440 + 281 * n5 / 630 - 1983433 * n6 / 1935360,
            61 * n3 / 240 - 103 * n4 / 140 + 15061 * n5 / 26880 + 167603 * n6 / 181440,
            49561 * n4 / 161280 - 179 * n5 / 168 + 6601661 * n6 / 7257600,
            34729 * n5 / 80640 - 3418889 * n6 / 1995840,
            212378941 * n6 / 319334400,
        ]
    )
    beta = np.array(
        [
            n / 2 - 2 * n2 / 3 + 37 * n3 / 96 - n4 / 360 - 81 * n5 / 512 + 96199 * n6 / 604800,
            n2 / 48 + n3 / 15 - 437 * n4 / 1440 + 46 * n5 / 105 - 1118711 * n6 / 3870720,
            17 * n3 / 480 - 37 * n4 / 840 - 209 * n5 / 4480 + 5569 * n6 / 90720,
            4397 * n4 / 161280 - 11 * n5 / 504 - 830251 * n6 / 7257600,
            4583 * n5 / 161280 - 108847 * n6 / 3991680,
            20648693 * n6 / 638668800,
        ]
    )
    return alpha, beta


_ALPHA, _BETA = _series(_N)
_J2 = 2.0 * np.arange(1, 7)


class UtmCoordinates(NamedTuple):
    easting: np.ndarray | float
    northing: np.ndarray | float
    zone: int
    northern: bool


def utm_zone(lon: float) -> int:
    """Zone number from longitude (no Norway/Svalbard exceptions)."""
    zone = int(math.floor((float(lon) + 180.0) / 6.0)) + 1
    return min(max(zone, 1), 60)


def central_meridian(zone: int) -> float:
    return zone * 6.0 - 183.0


def _conformal_tau(tau):
    sigma = np.sinh(_E * np.arctanh(_E * tau / np.sqrt(1.0 + tau * tau)))
    return tau * np.sqrt(1.0 + sigma * sigma) - sigma * np.sqrt(1.0 + tau * tau)


def _scalar_or_array(value):
    return float(value) if np.ndim(value) == 0 else value


def geodetic_to_utm(
    lat,
    lon,
    zone: Optional[int] = None,
    northern: Optional[bool] = None,
) -> UtmCoordinates:
    """Geodetic degrees to UTM meters.

    The zone comes from the mean longitude and the hemisphere from the mean
    latitude unless given, so a whole array lands in one projection.
    """
    lat = np.asarray(lat, dtype=np.float64)
    lon = np.asarray(lon, dtype=np.float64)
    if np.any(np.abs(lat) >= MAX_LATITUDE):
        raise PolarLatitudeError(f"UTM is undefined at |lat| >= {MAX_LATITUDE} degrees")
    if zone is None:
        zone = utm_zone(float(np.mean(lon)))
    if northern is None:
        northern = bool(np.mean(lat) >= 0.0)

    phi = np.radians(lat)
    lam = np.radians(lon - central_meridian(zone))
    tau_p = _conformal_tau(np.tan(phi))
    xi_p = np.arctan2(tau_p, np.cos(lam))
    eta_p = np.arcsinh(np.sin(lam) / np.sqrt(tau_p * tau_p + np.cos(lam) ** 2))

    xi = xi_p.copy()
    eta = eta_p.copy()
    for a, j2 in zip(_ALPHA, _J2):
        xi = xi + a * np.sin(j2 * xi_p) * np.cosh(j2 * eta_p)
        eta = eta + a * np.cos(j2 * xi_p) * np.sinh(j2 * eta_p)

    easting = FALSE_EASTING + K0 * _RECTIFYING_A * eta
    northing = K0 * _RECTIFYING_A * xi + (0.0 if northern else FALSE_NORTHING_SOUTH)
    return UtmCoordinates(_scalar_or_array(easting), _scalar_or_array(northing), int(zone), bool(northern))


def utm_to_geodetic(easting, northing, zone: int, northern: bool = True):
    """UTM meters back to geodetic (lat, lon) degrees."""
    easting = np.asarray(easting, dtype=np.float64)
    northing = np.asarray(northing, dtype=np.float64)
    xi = (northing - (0.0 if northern else FALSE_NORTHING_SOUTH)) / (K0 * _RECTIFYING_A)
    eta = (easting - FALSE_EASTING) / (K0 * _RECTIFYING_A)

    xi_p = xi.copy()
    eta_p = eta.copy()
    for b, j2 in zip(_BETA, _J2):
        xi_p = xi_p - b * np.sin(j2 * xi) * np.cosh(j2 * eta)
        eta_p = eta_p - b * np.cos(j2 * xi) * np.sinh(j2 * eta)

    tau_p = np.sin(xi_p) / np.sqrt(np.sinh(eta_p) ** 2 + np.cos(xi_p) ** 2)
    lam = np.arctan2(np.sinh(eta_p), np.cos(xi_p))

    # Newton on tau' (tau) = tau_p
    tau = tau_p.copy()
    for _ in range(10):
        tau_i = _conformal_tau(tau)
        step = (
            (tau_p - tau_i)
            / np.sqrt(1.0 + tau_i * tau_i)
            * (1.0 + (1.0 - _E2) * tau * tau)
            / ((1.0 - _E2) * np.sqrt(1.0 + tau * tau))
        )
        tau = tau + step
        if np.all(np.abs(step) <= 1e-14 * np.maximum(1.0, np.abs(tau))):
            break

    lat = np.degrees(np.arctan(tau))
    lon = np.degrees(lam) + central_meridian(zone)
    return _scalar_or_array(lat), _scalar_or_array(lon)


def utm_epsg(zone: int, northern: bool) -> int:
    return (32600 if northern else 32700) + int(zone)


@dataclass(frozen=True)
class LocalUtmFrame:
    """Cartesian frame (x east, y north, z up) in meters around a UTM origin."""

    zone: int
    northern: bool
    origin_easting: float
    origin_northing: float

    @classmethod
    def at(cls, lat: float, lon: float) -> "LocalUtmFrame":
        utm = geodetic_to_utm(lat, lon)
        return cls(utm.zone, utm.northern, float(utm.easting), float(utm.northing))

    def to_local(self, lat, lon) -> tuple[np.ndarray, np.ndarray]:
        utm = geodetic_to_utm(lat, lon, zone=self.zone, northern=self.northern)
        return (
            np.asarray(utm.easting) - self.origin_easting,
            np.asarray(utm.northing) - self.origin_northing,
        )

    def to_geodetic(self, x, y):
        return utm_to_geodetic(
            np.asarray(x, dtype=np.float64) + self.origin_easting,
            np.asarray(y, dtype=np.float64) + self.origin_northing,
            self.zone,
            self.northern,
        )
