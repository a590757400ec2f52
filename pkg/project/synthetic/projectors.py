"""Closed-form cameras used to generate ground-truth RPC models.

Both cameras work in a local UTM frame (x east, y north, z height); the
geodetic forward/inverse wrap that frame.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

import numpy as np

from project.geo.utm import LocalUtmFrame


class AnalyticProjector(ABC):
    frame: LocalUtmFrame
    width: int
    height: int

    @abstractmethod
    def local_to_image(self, x, y, z) -> tuple[np.ndarray, np.ndarray]:
        ...

    @abstractmethod
    def image_to_local(self, samp, line, z) -> tuple[np.ndarray, np.ndarray]:
        ...

    @abstractmethod
    def height_parallax(self, x, y, z) -> tuple[np.ndarray, np.ndarray]:
        """(d samp/dz, d line/dz) in pixels per meter at fixed ground (x, y)."""

    def forward(self, lat, lon, hei) -> tuple[np.ndarray, np.ndarray]:
        x, y = self.frame.to_local(lat, lon)
        return self.local_to_image(x, y, np.asarray(hei, dtype=np.float64))

    def inverse(self, samp, line, hei) -> tuple[np.ndarray, np.ndarray]:
        hei = np.asarray(hei, dtype=np.float64)
        x, y = self.image_to_local(samp, line, hei)
        return self.frame.to_geodetic(x, y)


@dataclass(frozen=True)
class PushbroomProjector(AnalyticProjector):
    """Linear along-track (y), projective across-track (x).

    ``along_angle``/``cross_angle`` (degrees) tilt the view; ``ref_height`` is
    the height whose footprint stays centered. With ``orbit_height=None`` the
    across-track direction is affine too and the height parallax is constant.
    """

    frame: LocalUtmFrame
    width: int
    height: int
    gsd: float
    along_angle: float = 0.0
    cross_angle: float = 0.0
    orbit_height: Optional[float] = 500000.0
    ref_height: float = 0.0

    @property
    def cx(self) -> float:
        return (self.width - 1) / 2.0

    @property
    def cy(self) -> float:
        return (self.height - 1) / 2.0

    @property
    def _tan_along(self) -> float:
        return math.tan(math.radians(self.along_angle))

    @property
    def _tan_cross(self) -> float:
        return math.tan(math.radians(self.cross_angle))

    def local_to_image(self, x, y, z):
        x, y, z = (np.asarray(a, dtype=np.float64) for a in (x, y, z))
        dz = z - self.ref_height
        line = self.cy - (y + self._tan_along * dz) / self.gsd
        across = x + self._tan_cross * dz
        if self.orbit_height is None:
            samp = self.cx + across / self.gsd
        else:
            samp = self.cx + (self.orbit_height / self.gsd) * across / (self.orbit_height - z)
        return samp, line

    def image_to_local(self, samp, line, z):
        samp, line, z = (np.asarray(a, dtype=np.float64) for a in (samp, line, z))
        dz = z - self.ref_height
        y = -(line - self.cy) * self.gsd - self._tan_along * dz
        if self.orbit_height is None:
            across = (samp - self.cx) * self.gsd
        else:
            across = (samp - self.cx) * self.gsd * (self.orbit_height - z) / self.orbit_height
        x = across - self._tan_cross * dz
        return x, y

    def height_parallax(self, x, y, z):
        x, y, z = (np.asarray(a, dtype=np.float64) for a in (x, y, z))
        d_line = np.full(np.broadcast(x, y, z).shape, -self._tan_along / self.gsd)
        if self.orbit_height is None:
            d_samp = np.full_like(d_line, self._tan_cross / self.gsd)
        else:
            hs = self.orbit_height
            across = x + self._tan_cross * (z - self.ref_height)
            d_samp = (hs / self.gsd) * (self._tan_cross * (hs - z) + across) / (hs - z) ** 2
        return d_samp, d_line


@dataclass(frozen=True, eq=False)
class PinholeProjector(AnalyticProjector):
    """Frame camera with a 3×4 projection matrix in the local frame."""

    frame: LocalUtmFrame
    width: int
    height: int
    matrix: np.ndarray

    @classmethod
    def looking_at(
        cls,
        frame: LocalUtmFrame,
        width: int,
        height: int,
        focal: float,
        center: tuple[float, float, float],
        target: tuple[float, float, float] = (0.0, 0.0, 0.0),
    ) -> "PinholeProjector":
        """Camera at ``center`` with its principal ray through ``target``; image x points east."""
        c = np.asarray(center, dtype=np.float64)
        z_c = np.asarray(target, dtype=np.float64) - c
        z_c /= np.linalg.norm(z_c)
        east = np.array([1.0, 0.0, 0.0])
        x_c = east - east.dot(z_c) * z_c
        x_c /= np.linalg.norm(x_c)
        y_c = np.cross(z_c, x_c)
        rot = np.stack([x_c, y_c, z_c])
        k = np.array([[focal, 0.0, (width - 1) / 2.0], [0.0, focal, (height - 1) / 2.0], [0.0, 0.0, 1.0]])
        matrix = k @ np.hstack([rot, -rot @ c[:, None]])
        return cls(frame=frame, width=width, height=height, matrix=matrix)

    def local_to_image(self, x, y, z):
        x, y, z = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (x, y, z)))
        p = self.matrix
        u = p[0, 0] * x + p[0, 1] * y + p[0, 2] * z + p[0, 3]
        v = p[1, 0] * x + p[1, 1] * y + p[1, 2] * z + p[1, 3]
        w = p[2, 0] * x + p[2, 1] * y + p[2, 2] * z + p[2, 3]
        return u / w, v / w

    def image_to_local(self, samp, line, z):
        samp, line, z = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (samp, line, z)))
        p = self.matrix
        # [p1 p2 | z*p3 + p4] (x, y, 1)^T ~ (samp, line, 1)^T
        h = np.empty(samp.shape + (3, 3))
        h[..., :, 0] = p[:, 0]
        h[..., :, 1] = p[:, 1]
        h[..., :, 2] = z[..., None] * p[:, 2] + p[:, 3]
        rhs = np.stack([samp, line, np.ones_like(samp)], axis=-1)[..., None]
        sol = np.linalg.solve(h, rhs)[..., 0]
        return sol[..., 0] / sol[..., 2], sol[..., 1] / sol[..., 2]

    def height_parallax(self, x, y, z):
        x, y, z = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (x, y, z)))
        p = self.matrix
        u = p[0, 0] * x + p[0, 1] * y + p[0, 2] * z + p[0, 3]
        v = p[1, 0] * x + p[1, 1] * y + p[1, 2] * z + p[1, 3]
        w = p[2, 0] * x + p[2, 1] * y + p[2, 2] * z + p[2, 3]
        return (p[0, 2] * w - u * p[2, 2]) / (w * w), (p[1, 2] * w - v * p[2, 2]) / (w * w)
