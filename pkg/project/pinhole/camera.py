"""3×4 projective camera expressed in a local UTM frame."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from project.geo.utm import LocalUtmFrame
from project.pinhole.errors import DegenerateHomographyError, PinholeFitError


@dataclass(frozen=True)
class LocalFrame:
    """Local Cartesian frame: x east, y north (meters from the UTM origin), z = height - h0."""

    utm: LocalUtmFrame
    h0: float = 0.0

    @classmethod
    def at(cls, lat: float, lon: float, h0: float = 0.0) -> "LocalFrame":
        return cls(LocalUtmFrame.at(lat, lon), float(h0))

    def to_local(self, lat, lon, hei) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x, y = self.utm.to_local(lat, lon)
        return x, y, np.asarray(hei, dtype=np.float64) - self.h0

    def to_geodetic(self, x, y, z) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        lat, lon = self.utm.to_geodetic(x, y)
        return lat, lon, np.asarray(z, dtype=np.float64) + self.h0


@dataclass(frozen=True, eq=False)
class ProjectionMatrix:
    p: np.ndarray
    frame: LocalFrame

    def __post_init__(self):
        p = np.array(self.p, dtype=np.float64)
        if p.shape != (3, 4) or not np.all(np.isfinite(p)):
            raise PinholeFitError(f"projection matrix must be a finite 3x4 array, got shape {p.shape}")
        if np.linalg.matrix_rank(p) < 3:
            raise PinholeFitError("projection matrix is rank deficient")
        norm = np.linalg.norm(p[2, :3])
        if norm == 0:
            raise PinholeFitError("projection matrix has no depth row")
        p = p / norm
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    def homography_at(self, z: float) -> np.ndarray:
        """Plane z (local) to pixels: [p1 p2 z*p3 + p4]."""
        return np.column_stack([self.p[:, 0], self.p[:, 1], z * self.p[:, 2] + self.p[:, 3]])

    def project_local(self, x, y, z) -> tuple[np.ndarray, np.ndarray]:
        x, y, z = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (x, y, z)))
        p = self.p
        u = p[0, 0] * x + p[0, 1] * y + p[0, 2] * z + p[0, 3]
        v = p[1, 0] * x + p[1, 1] * y + p[1, 2] * z + p[1, 3]
        w = p[2, 0] * x + p[2, 1] * y + p[2, 2] * z + p[2, 3]
        with np.errstate(divide="ignore", invalid="ignore"):
            return u / w, v / w

    def project(self, lat, lon, hei) -> tuple[np.ndarray, np.ndarray]:
        return self.project_local(*self.frame.to_local(lat, lon, hei))

    def backproject_local(self, samp, line, z) -> tuple[np.ndarray, np.ndarray]:
        """Ground (x, y) of pixels on per-pixel horizontal planes z."""
        samp, line, z = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (samp, line, z)))
        h = np.empty(samp.shape + (3, 3))
        h[..., :, 0] = self.p[:, 0]
        h[..., :, 1] = self.p[:, 1]
        h[..., :, 2] = z[..., None] * self.p[:, 2] + self.p[:, 3]
        rhs = np.stack([samp, line, np.ones_like(samp)], axis=-1)[..., None]
        try:
            sol = np.linalg.solve(h, rhs)[..., 0]
        except np.linalg.LinAlgError as e:
            raise DegenerateHomographyError("a sweep plane passes through the camera center") from e
        with np.errstate(divide="ignore", invalid="ignore"):
            return sol[..., 0] / sol[..., 2], sol[..., 1] / sol[..., 2]

    def scaled(self, scale: float) -> "ProjectionMatrix":
        """Camera of the image block-averaged by ``1/scale`` (see ``RpcModel.scaled``)."""
        if scale == 1:
            return self
        shift = (1.0 - scale) / 2.0
        s = np.array([[scale, 0.0, -shift], [0.0, scale, -shift], [0.0, 0.0, 1.0]])
        return ProjectionMatrix(s @ self.p, self.frame)

    def center(self) -> np.ndarray:
        """Camera center in the local frame (the right null vector of P)."""
        _, _, vt = np.linalg.svd(self.p)
        c = vt[-1]
        if abs(c[3]) < 1e-15:
            return c[:3] * np.inf
        return c[:3] / c[3]

    def to_dict(self) -> dict:
        u = self.frame.utm
        return {
            "p": self.p.tolist(),
            "zone": u.zone,
            "northern": u.northern,
            "origin_easting": u.origin_easting,
            "origin_northing": u.origin_northing,
            "h0": self.frame.h0,
        }
