from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

from project.rpc.errors import (
    DegenerateProjectionError,
    LocalizationError,
    MissingInverseError,
    RpcValidationError,
)
from project.rpc.polynomial import (
    Poly20,
    accumulate,
    as_poly20,
    eval_rational_with_gradient,
    monomials,
)

logger = logging.getLogger(__name__)

DEN_EPS = 1e-12
MAX_NEWTON_ITERATIONS = 50
MAX_STEP_HALVINGS = 12
# Normalized search box for localization; the polynomials carry no meaning far outside [-1, 1]
LOCALIZATION_DOMAIN = 3.0

_OFFSET_FIELDS = ("line_off", "samp_off", "lat_off", "lon_off", "hei_off")
_SCALE_FIELDS = ("line_scale", "samp_scale", "lat_scale", "lon_scale", "hei_scale")
FORWARD_FIELDS = ("samp_num", "samp_den", "line_num", "line_den")
INVERSE_FIELDS = ("inv_lat_num", "inv_lat_den", "inv_lon_num", "inv_lon_den")


class GroundPoint(NamedTuple):
    lat: float
    lon: float
    hei: float


class ImagePoint(NamedTuple):
    samp: float
    line: float


def _frozen_poly(values, name: str) -> Poly20:
    try:
        arr = as_poly20(values, name)
    except ValueError as e:
        raise RpcValidationError(str(e)) from e
    arr.flags.writeable = False
    return arr


def _cube_samples(n: int = 5) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    axis = np.linspace(-1.0, 1.0, n)
    l, p, h = np.meshgrid(axis, axis, axis, indexing="ij")
    return l.ravel(), p.ravel(), h.ravel()


@dataclass(frozen=True, eq=False)
class RpcModel:
    """Rational polynomial camera.

    Forward polynomials take (L, P, H) = (lon_n, lat_n, hei_n); inverse
    polynomials take (L, P, H) = (samp_n, line_n, hei_n). Pixel coordinates
    are zero-based with integer values at pixel centers.
    """

    line_off: float
    line_scale: float
    samp_off: float
    samp_scale: float
    lat_off: float
    lat_scale: float
    lon_off: float
    lon_scale: float
    hei_off: float
    hei_scale: float
    samp_num: Poly20
    samp_den: Poly20
    line_num: Poly20
    line_den: Poly20
    inv_lat_num: Optional[Poly20] = None
    inv_lat_den: Optional[Poly20] = None
    inv_lon_num: Optional[Poly20] = None
    inv_lon_den: Optional[Poly20] = None
    height_range: Optional[tuple[float, float]] = None

    def __post_init__(self):
        for name in _OFFSET_FIELDS + _SCALE_FIELDS:
            try:
                value = float(getattr(self, name))
            except (TypeError, ValueError) as e:
                raise RpcValidationError(f"{name} must be a number") from e
            if not np.isfinite(value):
                raise RpcValidationError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        for name in _SCALE_FIELDS:
            if getattr(self, name) <= 0:
                raise RpcValidationError(f"{name} must be strictly positive")

        for name in FORWARD_FIELDS:
            object.__setattr__(self, name, _frozen_poly(getattr(self, name), name))

        present = [getattr(self, name) is not None for name in INVERSE_FIELDS]
        if any(present) and not all(present):
            raise RpcValidationError("inverse coefficients must be given as a complete set of four")
        if all(present):
            for name in INVERSE_FIELDS:
                object.__setattr__(self, name, _frozen_poly(getattr(self, name), name))

        if self.height_range is None:
            h_range = (self.hei_off - self.hei_scale, self.hei_off + self.hei_scale)
        else:
            h_range = (float(self.height_range[0]), float(self.height_range[1]))
        if not h_range[0] < h_range[1]:
            raise RpcValidationError(f"height range must satisfy h_min < h_max, got {h_range}")
        object.__setattr__(self, "height_range", h_range)

        l, p, h = _cube_samples()
        terms = monomials(l, p, h)
        for name in ("samp_den", "line_den"):
            den = accumulate(terms, getattr(self, name))
            if np.min(np.abs(den)) < DEN_EPS:
                raise RpcValidationError(f"{name} vanishes inside the normalized cube")

    @property
    def has_inverse(self) -> bool:
        return self.inv_lat_num is not None

    # --- normalization -------------------------------------------------

    def normalize_ground(self, lat, lon, hei):
        return (
            (np.asarray(lat, dtype=np.float64) - self.lat_off) / self.lat_scale,
            (np.asarray(lon, dtype=np.float64) - self.lon_off) / self.lon_scale,
            (np.asarray(hei, dtype=np.float64) - self.hei_off) / self.hei_scale,
        )

    def denormalize_ground(self, lat_n, lon_n, hei_n):
        return (
            np.asarray(lat_n, dtype=np.float64) * self.lat_scale + self.lat_off,
            np.asarray(lon_n, dtype=np.float64) * self.lon_scale + self.lon_off,
            np.asarray(hei_n, dtype=np.float64) * self.hei_scale + self.hei_off,
        )

    def normalize_image(self, samp, line):
        return (
            (np.asarray(samp, dtype=np.float64) - self.samp_off) / self.samp_scale,
            (np.asarray(line, dtype=np.float64) - self.line_off) / self.line_scale,
        )

    def denormalize_image(self, samp_n, line_n):
        return (
            np.asarray(samp_n, dtype=np.float64) * self.samp_scale + self.samp_off,
            np.asarray(line_n, dtype=np.float64) * self.line_scale + self.line_off,
        )

    def normalize_height(self, hei):
        return (np.asarray(hei, dtype=np.float64) - self.hei_off) / self.hei_scale

    def contains_height(self, hei) -> bool:
        hei = np.asarray(hei, dtype=np.float64)
        h_min, h_max = self.height_range
        return bool(np.all((hei >= h_min) & (hei <= h_max)))

    # --- forward model -------------------------------------------------

    def project_normalized(self, lat_n, lon_n, hei_n, strict: bool = True):
        terms = monomials(lon_n, lat_n, hei_n)
        sn = accumulate(terms, self.samp_num)
        sd = accumulate(terms, self.samp_den)
        ln = accumulate(terms, self.line_num)
        ld = accumulate(terms, self.line_den)
        bad = (np.abs(sd) < DEN_EPS) | (np.abs(ld) < DEN_EPS)
        if strict and np.any(bad):
            raise DegenerateProjectionError(
                f"forward denominator below {DEN_EPS:g} at {int(np.count_nonzero(bad))} point(s)"
            )
        with np.errstate(divide="ignore", invalid="ignore"):
            samp_n = np.where(bad, np.nan, sn / sd)
            line_n = np.where(bad, np.nan, ln / ld)
        return samp_n, line_n

    def project(self, lat, lon, hei, strict: bool = True):
        """Ground (degrees, meters) to image (pixels); vectorized."""
        lat_n, lon_n, hei_n = self.normalize_ground(lat, lon, hei)
        samp_n, line_n = self.project_normalized(lat_n, lon_n, hei_n, strict=strict)
        return self.denormalize_image(samp_n, line_n)

    def forward_jacobian(self, lat_n, lon_n, hei_n):
        """Normalized projection and its Jacobian w.r.t. (lat_n, lon_n, hei_n).

        Returns samp_n, line_n, jac with shape (..., 2, 3) and the smallest
        absolute denominator per point.
        """
        s, gs, ds = eval_rational_with_gradient(self.samp_num, self.samp_den, lon_n, lat_n, hei_n)
        l, gl, dl = eval_rational_with_gradient(self.line_num, self.line_den, lon_n, lat_n, hei_n)
        # gradients come in (L, P, H) = (lon, lat, hei) order
        order = [1, 0, 2]
        jac = np.stack([gs[..., order], gl[..., order]], axis=-2)
        return s, l, jac, np.minimum(np.abs(ds), np.abs(dl))

    # --- inverse model -------------------------------------------------

    def inverse_normalized(self, samp_n, line_n, hei_n, strict: bool = True):
        if not self.has_inverse:
            raise MissingInverseError("RPC model carries no inverse coefficients")
        terms = monomials(samp_n, line_n, hei_n)
        an = accumulate(terms, self.inv_lat_num)
        ad = accumulate(terms, self.inv_lat_den)
        on = accumulate(terms, self.inv_lon_num)
        od = accumulate(terms, self.inv_lon_den)
        bad = (np.abs(ad) < DEN_EPS) | (np.abs(od) < DEN_EPS)
        if strict and np.any(bad):
            raise DegenerateProjectionError(
                f"inverse denominator below {DEN_EPS:g} at {int(np.count_nonzero(bad))} point(s)"
            )
        with np.errstate(divide="ignore", invalid="ignore"):
            lat_n = np.where(bad, np.nan, an / ad)
            lon_n = np.where(bad, np.nan, on / od)
        return lat_n, lon_n

    def localize_fitted(self, samp, line, hei, strict: bool = True):
        """Image + height to ground with the inverse polynomials; vectorized."""
        samp_n, line_n = self.normalize_image(samp, line)
        hei_n = self.normalize_height(hei)
        lat_n, lon_n = self.inverse_normalized(samp_n, line_n, hei_n, strict=strict)
        lat, lon, _ = self.denormalize_ground(lat_n, lon_n, hei_n)
        return lat, lon

    def _pixel_error(self, r_samp, r_line):
        return np.hypot(r_samp * self.samp_scale, r_line * self.line_scale)

    def localize(
        self,
        samp,
        line,
        hei,
        tol: float = 1e-8,
        max_iter: int = MAX_NEWTON_ITERATIONS,
        strict: bool = True,
    ):
        """Image + height to ground by damped Newton iteration on the forward model.

        ``tol`` is the forward reprojection residual in pixels. With
        ``strict=False`` points that do not converge come back as NaN.
        """
        samp, line, hei = np.broadcast_arrays(
            np.asarray(samp, dtype=np.float64),
            np.asarray(line, dtype=np.float64),
            np.asarray(hei, dtype=np.float64),
        )
        shape = samp.shape
        s_t, l_t = self.normalize_image(samp.ravel(), line.ravel())
        h_n = self.normalize_height(hei.ravel())
        n = s_t.size

        lat_n = np.zeros(n)
        lon_n = np.zeros(n)
        if self.has_inverse:
            guess_lat, guess_lon = self.inverse_normalized(s_t, l_t, h_n, strict=False)
            ok = (
                np.isfinite(guess_lat)
                & np.isfinite(guess_lon)
                & (np.abs(guess_lat) <= LOCALIZATION_DOMAIN)
                & (np.abs(guess_lon) <= LOCALIZATION_DOMAIN)
            )
            lat_n[ok] = guess_lat[ok]
            lon_n[ok] = guess_lon[ok]

        converged = np.zeros(n, dtype=bool)
        active = np.flatnonzero(np.isfinite(s_t) & np.isfinite(l_t) & np.isfinite(h_n))

        for iteration in range(max_iter + 1):
            if active.size == 0:
                break
            x_lat = lat_n[active]
            x_lon = lon_n[active]
            hh = h_n[active]
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                s, l, jac, den = self.forward_jacobian(x_lat, x_lon, hh)
                r0 = s - s_t[active]
                r1 = l - l_t[active]
                err = self._pixel_error(r0, r1)
            bad = ~np.isfinite(err) | (den < DEN_EPS)
            done = ~bad & (err < tol)
            converged[active[done]] = True
            keep = ~(done | bad)
            if iteration == max_iter:
                break

            active = active[keep]
            x_lat, x_lon, hh = x_lat[keep], x_lon[keep], hh[keep]
            r0, r1, err, jac = r0[keep], r1[keep], err[keep], jac[keep]

            a, b = jac[:, 0, 0], jac[:, 0, 1]
            c, d = jac[:, 1, 0], jac[:, 1, 1]
            det = a * d - b * c
            solvable = np.isfinite(det) & (np.abs(det) > 1e-300)
            with np.errstate(divide="ignore", invalid="ignore"):
                d_lat = (b * r1 - d * r0) / det
                d_lon = (c * r0 - a * r1) / det

            step = np.ones_like(d_lat)
            for _ in range(MAX_STEP_HALVINGS):
                with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                    s2, l2 = self.project_normalized(
                        x_lat + step * d_lat, x_lon + step * d_lon, hh, strict=False
                    )
                    err2 = self._pixel_error(s2 - s_t[active], l2 - l_t[active])
                worse = ~(err2 <= err) & solvable
                if not worse.any():
                    break
                step[worse] *= 0.5

            new_lat = x_lat + step * d_lat
            new_lon = x_lon + step * d_lon
            inside = (
                solvable
                & (np.abs(new_lat) <= LOCALIZATION_DOMAIN)
                & (np.abs(new_lon) <= LOCALIZATION_DOMAIN)
            )
            lat_n[active[inside]] = new_lat[inside]
            lon_n[active[inside]] = new_lon[inside]
            active = active[inside]

        failed = ~converged
        if strict and failed.any():
            raise LocalizationError(
                f"localization did not converge for {int(failed.sum())} of {n} point(s) "
                f"within {max_iter} iterations"
            )
        if failed.any():
            logger.debug("Localization failed for %d of %d points", int(failed.sum()), n)
        lat_n[failed] = np.nan
        lon_n[failed] = np.nan
        lat, lon, _ = self.denormalize_ground(lat_n, lon_n, h_n)
        return lat.reshape(shape), lon.reshape(shape)

    def localize_any(self, samp, line, hei, strict: bool = False):
        """Fitted inverse when available, Newton iteration otherwise."""
        if self.has_inverse:
            return self.localize_fitted(samp, line, hei, strict=strict)
        return self.localize(samp, line, hei, strict=strict)

    # --- derived models ------------------------------------------------

    def shifted(self, dx: float, dy: float) -> "RpcModel":
        """Model of an image crop whose top-left pixel sits at (dx, dy) in this image."""
        return replace(self, samp_off=self.samp_off - dx, line_off=self.line_off - dy)

    def scaled(self, scale: float) -> "RpcModel":
        """Model of the image block-averaged by ``1/scale``.

        A coarse pixel center ``u_c`` covers full-resolution pixels centered at
        ``u = u_c / scale + (1/scale - 1) / 2``.
        """
        if not 0 < scale <= 1:
            raise RpcValidationError(f"scale must lie in (0, 1], got {scale}")
        if scale == 1:
            return self
        shift = (1.0 - scale) / 2.0
        return replace(
            self,
            samp_off=self.samp_off * scale - shift,
            samp_scale=self.samp_scale * scale,
            line_off=self.line_off * scale - shift,
            line_scale=self.line_scale * scale,
        )

    def image_domain(self) -> tuple[float, float, float, float]:
        """(samp_min, samp_max, line_min, line_max) covered by the normalization."""
        return (
            self.samp_off - self.samp_scale,
            self.samp_off + self.samp_scale,
            self.line_off - self.line_scale,
            self.line_off + self.line_scale,
        )


def normalize_ground(m: RpcModel, p: GroundPoint) -> tuple[float, float, float]:
    lat_n, lon_n, hei_n = m.normalize_ground(p.lat, p.lon, p.hei)
    return float(lat_n), float(lon_n), float(hei_n)


def denormalize_ground(m: RpcModel, lat_n: float, lon_n: float, hei_n: float) -> GroundPoint:
    lat, lon, hei = m.denormalize_ground(lat_n, lon_n, hei_n)
    return GroundPoint(float(lat), float(lon), float(hei))


def normalize_image(m: RpcModel, q: ImagePoint) -> tuple[float, float]:
    samp_n, line_n = m.normalize_image(q.samp, q.line)
    return float(samp_n), float(line_n)


def denormalize_image(m: RpcModel, samp_n: float, line_n: float) -> ImagePoint:
    samp, line = m.denormalize_image(samp_n, line_n)
    return ImagePoint(float(samp), float(line))


def project_forward(m: RpcModel, p: GroundPoint) -> ImagePoint:
    samp, line = m.project(p.lat, p.lon, p.hei)
    return ImagePoint(float(samp), float(line))


def localize_iterative(m: RpcModel, q: ImagePoint, hei: float, tol: float = 1e-8) -> GroundPoint:
    lat, lon = m.localize(q.samp, q.line, hei, tol=tol)
    return GroundPoint(float(lat), float(lon), float(hei))


def localize_inverse_fitted(m: RpcModel, q: ImagePoint, hei: float) -> GroundPoint:
    lat, lon = m.localize_fitted(q.samp, q.line, hei)
    return GroundPoint(float(lat), float(lon), float(hei))
