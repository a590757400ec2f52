from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from project.rpc.errors import FitError, RpcValidationError
from project.rpc.model import RpcModel
from project.rpc.polynomial import N_TERMS, Poly20, monomials

logger = logging.getLogger(__name__)

# weight of the Tikhonov rows on the (column-scaled) denominator unknowns
DEN_RIDGE = 1e-8
LSTSQ_RCOND = 1e-12
N_UNKNOWNS = 2 * N_TERMS - 1


@dataclass(frozen=True)
class GridSpec:
    """Sample counts along the three axes of a fitting cube."""

    nx: int
    ny: int
    nz: int

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 1:
            raise ValueError(f"grid counts must be positive, got {self}")

    @property
    def size(self) -> int:
        return self.nx * self.ny * self.nz

    @staticmethod
    def _axis(lo: float, hi: float, n: int) -> np.ndarray:
        if n == 1:
            return np.array([(lo + hi) / 2.0])
        return np.linspace(lo, hi, n)

    def nodes(self, x_range, y_range, z_range) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Flattened (x, y, z) samples of the full grid, x varying slowest."""
        axes = (
            self._axis(*x_range, self.nx),
            self._axis(*y_range, self.ny),
            self._axis(*z_range, self.nz),
        )
        x, y, z = np.meshgrid(*axes, indexing="ij")
        return x.ravel(), y.ravel(), z.ravel()

    def midpoints(self, x_range, y_range, z_range) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Cell centers of the grid; shares no point with :meth:`nodes`."""

        def centers(lo, hi, n):
            if n == 1:
                return np.array([(lo + hi) / 2.0])
            edges = np.linspace(lo, hi, n)
            return (edges[:-1] + edges[1:]) / 2.0

        x, y, z = np.meshgrid(
            centers(*x_range, self.nx),
            centers(*y_range, self.ny),
            centers(*z_range, self.nz),
            indexing="ij",
        )
        return x.ravel(), y.ravel(), z.ravel()


DEFAULT_INVERSE_GRID = GridSpec(11, 11, 9)


def fit_rational(l, p, h, target) -> tuple[Poly20, Poly20]:
    """Least-squares fit of ``target ≈ num(l, p, h) / den(l, p, h)``.

    The denominator constant is pinned to 1, which leaves 39 unknowns. The
    linearized system ``num - target * (den - 1) = target`` is solved after
    column scaling, with a tiny ridge on the denominator block so that
    directions the samples cannot resolve settle at zero.
    """
    l, p, h, target = (np.ravel(np.asarray(a, dtype=np.float64)) for a in (l, p, h, target))
    n = target.size
    if n < N_UNKNOWNS:
        raise FitError(f"underdetermined rational fit: {n} samples for {N_UNKNOWNS} unknowns")
    if not np.all(np.isfinite(target)):
        raise FitError("fit targets must be finite")

    terms = monomials(l, p, h)
    rank = np.linalg.matrix_rank(terms)
    if rank < N_TERMS:
        raise FitError(f"rank-deficient sample set: monomial rank {rank} < {N_TERMS}")

    design = np.hstack([terms, -target[:, None] * terms[:, 1:]])
    norms = np.linalg.norm(design, axis=0)
    norms[norms == 0] = 1.0
    scaled = design / norms

    ridge = np.zeros((N_TERMS - 1, N_UNKNOWNS))
    ridge[:, N_TERMS:] = np.eye(N_TERMS - 1) * DEN_RIDGE
    system = np.vstack([scaled, ridge])
    rhs = np.concatenate([target, np.zeros(N_TERMS - 1)])

    solution, _, sys_rank, _ = np.linalg.lstsq(system, rhs, rcond=LSTSQ_RCOND)
    solution = solution / norms
    if not np.all(np.isfinite(solution)):
        raise FitError("rational fit produced non-finite coefficients")
    if sys_rank < N_TERMS:
        raise FitError(f"rank-deficient normal system (rank {sys_rank})")

    num = solution[:N_TERMS].copy()
    den = np.concatenate([[1.0], solution[N_TERMS:]])
    return num, den


@dataclass(frozen=True)
class InverseFitReport:
    """Check-grid residuals of a fitted inverse.

    ``max_residual``/``rms_residual`` are in normalized ground units,
    ``max_reprojection_px`` is the forward reprojection error of the fitted
    inverse in pixels.
    """

    max_residual: float
    rms_residual: float
    max_reprojection_px: float
    n_fit: int
    n_check: int

    def to_dict(self) -> dict:
        return {
            "max_residual": self.max_residual,
            "rms_residual": self.rms_residual,
            "max_reprojection_px": self.max_reprojection_px,
            "n_fit": self.n_fit,
            "n_check": self.n_check,
        }


def _image_cube(m: RpcModel) -> tuple[tuple[float, float], tuple[float, float], tuple[float, float]]:
    h_min, h_max = m.height_range
    return (-1.0, 1.0), (-1.0, 1.0), (float(m.normalize_height(h_min)), float(m.normalize_height(h_max)))


def _localize_normalized(m: RpcModel, samp_n, line_n, hei_n):
    samp, line = m.denormalize_image(samp_n, line_n)
    hei = hei_n * m.hei_scale + m.hei_off
    lat, lon = m.localize(samp, line, hei, strict=False)
    lat_n, lon_n, _ = m.normalize_ground(lat, lon, hei)
    return lat_n, lon_n


def fit_inverse_rpc(
    m: RpcModel,
    grid: GridSpec = DEFAULT_INVERSE_GRID,
    check_grid: Optional[GridSpec] = None,
) -> tuple[RpcModel, InverseFitReport]:
    """Fit inverse polynomials from Newton localizations over the image × height cube.

    Returns the model with its inverse fields populated and the residual
    report computed on the cell centers of ``check_grid`` (``grid`` by default).
    """
    if grid.size < N_UNKNOWNS:
        raise FitError(f"grid {grid.nx}x{grid.ny}x{grid.nz} has fewer than {N_UNKNOWNS} samples")

    cube = _image_cube(m)
    s_n, l_n, h_n = grid.nodes(*cube)
    lat_n, lon_n = _localize_normalized(m, s_n, l_n, h_n)
    ok = np.isfinite(lat_n) & np.isfinite(lon_n)
    if not ok.all():
        logger.warning("Inverse fit: %d of %d grid points failed to localize", int((~ok).sum()), ok.size)
    s_n, l_n, h_n, lat_n, lon_n = s_n[ok], l_n[ok], h_n[ok], lat_n[ok], lon_n[ok]

    lat_num, lat_den = fit_rational(s_n, l_n, h_n, lat_n)
    lon_num, lon_den = fit_rational(s_n, l_n, h_n, lon_n)
    try:
        fitted = replace(
            m,
            inv_lat_num=lat_num,
            inv_lat_den=lat_den,
            inv_lon_num=lon_num,
            inv_lon_den=lon_den,
        )
    except RpcValidationError as e:
        raise FitError(f"fitted inverse is not a valid model: {e}") from e

    cs_n, cl_n, ch_n = (check_grid or grid).midpoints(*cube)
    true_lat_n, true_lon_n = _localize_normalized(m, cs_n, cl_n, ch_n)
    keep = np.isfinite(true_lat_n) & np.isfinite(true_lon_n)
    cs_n, cl_n, ch_n = cs_n[keep], cl_n[keep], ch_n[keep]
    fit_lat_n, fit_lon_n = fitted.inverse_normalized(cs_n, cl_n, ch_n, strict=False)

    residual = np.hypot(fit_lat_n - true_lat_n[keep], fit_lon_n - true_lon_n[keep])
    back_s, back_l = fitted.project_normalized(fit_lat_n, fit_lon_n, ch_n, strict=False)
    reprojection = np.hypot((back_s - cs_n) * m.samp_scale, (back_l - cl_n) * m.line_scale)
    if residual.size == 0 or not np.all(np.isfinite(residual)):
        raise FitError("fitted inverse is degenerate on the check grid")

    report = InverseFitReport(
        max_residual=float(np.max(residual)),
        rms_residual=float(np.sqrt(np.mean(residual**2))),
        max_reprojection_px=float(np.max(reprojection)),
        n_fit=int(ok.sum()),
        n_check=int(residual.size),
    )
    logger.info(
        "Inverse RPC fitted on %d samples: max residual %.3e, max reprojection %.4f px",
        report.n_fit,
        report.max_residual,
        report.max_reprojection_px,
    )
    return fitted, report
