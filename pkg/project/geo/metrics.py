from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from jsonschema import validate

from project.geo.dsm import Dsm
from project.geo.errors import GeometryMismatchError, NoOverlapError
from project.schemas.json_schemas import METRICS_SCHEMA

logger = logging.getLogger(__name__)

THRESHOLDS = (2.5, 7.5)


@dataclass(frozen=True)
class DsmMetrics:
    mae: float
    rmse: float
    pct_below_2_5: float
    pct_below_7_5: float
    completeness: float
    n_compared: int = 0
    n_reference: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def align_to_grid(dsm: Dsm, gt: Dsm) -> np.ndarray:
    """Values of ``dsm`` at the cell centers of ``gt``'s grid (nearest cell)."""
    if (dsm.grid.zone, dsm.grid.northern) != (gt.grid.zone, gt.grid.northern):
        raise GeometryMismatchError("DSMs are in different UTM zones")
    if dsm.grid == gt.grid:
        return dsm.values
    east, north = gt.grid.cell_centers()
    row, col, inside = dsm.grid.cell_index(east, north)
    return np.where(inside, dsm.values[row, col], np.nan)


def evaluate_dsm(dsm: Dsm, gt: Dsm) -> DsmMetrics:
    """MAE, RMSE and threshold percentages over cells valid in both; completeness over valid GT cells."""
    est = align_to_grid(dsm, gt)
    gt_valid = np.isfinite(gt.values)
    both = gt_valid & np.isfinite(est)
    n_gt = int(gt_valid.sum())
    n = int(both.sum())
    if n == 0:
        raise NoOverlapError("estimated and reference DSMs share no valid cell")
    err = np.abs(est[both] - gt.values[both])
    metrics = DsmMetrics(
        mae=float(err.mean()),
        rmse=float(np.sqrt(np.mean(err**2))),
        pct_below_2_5=100.0 * float(np.count_nonzero(err < THRESHOLDS[0])) / n,
        pct_below_7_5=100.0 * float(np.count_nonzero(err < THRESHOLDS[1])) / n,
        completeness=100.0 * n / n_gt,
        n_compared=n,
        n_reference=n_gt,
    )
    logger.info(
        "DSM metrics: MAE %.3f m, RMSE %.3f m, <2.5m %.2f%%, <7.5m %.2f%%, completeness %.2f%%",
        metrics.mae,
        metrics.rmse,
        metrics.pct_below_2_5,
        metrics.pct_below_7_5,
        metrics.completeness,
    )
    return metrics


def write_metrics(
    path: Union[str, Path],
    metrics: Optional[DsmMetrics],
    runtime_s: float,
    failures: Optional[list[dict]] = None,
    extra: Optional[dict] = None,
) -> Path:
    report = {
        "metrics": metrics.to_dict() if metrics is not None else None,
        "runtime_s": float(runtime_s),
        "failures": list(failures or []),
        **(extra or {}),
    }
    validate(instance=report, schema=METRICS_SCHEMA)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return path
