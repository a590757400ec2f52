"""Height maps as PFM rasters with a JSON sidecar."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional, Union

import numpy as np

from project.mvs.regression import HeightMap
from project.mvs.schedule import HeightPlaneSchedule
from project.utils.images import ImageFormatError


def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(path.suffix + ".json")


def write_pfm(path: Union[str, Path], values: np.ndarray) -> Path:
    """Single-channel little-endian PFM, scanlines stored bottom-up."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ImageFormatError(f"PFM writer expects a 2-D raster, got {values.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows, cols = values.shape
    with path.open("wb") as f:
        f.write(f"Pf\n{cols} {rows}\n-1.0\n".encode("ascii"))
        f.write(np.flipud(values).astype("<f4").tobytes())
    return path


def read_pfm(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise ImageFormatError(f"cannot read {path}: {e}") from e
    parts = data.split(b"\n", 3)
    if len(parts) < 4:
        raise ImageFormatError(f"{path}: truncated PFM header")
    magic, dims, scale_line, payload = parts
    if magic.strip() != b"Pf":
        raise ImageFormatError(f"{path}: only single-channel PFM (Pf) is supported")
    try:
        cols, rows = (int(v) for v in dims.split())
        scale = float(scale_line)
    except ValueError as e:
        raise ImageFormatError(f"{path}: malformed PFM header") from e
    dtype = "<f4" if scale < 0 else ">f4"
    expected = rows * cols * 4
    if len(payload) < expected:
        raise ImageFormatError(f"{path}: raster holds {len(payload)} bytes, header declares {expected}")
    raster = np.frombuffer(payload[:expected], dtype=dtype).reshape(rows, cols)
    return np.flipud(raster).astype(np.float64)


def write_height_map(
    path: Union[str, Path],
    hmap: HeightMap,
    schedule: Optional[HeightPlaneSchedule] = None,
) -> Path:
    """PFM heights (NaN where invalid) plus sidecar with scale, schedule and validity stats."""
    path = write_pfm(path, np.where(hmap.valid, hmap.height, np.nan))
    meta = {
        "scale": hmap.scale,
        "schedule": schedule.to_dict() if schedule is not None else None,
        **hmap.stats(),
    }
    _sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def read_height_map(path: Union[str, Path]) -> HeightMap:
    path = Path(path)
    height = read_pfm(path)
    scale = 1.0
    sidecar = _sidecar_path(path)
    if sidecar.exists():
        scale = float(json.loads(sidecar.read_text()).get("scale", 1.0))
    return HeightMap(height=height, valid=np.isfinite(height), scale=scale)
