"""Чтение и запись одноканальных изображений (PGM, 8/16 бит) через OpenCV."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Union

import cv2
import numpy as np

from project.errors import SatMvsError

logger = logging.getLogger(__name__)

_MAXVAL = {np.dtype(np.uint8): 255, np.dtype(np.uint16): 65535}


class ImageFormatError(SatMvsError, ValueError):
    """Error when an image file is malformed or unsupported"""


def read_pgm(path: Union[str, Path]) -> tuple[np.ndarray, int]:
    """Возвращает растр (uint8 или uint16) и maxval его типа."""
    path = Path(path)
    try:
        buffer = np.fromfile(path, dtype=np.uint8)
    except OSError as e:
        raise ImageFormatError(f"cannot read {path}: {e}") from e

    try:
        raster = cv2.imdecode(buffer, cv2.IMREAD_UNCHANGED) if buffer.size else None
    except cv2.error as e:
        raise ImageFormatError(f"{path}: cannot decode image: {e}") from e
    if raster is None:
        raise ImageFormatError(f"{path}: cannot decode image")
    if raster.ndim != 2:
        raise ImageFormatError(f"{path}: expected a single-channel image, got shape {raster.shape}")
    if raster.dtype not in _MAXVAL:
        raise ImageFormatError(f"{path}: unsupported pixel type {raster.dtype}")
    return raster, _MAXVAL[raster.dtype]


def write_pgm(path: Union[str, Path], raster: np.ndarray) -> Path:
    """Пишет бинарный PGM; uint8 даёт maxval 255, остальные целые - 16 бит."""
    raster = np.asarray(raster)
    if raster.ndim != 2 or raster.size == 0:
        raise ImageFormatError(f"PGM needs a non-empty 2-D raster, got shape {raster.shape}")
    dtype = np.dtype(np.uint8) if raster.dtype == np.uint8 else np.dtype(np.uint16)
    if raster.min() < 0 or raster.max() > _MAXVAL[dtype]:
        raise ImageFormatError(f"raster values outside [0, {_MAXVAL[dtype]}]")

    ok, encoded = cv2.imencode(".pgm", raster.astype(dtype), [cv2.IMWRITE_PXM_BINARY, 1])
    if not ok:
        raise ImageFormatError(f"cannot encode {raster.shape} raster as PGM")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encoded.tobytes())
    logger.debug("Wrote %s (%dx%d, %s)", path, raster.shape[1], raster.shape[0], dtype)
    return path


def load_image(path: Union[str, Path]) -> np.ndarray:
    """Изображение как float64 в диапазоне [0, 1]."""
    raster, maxval = read_pgm(path)
    return raster.astype(np.float64) / float(maxval)


def save_image(path: Union[str, Path], image: np.ndarray, bits: int = 16) -> Path:
    """Квантует изображение из [0, 1] в 8 или 16 бит."""
    if bits not in (8, 16):
        raise ImageFormatError(f"unsupported bit depth {bits}")
    dtype = np.uint8 if bits == 8 else np.uint16
    scaled = np.rint(np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0) * _MAXVAL[np.dtype(dtype)])
    return write_pgm(path, scaled.astype(dtype))
