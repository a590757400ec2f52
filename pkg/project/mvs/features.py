"""Image pyramid with intensity and gradient channels.

Each channel is normalized to zero mean and unit variance over the whole tile,
so the variance cost compares views on the same footing.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy import ndimage

CHANNELS = ("intensity", "grad_x", "grad_y")


def block_reduce(img: np.ndarray, factor: int) -> np.ndarray:
    """Mean over non-overlapping ``factor``×``factor`` blocks; trailing rows/cols are dropped."""
    img = np.asarray(img, dtype=np.float64)
    if factor == 1:
        return img
    rows = img.shape[-2] // factor
    cols = img.shape[-1] // factor
    trimmed = img[..., : rows * factor, : cols * factor]
    shape = img.shape[:-2] + (rows, factor, cols, factor)
    return trimmed.reshape(shape).mean(axis=(-3, -1))


def rescale_map(values: np.ndarray, src_factor: int, dst_factor: int, dst_shape: tuple[int, int]) -> np.ndarray:
    """Bilinear resampling of a map between pyramid levels (pixel centers aligned)."""
    rows = np.arange(dst_shape[0], dtype=np.float64)
    cols = np.arange(dst_shape[1], dtype=np.float64)
    # full-resolution center of a level-f pixel u is u * f + (f - 1) / 2
    src_rows = (rows * dst_factor + (dst_factor - 1) / 2.0 - (src_factor - 1) / 2.0) / src_factor
    src_cols = (cols * dst_factor + (dst_factor - 1) / 2.0 - (src_factor - 1) / 2.0) / src_factor
    rr, cc = np.meshgrid(src_rows, src_cols, indexing="ij")
    return ndimage.map_coordinates(np.asarray(values, dtype=np.float64), [rr, cc], order=1, mode="nearest")


def normalize_channel(channel: np.ndarray) -> np.ndarray:
    channel = np.asarray(channel, dtype=np.float64)
    centered = channel - channel.mean()
    std = centered.std()
    return centered / std if std > 0 else centered


def image_features(img: np.ndarray) -> np.ndarray:
    """(3, H, W): intensity, d/dx and d/dy (Sobel), each normalized."""
    img = np.asarray(img, dtype=np.float64)
    grad_x = ndimage.sobel(img, axis=1, mode="nearest")
    grad_y = ndimage.sobel(img, axis=0, mode="nearest")
    return np.stack([normalize_channel(img), normalize_channel(grad_x), normalize_channel(grad_y)])


def extract_features(img: np.ndarray, scales: Sequence[float]) -> list[np.ndarray]:
    """Feature maps for every pyramid scale, in the order of ``scales``."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"expected a grayscale image, got shape {img.shape}")
    return [image_features(block_reduce(img, int(round(1.0 / s)))) for s in scales]
