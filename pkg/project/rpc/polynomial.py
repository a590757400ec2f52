"""Cubic polynomials in three normalized variables, RPC00B term order.

Variables are called (L, P, H). For the forward model L = lon_n, P = lat_n,
H = hei_n; for the inverse model L = samp_n, P = line_n, H = hei_n.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np
import numpy.typing as npt

Poly20 = npt.NDArray[np.float64]

TERM_NAMES: tuple[str, ...] = (
    "1", "L", "P", "H", "LP", "LH", "PH", "L2", "P2", "H2",
    "PLH", "L3", "LP2", "LH2", "L2P", "P3", "PH2", "L2H", "P2H", "H3",
)

# (deg L, deg P, deg H) for every term
TERM_EXPONENTS = np.array(
    [
        (0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1),
        (1, 1, 0), (1, 0, 1), (0, 1, 1),
        (2, 0, 0), (0, 2, 0), (0, 0, 2),
        (1, 1, 1),
        (3, 0, 0), (1, 2, 0), (1, 0, 2), (2, 1, 0),
        (0, 3, 0), (0, 1, 2), (2, 0, 1), (0, 2, 1),
        (0, 0, 3),
    ],
    dtype=np.int64,
)

N_TERMS = 20


def as_poly20(values: Iterable[float], name: str = "polynomial") -> Poly20:
    arr = np.array(values, dtype=np.float64)
    if arr.shape != (N_TERMS,):
        raise ValueError(f"{name}: expected {N_TERMS} coefficients, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: coefficients must be finite")
    return arr


def monomials(l, p, h) -> np.ndarray:
    """Значения 20 мономов в точках (L, P, H); форма результата (..., 20)."""
    l, p, h = np.broadcast_arrays(
        np.asarray(l, dtype=np.float64),
        np.asarray(p, dtype=np.float64),
        np.asarray(h, dtype=np.float64),
    )
    out = np.empty(l.shape + (N_TERMS,), dtype=np.float64)
    out[..., 0] = 1.0
    out[..., 1] = l
    out[..., 2] = p
    out[..., 3] = h
    out[..., 4] = l * p
    out[..., 5] = l * h
    out[..., 6] = p * h
    out[..., 7] = l * l
    out[..., 8] = p * p
    out[..., 9] = h * h
    out[..., 10] = p * l * h
    out[..., 11] = l * l * l
    out[..., 12] = l * p * p
    out[..., 13] = l * h * h
    out[..., 14] = l * l * p
    out[..., 15] = p * p * p
    out[..., 16] = p * h * h
    out[..., 17] = l * l * h
    out[..., 18] = p * p * h
    out[..., 19] = h * h * h
    return out


def monomial_gradients(l, p, h) -> np.ndarray:
    """Partial derivatives of the 20 monomials; shape (..., 20, 3) as d/dL, d/dP, d/dH."""
    l, p, h = np.broadcast_arrays(
        np.asarray(l, dtype=np.float64),
        np.asarray(p, dtype=np.float64),
        np.asarray(h, dtype=np.float64),
    )
    zero = np.zeros_like(l)
    one = np.ones_like(l)
    d_l = [zero, one, zero, zero, p, h, zero, 2 * l, zero, zero,
           p * h, 3 * l * l, p * p, h * h, 2 * l * p, zero, zero, 2 * l * h, zero, zero]
    d_p = [zero, zero, one, zero, l, zero, h, zero, 2 * p, zero,
           l * h, zero, 2 * l * p, zero, l * l, 3 * p * p, h * h, zero, 2 * p * h, zero]
    d_h = [zero, zero, zero, one, zero, l, p, zero, zero, 2 * h,
           l * p, zero, zero, 2 * l * h, zero, zero, 2 * p * h, l * l, p * p, 3 * h * h]
    return np.stack([np.stack(d_l, axis=-1), np.stack(d_p, axis=-1), np.stack(d_h, axis=-1)], axis=-1)


def accumulate(terms: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Σ c_k·m_k with a fixed left-to-right order over the term axis.

    ``terms`` has the term index on axis -1, ``coeffs`` broadcasts against
    ``terms[..., 0]`` after adding a trailing term axis.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    acc = terms[..., 0] * coeffs[..., 0]
    for k in range(1, terms.shape[-1]):
        acc = acc + terms[..., k] * coeffs[..., k]
    return acc


def eval_poly20(coeffs: Poly20, x, y, z) -> np.ndarray | float:
    """Reference evaluation: x, y, z fill the L, P, H slots."""
    coeffs = as_poly20(coeffs)
    value = accumulate(monomials(x, y, z), coeffs)
    return float(value) if np.ndim(value) == 0 else value


def eval_rational(num: Poly20, den: Poly20, l, p, h) -> tuple[np.ndarray, np.ndarray]:
    """Returns numerator and denominator values (the caller decides what a small denominator means)."""
    terms = monomials(l, p, h)
    return accumulate(terms, num), accumulate(terms, den)


def eval_rational_with_gradient(num: Poly20, den: Poly20, l, p, h):
    """Value of num/den and its gradient w.r.t. (L, P, H); also returns den for degeneracy checks."""
    terms = monomials(l, p, h)
    grads = monomial_gradients(l, p, h)
    n = accumulate(terms, num)
    d = accumulate(terms, den)
    dn = np.einsum("...ki,k->...i", grads, num)
    dd = np.einsum("...ki,k->...i", grads, den)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = n / d
        grad = (dn * d[..., None] - n[..., None] * dd) / (d * d)[..., None]
    return value, grad, d
