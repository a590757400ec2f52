"""Symmetric 4×4×4 coefficient tensors for cubic polynomials.

A point is X = (1, L, P, H); the leading 1 absorbs every lower-degree term, so
one contraction T_ijk X_i X_j X_k evaluates all 20 terms.
"""

from __future__ import annotations

from itertools import permutations
from math import factorial

import numpy as np
import numpy.typing as npt

from project.rpc.polynomial import N_TERMS, TERM_EXPONENTS, as_poly20

CoeffTensor = npt.NDArray[np.float64]


def _term_index(exponents) -> tuple[int, int, int]:
    eL, eP, eH = (int(e) for e in exponents)
    idx = [1] * eL + [2] * eP + [3] * eH
    idx += [0] * (3 - len(idx))
    return tuple(sorted(idx))


# sorted index triple of every term, in RPC00B order
TERM_INDEX: tuple[tuple[int, int, int], ...] = tuple(_term_index(e) for e in TERM_EXPONENTS)
_I = np.array([t[0] for t in TERM_INDEX])
_J = np.array([t[1] for t in TERM_INDEX])
_K = np.array([t[2] for t in TERM_INDEX])


def _multiplicity(idx: tuple[int, int, int]) -> int:
    counts = [idx.count(v) for v in set(idx)]
    total = factorial(3)
    for c in counts:
        total //= factorial(c)
    return total


# number of distinct permutations of each term's index multiset: 1, 3 or 6
TERM_MULTIPLICITY = np.array([_multiplicity(t) for t in TERM_INDEX], dtype=np.float64)


def build_coeff_tensor(p) -> CoeffTensor:
    """Spread each Poly20 coefficient evenly over the permutations of its index multiset."""
    coeffs = as_poly20(p)
    t = np.zeros((4, 4, 4), dtype=np.float64)
    for c, idx, mult in zip(coeffs, TERM_INDEX, TERM_MULTIPLICITY):
        for perm in set(permutations(idx)):
            t[perm] = c / mult
    return t


def tensor_coefficients(tensors: np.ndarray) -> np.ndarray:
    """Recover Poly20 coefficients from (..., 4, 4, 4) symmetric tensors."""
    tensors = np.asarray(tensors, dtype=np.float64)
    return tensors[..., _I, _J, _K] * TERM_MULTIPLICITY


def point_tensor(l, p, h) -> np.ndarray:
    """(..., 4) points (1, L, P, H)."""
    l, p, h = np.broadcast_arrays(
        np.asarray(l, dtype=np.float64),
        np.asarray(p, dtype=np.float64),
        np.asarray(h, dtype=np.float64),
    )
    return np.stack([np.ones_like(l), l, p, h], axis=-1)


def _check_batch(tensors: np.ndarray, points: np.ndarray) -> None:
    if tensors.ndim != 4 or tensors.shape[1:] != (4, 4, 4):
        raise ValueError(f"tensors must have shape (B, 4, 4, 4), got {tensors.shape}")
    if points.ndim != 3 or points.shape[-1] != 4:
        raise ValueError(f"points must have shape (B, M, 4), got {points.shape}")
    if points.shape[0] != tensors.shape[0]:
        raise ValueError(
            f"batch size mismatch: {tensors.shape[0]} tensors, {points.shape[0]} point sets"
        )


def contract_batch(tensors, points, chunk_size: int | None = None) -> np.ndarray:
    """f[b, m] = T[b]_ijk X[b, m]_i X[b, m]_j X[b, m]_k.

    Runs as a multiply-accumulate over the 20 distinct monomials in a fixed
    order, so every output depends only on its own point and tensor.
    ``chunk_size`` splits the point axis and leaves results bitwise unchanged.
    """
    tensors = np.asarray(tensors, dtype=np.float64)
    points = np.asarray(points, dtype=np.float64)
    _check_batch(tensors, points)
    coeffs = tensor_coefficients(tensors)[:, None, :]

    n_points = points.shape[1]
    step = n_points if not chunk_size else int(chunk_size)
    out = np.empty(points.shape[:2], dtype=np.float64)
    for start in range(0, max(n_points, 1), max(step, 1)):
        x = points[:, start : start + step, :]
        acc = x[..., _I[0]] * x[..., _J[0]] * x[..., _K[0]] * coeffs[..., 0]
        for k in range(1, N_TERMS):
            acc = acc + x[..., _I[k]] * x[..., _J[k]] * x[..., _K[k]] * coeffs[..., k]
        out[:, start : start + step] = acc
    return out


def contract(t, x) -> float:
    """Single tensor, single point; x[0] must be 1."""
    t = np.asarray(t, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (4,):
        raise ValueError(f"point must have 4 entries, got shape {x.shape}")
    if x[0] != 1.0:
        raise ValueError("point tensor must have x[0] == 1")
    return float(contract_batch(t[None], x[None, None])[0, 0])


def contract_literal(t, x) -> float:
    """The plain 64-entry sum Σ_ijk t_ijk x_i x_j x_k."""
    t = np.asarray(t, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    return float(np.einsum("ijk,i,j,k->", t, x, x, x))


def contract_gradient(tensors, points) -> np.ndarray:
    """∂f/∂X_i = 3 T_ijk X_j X_k for symmetric tensors; shape (B, M, 4)."""
    tensors = np.asarray(tensors, dtype=np.float64)
    points = np.asarray(points, dtype=np.float64)
    _check_batch(tensors, points)
    return 3.0 * np.einsum("bijk,bmj,bmk->bmi", tensors, points, points)


def is_symmetric(t, atol: float = 0.0) -> bool:
    t = np.asarray(t, dtype=np.float64)
    for perm in permutations(range(3)):
        if not np.allclose(t, np.transpose(t, perm), rtol=0.0, atol=atol):
            return False
    return True
