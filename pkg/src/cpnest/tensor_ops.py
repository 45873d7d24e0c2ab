"""Dense tensor kernels: unfolding, Khatri-Rao products, MTTKRP and Gram blocks.

Tensors are plain :class:`numpy.ndarray` objects of ``float64`` with at least
two modes. The canonical flat layout of a tensor is column-major (first index
varies fastest), i.e. ``t.ravel(order="F")``.

Unfolding convention
--------------------
``unfold(t, n)`` has shape ``(I_n, prod_{m != n} I_m)`` and its column index
runs over the remaining modes with the *lowest* mode varying fastest. The
matching Khatri-Rao product takes the remaining factors in *reverse* mode
order, so that

    mttkrp(t, factors, n) == unfold(t, n) @ khatri_rao(factors[m] for m in reversed(others))

This is the single place the convention is fixed; :func:`krp_operands` returns
the operand list in that order.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np


def as_tensor(t, copy=False) -> np.ndarray:
    """Validate ``t`` as a dense tensor and return it as a float64 array."""
    arr = np.array(t, dtype=np.float64, copy=copy) if copy else np.asarray(t, dtype=np.float64)
    if arr.ndim < 2:
        raise ValueError(f"tensor must have at least 2 modes, got {arr.ndim}")
    if any(extent < 1 for extent in arr.shape):
        raise ValueError(f"tensor extents must be positive, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor contains non-finite values")
    return arr


def _check_mode(ndim: int, mode: int) -> None:
    if not 0 <= mode < ndim:
        raise ValueError(f"mode {mode} out of range for a {ndim}-way tensor")


def unfold(t: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` matricization of ``t``.

    Columns enumerate the remaining modes with the lowest mode varying fastest.
    """
    t = np.asarray(t)
    _check_mode(t.ndim, mode)
    return np.reshape(np.moveaxis(t, mode, 0), (t.shape[mode], -1), order="F")


def refold(m: np.ndarray, mode: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    shape = tuple(int(s) for s in shape)
    _check_mode(len(shape), mode)
    rest = shape[:mode] + shape[mode + 1:]
    full = np.reshape(m, (shape[mode],) + rest, order="F")
    return np.moveaxis(full, 0, mode)


def khatri_rao(ms: Sequence[np.ndarray]) -> np.ndarray:
    """Column-wise Kronecker product ``ms[0] ⊙ ms[1] ⊙ ...``.

    Column ``j`` of the result is ``kron(ms[0][:, j], ms[1][:, j], ...)``, so the
    row index of the last matrix varies fastest.
    """
    ms = [np.asarray(m, dtype=np.float64) for m in ms]
    if not ms:
        raise ValueError("khatri_rao needs at least one matrix")
    r = ms[0].shape[1]
    for m in ms:
        if m.ndim != 2 or m.shape[1] != r:
            raise ValueError("khatri_rao operands must be matrices with a common column count")
    out = ms[0]
    for m in ms[1:]:
        out = (out[:, None, :] * m[None, :, :]).reshape(-1, r)
    return out


def krp_operands(factors: Sequence[np.ndarray], mode: int) -> list:
    """Factors other than ``mode`` in the order matching :func:`unfold`."""
    return [factors[m] for m in reversed(range(len(factors))) if m != mode]


def _check_factors(shape, factors) -> int:
    if len(factors) != len(shape):
        raise ValueError(f"expected {len(shape)} factor matrices, got {len(factors)}")
    r = factors[0].shape[1]
    for n, (extent, a) in enumerate(zip(shape, factors)):
        if a.ndim != 2 or a.shape != (extent, r):
            raise ValueError(
                f"factor {n} has shape {a.shape}, expected ({extent}, {r})")
    return r


def mttkrp(t: np.ndarray, factors: Sequence[np.ndarray], mode: int) -> np.ndarray:
    """Matricized tensor times Khatri-Rao product for ``mode``.

    Computed by contracting one mode at a time; the Khatri-Rao matrix is never
    formed. The first contraction is a BLAS ``tensordot``; subsequent ones are
    batched over the rank index.
    """
    t = np.asarray(t)
    _check_mode(t.ndim, mode)
    _check_factors(t.shape, factors)
    others = [m for m in range(t.ndim) if m != mode]
    last = others[-1]
    w = np.tensordot(t, factors[last], axes=(last, 0))
    axes = [m for m in range(t.ndim) if m != last]  # remaining tensor axes of w, rank axis last
    for m in reversed(others[:-1]):
        pos = axes.index(m)
        w = np.einsum("...ir,ir->...r", np.moveaxis(w, pos, -2), factors[m])
        axes.pop(pos)
    return w


def mttkrp_naive(t: np.ndarray, factors: Sequence[np.ndarray], mode: int) -> np.ndarray:
    """Reference MTTKRP through the explicit unfolding and Khatri-Rao product."""
    return unfold(t, mode) @ khatri_rao(krp_operands(factors, mode))


def gram(m: np.ndarray) -> np.ndarray:
    """``m.T @ m``."""
    m = np.asarray(m, dtype=np.float64)
    return m.T @ m


def hadamard_grams(factors: Sequence[np.ndarray], skip: int | None = None,
                   grams: Sequence[np.ndarray] | None = None) -> np.ndarray:
    """Elementwise product of the Gram matrices of all factors except ``skip``.

    Precomputed ``grams`` may be passed to avoid recomputing them.
    """
    if grams is None:
        grams = [gram(a) for a in factors]
    r = grams[0].shape[0]
    out = np.ones((r, r))
    for n, g in enumerate(grams):
        if g.shape != (r, r):
            raise ValueError("factor matrices must share a common column count")
        if n != skip:
            out = out * g
    return out


def inner(t: np.ndarray, u: np.ndarray) -> float:
    t = np.asarray(t)
    u = np.asarray(u)
    if t.shape != u.shape:
        raise ValueError(f"shape mismatch: {t.shape} vs {u.shape}")
    return float(np.vdot(t, u))


def norm_sq(t: np.ndarray) -> float:
    """Squared Frobenius norm."""
    t = np.asarray(t)
    return inner(t, t)
