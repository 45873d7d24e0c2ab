"""CP model, objective, gradient and the ALS sweep.

The objective is ``f(x) = 0.5 * ||T - [[A_1, ..., A_N]]||_F^2`` where ``x`` is
the flat vector of all factor entries (factors concatenated in mode order,
each stored column-major).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .tensor_ops import gram, hadamard_grams, khatri_rao, mttkrp, norm_sq

# Below this fraction of ||T||^2 the Gram-expansion of f is dominated by
# cancellation error and the residual is formed explicitly instead.
EXPANSION_CUTOFF = 1e-8


@dataclass
class KruskalModel:
    """A rank-``r`` CP model given by its factor matrices."""

    factors: list

    def __post_init__(self):
        self.factors = [np.asarray(a, dtype=np.float64) for a in self.factors]
        if not self.factors:
            raise ValueError("a Kruskal model needs at least one factor")
        r = self.factors[0].shape[1]
        if r < 1:
            raise ValueError("rank must be at least 1")
        for a in self.factors:
            if a.ndim != 2 or a.shape[1] != r:
                raise ValueError("factor matrices must share a common column count")

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    @property
    def shape(self) -> tuple:
        return tuple(a.shape[0] for a in self.factors)

    @property
    def ndim(self) -> int:
        return len(self.factors)

    def copy(self) -> "KruskalModel":
        return KruskalModel([a.copy() for a in self.factors])

    def full(self) -> np.ndarray:
        return reconstruct(self)

    def pack(self) -> np.ndarray:
        return pack(self)

    @classmethod
    def unpack(cls, x, shape, rank) -> "KruskalModel":
        return unpack(x, shape, rank)

    def __eq__(self, other):
        if not isinstance(other, KruskalModel) or self.shape != other.shape or self.rank != other.rank:
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in zip(self.factors, other.factors))


def num_variables(shape: Sequence[int], rank: int) -> int:
    """``n_X = r * sum(I_n)``."""
    return int(rank) * int(sum(shape))


def pack(model) -> np.ndarray:
    """Flatten a model (or a list of factors) into the iterate vector."""
    factors = model.factors if isinstance(model, KruskalModel) else model
    return np.concatenate([np.ravel(a, order="F") for a in factors])


def unpack(x, shape: Sequence[int], rank: int) -> KruskalModel:
    """Inverse of :func:`pack`."""
    x = np.asarray(x, dtype=np.float64)
    n_x = num_variables(shape, rank)
    if x.ndim != 1 or x.size != n_x:
        raise ValueError(f"iterate has length {x.size}, expected {n_x} for shape {tuple(shape)} and rank {rank}")
    factors = []
    offset = 0
    for extent in shape:
        size = extent * rank
        factors.append(np.reshape(x[offset:offset + size], (extent, rank), order="F"))
        offset += size
    return KruskalModel(factors)


def _factors(model):
    return model.factors if isinstance(model, KruskalModel) else list(model)


def _check_compatible(t: np.ndarray, factors) -> None:
    shape = tuple(a.shape[0] for a in factors)
    if t.shape != shape:
        raise ValueError(f"model shape {shape} does not match tensor shape {t.shape}")


def reconstruct(model) -> np.ndarray:
    """Full dense tensor of the model."""
    factors = _factors(model)
    shape = tuple(a.shape[0] for a in factors)
    # mode-0 unfolding is A_1 @ KR(A_N, ..., A_2)^T
    unfolded = factors[0] @ khatri_rao(factors[:0:-1]).T
    return np.reshape(unfolded, shape, order="F")


def objective(t: np.ndarray, model, t_norm_sq: float | None = None) -> float:
    """``0.5 * ||t - model||^2`` via the Gram expansion.

    ``t_norm_sq`` can be cached per problem.
    """
    factors = _factors(model)
    _check_compatible(t, factors)
    if t_norm_sq is None:
        t_norm_sq = norm_sq(t)
    n = len(factors) - 1
    grams = [gram(a) for a in factors]
    m = mttkrp(t, factors, n)
    return _expanded_objective(t, factors, t_norm_sq, float(np.sum(m * factors[n])),
                               float(np.sum(hadamard_grams(factors, grams=grams))))


def _expanded_objective(t, factors, t_norm_sq, cross, model_norm_sq):
    f = 0.5 * (t_norm_sq - 2.0 * cross + model_norm_sq)
    if f <= EXPANSION_CUTOFF * t_norm_sq:
        f = 0.5 * norm_sq(t - reconstruct(factors))
    return f


def objective_and_gradient(t: np.ndarray, model, t_norm_sq: float | None = None):
    """Return ``(f, g)`` with ``g`` packed like the iterate vector.

    Gradient block ``n`` is ``A_n Γ_n - M_n`` where ``Γ_n`` is the Hadamard
    product of the other Gram matrices and ``M_n`` the mode-``n`` MTTKRP.
    """
    factors = _factors(model)
    _check_compatible(t, factors)
    if t_norm_sq is None:
        t_norm_sq = norm_sq(t)
    grams = [gram(a) for a in factors]
    blocks = []
    for n, a in enumerate(factors):
        gamma = hadamard_grams(factors, skip=n, grams=grams)
        m = mttkrp(t, factors, n)
        blocks.append(a @ gamma - m)
    # the last block's M_n and Γ_n give the cross term and ||model||^2
    cross = float(np.sum(m * a))
    model_norm_sq = float(np.sum(gamma * grams[-1]))
    f = _expanded_objective(t, factors, t_norm_sq, cross, model_norm_sq)
    return f, pack(blocks)


def gradient(t: np.ndarray, model, t_norm_sq: float | None = None) -> np.ndarray:
    return objective_and_gradient(t, model, t_norm_sq)[1]


def solve_gram_system(gamma: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``A @ gamma = rhs`` for ``A`` with a symmetric PSD ``gamma``.

    Cholesky first; on failure a Tikhonov shift growing from ``1e-12`` to
    ``1e-6`` times ``trace/r`` is tried, then an eigendecomposition
    pseudo-inverse.
    """
    r = gamma.shape[0]
    scale = np.trace(gamma) / r
    shift = 0.0
    for shift in (0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6):
        try:
            c = scipy.linalg.cho_factor(gamma + shift * scale * np.eye(r), lower=False,
                                        check_finite=False)
        except np.linalg.LinAlgError:
            continue
        sol = scipy.linalg.cho_solve(c, rhs.T, check_finite=False).T
        if np.all(np.isfinite(sol)):
            return sol
    w, v = np.linalg.eigh(gamma)
    keep = w > 1e-12 * max(w[-1], 0.0)
    inv = (v[:, keep] / w[keep]) @ v[:, keep].T
    return rhs @ inv


def als_update(t: np.ndarray, factors: list, mode: int, grams: list | None = None) -> np.ndarray:
    """Least-squares update of one factor with the others held fixed (in place)."""
    if grams is None:
        grams = [gram(a) for a in factors]
    gamma = hadamard_grams(factors, skip=mode, grams=grams)
    factors[mode] = solve_gram_system(gamma, mttkrp(t, factors, mode))
    grams[mode] = gram(factors[mode])
    return factors[mode]


def als_sweep(t: np.ndarray, model) -> KruskalModel:
    """One full ALS sweep, updating factors in ascending mode order."""
    factors = [np.array(a, dtype=np.float64) for a in _factors(model)]
    _check_compatible(t, factors)
    grams = [gram(a) for a in factors]
    for n in range(len(factors)):
        als_update(t, factors, n, grams)
    return KruskalModel(factors)
