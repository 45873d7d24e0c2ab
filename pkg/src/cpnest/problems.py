"""Synthetic collinear CP benchmark problems, initial guesses and tensor files.

Random numbers come from numpy's PCG64 bit generator. Suite members derive
their 64-bit seed from ``SeedSequence(base_seed, spawn_key=(class, instance))``
so every instance is reproducible on its own and across platforms.

Within one instance the draws happen in a fixed order: the three collinear
factors (modes 1, 2, 3), the homoscedastic noise tensor, the heteroscedastic
noise tensor, then the initial guess.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cp_kernel import num_variables, pack, reconstruct
from .tensor_ops import as_tensor

MAGIC = "cpnest-tensor v1"

# (s, c, R, l1, l2) for the six standard ill-conditioned classes
STANDARD_CLASSES = (
    (20, 0.9, 3, 0.0, 0.0),
    (20, 0.9, 5, 1.0, 1.0),
    (50, 0.9, 3, 0.0, 0.0),
    (50, 0.9, 5, 1.0, 1.0),
    (100, 0.9, 3, 0.0, 0.0),
    (100, 0.9, 5, 1.0, 1.0),
)


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of one synthetic three-way problem.

    ``l1`` and ``l2`` are homoscedastic and heteroscedastic noise levels in
    percent.
    """

    s: int
    c: float
    R: int
    l1: float = 0.0
    l2: float = 0.0
    seed: int = 0
    name: str = ""

    def __post_init__(self):
        if not (self.s >= self.R >= 1):
            raise ValueError(f"need s >= R >= 1, got s={self.s}, R={self.R}")
        if not 0.0 <= self.c < 1.0:
            raise ValueError(f"collinearity must lie in [0, 1), got {self.c}")
        for level in (self.l1, self.l2):
            if not 0.0 <= level < 100.0:
                raise ValueError(f"noise levels must lie in [0, 100), got {level}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass
class ProblemInstance:
    tensor: np.ndarray
    rank: int
    x0: np.ndarray
    provenance: object = None
    name: str = ""
    true_factors: list | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.x0.size != num_variables(self.tensor.shape, self.rank):
            raise ValueError("initial guess length does not match tensor shape and rank")

    @property
    def shape(self) -> tuple:
        return self.tensor.shape


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def derive_seed(base_seed: int, *key: int) -> int:
    """64-bit seed for the member ``key`` of a seeded family."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def collinearity_gram(R: int, c: float) -> np.ndarray:
    return (1.0 - c) * np.eye(R) + c * np.ones((R, R))


def collinear_factor(s: int, R: int, c: float, rng: np.random.Generator) -> np.ndarray:
    """``s x R`` matrix with unit columns whose pairwise inner products all equal ``c``.

    Orthonormalizes a Gaussian matrix and maps it through the Cholesky factor of
    ``(1 - c) I + c 11^T``.
    """
    if s < R:
        raise ValueError(f"need s >= R, got s={s}, R={R}")
    k = collinearity_gram(R, c)
    try:
        chol = np.linalg.cholesky(k)
    except np.linalg.LinAlgError:
        raise ValueError(f"collinearity {c} is infeasible for {R} columns") from None
    q, _ = np.linalg.qr(rng.standard_normal((s, R)))
    return q @ chol.T


def _noise_scale(level: float) -> float:
    return (100.0 / level - 1.0) ** -0.5


def random_init(shape: Sequence[int], r: int, rng: np.random.Generator) -> np.ndarray:
    """Packed initial guess with i.i.d. uniform(0, 1) factor entries."""
    factors = [rng.uniform(0.0, 1.0, size=(extent, r)) for extent in shape]
    return pack(factors)


def make_synthetic(spec: SyntheticSpec) -> ProblemInstance:
    """Build the noisy collinear tensor and its initial guess for ``spec``."""
    rng = make_rng(spec.seed)
    factors = [collinear_factor(spec.s, spec.R, spec.c, rng) for _ in range(3)]
    z = reconstruct(factors)
    if spec.l1 > 0:
        noise = rng.standard_normal(z.shape)
        z = z + _noise_scale(spec.l1) * (np.linalg.norm(z) / np.linalg.norm(noise)) * noise
    if spec.l2 > 0:
        noise = rng.standard_normal(z.shape) * z
        z = z + _noise_scale(spec.l2) * (np.linalg.norm(z) / np.linalg.norm(noise)) * noise
    x0 = random_init(z.shape, spec.R, rng)
    return ProblemInstance(tensor=z, rank=spec.R, x0=x0, provenance=spec,
                           name=spec.name or f"synthetic-s{spec.s}-R{spec.R}-seed{spec.seed}",
                           true_factors=factors)


def standard_suite(instances: int = 10, base_seed: int = 0,
                   classes: Sequence[int] | None = None) -> list[SyntheticSpec]:
    """Specs for the six standard classes, ``instances`` seeded members each.

    Classes are numbered 1 to 6 in the order of :data:`STANDARD_CLASSES`.
    """
    if classes is None:
        classes = range(1, len(STANDARD_CLASSES) + 1)
    specs = []
    for cls in classes:
        s, c, R, l1, l2 = STANDARD_CLASSES[cls - 1]
        for inst in range(instances):
            specs.append(SyntheticSpec(s=s, c=c, R=R, l1=l1, l2=l2,
                                       seed=derive_seed(base_seed, cls, inst),
                                       name=f"class{cls}-inst{inst}"))
    return specs


class TensorFormatError(ValueError):
    """Base class for malformed tensor files."""


class TensorHeaderError(TensorFormatError):
    pass


class TensorTruncatedError(TensorFormatError):
    pass


class TensorValueError(TensorFormatError):
    """Payload holds NaN or infinite values."""


def save_tensor(t, path) -> None:
    """Write ``t`` as a text header followed by little-endian float64 data.

    The header is three lines: the magic string, the number of modes, and the
    space-separated extents. Values follow in column-major order.
    """
    t = as_tensor(t)
    header = f"{MAGIC}\n{t.ndim}\n{' '.join(str(n) for n in t.shape)}\n".encode("ascii")
    payload = np.ravel(t, order="F").astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    lines = data.split(b"\n", 3)
    if len(lines) < 4:
        raise TensorHeaderError(f"{path}: incomplete header")
    magic, ndim_line, extents_line, payload = lines
    if magic.decode("ascii", "replace").strip() != MAGIC:
        raise TensorHeaderError(f"{path}: bad magic line {magic[:40]!r}")
    try:
        ndim = int(ndim_line)
        extents = [int(tok) for tok in extents_line.split()]
    except ValueError:
        raise TensorHeaderError(f"{path}: non-integer mode count or extents") from None
    if ndim < 2 or len(extents) != ndim:
        raise TensorHeaderError(f"{path}: header declares {ndim} modes but lists {len(extents)} extents")
    if any(n < 1 for n in extents):
        raise TensorHeaderError(f"{path}: extents must be positive")
    expected = 8 * math.prod(extents)
    if len(payload) < expected:
        raise TensorTruncatedError(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    if len(payload) > expected:
        raise TensorHeaderError(f"{path}: {len(payload) - expected} trailing bytes after payload")
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise TensorValueError(f"{path}: payload contains non-finite values")
    return np.reshape(values, extents, order="F")


def load_problem(path, rank: int, seed: int = 0) -> ProblemInstance:
    """Problem from a tensor file with a seeded uniform initial guess."""
    t = load_tensor(path)
    x0 = random_init(t.shape, rank, make_rng(seed))
    return ProblemInstance(tensor=t, rank=rank, x0=x0, provenance=os.fspath(path),
                           name=os.path.splitext(os.path.basename(path))[0])


__all__ = [
    "SyntheticSpec", "ProblemInstance", "STANDARD_CLASSES", "collinear_factor", "collinearity_gram",
    "make_synthetic", "random_init", "standard_suite", "derive_seed", "make_rng",
    "save_tensor", "load_tensor", "load_problem", "TensorFormatError", "TensorHeaderError",
    "TensorTruncatedError", "TensorValueError",
]

