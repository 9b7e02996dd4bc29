"""Dense tensors, matricization, singular spectra and entanglement measures.

Tensors are plain ``numpy.ndarray`` objects in C (row-major) order, so the
last index runs fastest. Mode indices in partitions are 1-based, matching the
way partitions of ``[N]`` are usually written down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError, check_size

DEFAULT_RANK_TOL = 1e-7


def as_tensor(a) -> np.ndarray:
    """Coerce to a float64 array with order >= 1 and no zero-length modes."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if any(d < 1 for d in arr.shape):
        raise ValidationError(f"every mode dimension must be >= 1, got shape {arr.shape}")
    return arr


def tensor_product(a, b, cap: int | None = None) -> np.ndarray:
    """Outer product: ``(a ⊗ b)[i..., j...] = a[i...] * b[j...]``."""
    a = as_tensor(a)
    b = as_tensor(b)
    check_size(a.shape + b.shape, "tensor product", cap)
    return np.multiply.outer(a, b)


def rank1_from_vectors(vs: Sequence, cap: int | None = None) -> np.ndarray:
    if len(vs) == 0:
        raise ValidationError("rank1_from_vectors needs at least one vector")
    vecs = [as_tensor(v) for v in vs]
    for k, v in enumerate(vecs):
        if v.ndim != 1:
            raise ValidationError(f"vector {k} has order {v.ndim}, expected 1")
    check_size([v.shape[0] for v in vecs], "rank-1 tensor", cap)
    out = vecs[0]
    for v in vecs[1:]:
        out = np.multiply.outer(out, v)
    return out


@dataclass(frozen=True)
class IndexPartition:
    """Split of the modes ``{1..N}`` into row modes ``I`` and column modes ``J``."""

    I: tuple[int, ...]
    J: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "I", tuple(int(i) for i in self.I))
        object.__setattr__(self, "J", tuple(int(j) for j in self.J))
        for name, part in (("I", self.I), ("J", self.J)):
            if any(x >= y for x, y in zip(part, part[1:])):
                raise ValidationError(f"{name} must be strictly ascending, got {part}")
        if set(self.I) & set(self.J):
            raise ValidationError(f"I and J overlap: {sorted(set(self.I) & set(self.J))}")

    @property
    def order(self) -> int:
        return len(self.I) + len(self.J)

    @classmethod
    def from_rows(cls, rows: Iterable[int], n: int) -> "IndexPartition":
        rows = tuple(sorted(set(int(r) for r in rows)))
        return cls(rows, tuple(k for k in range(1, n + 1) if k not in rows))

    def check_covers(self, n: int) -> None:
        if sorted(self.I + self.J) != list(range(1, n + 1)):
            raise ValidationError(
                f"partition I={self.I} J={self.J} does not cover modes 1..{n} exactly once"
            )


def matricize(a, p: IndexPartition) -> np.ndarray:
    """Arrange ``a`` as a matrix with row modes ``p.I`` and column modes ``p.J``.

    Entry ``a[d_1..d_N]`` lands in row ``sum_t d_{i_t} * prod_{t'>t} M_{i_t'}``
    (0-based), and likewise for columns, i.e. C-order flattening of each mode
    group taken in ascending mode order.
    """
    a = as_tensor(a)
    p.check_covers(a.ndim)
    rows = int(np.prod([a.shape[i - 1] for i in p.I], dtype=np.int64))
    cols = int(np.prod([a.shape[j - 1] for j in p.J], dtype=np.int64))
    axes = [i - 1 for i in p.I] + [j - 1 for j in p.J]
    return np.transpose(a, axes).reshape(rows, cols)


def unmatricize(m, p: IndexPartition, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`matricize` for a tensor of the given ``shape``."""
    shape = tuple(int(s) for s in shape)
    p.check_covers(len(shape))
    axes = [i - 1 for i in p.I] + [j - 1 for j in p.J]
    permuted = np.asarray(m, dtype=np.float64).reshape([shape[k] for k in axes])
    return np.transpose(permuted, np.argsort(axes))


def svd_spectrum(m) -> np.ndarray:
    """All ``min(rows, cols)`` singular values, non-increasing."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValidationError(f"svd_spectrum needs an order-2 tensor, got order {m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValidationError("matrix has non-finite entries")
    s = np.linalg.svd(m, compute_uv=False)
    return np.sort(s)[::-1]


def auto_tolerance(shape: Sequence[int]) -> float:
    """Relative rank threshold ``max(rows, cols) * eps``, the usual floating-point noise floor."""
    return max(int(d) for d in shape) * float(np.finfo(np.float64).eps)


def matrix_rank(m, tol: float | None = None) -> int:
    """Numerical rank of a matrix; ``tol=None`` uses :func:`auto_tolerance`."""
    m = np.asarray(m, dtype=np.float64)
    return numerical_rank(svd_spectrum(m), auto_tolerance(m.shape) if tol is None else tol)


def numerical_rank(s, tol: float = DEFAULT_RANK_TOL) -> int:
    """Number of singular values strictly above ``tol * s[0]``."""
    if tol <= 0:
        raise ValidationError("tol must be positive")
    s = np.asarray(s, dtype=np.float64)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))


@dataclass(frozen=True)
class EntanglementReport:
    entropy: float
    geometric: float
    schmidt: int
    tolerance_used: float
    normalized: bool = True

    def to_dict(self) -> dict:
        return {
            "entropy": self.entropy,
            "geometric": self.geometric,
            "schmidt": self.schmidt,
            "tolerance_used": self.tolerance_used,
            "normalized": self.normalized,
        }


def entanglement_measures(s, tol: float = DEFAULT_RANK_TOL) -> EntanglementReport:
    """Entanglement entropy (nats), geometric measure and Schmidt number of a spectrum.

    Values at or below ``tol * s[0]`` are numerical zeros for all three
    measures. The squared singular values are normalized to sum to one before
    the entropy is taken, and ``0 ln 0`` is treated as 0.
    """
    s = np.asarray(s, dtype=np.float64)
    if s.size == 0:
        raise ValidationError("empty spectrum")
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise ValidationError("singular values must be finite and non-negative")
    s = np.sort(s)[::-1]
    if s[0] == 0.0:
        raise ValidationError("all-zero spectrum does not describe a state")
    s = np.where(s > tol * s[0], s, 0.0) / s[0]
    sq = s * s
    total = float(sq.sum())
    probs = sq / total
    nz = probs[probs > 0]
    entropy = float(-(nz * np.log(nz)).sum())
    entropy = max(entropy, 0.0)
    geometric = math.sqrt(max(0.0, 1.0 - sq[0] / total))
    schmidt = numerical_rank(s, tol)
    return EntanglementReport(entropy, geometric, schmidt, tol)
