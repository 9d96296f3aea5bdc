"""Dense tensor states on T^order(R^(p+1)).

A tensor of order ``order`` over R^(p+1) is stored as a flat coefficient
vector of length (p+1)**order. Multi-indices are 1-based and ordered
lexicographically with the first slot varying slowest, so the flat layout
coincides with ``np.kron`` of the slot factors taken left to right.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class TensorShape:
    """Shape of a tensor space T^(l+1)(R^(p+1)).

    ``l`` is the memory lag, so the tensor order is ``l + 1``. ``l = 0`` is
    allowed so that lowering an order-2 tensor still has a shape.
    """

    p: int
    l: int

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.l < 0:
            raise ValueError(f"l must be >= 0, got {self.l}")
        if self.base_dim ** self.order > sys.maxsize:
            raise OverflowError(
                f"flat dimension {self.base_dim}**{self.order} exceeds the index range")

    @property
    def order(self) -> int:
        return self.l + 1

    @property
    def base_dim(self) -> int:
        return self.p + 1

    @property
    def flat_dim(self) -> int:
        return self.base_dim ** self.order

    @property
    def lowered(self) -> "TensorShape":
        if self.l == 0:
            raise ValueError("cannot lower an order-1 tensor shape")
        return TensorShape(self.p, self.l - 1)


@dataclass(frozen=True)
class TensorState:
    """Coefficients of a tensor in the canonical lexicographic basis."""

    shape: TensorShape
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float).reshape(-1)
        if coeffs.size != self.shape.flat_dim:
            raise ValueError(
                f"expected {self.shape.flat_dim} coefficients, got {coeffs.size}")
        coeffs = coeffs.copy()
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def zeros(cls, shape: TensorShape) -> "TensorState":
        return cls(shape, np.zeros(shape.flat_dim))

    @classmethod
    def basis(cls, multi_index: Sequence[int], shape: TensorShape) -> "TensorState":
        v = np.zeros(shape.flat_dim)
        v[lex_index(multi_index, shape)] = 1.0
        return cls(shape, v)

    def __getitem__(self, multi_index: Sequence[int]) -> float:
        return float(self.coeffs[lex_index(multi_index, self.shape)])

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


def lex_index(multi_index: Sequence[int], shape: TensorShape) -> int:
    """Flat position of a 1-based multi-index; the first slot is most significant."""
    multi_index = tuple(int(i) for i in multi_index)
    if len(multi_index) != shape.order:
        raise ValueError(f"multi-index must have {shape.order} entries, got {len(multi_index)}")
    flat = 0
    for i in multi_index:
        if not 1 <= i <= shape.base_dim:
            raise ValueError(f"index component {i} outside 1..{shape.base_dim}")
        flat = flat * shape.base_dim + (i - 1)
    return flat


def multi_index_of(flat: int, shape: TensorShape) -> tuple[int, ...]:
    """Inverse of :func:`lex_index`."""
    if not 0 <= flat < shape.flat_dim:
        raise ValueError(f"flat index {flat} outside 0..{shape.flat_dim - 1}")
    digits = []
    for _ in range(shape.order):
        flat, r = divmod(flat, shape.base_dim)
        digits.append(r + 1)
    return tuple(reversed(digits))


def all_multi_indices(shape: TensorShape) -> np.ndarray:
    """Array of shape (flat_dim, order) listing multi-indices in flat order."""
    grids = np.indices((shape.base_dim,) * shape.order).reshape(shape.order, -1).T
    return grids + 1


def order_lower(v: TensorState) -> TensorState:
    """Keep the slice with first index 1 and drop that slot."""
    low = v.shape.lowered
    return TensorState(low, v.coeffs[: low.flat_dim])


def tensor_with(v: TensorState, w: np.ndarray) -> TensorState:
    """v ⊗ w where w is a vector in R^(p+1) placed in a new last slot."""
    w = np.asarray(w, dtype=float)
    if w.shape != (v.shape.base_dim,):
        raise ValueError(f"factor must have length {v.shape.base_dim}")
    return TensorState(TensorShape(v.shape.p, v.shape.l + 1), np.kron(v.coeffs, w))


def vandermonde(z: float, p: int) -> np.ndarray:
    """(1, z, ..., z**p)."""
    return float(z) ** np.arange(p + 1)


def zhat(window: Iterable[float], shape: TensorShape) -> TensorState:
    """Monomial tensor of a window (z_{t-l}, ..., z_t), oldest input first."""
    window = [float(z) for z in window]
    if len(window) != shape.order:
        raise ValueError(f"window must have {shape.order} entries, got {len(window)}")
    out = np.ones(1)
    for z in window:
        out = np.kron(out, vandermonde(z, shape.p))
    return TensorState(shape, out)


def check_index_set(I0: Iterable[int], p: int) -> tuple[int, ...]:
    I0 = tuple(sorted({int(i) for i in I0}))
    if 1 not in I0:
        raise ValueError("index set must contain 1")
    if len(I0) < 2:
        raise ValueError("index set must have at least two elements")
    if I0[-1] > p + 1 or I0[0] < 1:
        raise ValueError(f"index set must lie in 1..{p + 1}")
    return I0


def zhat0(z: float, I0: Iterable[int], sign: int, shape: TensorShape) -> TensorState:
    """sign * sum_{i in I0} z^(i-1) e_1 ⊗ ... ⊗ e_1 ⊗ e_i."""
    I0 = check_index_set(I0, shape.p)
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    v = np.zeros(shape.flat_dim)
    powers = vandermonde(z, shape.p)
    for i in I0:
        # (1, ..., 1, i) sits at flat position i - 1
        v[i - 1] = sign * powers[i - 1]
    return TensorState(shape, v)


def norms(v) -> dict[str, float]:
    """Euclidean and l1 norms of a tensor state or plain coefficient vector."""
    coeffs = v.coeffs if isinstance(v, TensorState) else np.asarray(v, dtype=float)
    return {"euclidean": float(np.linalg.norm(coeffs)),
            "one_norm": float(np.abs(coeffs).sum())}


def lowering_matrix(shape: TensorShape) -> np.ndarray:
    """Matrix (I_{N0} | 0) of the order-lowering map on ``shape``."""
    n0 = shape.lowered.flat_dim
    return np.eye(n0, shape.flat_dim)


def vec_len_to_shape(n: int, p: int) -> TensorShape:
    """Recover the tensor shape whose flat dimension is ``n``."""
    order = round(math.log(n, p + 1))
    if (p + 1) ** order != n:
        raise ValueError(f"{n} is not a power of {p + 1}")
    return TensorShape(p, order - 1)
