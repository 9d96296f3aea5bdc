"""Linear readouts: least-squares fitting and transport through a JL map."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

PROVENANCES = ("analytic_kernel", "analytic_transport", "least_squares")


class DegenerateDesignError(ValueError):
    """Raised when an unregularized least-squares problem is singular."""


@dataclass(frozen=True)
class Readout:
    """Linear map W of shape (m_out, dim) applied to states."""

    matrix: np.ndarray
    provenance: str
    ridge: Optional[float] = None

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "matrix", np.atleast_2d(np.asarray(self.matrix, dtype=float)))

    @property
    def m_out(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __call__(self, states: np.ndarray) -> np.ndarray:
        """Apply to one state (dim,) or a trajectory (T, dim); returns (m_out,) or (T, m_out)."""
        states = np.asarray(states, dtype=float)
        return states @ self.matrix.T

    def op_norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))


def default_ridge(states: np.ndarray) -> float:
    """1e-8 times the mean diagonal of the Gram matrix."""
    states = np.asarray(states, dtype=float)
    return 1e-8 * float(np.sum(states ** 2)) / max(states.shape[1], 1)


def fit_readout(states, targets, ridge: Optional[float] = None) -> Readout:
    """Minimize sum ||W x_t - y_t||^2 + ridge ||W||_F^2 via the normal equations.

    ``ridge=None`` picks :func:`default_ridge`. With ``ridge=0`` a singular
    Gram matrix raises :class:`DegenerateDesignError` instead of being
    silently regularized.
    """
    X = np.asarray(states, dtype=float)
    Y = np.asarray(targets, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.ndim != 2 or len(X) != len(Y):
        raise ValueError(f"states {X.shape} and targets {Y.shape} do not match")
    if len(X) < X.shape[1]:
        raise ValueError(f"need at least {X.shape[1]} samples, got {len(X)}")
    if ridge is None:
        ridge = default_ridge(X)
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    G = X.T @ X + ridge * np.eye(X.shape[1])
    rhs = X.T @ Y
    try:
        W = scipy.linalg.solve(G, rhs, assume_a="sym")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise DegenerateDesignError(f"singular design matrix: {exc}") from exc
    if ridge == 0:
        cond = np.linalg.cond(G)
        if not np.isfinite(cond) or cond > 1e14:
            raise DegenerateDesignError(f"design matrix is degenerate (cond={cond:.3g})")
    return Readout(W.T, "least_squares", ridge=float(ridge))


def transport_readout(W: Readout, jl_map) -> Readout:
    """Reduced readout x -> W(S^T x) for a tensor-space readout W."""
    S = jl_map.matrix
    if W.dim != S.shape[1]:
        raise ValueError(f"readout acts on dimension {W.dim}, map has {S.shape[1]} columns")
    return Readout(W.matrix @ S.T, "analytic_transport")
