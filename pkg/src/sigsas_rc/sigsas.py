"""Signature state-affine system on T^(l+1)(R^(p+1)) with scalar inputs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .tensor import (
    TensorShape,
    TensorState,
    all_multi_indices,
    check_index_set,
    order_lower,
    tensor_with,
    vandermonde,
    zhat,
    zhat0,
)

DEFAULT_WASHOUT = 200


def m_tilde(M: float, p: int) -> float:
    """Power sum 1 + M + ... + M**p (no ratio form, so M = 1 is fine)."""
    return float(sum(M ** j for j in range(p + 1)))


@dataclass(frozen=True)
class SigSasConfig:
    """Parameters of a SigSAS state map.

    ``sign`` is the Rademacher factor multiplying the affine term; the
    deterministic system uses +1.
    """

    M: float
    l: int
    p: int
    lam: float
    I0: tuple = None
    sign: int = 1
    shape: TensorShape = field(init=False, repr=False)

    def __post_init__(self):
        if self.M <= 0:
            raise ValueError(f"input bound M must be positive, got {self.M}")
        if self.l < 1 or self.p < 1:
            raise ValueError("l and p must both be >= 1")
        I0 = tuple(range(1, self.p + 2)) if self.I0 is None else self.I0
        object.__setattr__(self, "I0", check_index_set(I0, self.p))
        object.__setattr__(self, "shape", TensorShape(self.p, self.l))
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        upper = min(1.0, 1.0 / self.m_tilde)
        if not 0 < self.lam < upper:
            raise ValueError(
                f"lambda must lie in (0, {upper:.6g}) for M={self.M}, p={self.p}; got {self.lam}")

    @property
    def m_tilde(self) -> float:
        return m_tilde(self.M, self.p)

    @property
    def contraction(self) -> float:
        return self.lam * self.m_tilde

    @property
    def state_bound(self) -> float:
        return self.m_tilde / (1.0 - self.contraction)

    @property
    def N(self) -> int:
        return self.shape.flat_dim

    @property
    def N0(self) -> int:
        return self.shape.lowered.flat_dim

    def to_dict(self) -> dict:
        return {"M": self.M, "l": self.l, "p": self.p, "lam": self.lam,
                "I0": list(self.I0), "sign": self.sign}


def _check_input(z: float, M: float, where: str = "") -> None:
    if abs(z) > M:
        raise ValueError(f"input {z!r}{where} exceeds the bound M={M}")


def _affine(z: float, cfg: SigSasConfig) -> np.ndarray:
    out = np.zeros(cfg.N)
    powers = vandermonde(z, cfg.p)
    idx = np.asarray(cfg.I0) - 1
    out[idx] = cfg.sign * powers[idx]
    return out


def step_array(x: np.ndarray, z: float, cfg: SigSasConfig) -> np.ndarray:
    """Array version of :func:`step` without wrapping; no input check."""
    out = cfg.lam * np.kron(x[: cfg.N0], vandermonde(z, cfg.p))
    idx = np.asarray(cfg.I0) - 1
    out[idx] += cfg.sign * vandermonde(z, cfg.p)[idx]
    return out


def step(x, z: float, cfg: SigSasConfig) -> TensorState:
    """One application of the state map: lam * lower(x) ⊗ (1, z, ..., z^p) + zhat0(z)."""
    _check_input(z, cfg.M)
    coeffs = x.coeffs if isinstance(x, TensorState) else np.asarray(x, dtype=float)
    return TensorState(cfg.shape, step_array(coeffs, z, cfg))


def run(z_seq: Sequence[float], cfg: SigSasConfig, x_init=None) -> np.ndarray:
    """Iterate the state map; row t is the state after consuming z_seq[t]."""
    z_seq = np.asarray(z_seq, dtype=float)
    for t, z in enumerate(z_seq):
        _check_input(z, cfg.M, f" at position {t}")
    if x_init is None:
        x = np.zeros(cfg.N)
    else:
        x = np.array(x_init.coeffs if isinstance(x_init, TensorState) else x_init, dtype=float)
    states = np.empty((len(z_seq), cfg.N))
    for t, z in enumerate(z_seq):
        x = step_array(x, z, cfg)
        states[t] = x
    return states


def closed_form(z_seq: Sequence[float], cfg: SigSasConfig, t: int = -1) -> TensorState:
    """Filter value at time t from the last l+1 inputs, summand by summand.

    Inputs before ``t - l`` do not enter; the filter only sees that window.
    """
    z_seq = np.asarray(z_seq, dtype=float)
    T = len(z_seq)
    t = t % T if T else t
    if T == 0 or t - cfg.l < 0:
        raise ValueError(f"need at least l+1={cfg.l + 1} inputs up to time t")
    window = z_seq[t - cfg.l: t + 1]
    lam, l = cfg.lam, cfg.l
    total = cfg.sign * lam ** (l + 1) / (1 - lam) * zhat(window, cfg.shape).coeffs
    for j in range(l + 1):
        term = zhat0(window[l - j], cfg.I0, cfg.sign, cfg.shape)
        for s in range(l - j + 1, l + 1):
            term = tensor_with(order_lower(term), vandermonde(window[s], cfg.p))
        total = total + lam ** j * term.coeffs
    return TensorState(cfg.shape, total)


def monomial_diagonal(cfg: SigSasConfig) -> np.ndarray:
    """Diagonal of A with closed_form(window) = A @ zhat(window).

    The lam^j summand lands on multi-indices whose first l-j slots are 1 and
    whose slot l-j+1 lies in I0; the leading term covers every index.
    """
    idx = all_multi_indices(cfg.shape)
    lam, l = cfg.lam, cfg.l
    diag = np.full(cfg.N, lam ** (l + 1) / (1 - lam))
    in_I0 = np.isin(idx, cfg.I0)
    for j in range(l + 1):
        lead_ones = np.all(idx[:, : l - j] == 1, axis=1)
        diag += lam ** j * (lead_ones & in_I0[:, l - j])
    return cfg.sign * diag


def monomial_matrix(cfg: SigSasConfig, check_samples: int = 8, seed: int = 0) -> np.ndarray:
    """Dense diagonal matrix A; verified against closed_form before returning."""
    diag = monomial_diagonal(cfg)
    rng = np.random.default_rng(seed)
    for _ in range(check_samples):
        window = rng.uniform(-cfg.M, cfg.M, cfg.l + 1)
        lhs = diag * zhat(window, cfg.shape).coeffs
        rhs = closed_form(window, cfg).coeffs
        scale = max(1.0, float(np.abs(rhs).max()))
        if np.abs(lhs - rhs).max() > 1e-12 * scale:
            raise RuntimeError("monomial matrix residual check failed")
    return np.diag(diag)


@dataclass
class EspReport:
    theoretical_bound: float
    max_factor: float
    factors: np.ndarray
    washout_steps: list
    predicted_washout: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_factor <= self.theoretical_bound * (1 + 1e-12)

    def to_dict(self) -> dict:
        return {"theoretical_bound": self.theoretical_bound,
                "max_factor": self.max_factor,
                "mean_factor": float(np.mean(self.factors)),
                "max_washout_steps": max(self.washout_steps),
                "predicted_washout": self.predicted_washout,
                "tol": self.tol,
                "passed": self.passed}


def esp_diagnostic(cfg: SigSasConfig, trials: int = 100, tol: float = 1e-10,
                   max_steps: int = 10_000, seed: Optional[int] = None) -> EspReport:
    """Empirical contraction factor and washout length against lam * M~.

    Each trial draws a random state pair and input; the per-step factor is
    ||F(x1,z) - F(x2,z)|| / ||x1 - x2||. The washout length is the number of
    steps until two states started at radius L agree to ``tol`` under a
    common random drive.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    L = cfg.state_bound
    factors = np.empty(trials)
    washouts = []
    for k in range(trials):
        x1, x2 = rng.normal(size=(2, cfg.N))
        z = rng.uniform(-cfg.M, cfg.M)
        gap = np.linalg.norm(x1 - x2)
        factors[k] = np.linalg.norm(step_array(x1, z, cfg) - step_array(x2, z, cfg)) / gap

        a, b = rng.normal(size=(2, cfg.N))
        a *= L / np.linalg.norm(a)
        b *= L / np.linalg.norm(b)
        n = 0
        while np.linalg.norm(a - b) > tol and n < max_steps:
            z = rng.uniform(-cfg.M, cfg.M)
            a, b = step_array(a, z, cfg), step_array(b, z, cfg)
            n += 1
        washouts.append(n)
    rho = cfg.contraction
    predicted = math.ceil(math.log(tol / (2 * L)) / math.log(rho))
    return EspReport(rho, float(factors.max()), factors, washouts, predicted, tol)
