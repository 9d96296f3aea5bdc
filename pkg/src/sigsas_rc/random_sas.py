"""Randomly generated state-affine reservoirs of reduced dimension k.

A reservoir has state map

    x -> sum_{i=1}^{p+1} z^(i-1) A_i x + B (1, z, ..., z^p)^T

and is obtained either by drawing A_i, B from their limiting Gaussian laws
(``build_direct``) or by projecting a SigSAS through a JL map
(``reduce_from_jl``), where A_i = lam * S (lower(S^T .) ⊗ e_i) and
B = r S C^{I0}.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.optimize
import scipy.stats

from .jl import JlMap, sample_jl
from .sigsas import SigSasConfig, m_tilde
from .tensor import check_index_set, vandermonde


def lambda0(delta: float, k: int, N0: int, M: float, p: int) -> float:
    """(delta / (2 M~)) sqrt(k / N0)."""
    return delta / (2 * m_tilde(M, p)) * math.sqrt(k / N0)


def max_admissible_delta(k: int, N0: int, M: float, p: int,
                         f_norm: Optional[float] = None) -> float:
    """Supremum of delta keeping lambda0 below min{1/M~, 1/(M~ |||f|||^2), 1}."""
    mt = m_tilde(M, p)
    cap = min(1 / mt, 1.0)
    if f_norm is not None:
        cap = min(cap, 1 / (mt * f_norm ** 2))
    return cap * 2 * mt * math.sqrt(N0 / k)


@dataclass(frozen=True)
class RandomSasReservoir:
    k: int
    p: int
    l: int
    M: float
    I0: tuple
    delta: float
    lambda0: float
    A: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    seed: Optional[int] = None
    sign: int = 1
    origin: str = "direct"

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if A.shape != (self.p + 1, self.k, self.k):
            raise ValueError(f"A must have shape {(self.p + 1, self.k, self.k)}, got {A.shape}")
        if B.shape != (self.k, self.p + 1):
            raise ValueError(f"B must have shape {(self.k, self.p + 1)}, got {B.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "I0", check_index_set(self.I0, self.p))

    @property
    def N0(self) -> int:
        return (self.p + 1) ** self.l

    @property
    def N(self) -> int:
        return (self.p + 1) ** (self.l + 1)

    @property
    def m_tilde(self) -> float:
        return m_tilde(self.M, self.p)

    def poly_matrix(self, z: float) -> np.ndarray:
        return np.tensordot(vandermonde(z, self.p), self.A, axes=1)

    def norm_upper_bound(self) -> float:
        """sum_i M^(i-1) |||A_i|||, an upper bound for sup_z |||P(z)|||."""
        return float(sum(self.M ** i * np.linalg.norm(Ai, 2) for i, Ai in enumerate(self.A)))

    def digest(self) -> str:
        """SHA-256 over parameters and matrix bytes; identifies a reservoir."""
        h = hashlib.sha256()
        h.update(repr((self.k, self.p, self.l, self.M, self.I0, self.delta,
                       self.lambda0, self.seed, self.sign, self.origin)).encode())
        h.update(np.ascontiguousarray(self.A).tobytes())
        h.update(np.ascontiguousarray(self.B).tobytes())
        return h.hexdigest()


def build_direct(k: int, p: int, l: int, M: float, delta: float,
                 I0: Optional[Sequence[int]] = None, seed: Optional[int] = None) -> RandomSasReservoir:
    """Draw A_i ~ N(0, delta^2 / (4 k M~^2)) entrywise and B ~ N(0, 1/k) on the I0 columns."""
    if min(k, p, l) < 1:
        raise ValueError("k, p, l must all be >= 1")
    I0 = check_index_set(range(1, p + 2) if I0 is None else I0, p)
    N0 = (p + 1) ** l
    lam0 = lambda0(delta, k, N0, M, p)
    mt = m_tilde(M, p)
    if not (delta > 0 and lam0 < min(1 / mt, 1.0)):
        raise ValueError(
            f"delta={delta} violates the reservoir condition; "
            f"maximal admissible delta is {max_admissible_delta(k, N0, M, p):.6g} (exclusive)")
    rng = np.random.default_rng(seed)
    sd_A = delta / (2 * math.sqrt(k) * mt)
    A = rng.normal(0.0, sd_A, size=(p + 1, k, k))
    B = np.zeros((k, p + 1))
    cols = np.asarray(I0) - 1
    B[:, cols] = rng.normal(0.0, 1 / math.sqrt(k), size=(k, len(cols)))
    return RandomSasReservoir(k, p, l, M, I0, delta, lam0, A, B, seed, 1, "direct")


def step_reduced(x: np.ndarray, z: float, res: RandomSasReservoir) -> np.ndarray:
    if abs(z) > res.M:
        raise ValueError(f"input {z!r} exceeds the bound M={res.M}")
    v = vandermonde(z, res.p)
    return np.tensordot(v, res.A, axes=1) @ x + res.B @ v


def run_reduced(z_seq, res: RandomSasReservoir, x_init=None) -> np.ndarray:
    """Drive the reservoir; row t is the state after consuming z_seq[t]."""
    z_seq = np.asarray(z_seq, dtype=float)
    bad = np.flatnonzero(np.abs(z_seq) > res.M)
    if bad.size:
        raise ValueError(f"input at position {bad[0]} exceeds the bound M={res.M}")
    V = z_seq[:, None] ** np.arange(res.p + 1)
    drive = V @ res.B.T
    x = np.zeros(res.k) if x_init is None else np.asarray(x_init, dtype=float)
    out = np.empty((len(z_seq), res.k))
    for t in range(len(z_seq)):
        x = np.tensordot(V[t], res.A, axes=1) @ x + drive[t]
        out[t] = x
    return out


def _jl_blocks(S: np.ndarray, p: int, l: int) -> tuple[np.ndarray, np.ndarray]:
    """Unscaled (S[:, cols_i] @ S_1^T)_i for i = 1..p+1, plus S_1 = S[:, :N0]."""
    N0 = (p + 1) ** l
    S1 = S[:, :N0]
    blocks = np.stack([S[:, i + (p + 1) * np.arange(N0)] @ S1.T for i in range(p + 1)])
    return blocks, S1


def reduce_from_jl(cfg: SigSasConfig, jl_map: JlMap, sign: Optional[int] = None) -> RandomSasReservoir:
    """Exact matrix form of x -> f(F_SigSAS(f*(x), z)).

    (A_i)_{jm} = lam * sum_{n=1}^{N0} S_{j, i + (n-1)(p+1)} S_{m, n} and
    B_{jm} = sign * S_{jm} for m in I0, zero otherwise.
    """
    S = jl_map.matrix
    if S.shape[1] != cfg.N:
        raise ValueError(f"map has {S.shape[1]} columns, SigSAS dimension is {cfg.N}")
    sign = cfg.sign if sign is None else sign
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    k = S.shape[0]
    blocks, _ = _jl_blocks(S, cfg.p, cfg.l)
    A = cfg.lam * blocks
    B = np.zeros((k, cfg.p + 1))
    cols = np.asarray(cfg.I0) - 1
    B[:, cols] = sign * S[:, cols]
    delta = 2 * cfg.lam * cfg.m_tilde * math.sqrt(cfg.N0 / k)
    return RandomSasReservoir(k, cfg.p, cfg.l, cfg.M, cfg.I0, delta, cfg.lam, A, B,
                              jl_map.seed, sign, "jl")


def select_cells(k: int, p: int, n_cells: int, rng: np.random.Generator) -> list[tuple[int, int, int]]:
    """Cells (i, j, m), 0-based; every i >= 1 (second matrix onward) gets a diagonal cell."""
    cells = [(i, j, j) for i in range(1, p + 1) for j in map(int, rng.choice(k, 1))]
    seen = set(cells)
    while len(cells) < n_cells:
        cell = (int(rng.integers(p + 1)), int(rng.integers(k)), int(rng.integers(k)))
        if cell not in seen:
            seen.add(cell)
            cells.append(cell)
    return cells[:n_cells]


def law_audit(k: int, p: int, delta: float, n0_schedule: Sequence[int], trials: int = 100,
              M: float = 0.5, n_cells: int = 100, alpha: float = 0.01,
              corr_threshold: Optional[float] = None, seed: Optional[int] = None) -> dict:
    """Statistical audit of JL-constructed reservoirs against the limiting laws.

    For each N0 = (p+1)^l in the schedule, ``trials`` JL maps are drawn and
    reduced with lambda0 from delta. Per cell, the A-entries are KS-tested
    against N(0, delta^2 / (4 k M~^2)); A/B entries at matching positions are
    correlated; and the variance of the unscaled diagonal sums
    sum_n S_{j, i+(n-1)(p+1)} S_{j, n} (i >= 2) is compared with N0 / k^2.
    """
    if trials < 100:
        raise ValueError("law audit needs at least 100 trials")
    corr_threshold = 3 / math.sqrt(trials) if corr_threshold is None else corr_threshold
    mt = m_tilde(M, p)
    sd = delta / (2 * math.sqrt(k) * mt)
    ss = np.random.SeedSequence(seed)
    report = {"k": k, "p": p, "delta": delta, "M": M, "trials": trials, "alpha": alpha,
              "corr_threshold": corr_threshold, "target_sd": sd, "levels": []}
    for N0, child in zip(n0_schedule, ss.spawn(len(n0_schedule))):
        l = round(math.log(N0, p + 1))
        if (p + 1) ** l != N0 or l < 1:
            raise ValueError(f"N0={N0} is not a positive power of p+1={p + 1}")
        N = N0 * (p + 1)
        rng = np.random.default_rng(child)
        cells = select_cells(k, p, n_cells, rng)
        cfg = SigSasConfig(M=M, l=l, p=p, lam=lambda0(delta, k, N0, M, p))
        A_samples = np.empty((trials, len(cells)))
        B_samples = np.empty((trials, len(cells)))
        diag_sums = []
        outside_zero = True
        for t in range(trials):
            S = rng.normal(0.0, 1 / math.sqrt(k), size=(k, N))
            res = reduce_from_jl(cfg, JlMap(S), sign=int(rng.choice((-1, 1))))
            for c, (i, j, m) in enumerate(cells):
                A_samples[t, c] = res.A[i, j, m]
                B_samples[t, c] = res.B[j, m % (p + 1)]
            blocks = res.A / cfg.lam
            diag_sums.append(np.stack([np.diag(blocks[i]) for i in range(1, p + 1)]).ravel())
            out_cols = [i for i in range(p + 1) if i + 1 not in cfg.I0]
            if out_cols and np.any(res.B[:, out_cols] != 0):
                outside_zero = False
        pvals = np.array([scipy.stats.kstest(A_samples[:, c], "norm", args=(0.0, sd)).pvalue
                          for c in range(len(cells))])
        corrs = np.array([np.corrcoef(A_samples[:, c], B_samples[:, c])[0, 1]
                          for c in range(len(cells))])
        diag_sums = np.concatenate(diag_sums)
        var = float(np.var(diag_sums, ddof=1))
        report["levels"].append({
            "N0": N0, "l": l, "N": N, "lambda0": cfg.lam,
            "cells": [list(map(int, c)) for c in cells],
            "ks_pvalues": pvals.tolist(),
            "ks_accept_fraction": float(np.mean(pvals >= alpha)),
            "diag_cells_i_ge_2": sum(1 for (i, j, m) in cells if i >= 1 and j == m),
            "max_abs_corr": float(np.nanmax(np.abs(corrs))),
            "corr_fraction_within": float(np.mean(np.abs(corrs) <= corr_threshold)),
            "B_outside_I0_zero": outside_zero,
            "diag_sum_variance": var,
            "diag_sum_variance_target": N0 / k ** 2,
            "diag_sum_variance_rel_err": abs(var * k ** 2 / N0 - 1),
        })
    return report


def _sup_poly_norm(res: RandomSasReservoir, grid: int) -> tuple[float, float]:
    """Grid search for sup_{|z|<=M} |||P(z)|||, refined by golden section near the argmax."""
    zs = np.linspace(-res.M, res.M, grid)
    V = zs[:, None] ** np.arange(res.p + 1)
    P = np.einsum("gi,ijk->gjk", V, res.A)
    vals = np.linalg.svd(P, compute_uv=False)[:, 0]
    g = int(np.argmax(vals))
    lo, hi = zs[max(g - 1, 0)], zs[min(g + 1, grid - 1)]
    best, zbest = float(vals[g]), float(zs[g])
    if hi > lo:
        opt = scipy.optimize.minimize_scalar(
            lambda z: -np.linalg.norm(res.poly_matrix(z), 2), bounds=(lo, hi),
            method="bounded", options={"xatol": 1e-10})
        if -opt.fun > best:
            best, zbest = float(-opt.fun), float(opt.x)
    return best, zbest


def esp_certificate(k: int, p: int, M: float, delta: float, trials: int = 1000, l: int = 1,
                    I0: Optional[Sequence[int]] = None, grid: int = 1001,
                    seed: Optional[int] = None, always_grid: bool = False) -> dict:
    """Fraction of direct-law draws whose M_p = sup_z |||sum z^(i-1) A_i||| reaches 1.

    The triangle bound sum M^(i-1) |||A_i||| is computed for every draw; when
    it is already below 1 the draw is certified without the grid search
    (the grid value can only be smaller). ``always_grid`` forces the grid.
    """
    if trials < 100:
        raise ValueError("ESP certificate needs at least 100 trials")
    ss = np.random.SeedSequence(seed)
    failures = 0
    upper, grid_vals = [], []
    for child in ss.spawn(trials):
        res = build_direct(k, p, l, M, delta, I0=I0, seed=int(child.generate_state(1)[0]))
        ub = res.norm_upper_bound()
        upper.append(ub)
        if ub < 1 and not always_grid:
            continue
        mp, _ = _sup_poly_norm(res, grid)
        grid_vals.append(mp)
        if mp > ub * (1 + 1e-12):
            raise RuntimeError("grid estimate exceeded the triangle bound")
        failures += mp >= 1
    rate = failures / trials
    slack = 3 * math.sqrt(delta * (1 - delta) / trials)
    return {"k": k, "p": p, "M": M, "delta": delta, "trials": trials, "grid": grid,
            "empirical_failure_rate": rate, "threshold": delta + slack,
            "passed": rate <= delta + slack,
            "max_upper_bound": float(max(upper)), "mean_upper_bound": float(np.mean(upper)),
            "grid_evaluations": len(grid_vals),
            "max_grid_estimate": float(max(grid_vals)) if grid_vals else None}
