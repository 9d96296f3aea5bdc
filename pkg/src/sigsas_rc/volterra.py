"""Target filters given by explicit finite Volterra kernels.

Kernels are stored per degree j as a mapping from ordered lag tuples
(m_1, ..., m_j), each m in {-l, ..., 0}, to output vectors. Ordered
storage means a symmetric kernel contributes once per permutation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

from .readout import Readout
from .sigsas import SigSasConfig, monomial_diagonal


@dataclass(frozen=True)
class VolterraKernelSet:
    p: int
    l: int
    m_out: int
    kernels: Mapping[int, Mapping[tuple, np.ndarray]]

    def __post_init__(self):
        clean = {}
        for j, table in self.kernels.items():
            j = int(j)
            if not 1 <= j <= self.p:
                raise ValueError(f"degree {j} outside 1..{self.p}")
            entries = {}
            for lags, g in table.items():
                lags = tuple(int(m) for m in lags)
                if len(lags) != j:
                    raise ValueError(f"degree-{j} kernel needs {j} lags, got {lags}")
                if any(not -self.l <= m <= 0 for m in lags):
                    raise ValueError(f"lags {lags} outside {-self.l}..0")
                g = np.atleast_1d(np.asarray(g, dtype=float))
                if g.shape != (self.m_out,):
                    raise ValueError(f"coefficient for {lags} must have length {self.m_out}")
                entries[lags] = entries.get(lags, 0) + g
            if entries:
                clean[j] = entries
        object.__setattr__(self, "kernels", clean)

    @classmethod
    def zero(cls, p: int, l: int, m_out: int = 1) -> "VolterraKernelSet":
        return cls(p, l, m_out, {})

    def items(self):
        """Yield (j, lags, coefficient) records."""
        for j in sorted(self.kernels):
            for lags, g in self.kernels[j].items():
                yield j, lags, g

    def truncate(self, p: int, l: int) -> "VolterraKernelSet":
        """Drop terms of degree > p or with a lag older than -l."""
        kept = {}
        for j, lags, g in self.items():
            if j <= p and min(lags) >= -l:
                kept.setdefault(j, {})[lags] = g
        return VolterraKernelSet(p, l, self.m_out, kept)

    def majorant(self, M: float, lag_cut: Optional[int] = None) -> float:
        """sum ||g|| M^j, optionally only over terms reaching past lag ``-lag_cut``."""
        total = 0.0
        for j, lags, g in self.items():
            if lag_cut is None or min(lags) < -lag_cut:
                total += float(np.linalg.norm(g)) * M ** j
        return total


def eval_truncated(kernels: VolterraKernelSet, z_seq, t: int = -1) -> np.ndarray:
    """sum_j sum_{lags} g_j(lags) z_{t+m_1} ... z_{t+m_j} at a single time t."""
    z_seq = np.asarray(z_seq, dtype=float)
    t = t % len(z_seq) if len(z_seq) else t
    if len(z_seq) == 0 or t - kernels.l < 0:
        raise ValueError(f"need inputs back to lag {kernels.l} before t")
    out = np.zeros(kernels.m_out)
    for _, lags, g in kernels.items():
        out += g * math.prod(z_seq[t + m] for m in lags)
    return out


def eval_series(kernels: VolterraKernelSet, z_seq) -> np.ndarray:
    """Truncated series at every time, inputs before the start taken as zero."""
    z_seq = np.asarray(z_seq, dtype=float)
    T = len(z_seq)
    padded = np.concatenate([np.zeros(kernels.l), z_seq])
    out = np.zeros((T, kernels.m_out))
    for _, lags, g in kernels.items():
        mono = np.ones(T)
        for m in lags:
            mono = mono * padded[kernels.l + m: kernels.l + m + T]
        out += mono[:, None] * g[None, :]
    return out


def truncation_bound(M: float, L: float, p: int, sup_norm_z: float, wU_l: float) -> float:
    """w_l + L (1 - r)^-1 r^(p+1) with r = ||z||_inf / M."""
    if sup_norm_z >= M:
        raise ValueError(f"sup norm {sup_norm_z} must be strictly below M={M}")
    r = sup_norm_z / M
    return wU_l + L * r ** (p + 1) / (1.0 - r)


def monomial_coefficients(kernels: VolterraKernelSet, cfg: SigSasConfig) -> np.ndarray:
    """Coefficient of each zhat basis monomial in the truncated series, shape (m_out, N).

    The tuple (m_1..m_j) contributes to the multi-index whose slot s holds
    1 + (number of m equal to s - l - 1); slot 1 is the oldest input.
    """
    if kernels.p > cfg.p or kernels.l > cfg.l:
        raise ValueError(
            f"kernels of degree {kernels.p} / lag {kernels.l} exceed the state space "
            f"(p={cfg.p}, l={cfg.l})")
    base = cfg.p + 1
    C = np.zeros((kernels.m_out, cfg.N))
    for _, lags, g in kernels.items():
        exps = np.zeros(cfg.l + 1, dtype=int)
        for m in lags:
            exps[cfg.l + m] += 1
        flat = 0
        for e in exps:
            flat = flat * base + e
        C[:, flat] += g
    return C


def readout_from_kernels(kernels: VolterraKernelSet, cfg: SigSasConfig) -> Readout:
    """Readout W with W @ closed_form(window) equal to the truncated series."""
    C = monomial_coefficients(kernels, cfg)
    return Readout(C / monomial_diagonal(cfg)[None, :], "analytic_kernel")


@dataclass
class TargetFilter:
    """A causal, time-invariant target with known kernels and forgetting tail.

    ``full`` evaluates the complete filter on a finite sequence (zero input
    before the first sample); ``kernel_fn(p, l)`` gives the truncated kernels;
    ``tail_fn(l)`` is the forgetting sequence w_l; ``output_bound`` is the
    majorant L over inputs bounded by M.
    """

    name: str
    kind: str
    M: float
    params: dict
    full: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    kernel_fn: Callable[[int, int], VolterraKernelSet] = field(repr=False)
    tail_fn: Callable[[int], float] = field(repr=False)
    output_bound: float = 0.0
    m_out: int = 1

    def kernels(self, p: int, l: int) -> VolterraKernelSet:
        return self.kernel_fn(p, l)

    def tail(self, l: int) -> float:
        return self.tail_fn(l)

    def __call__(self, z_seq) -> np.ndarray:
        z_seq = np.asarray(z_seq, dtype=float)
        if z_seq.size and np.abs(z_seq).max() > self.M:
            raise ValueError(f"input exceeds the filter's bound M={self.M}")
        return self.full(z_seq)

    def bound(self, p: int, l: int, sup_norm_z: float) -> float:
        return truncation_bound(self.M, self.output_bound, p, sup_norm_z, self.tail(l))

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "M": self.M, **self.params}


def exponential_filter(a: float = 0.5, c: float = 1.0, M: float = 1.0,
                       name: str = "exponential") -> TargetFilter:
    """y_t = c * sum_{m <= 0} a^{-m} z_{t+m}."""
    if not 0 < a < 1:
        raise ValueError("decay a must lie in (0, 1)")

    def full(z):
        y = np.empty(len(z))
        acc = 0.0
        for t, zt in enumerate(z):
            acc = a * acc + c * zt
            y[t] = acc
        return y[:, None]

    def kernel_fn(p, l):
        return VolterraKernelSet(p, l, 1, {1: {(m,): c * a ** (-m) for m in range(-l, 1)}})

    def tail_fn(l):
        return c * a ** (l + 1) / (1 - a) * M

    return TargetFilter(name, "exponential_ma", M, {"a": a, "c": c}, full, kernel_fn,
                        tail_fn, output_bound=c * M / (1 - a))


def custom_kernels(kernels: VolterraKernelSet, M: float, name: str = "custom",
                   kind: str = "custom_kernels") -> TargetFilter:
    """Finite-memory filter defined by the given kernels themselves."""

    def full(z):
        return eval_series(kernels, z)

    def kernel_fn(p, l):
        return kernels.truncate(p, l)

    def tail_fn(l):
        return kernels.majorant(M, lag_cut=l)

    return TargetFilter(name, kind, M, {"p": kernels.p, "l": kernels.l}, full, kernel_fn,
                        tail_fn, output_bound=kernels.majorant(M), m_out=kernels.m_out)


def fir_linear(taps=(0.5, 0.3, 0.2), M: float = 1.0, name: str = "fir_linear") -> TargetFilter:
    """y_t = sum_s taps[s] z_{t-s}."""
    taps = np.asarray(taps, dtype=float)
    ks = VolterraKernelSet(1, len(taps) - 1, 1, {1: {(-s,): h for s, h in enumerate(taps)}})
    filt = custom_kernels(ks, M, name=name, kind="fir_linear")

    def full(z):
        return np.convolve(z, taps)[: len(z)][:, None]

    filt.full = full
    filt.params = {"taps": taps.tolist()}
    return filt


def fir_quadratic(M: float = 1.0, name: str = "fir_quadratic") -> TargetFilter:
    """y_t = 0.3 z_t + 0.2 z_{t-1} + 0.1 z_t z_{t-1} + 0.15 z_{t-2}^2 - 0.1 z_t^2.

    The cross term is stored symmetrically as two ordered tuples of 0.05.
    """
    ks = VolterraKernelSet(2, 2, 1, {
        1: {(0,): 0.3, (-1,): 0.2},
        2: {(-1, 0): 0.05, (0, -1): 0.05, (-2, -2): 0.15, (0, 0): -0.1},
    })
    filt = custom_kernels(ks, M, name=name, kind="quadratic_demo")

    def full(z):
        z1 = np.concatenate([[0.0], z])[: len(z)]
        z2 = np.concatenate([[0.0, 0.0], z])[: len(z)]
        return (0.3 * z + 0.2 * z1 + 0.1 * z * z1 + 0.15 * z2 ** 2 - 0.1 * z ** 2)[:, None]

    filt.full = full
    filt.params = {}
    return filt


def builtin_filters(M: float = 1.0) -> dict[str, TargetFilter]:
    """Catalog of desk-scale targets, keyed by name."""
    return {
        "exponential": exponential_filter(0.5, 1.0, M),
        "fir_linear": fir_linear(M=M),
        "fir_quadratic": fir_quadratic(M=M),
    }
