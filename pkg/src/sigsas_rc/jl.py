"""Gaussian Johnson-Lindenstrauss maps and projection of contractive dynamics.

The point set Q used for distance checks defaults to the signed canonical
basis {±e_1, ..., ±e_N}. For that set M_Q = 1, the Q-norm is the l1 norm,
and C_Q <= sqrt(N).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
import scipy.optimize

log = logging.getLogger(__name__)

POWER_ITERATION_THRESHOLD = 10_000


def min_dimension(n: int, epsilon: float) -> int:
    """Smallest integer k with k >= 24 log(n) / (3 eps^2 - 2 eps^3)."""
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if n < 2:
        raise ValueError("need at least two points")
    return math.ceil(24 * math.log(n) / (3 * epsilon ** 2 - 2 * epsilon ** 3))


def op_norm(S: np.ndarray, rtol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Spectral norm; SVD for moderate sizes, power iteration on S S^T beyond."""
    if max(S.shape) <= POWER_ITERATION_THRESHOLD:
        return float(np.linalg.norm(S, 2))
    rng = np.random.default_rng(0)
    v = rng.normal(size=S.shape[0])
    v /= np.linalg.norm(v)
    sigma2 = 0.0
    for _ in range(max_iter):
        w = S @ (S.T @ v)
        new = float(np.linalg.norm(w))
        v = w / new
        if abs(new - sigma2) <= rtol * new:
            sigma2 = new
            break
        sigma2 = new
    return math.sqrt(sigma2)


@dataclass(frozen=True)
class JlMap:
    """Linear map f(v) = S v with S of shape (k, N); the adjoint is S^T."""

    matrix: np.ndarray = field(repr=False)
    seed: Optional[int] = None
    epsilon: Optional[float] = None

    @property
    def k(self) -> int:
        return self.matrix.shape[0]

    @property
    def N(self) -> int:
        return self.matrix.shape[1]

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(v) @ self.matrix.T

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y) @ self.matrix

    def project(self, v: np.ndarray) -> np.ndarray:
        """f* f v."""
        return self.adjoint(self(v))

    @cached_property
    def norm(self) -> float:
        return op_norm(self.matrix)

    def is_surjective(self, rel_tol: float = 1e-10) -> bool:
        if self.k > self.N:
            return False
        # singular values squared, from the small k x k Gram matrix
        ev = np.linalg.eigvalsh(self.matrix @ self.matrix.T)
        return bool(ev[0] > (rel_tol ** 2) * ev[-1])

    def with_epsilon(self, epsilon: float) -> "JlMap":
        return JlMap(self.matrix, self.seed, epsilon)


def sample_jl(N: int, k: int, seed: Optional[int] = None,
              epsilon: Optional[float] = None) -> JlMap:
    """k x N matrix with i.i.d. N(0, 1/k) entries."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > N:
        raise ValueError(f"k={k} exceeds N={N}; only reductions are supported")
    rng = np.random.default_rng(seed)
    S = rng.normal(0.0, 1.0 / math.sqrt(k), size=(k, N))
    return JlMap(S, seed, epsilon)


@dataclass
class DistanceReport:
    passed: bool
    worst_ratio: float
    min_ratio: float
    max_ratio: float
    epsilon: float
    n_points: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _canonical_ratio_range(S: np.ndarray) -> tuple[float, float]:
    """Extreme ratios ||S(a-b)||^2 / ||a-b||^2 over pairs of ±e_i."""
    G = S.T @ S
    d = np.diag(G)
    lo, hi = float(d.min()), float(d.max())  # pairs (e_i, -e_i)
    if len(d) > 1:
        mean = (d[:, None] + d[None, :]) / 2
        mask = ~np.eye(len(d), dtype=bool)
        for r in ((mean - G)[mask], (mean + G)[mask]):
            lo, hi = min(lo, float(r.min())), max(hi, float(r.max()))
    return lo, hi


def check_distances(jl_map: JlMap, Q: Optional[np.ndarray] = None,
                    epsilon: Optional[float] = None) -> DistanceReport:
    """Check (1-eps)||a-b||^2 <= ||f(a)-f(b)||^2 <= (1+eps)||a-b||^2 on all pairs of Q.

    ``Q`` is an (n, N) array of points; ``None`` means the signed canonical
    basis, handled through the Gram matrix S^T S. ``worst_ratio`` is the
    largest |ratio - 1| observed.
    """
    eps = jl_map.epsilon if epsilon is None else epsilon
    if eps is None:
        raise ValueError("epsilon must be given either here or on the map")
    if Q is None:
        lo, hi = _canonical_ratio_range(jl_map.matrix)
        n = 2 * jl_map.N
    else:
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        n = len(Q)
        if n < 2:
            return DistanceReport(True, 0.0, 1.0, 1.0, eps, n)
        P = jl_map(Q)
        i, j = np.triu_indices(n, k=1)
        d_orig = np.sum((Q[i] - Q[j]) ** 2, axis=1)
        d_proj = np.sum((P[i] - P[j]) ** 2, axis=1)
        keep = d_orig > 0
        ratios = d_proj[keep] / d_orig[keep]
        lo, hi = (float(ratios.min()), float(ratios.max())) if ratios.size else (1.0, 1.0)
    worst = max(1 - lo, hi - 1)
    passed = (lo >= 1 - eps) and (hi <= 1 + eps)
    return DistanceReport(bool(passed), worst, lo, hi, eps, n)


def sample_passing_jl(N: int, k: int, epsilon: float, seed: Optional[int] = None,
                      max_attempts: int = 1000) -> tuple[JlMap, int]:
    """Draw maps until one passes the canonical distance check and has full rank.

    Returns the map and the number of attempts. Attempt seeds are derived
    from ``seed`` so the result is reproducible from it alone.
    """
    ss = np.random.SeedSequence(seed)
    for attempt, child in enumerate(ss.spawn(max_attempts), start=1):
        child_seed = int(child.generate_state(1)[0])
        candidate = sample_jl(N, k, child_seed, epsilon)
        if check_distances(candidate).passed and candidate.is_surjective():
            log.debug("JL map accepted after %d attempts", attempt)
            return candidate, attempt
    raise RuntimeError(f"no passing JL map in {max_attempts} attempts (N={N}, k={k}, eps={epsilon})")


def q_norm(v: np.ndarray, Q: Optional[np.ndarray] = None) -> float:
    """Atomic norm inf{sum |c_j| : sum c_j q_j = v}.

    With ``Q=None`` (signed canonical basis) this is the l1 norm. A general
    finite Q is solved as a linear program; v outside span(Q) gives inf.
    """
    v = np.asarray(v, dtype=float)
    if Q is None:
        return float(np.abs(v).sum())
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    n = len(Q)
    # variables (c, s) with -s <= c <= s, minimize sum s
    cost = np.concatenate([np.zeros(n), np.ones(n)])
    A_eq = np.hstack([Q.T, np.zeros((Q.shape[1], n))])
    eye = np.eye(n)
    A_ub = np.block([[eye, -eye], [-eye, -eye]])
    res = scipy.optimize.linprog(cost, A_ub=A_ub, b_ub=np.zeros(2 * n), A_eq=A_eq, b_eq=v,
                                 bounds=[(None, None)] * n + [(0, None)] * n, method="highs")
    if res.status == 2:
        return math.inf
    if not res.success:
        raise RuntimeError(f"q-norm LP failed: {res.message}")
    return float(res.fun)


def quasi_projection_gap(jl_map: JlMap, v: np.ndarray) -> tuple[float, Optional[float]]:
    """||(I - f*f) v|| and, when the map carries epsilon, the bound eps sqrt(N) ||v||_1."""
    v = np.asarray(v, dtype=float)
    gap = float(np.linalg.norm(v - jl_map.project(v)))
    if jl_map.epsilon is None:
        return gap, None
    return gap, jl_map.epsilon * math.sqrt(jl_map.N) * float(np.abs(v).sum())


StateMap = Callable[[np.ndarray, float], np.ndarray]


@dataclass
class ProjectedSystem:
    """Projection of a rho-contractive state map through a JL map.

    ``step`` is the reduced map on R^k, x -> f(F(f*(x), z)); ``lifted_step``
    is its copy on V_k = f*(R^k), x -> f* f F(x, z).
    """

    base_step: StateMap = field(repr=False)
    jl_map: JlMap = field(repr=False)
    rho: float
    offset_bound: Optional[float] = None

    @property
    def k(self) -> int:
        return self.jl_map.k

    @property
    def f_norm(self) -> float:
        return self.jl_map.norm

    @property
    def contraction(self) -> float:
        return self.rho * self.f_norm ** 2

    @property
    def reduced_radius(self) -> Optional[float]:
        """C_f = |||f||| c0 / (1 - rho |||f|||^2) when ||F(0, z)|| <= c0."""
        if self.offset_bound is None:
            return None
        return self.f_norm * self.offset_bound / (1 - self.contraction)

    def step(self, x: np.ndarray, z: float) -> np.ndarray:
        return self.jl_map(self.base_step(self.jl_map.adjoint(x), z))

    def lifted_step(self, x: np.ndarray, z: float) -> np.ndarray:
        return self.jl_map.project(self.base_step(x, z))

    def run(self, z_seq, x_init=None) -> np.ndarray:
        x = np.zeros(self.k) if x_init is None else np.asarray(x_init, dtype=float)
        out = np.empty((len(z_seq), self.k))
        for t, z in enumerate(z_seq):
            x = self.step(x, z)
            out[t] = x
        return out

    def run_lifted(self, z_seq, x_init=None) -> np.ndarray:
        x = np.zeros(self.jl_map.N) if x_init is None else np.asarray(x_init, dtype=float)
        out = np.empty((len(z_seq), self.jl_map.N))
        for t, z in enumerate(z_seq):
            x = self.lifted_step(x, z)
            out[t] = x
        return out


def project_dynamics(base_step: StateMap, jl_map: JlMap, rho: float,
                     offset_bound: Optional[float] = None) -> ProjectedSystem:
    """Build the reduced system; refuses unless rho |||f|||^2 < 1."""
    if not 0 < rho < 1:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    f_norm = jl_map.norm
    if rho * f_norm ** 2 >= 1:
        raise ValueError(
            f"projected contraction rho*|||f|||^2 = {rho * f_norm ** 2:.6g} >= 1 "
            f"(rho={rho}, |||f|||={f_norm:.6g}); need rho < {1 / f_norm ** 2:.6g}")
    return ProjectedSystem(base_step, jl_map, rho, offset_bound)


BOUND_VARIANTS = ("iv_sqrt", "iv_linear", "v_sqrt", "v_linear")


def projection_error_bounds(C: float, epsilon: float, rho: float, f_norm: float, N: int,
                            variant: str, M_Q: float = 1.0,
                            C_Q: Optional[float] = None) -> float:
    """Uniform bound on the gap between a filter and its JL-projected version.

    ``iv_*`` use the general constants (M_Q, C_Q; C_Q defaults to sqrt(N)).
    ``v_*`` take rho = 1/(R |||f|||^2), so R |||f|||^2 / (R |||f|||^2 - 1)
    is written as 1 / (1 - rho).
    """
    if not 0 <= rho < 1:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    if C_Q is None:
        C_Q = math.sqrt(N)
    if variant == "iv_sqrt":
        return math.sqrt(epsilon) * C * M_Q * C_Q * math.sqrt(1 + f_norm ** 2) / (1 - rho)
    if variant == "iv_linear":
        return epsilon * C * M_Q ** 2 * C_Q ** 2 / (1 - rho)
    if variant == "v_sqrt":
        return math.sqrt(epsilon) * N ** 0.75 * C * math.sqrt(1 + f_norm ** 2) / (1 - rho)
    if variant == "v_linear":
        return epsilon * N * C / (1 - rho)
    raise ValueError(f"unknown variant {variant!r}; expected one of {BOUND_VARIANTS}")
