"""Invariant suites. Each returns a JSON-ready dict with a boolean ``passed``."""

from __future__ import annotations

import math
import time
from functools import partial
from typing import Optional

import numpy as np

from .jl import (check_distances, min_dimension, project_dynamics, projection_error_bounds,
                 quasi_projection_gap, sample_jl, sample_passing_jl)
from .random_sas import esp_certificate, law_audit, reduce_from_jl, step_reduced
from .sigsas import SigSasConfig, esp_diagnostic, m_tilde, step_array

SCHEMA_VERSION = 1


def _wrap(suite: str, params: dict, body: dict, t0: float) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": "verify", "suite": suite,
            "params": params, "passed": bool(body.pop("passed")), "result": body,
            "timing": {"seconds": time.perf_counter() - t0}}


def contraction_suite(M=0.5, p=2, l=3, lam=0.25, pairs=1000, seed=None, **_) -> dict:
    """Per-step factor over random state pairs must not exceed lam * M~."""
    t0 = time.perf_counter()
    cfg = SigSasConfig(M=M, l=l, p=p, lam=lam)
    rng = np.random.default_rng(seed)
    x1, x2 = rng.normal(size=(2, pairs, cfg.N))
    zs = rng.uniform(-M, M, pairs)
    factors = np.array([np.linalg.norm(step_array(a, z, cfg) - step_array(b, z, cfg))
                        / np.linalg.norm(a - b) for a, b, z in zip(x1, x2, zs)])
    bound = cfg.contraction
    body = {"bound": bound, "max_factor": float(factors.max()),
            "mean_factor": float(factors.mean()),
            "passed": bool(factors.max() <= bound * (1 + 1e-12))}
    return _wrap("contraction", {"M": M, "p": p, "l": l, "lam": lam, "pairs": pairs,
                                 "seed": seed}, body, t0)


def esp_suite(M=0.5, p=2, l=3, lam=0.25, trials=100, tol=1e-10, max_washout=60,
              seed=None, **_) -> dict:
    """Two states at radius L under a shared drive must agree to ``tol`` within ``max_washout``."""
    t0 = time.perf_counter()
    cfg = SigSasConfig(M=M, l=l, p=p, lam=lam)
    rep = esp_diagnostic(cfg, trials=trials, tol=tol, max_steps=max_washout + 1, seed=seed)
    body = rep.to_dict()
    body["max_washout"] = max_washout
    body["passed"] = bool(rep.passed and max(rep.washout_steps) <= max_washout)
    return _wrap("esp", {"M": M, "p": p, "l": l, "lam": lam, "trials": trials, "tol": tol,
                         "seed": seed}, body, t0)


def jl_suite(N=1024, k=333, epsilon=0.5, maps=20, vectors=100, seed=None, **_) -> dict:
    """Resample to passing maps, then audit ||(I - f*f) v|| <= eps sqrt(N) ||v||_1."""
    t0 = time.perf_counter()
    attempts, violations, worst = [], 0, 0.0
    for child in np.random.SeedSequence(seed).spawn(maps):
        jl_map, n = sample_passing_jl(N, k, epsilon, int(child.generate_state(1)[0]))
        attempts.append(n)
        V = np.random.default_rng(child.spawn(1)[0]).normal(size=(vectors, N))
        for v in V:
            gap, bound = quasi_projection_gap(jl_map, v)
            violations += gap > bound
            worst = max(worst, gap / bound)
    body = {"min_dimension_eq": min_dimension(N, epsilon), "attempts": attempts,
            "max_attempts": max(attempts), "violations": int(violations),
            "worst_gap_over_bound": worst, "passed": violations == 0}
    return _wrap("jl-distances", {"N": N, "k": k, "epsilon": epsilon, "maps": maps,
                                  "vectors": vectors, "seed": seed}, body, t0)


def projection_suite(M=0.5, p=2, l=3, epsilon=0.9, R=2.0, k=None, steps=5000, seeds=(0,),
                     **_) -> dict:
    """Full vs JL-lifted SigSAS gap against eps N C R|||f|||^2 / (R|||f|||^2 - 1).

    For each seed a passing map is drawn and lam = 1 / (R M~ |||f|||^2), so
    the projected contraction is 1/R. ``k=None`` takes the JL minimum
    clamped to N.
    """
    t0 = time.perf_counter()
    N = (p + 1) ** (l + 1)
    mt = m_tilde(M, p)
    k = min(min_dimension(N, epsilon), N) if k is None else k
    rows, ok = [], True
    for seed in seeds:
        map_seed, input_seed = np.random.SeedSequence(seed).spawn(2)
        jl_map, attempts = sample_passing_jl(N, k, epsilon, int(map_seed.generate_state(1)[0]))
        lam = 1 / (R * mt * jl_map.norm ** 2)
        cfg = SigSasConfig(M=M, l=l, p=p, lam=lam)
        system = project_dynamics(partial(step_array, cfg=cfg), jl_map, cfg.contraction)
        z = np.random.default_rng(input_seed).uniform(-M, M, steps)
        x_full = np.zeros(N)
        x_lift = np.zeros(N)
        gaps = np.empty(steps)
        for t, zt in enumerate(z):
            x_full = step_array(x_full, zt, cfg)
            x_lift = system.lifted_step(x_lift, zt)
            gaps[t] = np.linalg.norm(x_full - x_lift)
        bound = projection_error_bounds(cfg.state_bound, epsilon, cfg.contraction,
                                        jl_map.norm, N, "v_linear")
        viol = int(np.sum(gaps > bound))
        ok &= viol == 0
        rows.append({"seed": seed, "attempts": attempts, "f_norm": jl_map.norm, "lam": lam,
                     "max_gap": float(gaps.max()), "bound": bound, "violations": viol})
    body = {"k": k, "N": N, "min_dimension_eq": min_dimension(N, epsilon), "rows": rows,
            "passed": bool(ok)}
    return _wrap("projection", {"M": M, "p": p, "l": l, "epsilon": epsilon, "R": R,
                                "steps": steps, "seeds": list(seeds)}, body, t0)


def reduction_suite(M=0.5, p=2, l=2, k=10, lam=0.3, points=100, seeds=(0,), **_) -> dict:
    """step_reduced of reduce_from_jl against f . SigSAS step . f* on random points."""
    t0 = time.perf_counter()
    worst = 0.0
    for seed in seeds:
        rng = np.random.default_rng(seed)
        sign = int(rng.choice((-1, 1)))
        cfg = SigSasConfig(M=M, l=l, p=p, lam=lam, sign=sign)
        jl_map = sample_jl(cfg.N, k, int(rng.integers(2 ** 32)))
        res = reduce_from_jl(cfg, jl_map)
        for _ in range(points):
            x = rng.normal(size=k)
            z = rng.uniform(-M, M)
            ref = jl_map(step_array(jl_map.adjoint(x), z, cfg))
            got = step_reduced(x, z, res)
            worst = max(worst, float(np.max(np.abs(got - ref)) / max(1.0, np.max(np.abs(ref)))))
    body = {"max_rel_error": worst, "tol": 1e-10, "passed": worst <= 1e-10}
    return _wrap("reduction", {"M": M, "p": p, "l": l, "k": k, "lam": lam, "points": points,
                               "seeds": list(seeds)}, body, t0)


def law_suite(k=20, p=1, delta=0.1, n0=(4, 16, 64), trials=100, M=0.5, n_cells=100,
              alpha=0.01, corr_threshold: Optional[float] = None, accept=0.95, var_tol=0.05,
              seed=None, **_) -> dict:
    """KS acceptance, B support and diagonal-sum variance at the largest N0 of the schedule."""
    t0 = time.perf_counter()
    rep = law_audit(k, p, delta, list(n0), trials=trials, M=M, n_cells=n_cells, alpha=alpha,
                    corr_threshold=corr_threshold, seed=seed)
    last = rep["levels"][-1]
    passed = (last["ks_accept_fraction"] >= accept and last["B_outside_I0_zero"]
              and last["diag_sum_variance_rel_err"] <= var_tol)
    rep["passed"] = bool(passed)
    rep["accept_threshold"] = accept
    rep["variance_tolerance"] = var_tol
    return _wrap("law-audit", {"k": k, "p": p, "delta": delta, "n0": list(n0), "trials": trials,
                               "M": M, "seed": seed}, rep, t0)


def certificate_suite(k=50, p=3, M=0.5, delta=0.05, trials=1000, grid=1001, seed=None,
                      **_) -> dict:
    t0 = time.perf_counter()
    rep = esp_certificate(k, p, M, delta, trials=trials, grid=grid, seed=seed)
    return _wrap("esp-certificate", {"k": k, "p": p, "M": M, "delta": delta, "trials": trials,
                                     "grid": grid, "seed": seed}, rep, t0)


SUITES = {
    "contraction": contraction_suite,
    "esp": esp_suite,
    "jl-distances": jl_suite,
    "law-audit": law_suite,
    "esp-certificate": certificate_suite,
    "projection": projection_suite,
    "reduction": reduction_suite,
}
