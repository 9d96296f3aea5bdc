import json

import numpy as np
import pytest

from sigsas_rc.experiments import (InputSpec, build_reduced_sigsas, composite_bound_terms,
                                   run_bound_experiment, strong_universality_demo)
from sigsas_rc.serialization import dumps
from sigsas_rc.volterra import builtin_filters, exponential_filter, fir_linear


@pytest.fixture(scope="module")
def small_report():
    return run_bound_experiment(exponential_filter(), 2, 2, 20, 0.1, 0.9, [0, 1],
                                   washout=100, horizon=300)


def test_input_spec_bounds():
    z = InputSpec(theta=0.5, envelope_rate=0.99).sample(500, 2.0, np.random.default_rng(0))
    assert np.abs(z).max() <= 1.0
    assert np.abs(z[:100]).max() < 0.99 ** 399  # old samples are damped by the envelope
    assert np.abs(z).sum() < np.inf
    with pytest.raises(ValueError):
        InputSpec(theta=1.0)
    with pytest.raises(ValueError):
        InputSpec(envelope_rate=0)


def test_report_structure_and_pass(small_report):
    doc = small_report.to_dict()
    assert doc["passed"] and doc["schema_version"] == 1
    assert [r["seed"] for r in doc["runs"]] == [0, 1]
    for run in doc["runs"]:
        assert "trajectories" not in run
        assert set(run["violations"]) == {"analytic_sqrt", "analytic_linear",
                                          "fitted_sqrt", "fitted_linear"}
        assert run["train_sse_fitted"] <= run["train_sse_analytic"]


def test_bound_decomposition_sums(small_report):
    for run in small_report.runs:
        tr = run["trajectories"]
        for variant in ("I_sqrt", "I_linear"):
            total = np.array(tr["w_term"]) + np.array(tr["taylor_term"]) + np.array(tr[variant])
            parts = [tr["w_term"], tr["taylor_term"], tr[variant]]
            assert np.all(np.abs(total - np.sum(parts, axis=0)) <= 1e-12 * total)
        assert len(tr["error_fitted"]) == 300


def test_bound_components_recompute_from_config(small_report):
    c = small_report.config
    f = exponential_filter(c["target"]["a"], c["target"]["c"], c["M"])
    for run in small_report.runs:
        tr = run["trajectories"]
        terms = composite_bound_terms(f, c["p"], c["l"], np.array(tr["sup_z"]), run["W_norm"],
                                      c["epsilon"], c["N"], c["N0"], c["k"], c["delta"],
                                      run["f_norm"])
        for name, values in terms.items():
            assert np.array_equal(values, tr[name])


def test_determinism_modulo_timing():
    args = (fir_linear(), 2, 2, 20, 0.1, 0.9, [3])
    a = run_bound_experiment(*args, washout=50, horizon=100).to_dict(True)
    b = run_bound_experiment(*args, washout=50, horizon=100).to_dict(True)
    a.pop("timing"), b.pop("timing")
    assert dumps(a) == dumps(b)


def test_doubling_l_tail_rate():
    f = exponential_filter(0.5, 1.0, 1.0)
    for l in (1, 2, 3):
        assert f.tail(2 * l) / f.tail(l) == pytest.approx(0.5 ** l)


def test_build_failure_carried_into_report():
    rep = run_bound_experiment(exponential_filter(), 2, 2, 20, 5.0, 0.9, [0], horizon=50)
    run = rep.runs[0]
    assert not rep.passed and run["stage"] == "build" and "reduce delta" in run["error"]


def test_build_reduced_sigsas_sign_and_hash():
    cfg, jl, res, _ = build_reduced_sigsas(2, 2, 20, 0.5, 0.1, 0.9, 4)
    assert res.sign == cfg.sign and res.origin == "jl"
    assert res.digest() == build_reduced_sigsas(2, 2, 20, 0.5, 0.1, 0.9, 4)[2].digest()


def test_universality_demo_shared_hash():
    targets = list(builtin_filters(1.0).values())
    doc = strong_universality_demo(targets, 2, 2, 20, 0.1, 0.9, seed=0, washout=100, horizon=300)
    assert doc["shared_reservoir"] and doc["passed"]
    assert {r["reservoir_sha256"] for r in doc["rows"]} == {doc["reservoir_sha256"]}
    json.dumps(doc)


def test_universality_identical_targets_identical_readouts():
    f = fir_linear()
    doc = strong_universality_demo([f, f], 2, 2, 20, 0.1, 0.9, seed=1, washout=50, horizon=200)
    assert doc["rows"][0]["readout"] == doc["rows"][1]["readout"]


def test_universality_demo_preconditions():
    with pytest.raises(ValueError):
        strong_universality_demo([fir_linear()], 2, 2, 20, 0.1, 0.9)
    with pytest.raises(ValueError):
        strong_universality_demo([fir_linear(M=1.0), fir_linear(M=0.5)], 2, 2, 20, 0.1, 0.9)


def test_fitted_generalization_reported():
    rep = run_bound_experiment(fir_linear(), 2, 2, 20, 0.1, 0.9, [2], washout=100, horizon=400)
    run = rep.runs[0]
    assert run["max_error_fitted"] <= run["max_error_analytic"]
