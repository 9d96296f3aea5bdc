import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sigsas_rc.sigsas import SigSasConfig, closed_form, monomial_diagonal
from sigsas_rc.tensor import lex_index
from sigsas_rc.volterra import (VolterraKernelSet, builtin_filters, custom_kernels,
                                eval_series, eval_truncated, exponential_filter, fir_quadratic,
                                monomial_coefficients, readout_from_kernels, truncation_bound)


def linear_kernels():
    return VolterraKernelSet(1, 1, 1, {1: {(0,): 0.3, (-1,): 0.2}})


def random_kernels(p, l, m_out, rng, n_terms=6):
    table = {}
    for _ in range(n_terms):
        j = int(rng.integers(1, p + 1))
        lags = tuple(int(m) for m in rng.integers(-l, 1, size=j))
        table.setdefault(j, {})[lags] = rng.normal(size=m_out)
    return VolterraKernelSet(p, l, m_out, table)


def test_kernel_set_validation():
    with pytest.raises(ValueError):
        VolterraKernelSet(1, 1, 1, {2: {(0, 0): 1.0}})
    with pytest.raises(ValueError):
        VolterraKernelSet(2, 1, 1, {1: {(-2,): 1.0}})
    with pytest.raises(ValueError):
        VolterraKernelSet(2, 1, 1, {2: {(0,): 1.0}})
    with pytest.raises(ValueError):
        VolterraKernelSet(1, 1, 2, {1: {(0,): 1.0}})


def test_eval_truncated_examples():
    assert eval_truncated(linear_kernels(), [1, 1])[0] == pytest.approx(0.5)
    assert eval_truncated(VolterraKernelSet.zero(2, 2), [3, -1, 2])[0] == 0
    quad = VolterraKernelSet(2, 1, 1, {2: {(-1, 0): 0.05, (0, -1): 0.05}})
    assert eval_truncated(quad, [2, 3])[0] == pytest.approx(0.6)


def test_eval_truncated_needs_history():
    with pytest.raises(ValueError):
        eval_truncated(VolterraKernelSet(1, 2, 1, {1: {(-2,): 1.0}}), [1.0, 2.0])


def test_eval_series_matches_pointwise():
    ks = random_kernels(3, 2, 2, np.random.default_rng(0))
    z = np.random.default_rng(1).uniform(-1, 1, 20)
    series = eval_series(ks, z)
    for t in range(2, 20):
        assert np.allclose(series[t], eval_truncated(ks, z, t), atol=1e-14)


def test_truncation_bound_examples():
    assert truncation_bound(1, 1, 3, 0.0, 0.0) == 0
    assert truncation_bound(1, 1, 3, 0.5, 0.01) == pytest.approx(0.135)
    with pytest.raises(ValueError):
        truncation_bound(1, 1, 3, 1.0, 0.0)


def test_truncation_bound_monotone():
    f = exponential_filter(0.5, 1.0, 1.0)
    vals = [[f.bound(p, l, 0.5) for l in range(1, 6)] for p in range(1, 6)]
    arr = np.array(vals)
    assert np.all(np.diff(arr, axis=0) <= 0) and np.all(np.diff(arr, axis=1) <= 0)


def test_exponential_tail_example():
    f = exponential_filter(0.5, 1.0, 1.0)
    assert f.tail(3) == pytest.approx(0.125)
    # discarded linear tail sum_{m > l} a^m M, summed numerically
    assert f.tail(3) == pytest.approx(sum(0.5 ** m for m in range(4, 200)), rel=1e-12)


def test_exponential_truncation_within_tail():
    f = exponential_filter(0.5, 1.0, 1.0)
    rng = np.random.default_rng(2)
    for l in (1, 3, 6):
        ks = f.kernels(1, l)
        z = rng.uniform(-1, 1, 500)
        err = np.abs(f(z)[l:, 0] - eval_series(ks, z)[l:, 0])
        assert err.max() <= f.tail(l) + 1e-12


def test_truncation_bound_on_random_inputs():
    f = exponential_filter(0.5, 1.0, 1.0)
    rng = np.random.default_rng(4)
    for _ in range(1000):
        z = rng.uniform(-0.9, 0.9, 60)
        for p, l in ((1, 2), (3, 4)):
            truncated = eval_truncated(f.kernels(p, l), z)[0]
            assert abs(f(z)[-1, 0] - truncated) <= f.bound(p, l, np.abs(z).max())


@pytest.mark.parametrize("name", ["exponential", "fir_linear", "fir_quadratic"])
def test_catalog_zero_input(name):
    f = builtin_filters()[name]
    assert not f(np.zeros(10)).any()


def test_catalog_tail_decreases_to_zero():
    for f in builtin_filters().values():
        tails = [f.tail(l) for l in range(0, 12)]
        assert all(a >= b for a, b in zip(tails, tails[1:]))
        assert tails[-1] < 1e-3


def test_fir_quadratic_full_matches_kernels():
    f = fir_quadratic()
    z = np.random.default_rng(0).uniform(-1, 1, 50)
    assert np.allclose(f(z), eval_series(f.kernels(2, 2), z), atol=1e-15)
    assert f(z[:1]).shape == (1, 1)


def test_custom_kernels_roundtrip():
    ks = random_kernels(2, 2, 2, np.random.default_rng(9))
    f = custom_kernels(ks, M=1.0)
    z = np.random.default_rng(10).uniform(-1, 1, 30)
    assert np.allclose(f(z), eval_series(ks, z))
    assert f.tail(2) == 0


def test_filter_rejects_large_inputs():
    with pytest.raises(ValueError):
        exponential_filter(M=0.5)(np.array([0.6]))


def test_monomial_coefficients_linear_example():
    cfg = SigSasConfig(M=1.0, l=1, p=1, lam=0.25)
    C = monomial_coefficients(linear_kernels(), cfg)[0]
    sh = cfg.shape
    assert C[lex_index((1, 2), sh)] == 0.3
    assert C[lex_index((2, 1), sh)] == 0.2
    assert C[lex_index((1, 1), sh)] == 0 and C[lex_index((2, 2), sh)] == 0


def test_readout_linear_example():
    cfg = SigSasConfig(M=1.0, l=1, p=1, lam=0.25)
    W = readout_from_kernels(linear_kernels(), cfg)
    WA = W.matrix[0] * monomial_diagonal(cfg)
    assert WA == pytest.approx([0, 0.3, 0.2, 0], abs=1e-15)
    rng = np.random.default_rng(0)
    for _ in range(100):
        w = rng.uniform(-1, 1, 2)
        assert abs(W(closed_form(w, cfg).coeffs)[0] - eval_truncated(linear_kernels(), w)[0]) <= 1e-12


def test_readout_zero_kernels():
    cfg = SigSasConfig(M=1.0, l=2, p=2, lam=0.2)
    assert not readout_from_kernels(VolterraKernelSet.zero(2, 2), cfg).matrix.any()


def test_readout_rejects_oversized_kernels():
    cfg = SigSasConfig(M=1.0, l=1, p=1, lam=0.25)
    with pytest.raises(ValueError):
        readout_from_kernels(VolterraKernelSet(2, 1, 1, {2: {(0, 0): 1.0}}), cfg)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 2), st.sampled_from([1, -1]),
       st.integers(0, 2 ** 31))
def test_readout_identity_random_kernels(p, l, m_out, sign, seed):
    rng = np.random.default_rng(seed)
    M = 0.8
    cfg = SigSasConfig(M=M, l=l, p=p, lam=0.5 / (1 + M + M ** 2 + M ** 3), sign=sign)
    ks = random_kernels(p, l, m_out, rng)
    W = readout_from_kernels(ks, cfg)
    for _ in range(50):
        w = rng.uniform(-M, M, l + 1)
        assert np.abs(W(closed_form(w, cfg).coeffs) - eval_truncated(ks, w)).max() <= 1e-10
