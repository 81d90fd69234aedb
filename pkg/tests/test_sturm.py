import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from hermite_beta.errors import ParameterError
from hermite_beta.model import EnsembleParams, dense_eigenvalues, sample_batch
from hermite_beta.sturm import (batch_count_below, bisect_all, count_below, count_below_many, count_interval,
                                eigenvalue_by_index)

from conftest import random_model, scaled_model


def test_decoupled_count():
    m = scaled_model([1, 2, 3], [1e-300, 1e-300])
    assert count_below(m, 2.5) == 2


def test_zero_pivot_path():
    # first pivot is exactly 0 at threshold 0
    assert count_below(scaled_model([0, 0], [1]), 0.0) == 1


def test_against_dense_ranks(rng):
    m = random_model(50, seed=3)
    ev = dense_eigenvalues(m)
    for t in rng.uniform(ev[0] - 1, ev[-1] + 1, 20):
        assert count_below(m, t) == int(np.sum(ev < t))


@pytest.mark.parametrize("t", [math.inf, -math.inf, math.nan])
def test_non_finite_threshold(t):
    with pytest.raises(ParameterError):
        count_below(random_model(4), t)


def test_whole_spectrum():
    m = random_model(40, beta=0.5, seed=8)
    big = 10 * math.sqrt(m.n) * (1 + m.norm_inf())
    assert count_interval(m, -big, big).count == m.n


def test_empty_interval():
    m = scaled_model([1, 2, 3], [0.1, 0.1])
    assert count_interval(m, 0.0, 1e-300).count == 0


def test_intervals_against_oracle(rng):
    m = random_model(30, beta=4.0, seed=5)
    ev = dense_eigenvalues(m)
    for _ in range(50):
        lo, hi = np.sort(rng.uniform(-8, 8, 2))
        r = count_interval(m, lo, hi)
        assert r.count == int(np.sum((ev > lo) & (ev <= hi)))
        assert (r.lo, r.hi) == (lo, hi)


def test_interval_order():
    with pytest.raises(ParameterError):
        count_interval(random_model(3), 1.0, 1.0)


def test_eigenvalue_by_index_2x2():
    m = scaled_model([0, 0], [1])
    assert abs(eigenvalue_by_index(m, 0, 1e-12) + 1) <= 1e-12


def test_eigenvalue_by_index_all():
    m = random_model(8, seed=9)
    ev = dense_eigenvalues(m)
    tol = 1e-10
    got = [eigenvalue_by_index(m, k, tol) for k in range(8)]
    assert np.max(np.abs(np.array(got) - ev)) <= 2 * tol
    for k, v in enumerate(got):
        assert count_below(m, v) <= k < count_below(m, v + 2 * tol)
    assert all(a <= b for a, b in zip(got, got[1:]))


def test_eigenvalue_by_index_range():
    with pytest.raises(ParameterError):
        eigenvalue_by_index(random_model(3), 3, 1e-8)


def test_bisect_all_contract():
    m = random_model(25, beta=1.0, seed=4)
    lo, hi, clo, chi = bisect_all(m, 1e-11)
    assert np.all(hi - lo <= 1e-11)
    for k in range(25):
        assert count_below(m, lo[k]) == clo[k] <= k < chi[k] == count_below(m, hi[k])


def test_many_and_batch_agree():
    p = EnsembleParams(60, 1.0, 2)
    a, b = sample_batch(p, range(4))
    ts = np.linspace(-15, 15, 7)
    from hermite_beta.model import TridiagonalModel
    for r in range(4):
        m = TridiagonalModel(a[r], b[r], 1.0)
        ref = [count_below(m, t) for t in ts]
        assert list(count_below_many(m, ts)) == ref
        assert list(batch_count_below(a, b, 1.0, np.tile(ts, (4, 1)))[r]) == ref
    assert list(batch_count_below(a, b, 1.0, np.zeros(4))) == [
        count_below(TridiagonalModel(a[r], b[r], 1.0), 0.0) for r in range(4)]


models = st.builds(
    lambda n, beta, seed: random_model(n, beta, seed),
    st.integers(2, 30), st.sampled_from([0.5, 1.0, 2.0, 4.0]), st.integers(0, 2 ** 32))


@settings(max_examples=50, deadline=None)
@given(m=models, t1=st.floats(-20, 20), t2=st.floats(-20, 20))
def test_monotone(m, t1, t2):
    t1, t2 = min(t1, t2), max(t1, t2)
    assert count_below(m, t1) <= count_below(m, t2)


@settings(max_examples=50, deadline=None)
@given(m=models)
def test_gershgorin_bounds(m):
    glo, ghi = m.gershgorin()
    assert count_below(m, glo) == 0
    assert count_below(m, ghi + 1) == m.n


@settings(max_examples=50, deadline=None)
@given(m=models, c=st.floats(-5, 5), t=st.floats(-15, 15))
def test_translation_covariance(m, c, t):
    ev = dense_eigenvalues(m)
    assume(np.min(np.abs(ev - (t - c))) > 1e-8)
    assert count_below(m.shifted(c), t) == count_below(m, t - c)


def test_translation_covariance_exact_pivots():
    # dyadic entries keep d_k + c - (t + c) = d_k - t exact
    m = scaled_model([0.5, -1.25, 2.0, 0.75], [1.0, 0.5, 1.5], beta=1.0)
    assert np.array_equal(m.shifted(3.0).diagonal, m.diagonal + 3.0)
    for t in (-2.0, -0.25, 0.5, 1.75):
        assert count_below(m.shifted(3.0), t + 3.0) == count_below(m, t)
