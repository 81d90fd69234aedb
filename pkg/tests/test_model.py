import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats
from scipy.linalg import eigh_tridiagonal

from hermite_beta.errors import ParameterError
from hermite_beta.model import (ConjugatedModel, EnsembleParams, TridiagonalModel, conjugate, dense_eigenvalues,
                                s_values, sample_batch, sample_chi, sample_ensemble, sample_gamma)
from hermite_beta.streams import replica_rng

from conftest import random_model, scaled_model


class TestChi:
    def test_mean_square_df2(self):
        x = sample_chi(np.full(10 ** 6, 2.0), replica_rng(1))
        assert abs(np.mean(x * x) - 2.0) < 0.01

    def test_mean_square_small_df(self):
        x = sample_chi(np.full(10 ** 6, 0.5), replica_rng(2))
        assert abs(np.mean(x * x) - 0.5) < 0.01

    def test_scalar_deterministic(self):
        a = sample_chi(3.0, replica_rng(5))
        b = sample_chi(3.0, replica_rng(5))
        assert isinstance(a, float) and a > 0 and a == b

    @pytest.mark.parametrize("df", [0.0, -1.0, math.inf, math.nan])
    def test_bad_df(self, df):
        with pytest.raises(ParameterError):
            sample_chi(df, replica_rng(0))

    @pytest.mark.parametrize("shape", [0.05, 0.3, 1.0, 3.7, 60.0])
    def test_gamma_matches_reference_cdf(self, shape):
        x = sample_gamma(np.full(50_000, shape), replica_rng(11))
        assert stats.kstest(x, stats.gamma(shape).cdf).pvalue > 1e-3

    def test_gamma_tiny_shape_stays_positive(self):
        x = sample_gamma(np.full(10_000, 1e-3), replica_rng(3))
        assert np.all(x > 0) and np.all(np.isfinite(x))


class TestEnsemble:
    def test_n2_offdiagonal_mean_square(self):
        p = EnsembleParams(2, 2.0, 9)
        rng = p.rng(0)
        b2 = np.array([sample_ensemble(p, rng).b[0] ** 2 for _ in range(100_000)])
        assert abs(b2.mean() - 2.0) < 0.05

    def test_diagonal_variance(self):
        m = random_model(1000, beta=1.0, seed=4)
        assert abs(np.var(m.a, ddof=1) - 2.0) < 0.2

    def test_deterministic(self):
        p = EnsembleParams(50, 1.5, 123)
        m1, m2 = sample_ensemble(p), sample_ensemble(p)
        assert np.array_equal(m1.a, m2.a) and np.array_equal(m1.b, m2.b)
        c1, c2 = conjugate(m1), conjugate(m2)
        assert np.array_equal(c1.Y, c2.Y) and np.array_equal(c1.d, c2.d)

    def test_batch_rows_match_replica_streams(self):
        p = EnsembleParams(40, 0.7, 8)
        a, b = sample_batch(p, [3, 0, 5])
        for row, r in enumerate([3, 0, 5]):
            m = sample_ensemble(p, p.rng(r))
            assert np.array_equal(a[row], m.a) and np.array_equal(b[row], m.b)

    def test_distributional_sanity(self):
        p = EnsembleParams(30, 1.3, 77)
        a, b = sample_batch(p, range(4000))
        df = p.chi_df()
        R = a.shape[0]
        assert np.all(np.abs(a.mean(0)) < 4 * math.sqrt(2 / R))
        assert np.all(np.abs(a.var(0, ddof=1) - 2) < 4 * math.sqrt(2 * 4 / R))
        b2 = b ** 2
        assert np.all(np.abs(b2.mean(0) - df) < 4 * np.sqrt(2 * df / R))
        assert np.all(np.abs(b2.var(0, ddof=1) - 2 * df) < 4 * np.sqrt((12 * df ** 2 + 48 * df) / R) + 0.0)

    @pytest.mark.parametrize("kw", [dict(n=1, beta=2), dict(n=5, beta=0), dict(n=5, beta=-1),
                                    dict(n=5, beta=math.inf), dict(n=5, beta=1, seed=-1),
                                    dict(n=5, beta=1, seed=2 ** 64), dict(n=2.5, beta=1)])
    def test_bad_params(self, kw):
        with pytest.raises(ParameterError):
            EnsembleParams(**kw)

    def test_model_validation(self):
        with pytest.raises(ParameterError):
            TridiagonalModel([0.0, 1.0], [0.0], 2.0)
        with pytest.raises(ParameterError):
            TridiagonalModel([0.0, 1.0], [1.0, 1.0], 2.0)
        m = TridiagonalModel([0.0, 1.0], [1.0], 2.0)
        with pytest.raises(ValueError):
            m.a[0] = 3.0

    def test_csv_round_trip(self, tmp_path):
        m = random_model(7, beta=0.5, seed=3)
        path = m.to_csv(tmp_path / "m.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "index,a,b" and lines[-1].endswith(",")
        m2 = TridiagonalModel.from_csv(path, 0.5)
        assert np.array_equal(m.a, m2.a) and np.array_equal(m.b, m2.b)

    @settings(max_examples=40, deadline=None)
    @given(n=st.integers(2, 60), beta=st.floats(0.05, 8.0), seed=st.integers(0, 2 ** 32))
    def test_positivity_and_Y_bound(self, n, beta, seed):
        m = sample_ensemble(EnsembleParams(n, beta, seed))
        cm = conjugate(m)
        assert np.all(m.b > 0)
        # Y > -s exactly; in doubles Y rounds to -s once 1 + Y/s is below eps
        assert np.all(cm.w > 0)
        assert np.all(cm.Y >= -cm.s[:-1])
        tight = cm.Y == -cm.s[:-1]
        assert np.all(cm.w[tight] < 2 * np.finfo(float).eps)


class TestConjugate:
    def test_s0(self):
        assert s_values(10)[0] == pytest.approx(math.sqrt(9.5), abs=1e-12)
        assert s_values(10)[0] == pytest.approx(3.0822, abs=1e-4)

    def test_s_decreasing(self):
        s = s_values(25)
        assert np.all(np.diff(s) < 0) and s[-1] == pytest.approx(math.sqrt(0.5))

    def test_synthetic_Y(self):
        beta = 2.0
        s = s_values(3)
        m = TridiagonalModel([0.1, 0.2, 0.3], s[1:] * math.sqrt(beta), beta)
        cm = conjugate(m)
        assert np.allclose(cm.Y, s[1:] - s[:-1], rtol=0, atol=1e-14)

    @pytest.mark.parametrize("beta", [0.5, 2.0, 4.0])
    def test_similarity_matches_dense_product(self, beta):
        m = random_model(6, beta=beta, seed=12)
        cm = conjugate(m)
        D = np.diag(cm.d)
        prod = np.linalg.solve(D, m.to_dense() @ D)
        ref = cm.to_dense()
        assert np.max(np.abs(prod - ref)) <= 1e-12 * np.max(np.abs(ref))

    def test_w_matches_Y(self):
        cm = conjugate(random_model(30, seed=2))
        assert np.allclose(cm.w, 1 + cm.Y / cm.s[:-1], rtol=1e-12)
        assert cm.Y_ext[-1] == 0 and cm.w_ext[-1] == 1

    def test_defaults_w_from_Y(self):
        cm = ConjugatedModel(X=[0.0, 0.0], Y=[0.5], s=s_values(2), d=[1.0, 1.0])
        assert cm.w[0] == pytest.approx(1 + 0.5 / math.sqrt(1.5))


class TestDenseEigenvalues:
    def test_2x2(self):
        ev = dense_eigenvalues(scaled_model([0, 0], [1]))
        assert np.allclose(ev, [-1, 1], atol=1e-12)

    def test_decoupled(self):
        ev = dense_eigenvalues(scaled_model([1, 2], [1e-300]))
        assert np.allclose(ev, [1, 2], atol=1e-12)

    def test_trace(self):
        m = random_model(8, seed=6)
        assert abs(dense_eigenvalues(m).sum() - m.diagonal.sum()) < 1e-10

    def test_against_lapack(self):
        m = random_model(200, beta=1.0, seed=1)
        ref = eigh_tridiagonal(m.diagonal, m.offdiagonal, eigvals_only=True)
        assert np.max(np.abs(dense_eigenvalues(m) - ref)) < 1e-10

    @pytest.mark.parametrize("n", [2, 5, 12])
    def test_similarity_invariance(self, n):
        m = random_model(n, beta=1.0, seed=n)
        ev = np.sort(np.linalg.eigvals(conjugate(m).to_dense()).real)
        assert np.max(np.abs(ev - dense_eigenvalues(m))) < 1e-9

    def test_bad_tol(self):
        with pytest.raises(ParameterError):
            dense_eigenvalues(random_model(3), tol=0)
