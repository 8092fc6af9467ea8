import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from neoseize import pca
from neoseize.errors import DimensionMismatch, TargetDimExceedsFeatureDim, TooFewSamples


def eigh_oracle(X, d):
    """Top-d eigenvectors of the covariance of the z-scored data, sign-fixed."""
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    Z = (X - mu) / sd
    cov = Z.T @ Z / (X.shape[0] - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order].T
    pivot = np.argmax(np.abs(vecs), axis=1)
    vecs *= np.sign(vecs[np.arange(len(vecs)), pivot])[:, None]
    return vecs[:d], vals[:d] / vals.sum()


@pytest.fixture
def X(rng):
    # correlated columns so the spectrum has structure
    return rng.normal(size=(500, 198)) @ rng.normal(size=(198, 198)) * 0.1 + rng.normal(size=198)


class TestFit:
    def test_matches_eigh_oracle(self, X):
        model = pca.fit(X, 20)
        comps, ratio = eigh_oracle(X, 20)
        assert_allclose(model.components, comps, atol=1e-6)
        assert_allclose(model.explained_variance_ratio, ratio, rtol=1e-9)

    def test_matches_oracle_on_white_data(self, rng):
        X = rng.normal(size=(500, 198))
        model = pca.fit(X, 20)
        comps, _ = eigh_oracle(X, 20)
        # up to sign, in case a pivot entry is nearly tied
        assert_allclose(np.abs(np.sum(model.components * comps, axis=1)), 1.0, atol=1e-6)

    def test_orthonormal_rows(self, X):
        c = pca.fit(X, 100).components
        assert_allclose(c @ c.T, np.eye(100), atol=1e-8)

    def test_ratio_ordering(self, X):
        r = pca.fit(X, 50).explained_variance_ratio
        assert np.all(np.diff(r) <= 0)
        assert np.all((r >= 0) & (r <= 1))
        assert r.sum() <= 1 + 1e-9

    def test_projected_variance_ordering(self, X):
        model = pca.fit(X, 20)
        v = model.transform(X).var(axis=0)
        assert np.all(np.diff(v) <= 1e-9)

    def test_rank_one(self, rng):
        t = rng.normal(size=(50, 1))
        X = t @ np.array([[1.0, -2.0, 0.5, 3.0, 1.5]])
        model = pca.fit(X, 1)
        assert_allclose(model.explained_variance_ratio, [1.0], atol=1e-12)

    def test_full_reconstruction(self, rng):
        X = rng.normal(size=(60, 12))
        model = pca.fit(X, 12)
        Z = model.standardize(X)
        assert np.abs(model.inverse_transform(model.transform(X)) - Z).max() <= 1e-8

    def test_constant_feature(self, rng):
        X = rng.normal(size=(30, 4))
        X[:, 2] = 7.0
        model = pca.fit(X, 3)
        assert model.scale[2] == 1.0
        assert np.all(np.isfinite(model.components))

    def test_sign_convention(self, X):
        c = pca.fit(X, 20).components
        pivot = np.argmax(np.abs(c), axis=1)
        assert np.all(c[np.arange(20), pivot] > 0)

    def test_deterministic(self, X):
        a, b = pca.fit(X, 20), pca.fit(X.copy(), 20)
        assert a.components.tobytes() == b.components.tobytes()

    def test_errors(self, rng):
        with pytest.raises(TooFewSamples):
            pca.fit(rng.normal(size=(20, 30)), 20)
        with pytest.raises(TargetDimExceedsFeatureDim):
            pca.fit(rng.normal(size=(50, 10)), 11)


class TestTransform:
    def test_mean_maps_to_zero(self, X):
        model = pca.fit(X, 20)
        assert_allclose(model.transform(model.mean), 0.0, atol=1e-12)

    @given(a=st.floats(-5, 5))
    @settings(max_examples=30, deadline=None)
    def test_affine(self, a):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(40, 6))
        model = pca.fit(X, 3)
        x = X[0]
        assert_allclose(model.transform(a * x + (1 - a) * model.mean), a * model.transform(x), atol=1e-10)

    def test_matrix_product_oracle(self, X):
        model = pca.fit(X, 20)
        x = X[3]
        ref = [sum(c[j] * (x[j] - model.mean[j]) / model.scale[j] for j in range(198))
               for c in model.components]
        assert_allclose(model.transform(x), ref, atol=1e-10)

    def test_contraction(self, X, rng):
        model = pca.fit(X, 20)
        for _ in range(50):
            i, j = rng.integers(0, len(X), 2)
            lhs = np.linalg.norm(model.transform(X[i]) - model.transform(X[j]))
            rhs = np.linalg.norm(model.standardize(X[i]) - model.standardize(X[j]))
            assert lhs <= rhs + 1e-12

    def test_dimension_mismatch(self, X):
        with pytest.raises(DimensionMismatch):
            pca.fit(X, 20).transform(np.zeros(10))
