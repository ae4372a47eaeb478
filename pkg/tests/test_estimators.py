import numpy as np
import pytest
from sklearn.base import clone

from pclda import InvalidParameterError
from pclda.estimators import (
    BPSLDA,
    GibbsLDA,
    MLSLDA,
    PCSLDA,
    check_count_matrix,
    check_label_matrix,
)


def tiny_dataset(seed=0, D=20, V=6):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 5, size=(D, V))
    X[X.sum(axis=1) == 0, 0] = 1
    y = rng.integers(0, 2, size=D)
    y[0], y[1] = 0, 1
    return X, y


FAST = dict(n_topics=2, epochs=5, n_embed_iters=10, learning_rate=0.05)


class TestValidation:
    def test_count_matrix_accepts_integer_floats(self):
        X = check_count_matrix(np.array([[1.0, 2.0], [0.0, 3.0]]))
        assert X.dtype == np.int64

    def test_count_matrix_rejects_fractions(self):
        with pytest.raises(InvalidParameterError):
            check_count_matrix(np.array([[0.5, 1.0]]))

    def test_count_matrix_rejects_negative(self):
        with pytest.raises(InvalidParameterError):
            check_count_matrix(np.array([[-1, 2]]))

    def test_count_matrix_rejects_empty_doc(self):
        with pytest.raises(InvalidParameterError):
            check_count_matrix(np.array([[0, 0], [1, 2]]))

    def test_count_matrix_rejects_1d(self):
        with pytest.raises(InvalidParameterError):
            check_count_matrix(np.array([1, 2, 3]))

    def test_label_matrix_promotes_1d(self):
        y = check_label_matrix(np.array([0, 1, 1]), 3)
        assert y.shape == (3, 1)

    def test_label_matrix_rejects_non_binary(self):
        with pytest.raises(InvalidParameterError):
            check_label_matrix(np.array([0, 2]), 2)

    def test_label_matrix_rejects_row_mismatch(self):
        with pytest.raises(InvalidParameterError):
            check_label_matrix(np.array([0, 1]), 3)


class TestPCSLDA:
    def test_fit_sets_learned_attributes(self):
        X, y = tiny_dataset()
        est = PCSLDA(lam=10.0, **FAST).fit(X, y)
        assert est.phi_.shape == (2, 6)
        assert est.eta_.shape == (1, 2)
        assert est.n_features_in_ == 6
        assert np.allclose(est.phi_.sum(axis=1), 1.0)

    def test_transform_rows_on_simplex(self):
        X, y = tiny_dataset()
        est = PCSLDA(lam=10.0, **FAST).fit(X, y)
        Pi = est.transform(X)
        assert Pi.shape == (20, 2)
        assert np.allclose(Pi.sum(axis=1), 1.0)
        assert np.all(Pi > 0)

    def test_predict_proba_and_predict_consistent(self):
        X, y = tiny_dataset()
        est = PCSLDA(lam=10.0, **FAST).fit(X, y)
        proba = est.predict_proba(X)
        assert proba.shape == (20, 1)
        assert np.all((proba > 0) & (proba < 1))
        assert np.array_equal(est.predict(X), (proba >= 0.5).astype(np.int8))

    def test_score_is_mean_auc(self):
        X, y = tiny_dataset()
        est = PCSLDA(lam=10.0, **FAST).fit(X, y)
        s = est.score(X, y)
        assert 0.0 <= s <= 1.0

    def test_get_params_round_trips_through_clone(self):
        est = PCSLDA(n_topics=3, lam=42.0, epochs=7)
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()

    def test_deterministic_given_random_state(self):
        X, y = tiny_dataset()
        a = PCSLDA(lam=10.0, random_state=1, **FAST).fit(X, y)
        b = PCSLDA(lam=10.0, random_state=1, **FAST).fit(X, y)
        assert np.array_equal(a.phi_, b.phi_)
        assert np.array_equal(a.eta_, b.eta_)

    def test_transform_before_fit_raises(self):
        from sklearn.exceptions import NotFittedError
        X, _ = tiny_dataset()
        with pytest.raises(NotFittedError):
            PCSLDA().transform(X)

    def test_warm_start_from_init_params(self):
        X, y = tiny_dataset()
        first = PCSLDA(lam=10.0, **FAST).fit(X, y)
        warmed = PCSLDA(lam=10.0, **FAST).fit(X, y, init_params=first.params_)
        assert warmed.phi_.shape == first.phi_.shape

    def test_multilabel_targets(self):
        X, _ = tiny_dataset()
        rng = np.random.default_rng(3)
        Y = rng.integers(0, 2, size=(20, 3))
        Y[0], Y[1] = 0, 1
        est = PCSLDA(lam=10.0, **FAST).fit(X, Y)
        assert est.eta_.shape == (3, 2)
        assert est.predict_proba(X).shape == (20, 3)


class TestOtherGradientEstimators:
    def test_ml_slda_fits(self):
        X, y = tiny_dataset()
        est = MLSLDA(lam=5.0, **FAST).fit(X, y)
        assert est.phi_.shape == (2, 6)

    def test_bp_slda_warns_on_nondefault_lam(self):
        X, y = tiny_dataset()
        with pytest.warns(UserWarning, match="ignores lambda"):
            BPSLDA(lam=10.0, **FAST).fit(X, y)

    def test_bp_slda_default_lam_is_silent(self):
        import warnings
        X, y = tiny_dataset()
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            BPSLDA(lam=1.0, **FAST).fit(X, y)


class TestGibbsLDA:
    def test_unsupervised_fit(self):
        X, _ = tiny_dataset()
        est = GibbsLDA(n_topics=2, n_sweeps=20, burn_in=10,
                       n_embed_iters=10).fit(X)
        assert est.phi_.shape == (2, 6)
        assert np.all(est.eta_ == 0.0)

    def test_supervised_fit_adds_logistic_head(self):
        X, y = tiny_dataset()
        est = GibbsLDA(n_topics=2, n_sweeps=20, burn_in=10,
                       n_embed_iters=10).fit(X, y)
        assert not np.all(est.eta_ == 0.0)
        proba = est.predict_proba(X)
        assert proba.shape == (20, 1)

    def test_transform_simplex(self):
        X, _ = tiny_dataset()
        est = GibbsLDA(n_topics=3, n_sweeps=20, burn_in=10,
                       n_embed_iters=10).fit(X)
        Pi = est.transform(X)
        assert np.allclose(Pi.sum(axis=1), 1.0)

    def test_deterministic(self):
        X, y = tiny_dataset()
        kw = dict(n_topics=2, n_sweeps=20, burn_in=10, n_embed_iters=10,
                  random_state=4)
        a = GibbsLDA(**kw).fit(X, y)
        b = GibbsLDA(**kw).fit(X, y)
        assert np.array_equal(a.phi_, b.phi_)
        assert np.array_equal(a.eta_, b.eta_)
