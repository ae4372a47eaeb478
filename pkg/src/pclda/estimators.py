"""sklearn-style estimator facades over the trainers.

Each estimator consumes a dense (n_samples, n_features) count matrix X and,
for the supervised ones, a binary label matrix y of shape (n, L) or (n,).
fit/transform/predict compose with sklearn pipelines and get_params works
through BaseEstimator.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .embed import EmbedConfig, embed_batch
from .errors import InvalidParameterError
from .gibbs import fit_logistic_head, gibbs_train
from .gradients import RegConfig, UnconstrainedParams
from .metrics import auc
from .model import Corpus, TopicModelParams
from .optim import AdamConfig
from .train import (TrainConfig, random_init, train_bp_slda, train_ml_slda,
                    train_pc)


def check_count_matrix(X):
    X = np.asarray(X)
    if X.ndim != 2:
        raise InvalidParameterError("X must be 2-dimensional (n_docs, vocab)")
    if not np.issubdtype(X.dtype, np.number):
        raise InvalidParameterError("X must be numeric counts")
    Xf = X.astype(np.float64)
    if np.any(Xf < 0) or np.any(Xf != np.round(Xf)):
        raise InvalidParameterError("X must hold nonnegative integer counts")
    if np.any(Xf.sum(axis=1) < 1):
        raise InvalidParameterError("every document needs at least one token")
    return Xf.astype(np.int64)


def check_label_matrix(y, n_docs):
    y = np.asarray(y)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape[0] != n_docs:
        raise InvalidParameterError("y must have one row per document")
    if not np.isin(y, (0, 1)).all():
        raise InvalidParameterError("y must be binary {0,1}")
    return y.astype(np.int8)


def _to_corpus(X, y=None):
    X = check_count_matrix(X)
    docs = tuple({int(v): int(c) for v, c in enumerate(row) if c > 0}
                 for row in X)
    labels = None if y is None else check_label_matrix(y, X.shape[0])
    return Corpus(X.shape[1], docs, labels)


class _SLDABase(BaseEstimator, TransformerMixin):
    """Shared fit/transform plumbing for the gradient-trained variants."""

    _objective = "pc"

    def __init__(self, n_topics=4, lam=100.0, alpha=1.1, n_embed_iters=100,
                 embed_step=0.005, epochs=200, learning_rate=0.01,
                 tau_phi=1e-5, tau_eta=1e-4, random_state=0):
        self.n_topics = n_topics
        self.lam = lam
        self.alpha = alpha
        self.n_embed_iters = n_embed_iters
        self.embed_step = embed_step
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.tau_phi = tau_phi
        self.tau_eta = tau_eta
        self.random_state = random_state

    def _train_config(self):
        return TrainConfig(
            objective=self._objective,
            lam=float(self.lam),
            epochs=int(self.epochs),
            adam=AdamConfig(learning_rate=float(self.learning_rate)),
            reg=RegConfig(tau_phi=float(self.tau_phi),
                          tau_eta=float(self.tau_eta)),
            embed=EmbedConfig(T=int(self.n_embed_iters),
                              nu=float(self.embed_step)),
            seed=int(self.random_state))

    def _init_params(self, V, L, init_params=None):
        if init_params is not None:
            return UnconstrainedParams.from_topic_params(init_params)
        return random_init(int(self.n_topics), V, L, float(self.alpha),
                           int(self.random_state))

    def _trainer(self):
        return {"pc": train_pc, "ml_replicated": train_ml_slda,
                "bp": train_bp_slda}[self._objective]

    def fit(self, X, y, init_params: TopicModelParams | None = None):
        corpus = _to_corpus(X, y)
        init = self._init_params(corpus.vocab_size, corpus.n_labels, init_params)
        params, trace = self._trainer()(corpus, init, self._train_config())
        self.params_ = params
        self.trace_ = trace
        self.phi_ = params.phi
        self.eta_ = params.eta
        self.n_features_in_ = corpus.vocab_size
        return self

    def transform(self, X):
        """Predict-mode MAP embedding onto the topic simplex."""
        check_is_fitted(self, "params_")
        X = check_count_matrix(X)
        cfg = self._train_config().embed
        return embed_batch(X.astype(float), self.params_, cfg, w=0.0)

    def predict_proba(self, X):
        Pi = self.transform(X)
        return 1.0 / (1.0 + np.exp(-(Pi @ self.eta_.T)))

    def predict(self, X):
        return (self.predict_proba(X) >= 0.5).astype(np.int8)

    def score(self, X, y):
        """Mean AUC over label columns (undefined columns skipped)."""
        proba = self.predict_proba(X)
        y = check_label_matrix(y, proba.shape[0])
        vals = []
        for l in range(y.shape[1]):
            try:
                vals.append(auc(proba[:, l], y[:, l]))
            except Exception:
                pass
        if not vals:
            raise InvalidParameterError("AUC undefined for every label column")
        return float(np.mean(vals))


class PCSLDA(_SLDABase):
    """Prediction-constrained sLDA trained by Adam through the embedding."""

    _objective = "pc"


class MLSLDA(_SLDABase):
    """Joint maximum likelihood with label replication (lam = replication)."""

    _objective = "ml_replicated"


class BPSLDA(_SLDABase):
    """Discriminative-only training; lam is ignored."""

    _objective = "bp"


class GibbsLDA(BaseEstimator, TransformerMixin):
    """Unsupervised collapsed Gibbs LDA with an optional logistic head."""

    def __init__(self, n_topics=4, alpha=1.1, beta_word=0.1, n_sweeps=500,
                 burn_in=250, thinning=5, n_embed_iters=100, embed_step=0.005,
                 tau_eta=1e-4, random_state=0):
        self.n_topics = n_topics
        self.alpha = alpha
        self.beta_word = beta_word
        self.n_sweeps = n_sweeps
        self.burn_in = burn_in
        self.thinning = thinning
        self.n_embed_iters = n_embed_iters
        self.embed_step = embed_step
        self.tau_eta = tau_eta
        self.random_state = random_state

    def _embed_config(self):
        return EmbedConfig(T=int(self.n_embed_iters), nu=float(self.embed_step))

    def fit(self, X, y=None):
        corpus = _to_corpus(X, y)
        params = gibbs_train(corpus, int(self.n_topics), float(self.alpha),
                             float(self.beta_word), int(self.n_sweeps),
                             int(self.burn_in), int(self.random_state),
                             int(self.thinning))
        if y is not None:
            Pi = embed_batch(corpus.to_dense(), params, self._embed_config())
            eta = fit_logistic_head(Pi, corpus.labels, float(self.tau_eta),
                                    int(self.random_state))
            params = TopicModelParams(params.phi, eta, params.alpha)
        self.params_ = params
        self.phi_ = params.phi
        self.eta_ = params.eta
        self.n_features_in_ = corpus.vocab_size
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        X = check_count_matrix(X)
        return embed_batch(X.astype(float), self.params_, self._embed_config())

    def predict_proba(self, X):
        Pi = self.transform(X)
        return 1.0 / (1.0 + np.exp(-(Pi @ self.eta_.T)))
