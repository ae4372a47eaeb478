"""Collapsed Gibbs sampling for unsupervised LDA, plus a post-hoc logistic
head so the Gibbs baseline can score labels.

The sampler is the standard collapsed conditional
p(z = k) ~ (n_dk + alpha) (n_kv + beta) / (n_k + V beta), run sequentially
over tokens.  Topic-word rows are estimated as the posterior-mean smoothed
counts averaged over thinned post-burn-in sweeps, which makes a
lower-variance initializer than a single final sample.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import InvalidParameterError
from .model import Corpus, TopicModelParams
from .optim import Adam, AdamConfig


@njit(cache=True)
def _sweep_kernel(z, token_doc, token_word, ndk, nkv, nk, alpha, beta, u):
    K = ndk.shape[1]
    V = nkv.shape[1]
    probs = np.empty(K)
    for i in range(z.shape[0]):
        d = token_doc[i]
        v = token_word[i]
        k = z[i]
        ndk[d, k] -= 1
        nkv[k, v] -= 1
        nk[k] -= 1
        total = 0.0
        for j in range(K):
            p = (ndk[d, j] + alpha) * (nkv[j, v] + beta) / (nk[j] + V * beta)
            probs[j] = p
            total += p
        r = u[i] * total
        cum = 0.0
        knew = K - 1
        for j in range(K):
            cum += probs[j]
            if r < cum:
                knew = j
                break
        z[i] = knew
        ndk[d, knew] += 1
        nkv[knew, v] += 1
        nk[knew] += 1


@dataclass
class GibbsState:
    assignments: np.ndarray  # topic per token
    token_doc: np.ndarray
    token_word: np.ndarray
    ndk: np.ndarray  # D x K doc-topic counts
    nkv: np.ndarray  # K x V topic-word counts
    nk: np.ndarray   # length-K topic totals
    alpha: float
    beta_word: float

    def check_invariants(self):
        """Count matrices must stay consistent with the assignments."""
        K = self.ndk.shape[1]
        V = self.nkv.shape[1]
        ndk = np.zeros_like(self.ndk)
        nkv = np.zeros_like(self.nkv)
        for i in range(self.assignments.shape[0]):
            ndk[self.token_doc[i], self.assignments[i]] += 1
            nkv[self.assignments[i], self.token_word[i]] += 1
        assert np.array_equal(ndk, self.ndk)
        assert np.array_equal(nkv, self.nkv)
        assert np.array_equal(self.nkv.sum(axis=1), self.nk)
        assert np.all(self.ndk >= 0) and np.all(self.nkv >= 0)
        assert self.ndk.sum() == self.assignments.shape[0]


class GibbsSampler:
    """Owns one chain; sweeps are strictly sequential over tokens."""

    def __init__(self, corpus: Corpus, K: int, alpha: float, beta_word: float,
                 seed: int):
        doc_ids, word_ids = [], []
        for d, doc in enumerate(corpus.docs):
            for v in sorted(doc):
                doc_ids.extend([d] * doc[v])
                word_ids.extend([v] * doc[v])
        n_tokens = len(doc_ids)
        if K > n_tokens:
            raise InvalidParameterError("K exceeds the total token count")
        self.rng = np.random.default_rng(seed)
        token_doc = np.asarray(doc_ids, dtype=np.int64)
        token_word = np.asarray(word_ids, dtype=np.int64)
        z = self.rng.integers(0, K, size=n_tokens).astype(np.int64)
        ndk = np.zeros((corpus.n_docs, K), dtype=np.int64)
        nkv = np.zeros((K, corpus.vocab_size), dtype=np.int64)
        np.add.at(ndk, (token_doc, z), 1)
        np.add.at(nkv, (z, token_word), 1)
        self.state = GibbsState(z, token_doc, token_word, ndk, nkv,
                                nkv.sum(axis=1), float(alpha), float(beta_word))

    def sweep(self):
        s = self.state
        u = self.rng.random(s.assignments.shape[0])
        _sweep_kernel(s.assignments, s.token_doc, s.token_word, s.ndk, s.nkv,
                      s.nk, s.alpha, s.beta_word, u)

    def phi_estimate(self):
        s = self.state
        V = s.nkv.shape[1]
        return (s.nkv + s.beta_word) / (s.nk + V * s.beta_word)[:, None]


def gibbs_train(corpus: Corpus, K: int, alpha: float = 1.1,
                beta_word: float = 0.1, n_sweeps: int = 500,
                burn_in: int = 250, seed: int = 0,
                thinning: int = 5) -> TopicModelParams:
    """Run one chain and return phi averaged over thinned post-burn-in sweeps.

    eta comes back all zeros; fit_logistic_head adds a label scorer.
    """
    if n_sweeps <= burn_in:
        raise InvalidParameterError("n_sweeps must exceed burn_in")
    sampler = GibbsSampler(corpus, K, alpha, beta_word, seed)
    phi_sum = np.zeros((K, corpus.vocab_size))
    n_samples = 0
    for sweep in range(1, n_sweeps + 1):
        sampler.sweep()
        if sweep > burn_in and (sweep - burn_in) % thinning == 0:
            phi_sum += sampler.phi_estimate()
            n_samples += 1
    if n_samples == 0:
        phi_sum = sampler.phi_estimate()
        n_samples = 1
    phi = phi_sum / n_samples
    phi = phi / phi.sum(axis=1, keepdims=True)
    L = max(corpus.n_labels, 1)
    return TopicModelParams(phi, np.zeros((L, K)), alpha)


def fit_logistic_head(pi_matrix, labels, tau_eta: float = 1e-4, seed: int = 0,
                      epochs: int = 2000,
                      adam: AdamConfig = AdamConfig(learning_rate=0.05)):
    """Fit L x K logistic weights on fixed embeddings by Adam.

    Maximizes the Bernoulli log-likelihood minus (tau_eta/2) ||eta||^2.
    A single-class label column gets the prior-only solution (zeros) with a
    warning, since its likelihood would push eta off to infinity along an
    uninformative direction.
    """
    Pi = np.asarray(pi_matrix, dtype=np.float64)
    Y = np.asarray(labels, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    D, K = Pi.shape
    L = Y.shape[1]
    single = [l for l in range(L) if len(np.unique(Y[:, l])) < 2]
    if single:
        warnings.warn(f"single-class label column(s) {single}: eta set to the "
                      "prior-only solution (zeros)", stacklevel=2)
    eta = np.zeros((L, K))
    opt = Adam({"eta": eta}, adam)
    for _ in range(epochs):
        Z = Pi @ eta.T
        R = Y - 1.0 / (1.0 + np.exp(-Z))
        grad = -(R.T @ Pi) + tau_eta * eta
        eta = opt.step({"eta": eta}, {"eta": grad})["eta"]
    for l in single:
        eta[l] = 0.0
    return eta
