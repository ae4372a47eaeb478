"""Core model containers and log-density terms.

The generative story: each document has a topic mixture ``pi`` on the
K-simplex with a symmetric Dirichlet(alpha) prior; word counts are
multinomial under the mixed topic-word distribution ``pi @ phi``; each of
the L binary labels is Bernoulli through a logistic link ``sigma(eta_l .
pi)``.  The multinomial coefficient is excluded from the data term
everywhere in this package: it is constant in all trainable parameters, so
it affects no gradient or model comparison.  All per-token NLL figures
reported by the evaluation module share this convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import InvalidParameterError

SIMPLEX_ATOL = 1e-9


def _sparse_items(x):
    """Normalize a sparse count vector to (ids, counts) int arrays.

    Accepts a dict {token_id: count} or a pair of parallel sequences.
    """
    if isinstance(x, dict):
        if not x:
            raise InvalidParameterError("empty document (N_d >= 1 required)")
        ids = np.fromiter(x.keys(), dtype=np.int64, count=len(x))
        counts = np.fromiter(x.values(), dtype=np.int64, count=len(x))
        order = np.argsort(ids)
        return ids[order], counts[order]
    ids, counts = x
    return np.asarray(ids, dtype=np.int64), np.asarray(counts, dtype=np.int64)


def check_simplex(pi, atol=SIMPLEX_ATOL, name="pi"):
    pi = np.asarray(pi, dtype=np.float64)
    if pi.ndim != 1:
        raise InvalidParameterError(f"{name} must be a vector")
    if np.any(pi < 0):
        raise InvalidParameterError(f"{name} has negative entries")
    if abs(pi.sum() - 1.0) > atol:
        raise InvalidParameterError(f"{name} does not sum to 1 (got {pi.sum()!r})")
    return pi


@dataclass(frozen=True)
class Corpus:
    """A bag-of-words corpus with optional multi-binary labels.

    docs holds one sparse count vector per document as a dict
    {token_id: count}.  labels, when present, is a (D, L) array of {0,1}
    with one row per document.
    """

    vocab_size: int
    docs: tuple
    labels: np.ndarray | None = None
    label_names: tuple = ()

    def __post_init__(self):
        if self.vocab_size < 1:
            raise InvalidParameterError("vocab_size must be positive")
        docs = tuple(dict(d) for d in self.docs)
        for i, doc in enumerate(docs):
            if not doc:
                raise InvalidParameterError(f"document {i} is empty (N_d >= 1)")
            for v, c in doc.items():
                if not (0 <= int(v) < self.vocab_size):
                    raise InvalidParameterError(
                        f"document {i}: token id {v} out of range for V={self.vocab_size}"
                    )
                if int(c) < 1:
                    raise InvalidParameterError(f"document {i}: count {c} < 1")
        object.__setattr__(self, "docs", docs)
        if self.labels is not None:
            y = np.asarray(self.labels)
            if y.ndim != 2 or y.shape[0] != len(docs):
                raise InvalidParameterError(
                    "labels must have exactly one row per document"
                )
            if not np.isin(y, (0, 1)).all():
                raise InvalidParameterError("labels must be binary {0,1}")
            object.__setattr__(self, "labels", y.astype(np.int8))
            names = tuple(self.label_names) or tuple(
                f"label_{j}" for j in range(y.shape[1])
            )
            if len(names) != y.shape[1]:
                raise InvalidParameterError("label_names length must equal L")
            object.__setattr__(self, "label_names", names)
        else:
            object.__setattr__(self, "label_names", tuple(self.label_names))

    @property
    def n_docs(self):
        return len(self.docs)

    @property
    def n_labels(self):
        return 0 if self.labels is None else self.labels.shape[1]

    def doc_length(self, d):
        return sum(self.docs[d].values())

    @property
    def total_tokens(self):
        return sum(self.doc_length(d) for d in range(self.n_docs))

    def to_dense(self, indices=None):
        """Materialize (a subset of) the corpus as a dense (n, V) count array."""
        if indices is None:
            indices = range(self.n_docs)
        X = np.zeros((len(indices), self.vocab_size), dtype=np.float64)
        for row, d in enumerate(indices):
            for v, c in self.docs[d].items():
                X[row, v] = c
        return X

    def subset(self, indices):
        docs = tuple(self.docs[i] for i in indices)
        labels = None if self.labels is None else self.labels[list(indices)]
        return Corpus(self.vocab_size, docs, labels, self.label_names)


@dataclass(frozen=True)
class TopicModelParams:
    """Topic-word simplex rows phi (K, V), label weights eta (L, K), and alpha."""

    phi: np.ndarray
    eta: np.ndarray
    alpha: float

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=np.float64)
        eta = np.asarray(self.eta, dtype=np.float64)
        if phi.ndim != 2 or phi.shape[0] < 1:
            raise InvalidParameterError("phi must be a K x V matrix with K >= 1")
        if np.any(phi <= 0):
            raise InvalidParameterError("phi rows must be strictly positive")
        if np.max(np.abs(phi.sum(axis=1) - 1.0)) > SIMPLEX_ATOL:
            raise InvalidParameterError("phi rows must sum to 1 within 1e-9")
        if eta.ndim != 2 or eta.shape[1] != phi.shape[0]:
            raise InvalidParameterError("eta must be L x K")
        if not np.all(np.isfinite(eta)):
            raise InvalidParameterError("eta must be finite")
        if not (self.alpha > 0 and np.isfinite(self.alpha)):
            raise InvalidParameterError("alpha must be a positive real")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def n_topics(self):
        return self.phi.shape[0]

    @property
    def vocab_size(self):
        return self.phi.shape[1]

    @property
    def n_labels(self):
        return self.eta.shape[0]


@dataclass(frozen=True)
class DocTopicVector:
    """A point on the topic simplex."""

    pi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pi", check_simplex(self.pi))


def _as_pi(pi):
    return pi.pi if isinstance(pi, DocTopicVector) else np.asarray(pi, np.float64)


def doc_data_loglik(x, pi, params: TopicModelParams) -> float:
    """log Mult(x | pi @ phi) without the multinomial coefficient.

    Raises InvalidParameterError if the mixture probability of an observed
    word underflows to zero (never silently propagates -inf).
    """
    pi = _as_pi(pi)
    ids, counts = _sparse_items(x)
    if ids.size and ids.max() >= params.vocab_size:
        raise InvalidParameterError("token id out of range for phi")
    mix = pi @ params.phi[:, ids]
    if not np.all(mix > 0):
        raise InvalidParameterError(
            "mixture probability underflow: sum_k pi_k phi_kv = 0 for an observed word"
        )
    return float(counts @ np.log(mix))


def doc_label_loglik(y_row, pi, params: TopicModelParams) -> float:
    """Sum over labels of the Bernoulli log-likelihood through the logistic link.

    Uses the stable form y*z - logaddexp(0, z), so saturated logits neither
    overflow nor lose the sign of the tail.
    """
    pi = _as_pi(pi)
    y = np.asarray(y_row, dtype=np.float64)
    z = params.eta @ pi
    if y.shape != z.shape:
        raise InvalidParameterError("y_row length must equal L")
    return float(np.sum(y * z - np.logaddexp(0.0, z)))


def dirichlet_logpdf(pi, alpha: float, K: int) -> float:
    """Full symmetric Dirichlet log-density, including the log-gamma normalizer."""
    pi = _as_pi(pi)
    if pi.shape != (K,):
        raise InvalidParameterError("pi length must equal K")
    if not (alpha > 0):
        raise InvalidParameterError("alpha must be positive")
    norm = float(gammaln(K * alpha) - K * gammaln(alpha))
    if alpha == 1.0:
        return norm
    if np.any(pi <= 0):
        if alpha < 1.0:
            raise InvalidParameterError(
                "pi on the simplex boundary with alpha < 1: density is infinite"
            )
        return float("-inf")
    return norm + (alpha - 1.0) * float(np.sum(np.log(pi)))
