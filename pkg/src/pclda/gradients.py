"""Prediction-constrained loss and exact gradients.

The loss sums, per document, the Dirichlet prior and multinomial data
log-likelihoods at the predict-mode MAP embedding, plus lambda times the
label log-likelihood at that same embedding.  Gradients with respect to the
unconstrained parameterization (row-softmax logits for phi, raw eta) are
exact: the reverse sweep walks the stored embedding iterates once, so the
dependence of the embedding itself on phi is fully accounted for.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln

from .embed import EmbedConfig
from .errors import InvalidParameterError
from .model import Corpus, TopicModelParams


def softmax_rows(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class UnconstrainedParams:
    """Trainable parameterization: phi = row-softmax(phi_logits); eta raw.

    alpha is carried along but never trained.
    """

    phi_logits: np.ndarray
    eta: np.ndarray
    alpha: float

    def __post_init__(self):
        pl = np.asarray(self.phi_logits, dtype=np.float64)
        eta = np.asarray(self.eta, dtype=np.float64)
        if not (np.all(np.isfinite(pl)) and np.all(np.isfinite(eta))):
            raise InvalidParameterError("parameters must be finite")
        if pl.ndim != 2 or eta.ndim != 2 or eta.shape[1] != pl.shape[0]:
            raise InvalidParameterError("phi_logits must be K x V and eta L x K")
        object.__setattr__(self, "phi_logits", pl)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "alpha", float(self.alpha))

    def to_topic_params(self) -> TopicModelParams:
        return TopicModelParams(softmax_rows(self.phi_logits), self.eta, self.alpha)

    @classmethod
    def from_topic_params(cls, params: TopicModelParams):
        return cls(np.log(params.phi), params.eta, params.alpha)


@dataclass(frozen=True)
class ParamGradients:
    phi_logits: np.ndarray
    eta: np.ndarray

    def ravel(self):
        return np.concatenate([self.phi_logits.ravel(), self.eta.ravel()])


@dataclass(frozen=True)
class RegConfig:
    """Quadratic regularizer strengths on phi_logits and eta."""

    tau_phi: float = 1e-5
    tau_eta: float = 1e-4


@dataclass(frozen=True)
class LossBreakdown:
    """Signed decomposition: terms are log-likelihood contributions,
    total = -(prior + data + lambda * label) + reg is the minimized loss.

    For the discriminative-only (BP) variant the generative terms are still
    reported but carry weight zero in the total.
    """

    prior_term: float
    data_term: float
    label_term: float
    reg_term: float
    total: float


class _Kahan:
    """Compensated scalar accumulator: per-chunk sums stay order-deterministic."""

    def __init__(self):
        self.s = 0.0
        self.c = 0.0

    def add(self, x):
        y = x - self.c
        t = self.s + y
        self.c = (t - self.s) - y
        self.s = t


def _check_args(corpus, lam, cfg):
    if corpus.n_docs == 0:
        raise InvalidParameterError("empty corpus")
    if lam < 0:
        raise InvalidParameterError("lambda must be nonnegative")
    if lam > 0 and corpus.labels is None:
        raise InvalidParameterError("lambda > 0 requires a labeled corpus")
    if cfg.joint_label_weight != 0.0:
        raise InvalidParameterError(
            "the PC loss always embeds in predict mode (joint_label_weight must be 0)"
        )
    if cfg.mode != "convex":
        raise InvalidParameterError(
            "gradients are implemented for the convex embedding mode only"
        )


def _forward_chunk(X, phi, alpha, cfg, keep_iterates):
    """Unrolled exponentiated-gradient forward pass over a dense chunk."""
    n, _ = X.shape
    K = phi.shape[0]
    Pi = np.full((n, K), 1.0 / K)
    iterates = [Pi] if keep_iterates else None
    for _ in range(cfg.T):
        M = Pi @ phi
        G = (X / M) @ phi.T
        if alpha != 1.0:
            G = G + (alpha - 1.0) / Pi
        A = cfg.nu * G
        A -= A.max(axis=1, keepdims=True)
        P = Pi * np.exp(A)
        Pi = P / P.sum(axis=1, keepdims=True)
        if keep_iterates:
            iterates.append(Pi)
    return (np.stack(iterates) if keep_iterates else None), Pi


def _chunk_terms(X, Y, Pi, phi, eta, alpha):
    """Per-chunk (prior, data, label) log-likelihood sums at embedded Pi."""
    n, K = Pi.shape
    norm = float(gammaln(K * alpha) - K * gammaln(alpha))
    prior = n * norm
    if alpha != 1.0:
        prior += (alpha - 1.0) * float(np.log(Pi).sum())
    M = Pi @ phi
    with np.errstate(divide="ignore"):
        logM = np.where(X > 0, np.log(np.where(M > 0, M, 1.0)), 0.0)
    if np.any((M <= 0) & (X > 0)):
        raise InvalidParameterError("mixture probability underflow")
    data = float((X * logM).sum())
    label = 0.0
    if Y is not None:
        Z = Pi @ eta.T
        label = float((Y * Z - np.logaddexp(0.0, Z)).sum())
    return prior, data, label


def _chunk_backward(X, Y, iterates, phi, eta, alpha, lam, cfg, gen_weight,
                    sweep_hook=None):
    """Reverse sweep over the stored iterates of one chunk.

    Returns gradients of the (minimized) loss with respect to phi (the
    simplex matrix; the caller applies the softmax backward) and eta.
    """
    Pi_T = iterates[-1]
    M_T = Pi_T @ phi
    Xm_T = X / M_T
    # seed: d = dLoss/dPi at the final iterate
    d = Xm_T @ phi.T
    if alpha != 1.0:
        d = d + (alpha - 1.0) / Pi_T
    d = d * gen_weight
    phi_bar = gen_weight * (Pi_T.T @ Xm_T)
    if lam > 0 and Y is not None:
        Z = Pi_T @ eta.T
        R = lam * (Y - 1.0 / (1.0 + np.exp(-Z)))
        d = d + R @ eta
        eta_bar = R.T @ Pi_T
    else:
        eta_bar = np.zeros_like(eta)
    d = -d
    phi_bar = -phi_bar
    eta_bar = -eta_bar
    # walk the T stored iterates in reverse, once each
    for t in range(cfg.T, 0, -1):
        if sweep_hook is not None:
            sweep_hook(t)
        Pi = iterates[t - 1]
        q = iterates[t]
        e = (d - (d * q).sum(axis=1, keepdims=True)) * q
        g_bar = cfg.nu * e
        M = Pi @ phi
        Xm2 = X / (M * M)
        A = g_bar @ phi
        d_new = e / Pi - (Xm2 * A) @ phi.T
        if alpha != 1.0:
            d_new = d_new - (alpha - 1.0) * g_bar / (Pi * Pi)
        phi_bar += g_bar.T @ (X / M) - Pi.T @ (Xm2 * A)
        d = d_new
    return phi_bar, eta_bar


def _loss_impl(corpus, params, lam, cfg, reg, want_grad, gen_weight=1.0,
               chunk_size=1024, sweep_hook=None):
    _check_args(corpus, lam, cfg)
    topic = params.to_topic_params()
    phi, eta, alpha = topic.phi, params.eta, params.alpha
    prior_acc, data_acc, label_acc = _Kahan(), _Kahan(), _Kahan()
    phi_bar = np.zeros_like(phi) if want_grad else None
    eta_bar = np.zeros_like(eta) if want_grad else None
    D = corpus.n_docs
    for start in range(0, D, chunk_size):
        idx = range(start, min(start + chunk_size, D))
        X = corpus.to_dense(idx)
        Y = None if corpus.labels is None else corpus.labels[list(idx)].astype(float)
        iterates, Pi = _forward_chunk(X, phi, alpha, cfg, keep_iterates=want_grad)
        p, dt, lt = _chunk_terms(X, Y, Pi, phi, eta, alpha)
        prior_acc.add(p)
        data_acc.add(dt)
        label_acc.add(lt)
        if want_grad:
            pb, eb = _chunk_backward(X, Y, iterates, phi, eta, alpha, lam, cfg,
                                     gen_weight, sweep_hook)
            phi_bar += pb
            eta_bar += eb
    reg_term = 0.5 * reg.tau_phi * float((params.phi_logits ** 2).sum()) \
        + 0.5 * reg.tau_eta * float((eta ** 2).sum())
    total = -(gen_weight * (prior_acc.s + data_acc.s) + lam * label_acc.s) + reg_term
    breakdown = LossBreakdown(prior_acc.s, data_acc.s, label_acc.s, reg_term, total)
    if not want_grad:
        return breakdown, None
    # row-softmax backward: L_bar = phi * (phi_bar - rowsum(phi_bar * phi))
    inner = (phi_bar * phi).sum(axis=1, keepdims=True)
    logits_bar = phi * (phi_bar - inner) + reg.tau_phi * params.phi_logits
    eta_bar = eta_bar + reg.tau_eta * eta
    return breakdown, ParamGradients(logits_bar, eta_bar)


def pc_loss(corpus: Corpus, params: UnconstrainedParams, lam: float,
            cfg: EmbedConfig, reg: RegConfig = RegConfig()) -> LossBreakdown:
    """Evaluate the prediction-constrained objective over a corpus."""
    breakdown, _ = _loss_impl(corpus, params, lam, cfg, reg, want_grad=False)
    return breakdown


def pc_loss_grad(corpus: Corpus, params: UnconstrainedParams, lam: float,
                 cfg: EmbedConfig, reg: RegConfig = RegConfig(),
                 gen_weight: float = 1.0, sweep_hook=None):
    """Loss plus its exact gradient, differentiating through the embedding.

    gen_weight scales the generative (prior + data) terms; 0 gives the
    discriminative-only variant.  The embedding itself always ascends the
    full data posterior regardless of gen_weight.
    """
    return _loss_impl(corpus, params, lam, cfg, reg, want_grad=True,
                      gen_weight=gen_weight, sweep_hook=sweep_hook)


def finite_diff_gradient(corpus: Corpus, params: UnconstrainedParams, lam: float,
                         cfg: EmbedConfig, reg: RegConfig = RegConfig(),
                         h: float = 1e-5, gen_weight: float = 1.0) -> ParamGradients:
    """Central-difference gradient of the total loss.

    Cost is two loss evaluations per parameter coordinate; small instances
    only.  Test oracle: keep independent of the reverse-sweep path.
    """
    if h <= 0:
        raise InvalidParameterError("h must be positive")

    def total_at(pl, et):
        p = UnconstrainedParams(pl, et, params.alpha)
        b, _ = _loss_impl(corpus, p, lam, cfg, reg, want_grad=False,
                          gen_weight=gen_weight)
        return b.total

    pl0 = params.phi_logits.copy()
    et0 = params.eta.copy()
    g_pl = np.zeros_like(pl0)
    for i in np.ndindex(pl0.shape):
        pl = pl0.copy()
        pl[i] = pl0[i] + h
        up = total_at(pl, et0)
        pl[i] = pl0[i] - h
        dn = total_at(pl, et0)
        g_pl[i] = (up - dn) / (2 * h)
    g_et = np.zeros_like(et0)
    for i in np.ndindex(et0.shape):
        et = et0.copy()
        et[i] = et0[i] + h
        up = total_at(pl0, et)
        et[i] = et0[i] - h
        dn = total_at(pl0, et)
        g_et[i] = (up - dn) / (2 * h)
    return ParamGradients(g_pl, g_et)
