"""Trainer variants: PC, label-replicated ML, discriminative-only BP,
unsupervised, and the lambda ladder with warm starts."""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .embed import EmbedConfig, embed_batch
from .errors import InvalidParameterError, TrainingDivergedError
from .gradients import (LossBreakdown, ParamGradients, RegConfig,
                        UnconstrainedParams, _chunk_terms, pc_loss,
                        pc_loss_grad, softmax_rows)
from .model import Corpus, TopicModelParams
from .optim import Adam, AdamConfig

OBJECTIVES = ("pc", "ml_replicated", "bp", "unsupervised")


@dataclass(frozen=True)
class TrainConfig:
    objective: str = "pc"
    lam: float = 100.0
    epochs: int = 200
    batch_size: int | None = None  # None = full batch
    adam: AdamConfig = field(default_factory=AdamConfig)
    init: str = "random"
    reg: RegConfig = field(default_factory=RegConfig)
    embed: EmbedConfig = field(default_factory=EmbedConfig)
    seed: int = 0
    patience: int = 20

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise InvalidParameterError(f"objective must be one of {OBJECTIVES}")
        if self.lam < 0:
            raise InvalidParameterError("lambda must be nonnegative")
        if self.epochs < 1:
            raise InvalidParameterError("epochs must be positive")


@dataclass
class TrainTrace:
    train: list
    valid: list | None
    val_metric: list | None
    wall_clock: list
    final_params: TopicModelParams
    best_params: TopicModelParams
    best_epoch: int


def random_init(K, V, L, alpha, seed, scale=0.1) -> UnconstrainedParams:
    rng = np.random.default_rng(seed)
    return UnconstrainedParams(scale * rng.standard_normal((K, V)),
                               np.zeros((L, K)), alpha)


def _check_finite(lb: LossBreakdown, epoch: int):
    for term in ("prior_term", "data_term", "label_term", "reg_term", "total"):
        if not np.isfinite(getattr(lb, term)):
            raise TrainingDivergedError(epoch, term)


def _as_divergence(exc: InvalidParameterError, epoch: int, stepped: bool):
    """Numeric-validity failures after the first step are divergences.

    Exploded parameters can fail validation (softmax rows collapsing to
    exact zeros) before the loss itself turns non-finite; once a step has
    been taken that is a divergence, not a caller error.
    """
    if stepped:
        raise TrainingDivergedError(epoch, "parameters") from exc
    raise exc


def label_nll_per_doc(corpus: Corpus, params: TopicModelParams,
                      cfg: EmbedConfig, map_mode="predict",
                      train_mode_weight=1.0) -> float:
    """Mean negative label log-likelihood at the embedded pi."""
    if corpus.labels is None:
        raise InvalidParameterError("corpus has no labels")
    X = corpus.to_dense()
    Y = corpus.labels.astype(float)
    if map_mode == "train":
        Pi = embed_batch(X, params, cfg, Y=Y, w=train_mode_weight)
    else:
        Pi = embed_batch(X, params, cfg, w=0.0)
    Z = Pi @ params.eta.T
    return float(-(Y * Z - np.logaddexp(0.0, Z)).sum() / corpus.n_docs)


def data_nll_per_token(corpus: Corpus, params: TopicModelParams,
                       cfg: EmbedConfig) -> float:
    X = corpus.to_dense()
    Pi = embed_batch(X, params, cfg, w=0.0)
    M = Pi @ params.phi
    with np.errstate(divide="ignore"):
        logM = np.where(X > 0, np.log(np.where(M > 0, M, 1.0)), 0.0)
    return float(-(X * logM).sum() / X.sum())


def _val_metric(valid, topic_params, cfg, supervised):
    if supervised:
        return label_nll_per_doc(valid, topic_params, cfg.embed)
    return data_nll_per_token(valid, topic_params, cfg.embed)


def _run_adam(corpus, init_params, cfg, gen_weight, lam, valid_corpus):
    params = init_params
    adam = Adam({"phi_logits": params.phi_logits, "eta": params.eta}, cfg.adam)
    supervised = lam > 0 and corpus.labels is not None
    rng = np.random.default_rng(cfg.seed)
    train_lbs, val_lbs, val_metrics, walls = [], [], [], []
    best = (np.inf, params, -1)
    D = corpus.n_docs
    full_batch = cfg.batch_size is None or cfg.batch_size >= D
    since_best = 0
    stepped = False
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        try:
            if full_batch:
                lb, grad = pc_loss_grad(corpus, params, lam, cfg.embed, cfg.reg,
                                        gen_weight=gen_weight)
                _check_finite(lb, epoch)
                train_lbs.append(lb)
                new = adam.step(
                    {"phi_logits": params.phi_logits, "eta": params.eta},
                    {"phi_logits": grad.phi_logits, "eta": grad.eta})
                params = UnconstrainedParams(new["phi_logits"], new["eta"],
                                             params.alpha)
                stepped = True
            else:
                order = rng.permutation(D)
                for start in range(0, D, cfg.batch_size):
                    sub = corpus.subset(order[start:start + cfg.batch_size])
                    lb, grad = pc_loss_grad(sub, params, lam, cfg.embed, cfg.reg,
                                            gen_weight=gen_weight)
                    _check_finite(lb, epoch)
                    new = adam.step(
                        {"phi_logits": params.phi_logits, "eta": params.eta},
                        {"phi_logits": grad.phi_logits, "eta": grad.eta})
                    params = UnconstrainedParams(new["phi_logits"], new["eta"],
                                                 params.alpha)
                    stepped = True
                lb = pc_loss(corpus, params, lam, cfg.embed, cfg.reg)
                _check_finite(lb, epoch)
                train_lbs.append(lb)
            topic = params.to_topic_params()
        except InvalidParameterError as exc:
            _as_divergence(exc, epoch, stepped)
        if valid_corpus is not None:
            val_lbs.append(pc_loss(valid_corpus, params, lam, cfg.embed, cfg.reg))
            vm = _val_metric(valid_corpus, topic, cfg, supervised)
            val_metrics.append(vm)
            if vm < best[0]:
                best = (vm, params, epoch)
                since_best = 0
            else:
                since_best += 1
        walls.append(time.perf_counter() - t0)
        if valid_corpus is not None and since_best > cfg.patience:
            break
    try:
        final_topic = params.to_topic_params()
    except InvalidParameterError as exc:
        _as_divergence(exc, len(train_lbs) - 1, stepped)
    if valid_corpus is not None and best[2] >= 0:
        best_topic = best[1].to_topic_params()
        best_epoch = best[2]
    else:
        best_topic, best_epoch = final_topic, len(train_lbs) - 1
    trace = TrainTrace(train_lbs,
                       val_lbs if valid_corpus is not None else None,
                       val_metrics if valid_corpus is not None else None,
                       walls, final_topic, best_topic, best_epoch)
    return final_topic, trace


def train_pc(corpus: Corpus, init_params: UnconstrainedParams, cfg: TrainConfig,
             valid_corpus: Corpus | None = None):
    """Adam on the prediction-constrained objective (predict-mode embedding)."""
    if cfg.lam > 0 and corpus.labels is None:
        raise InvalidParameterError("PC training with lambda > 0 requires labels")
    return _run_adam(corpus, init_params, cfg, gen_weight=1.0, lam=cfg.lam,
                     valid_corpus=valid_corpus)


def train_unsupervised(corpus: Corpus, init_params: UnconstrainedParams,
                       cfg: TrainConfig, valid_corpus: Corpus | None = None):
    """MAP-surrogate maximum likelihood: the PC objective at lambda = 0."""
    return _run_adam(corpus, init_params, cfg, gen_weight=1.0, lam=0.0,
                     valid_corpus=valid_corpus)


def train_bp_slda(corpus: Corpus, init_params: UnconstrainedParams,
                  cfg: TrainConfig, valid_corpus: Corpus | None = None):
    """Discriminative-only training: label term and regularizers only.

    The embedding is still the predict-mode data MAP, so phi keeps a
    (purely discriminative) gradient through the unrolled iterations.
    """
    if cfg.lam not in (0.0, 1.0):
        warnings.warn("bp objective ignores lambda", stacklevel=2)
    if corpus.labels is None:
        raise InvalidParameterError("BP training requires labels")
    return _run_adam(corpus, init_params, cfg, gen_weight=0.0, lam=1.0,
                     valid_corpus=valid_corpus)


def _ml_epoch_grads(X, Y, Pi, params, lam, reg):
    phi = softmax_rows(params.phi_logits)
    eta = params.eta
    M = Pi @ phi
    phi_bar = -(Pi.T @ (X / M))
    inner = (phi_bar * phi).sum(axis=1, keepdims=True)
    logits_bar = phi * (phi_bar - inner) + reg.tau_phi * params.phi_logits
    Z = Pi @ eta.T
    R = lam * (Y - 1.0 / (1.0 + np.exp(-Z)))
    eta_bar = -(R.T @ Pi) + reg.tau_eta * eta
    return ParamGradients(logits_bar, eta_bar)


def train_ml_slda(corpus: Corpus, init_params: UnconstrainedParams,
                  cfg: TrainConfig, valid_corpus: Corpus | None = None):
    """Label-replicated joint maximum likelihood with instantiated pi.

    Alternates (a) per-document train-mode MAP with label weight lambda and
    (b) one Adam step on phi, eta holding pi fixed.  lambda = 1 is standard
    sLDA; lambda >> 1 is the replicated (Power) variant.
    """
    if corpus.labels is None:
        raise InvalidParameterError("ML-sLDA requires labels")
    lam = cfg.lam
    params = init_params
    adam = Adam({"phi_logits": params.phi_logits, "eta": params.eta}, cfg.adam)
    X = corpus.to_dense()
    Y = corpus.labels.astype(float)
    train_lbs, val_lbs, val_metrics, walls = [], [], [], []
    best = (np.inf, params, -1)
    since_best = 0
    stepped = False
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        try:
            topic = params.to_topic_params()
            Pi = embed_batch(X, topic, cfg.embed, Y=Y, w=lam)
            prior, data, label = _chunk_terms(X, Y, Pi, topic.phi, topic.eta,
                                              topic.alpha)
        except InvalidParameterError as exc:
            _as_divergence(exc, epoch, stepped)
        reg_term = 0.5 * cfg.reg.tau_phi * float((params.phi_logits ** 2).sum()) \
            + 0.5 * cfg.reg.tau_eta * float((params.eta ** 2).sum())
        lb = LossBreakdown(prior, data, label, reg_term,
                           -(prior + data + lam * label) + reg_term)
        _check_finite(lb, epoch)
        train_lbs.append(lb)
        grad = _ml_epoch_grads(X, Y, Pi, params, lam, cfg.reg)
        new = adam.step({"phi_logits": params.phi_logits, "eta": params.eta},
                        {"phi_logits": grad.phi_logits, "eta": grad.eta})
        params = UnconstrainedParams(new["phi_logits"], new["eta"], params.alpha)
        stepped = True
        if valid_corpus is not None:
            topic_new = params.to_topic_params()
            vm = label_nll_per_doc(valid_corpus, topic_new, cfg.embed)
            val_metrics.append(vm)
            if vm < best[0]:
                best, since_best = (vm, params, epoch), 0
            else:
                since_best += 1
        walls.append(time.perf_counter() - t0)
        if valid_corpus is not None and since_best > cfg.patience:
            break
    final_topic = params.to_topic_params()
    if valid_corpus is not None and best[2] >= 0:
        best_topic, best_epoch = best[1].to_topic_params(), best[2]
    else:
        best_topic, best_epoch = final_topic, len(train_lbs) - 1
    trace = TrainTrace(train_lbs, None,
                       val_metrics if valid_corpus is not None else None,
                       walls, final_topic, best_topic, best_epoch)
    return final_topic, trace


@dataclass
class LadderRung:
    lam: float
    params: TopicModelParams | None
    metric: float
    warm_metric: float
    cold_metric: float
    is_best: bool = False
    error: str | None = None


def lambda_ladder(corpus: Corpus, grid, cfg: TrainConfig,
                  init_params: UnconstrainedParams,
                  valid_corpus: Corpus | None = None):
    """Train PC-sLDA across a sorted lambda grid with warm starts.

    Each rung trains both warm-started (from the previous rung's final
    parameters) and from the shared base init, keeps the better by
    validation label NLL (train-split label NLL when no validation split is
    given), and the best rung overall is flagged.
    """
    grid = list(grid)
    if grid != sorted(grid):
        raise InvalidParameterError("lambda grid must be sorted ascending")
    score_corpus = valid_corpus if valid_corpus is not None else corpus
    rungs = []
    prev = None
    for lam in grid:
        rcfg = replace(cfg, lam=float(lam), objective="pc")
        candidates = []
        for tag, start in (("warm", prev), ("cold", init_params)):
            if start is None:
                continue
            try:
                final, trace = train_pc(corpus, start, rcfg, valid_corpus)
                model = trace.best_params
                m = label_nll_per_doc(score_corpus, model, cfg.embed)
                candidates.append((tag, m, model, final))
            except TrainingDivergedError as exc:
                candidates.append((tag, np.inf, None, None))
                warnings.warn(f"lambda={lam} {tag} start diverged: {exc}",
                              stacklevel=2)
        by_tag = {tag: (m, model, final) for tag, m, model, final in candidates}
        warm_m = by_tag.get("warm", (np.nan,))[0]
        cold_m = by_tag["cold"][0]
        ok = [(m, model, final) for _, m, model, final in candidates
              if model is not None]
        if not ok:
            rungs.append(LadderRung(float(lam), None, np.inf,
                                    warm_m if prev is not None else np.nan,
                                    cold_m, error="diverged"))
            continue
        m, model, final = min(ok, key=lambda c: c[0])
        rungs.append(LadderRung(float(lam), model, m,
                                warm_m if prev is not None else np.nan, cold_m))
        # warm-start chain follows the warm branch when it survived
        warm_final = by_tag.get("warm", (None, None, None))[2]
        chain = warm_final if warm_final is not None else final
        prev = UnconstrainedParams.from_topic_params(chain)
    finite = [r for r in rungs if r.params is not None]
    if finite:
        min(finite, key=lambda r: r.metric).is_best = True
    return rungs
