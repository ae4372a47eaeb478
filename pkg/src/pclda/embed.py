"""MAP embedding of documents onto the topic simplex.

The embedding is the deterministic outcome of a fixed number T of
exponentiated-gradient ascent steps on the log-posterior of pi given the
document (and optionally its labels, weighted by joint_label_weight).
A fixed T rather than a convergence test keeps the computation a
fixed-depth differentiable graph for the gradient engine.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .model import TopicModelParams, _as_pi, _sparse_items, dirichlet_logpdf

MODES = ("convex", "reparameterized")


@dataclass(frozen=True)
class EmbedConfig:
    """Iteration count, step size, and MAP mode for the embedding."""

    T: int = 100
    nu: float = 0.005
    mode: str = "convex"
    joint_label_weight: float = 0.0

    def __post_init__(self):
        if int(self.T) < 1:
            raise InvalidParameterError("T must be >= 1")
        if not (self.nu > 0):
            raise InvalidParameterError("nu must be > 0")
        if self.mode not in MODES:
            raise InvalidParameterError(f"mode must be one of {MODES}")
        if self.joint_label_weight < 0:
            raise InvalidParameterError("joint_label_weight must be >= 0")
        object.__setattr__(self, "T", int(self.T))
        object.__setattr__(self, "nu", float(self.nu))
        object.__setattr__(self, "joint_label_weight", float(self.joint_label_weight))


def _label_grad(pi, params, y_row, w):
    """w * d/dpi of the Bernoulli label log-likelihood."""
    y = np.asarray(y_row, dtype=np.float64)
    z = params.eta @ pi
    resid = y - 1.0 / (1.0 + np.exp(-z))
    return w * (resid @ params.eta)


def logpost_grad(pi, x, params: TopicModelParams, y_row=None, w: float = 0.0):
    """Coordinate-wise gradient of the ascended log-posterior at pi.

    Objective: (alpha-1) sum_k log pi_k + sum_v x_v log(sum_j pi_j phi_jv)
    plus w times the label log-likelihood when w > 0.  Projection onto the
    simplex tangent is left to the multiplicative update's normalization.
    """
    pi = _as_pi(pi)
    alpha = params.alpha
    if alpha != 1.0 and np.any(pi <= 0):
        raise InvalidParameterError("pi must be strictly interior when alpha != 1")
    ids, counts = _sparse_items(x)
    mix = pi @ params.phi[:, ids]
    if not np.all(mix > 0):
        raise InvalidParameterError("mixture probability underflow in logpost_grad")
    grad = params.phi[:, ids] @ (counts / mix)
    if alpha != 1.0:
        grad = grad + (alpha - 1.0) / pi
    if w > 0.0:
        if y_row is None:
            raise InvalidParameterError("label weight > 0 requires a label row")
        grad = grad + _label_grad(pi, params, y_row, w)
    return grad


def log_posterior(pi, x, params: TopicModelParams, y_row=None, w: float = 0.0):
    """The ascended objective itself (unnormalized log-posterior)."""
    from .model import doc_data_loglik, doc_label_loglik

    pi = _as_pi(pi)
    K = params.n_topics
    val = dirichlet_logpdf(pi, params.alpha, K) + doc_data_loglik(x, pi, params)
    if w > 0.0:
        if y_row is None:
            raise InvalidParameterError("label weight > 0 requires a label row")
        val += w * doc_label_loglik(y_row, pi, params)
    return val


def _embed_loop(x, params, cfg, y_row, w, record=None):
    K = params.n_topics
    if cfg.mode == "convex":
        if params.alpha < 1.0:
            raise InvalidParameterError(
                "convex mode requires alpha >= 1; use mode='reparameterized'"
            )
        pi = np.full(K, 1.0 / K)
        if record is not None:
            record.append(pi.copy())
        for _ in range(cfg.T):
            step = cfg.nu * logpost_grad(pi, x, params, y_row, w)
            # Additive shift is exact under the normalization, so the
            # exponentiation can never overflow.
            step -= step.max()
            p = pi * np.exp(step)
            assert np.all(np.isfinite(p))
            pi = p / p.sum()
            if record is not None:
                record.append(pi.copy())
        return pi
    # Reparameterized ascent in the softmax basis: the change of variables
    # shifts the Dirichlet exponent from (alpha-1) to alpha, which stays
    # positive for all alpha > 0 and removes the boundary singularity.
    ids, counts = _sparse_items(x)
    r = np.zeros(K)
    pi = np.full(K, 1.0 / K)
    if record is not None:
        record.append(pi.copy())
    for _ in range(cfg.T):
        mix = pi @ params.phi[:, ids]
        if not np.all(mix > 0):
            raise InvalidParameterError("mixture probability underflow")
        h = params.phi[:, ids] @ (counts / mix) + params.alpha / pi
        if w > 0.0:
            h = h + _label_grad(pi, params, y_row, w) / 1.0
        # chain rule through softmax: dF/dr_j = pi_j * (h_j - pi . h)
        g_r = pi * (h - pi @ h)
        r = r + cfg.nu * g_r
        r = r - r.max()
        e = np.exp(r)
        pi = e / e.sum()
        if record is not None:
            record.append(pi.copy())
    return pi


def map_embed(x, params: TopicModelParams, cfg: EmbedConfig, record=None):
    """Data-only (predict-mode) MAP embedding of one document.

    Deterministic for fixed inputs; the result lies on the simplex within
    1e-9.  Pass a list as ``record`` to capture every iterate (tests).
    """
    if cfg.joint_label_weight > 0:
        raise InvalidParameterError(
            "cfg.joint_label_weight > 0: use map_embed_joint with a label row"
        )
    return _embed_loop(x, params, cfg, None, 0.0, record)


def map_embed_joint(x, y_row, params: TopicModelParams, cfg: EmbedConfig, record=None):
    """Train-mode MAP embedding: ascends the data-plus-label objective."""
    w = cfg.joint_label_weight
    if w > 0.0 and y_row is None:
        raise InvalidParameterError("joint embedding requires a label row")
    return _embed_loop(x, params, cfg, y_row, w, record)


def embed_batch(X, params: TopicModelParams, cfg: EmbedConfig, Y=None, w=None,
                keep_iterates=False):
    """Vectorized embedding of a dense (n, V) count matrix.

    Returns the final (n, K) matrix, or the full (T+1, n, K) iterate stack
    when keep_iterates is set.  Numerically equivalent to map_embed run per
    document (same update, same overflow shift).
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    K = params.n_topics
    phi = params.phi
    alpha = params.alpha
    if w is None:
        w = cfg.joint_label_weight
    if w > 0.0 and Y is None:
        raise InvalidParameterError("label weight > 0 requires labels")
    if cfg.mode != "convex":
        # desk-scale fallback: per-document loop
        out = np.empty((n, K))
        for i in range(n):
            ids = np.nonzero(X[i])[0]
            out[i] = _embed_loop((ids, X[i, ids]), params, cfg,
                                 None if Y is None else Y[i], w)
        return out
    if alpha < 1.0:
        raise InvalidParameterError("convex mode requires alpha >= 1")
    Pi = np.full((n, K), 1.0 / K)
    iterates = [Pi.copy()] if keep_iterates else None
    eta = params.eta
    Yf = None if Y is None else np.asarray(Y, dtype=np.float64)
    for _ in range(cfg.T):
        M = Pi @ phi
        G = (X / M) @ phi.T
        if alpha != 1.0:
            G = G + (alpha - 1.0) / Pi
        if w > 0.0:
            Z = Pi @ eta.T
            G = G + w * ((Yf - 1.0 / (1.0 + np.exp(-Z))) @ eta)
        A = cfg.nu * G
        A -= A.max(axis=1, keepdims=True)
        P = Pi * np.exp(A)
        Pi = P / P.sum(axis=1, keepdims=True)
        if keep_iterates:
            iterates.append(Pi.copy())
    if keep_iterates:
        return np.stack(iterates)
    return Pi


def _simplex_grid(K, step):
    """Regular grid on the K-simplex, scanned in lexicographic order."""
    n = int(round(1.0 / step))
    if K == 2:
        for i in range(n + 1):
            a = i * step
            yield np.array([a, 1.0 - a])
    else:
        for i in range(n + 1):
            for j in range(n + 1 - i):
                a, b = i * step, j * step
                yield np.array([a, b, 1.0 - a - b])


def brute_force_map(x, params: TopicModelParams, grid_step: float, y_row=None,
                    w: float = 0.0):
    """Grid-search oracle for the MAP objective.  Test use only; K in {2,3}.

    Ties break to the first grid point scanned (lexicographic order).
    """
    K = params.n_topics
    if K not in (2, 3):
        raise InvalidParameterError("brute_force_map supports K in {2, 3} only")
    best_val = -np.inf
    best_pi = None
    for pi in _simplex_grid(K, grid_step):
        pi = np.clip(pi, 0.0, None)
        pi = pi / pi.sum()
        if params.alpha < 1.0 and np.any(pi <= 0):
            continue
        if params.alpha > 1.0 and np.any(pi <= 0):
            val = -np.inf
        else:
            val = log_posterior(pi, x, params, y_row, w)
        if val > best_val:
            best_val = val
            best_pi = pi
    if best_pi is None:
        # objective was -inf everywhere scanned; return the first point
        best_pi = next(iter(_simplex_grid(K, grid_step)))
    return best_pi
