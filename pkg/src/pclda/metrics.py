"""Heldout metrics, the fitness-landscape export, and topic reports.

"Heldout negative log likelihood" is defined throughout as the MAP plug-in
per-token NLL: embed each document with the predict-mode MAP, then evaluate
the multinomial data term (multinomial coefficient excluded) at that point.
The marginal likelihood is never estimated; the plug-in form matches the
training surrogate and is computable uniformly for every method.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .data import _atomic_write_text
from .embed import EmbedConfig, embed_batch
from .errors import InvalidParameterError, UndefinedMetricError
from .model import Corpus, TopicModelParams

CSV_FLOAT_FMT = "{:.9g}"


@dataclass(frozen=True)
class MetricsRecord:
    method: str
    lam: float
    K: int
    map_mode: str  # "train" | "predict"
    split: str
    data_nll_per_token: float
    label_nll_per_doc: float
    auc_per_label: tuple  # None entries where AUC is undefined
    auc_mean: float | None
    label_names: tuple = ()


def auc(scores, labels) -> float:
    """Probability a random positive outranks a random negative; ties 0.5.

    Normalized Mann-Whitney U via average ranks, which matches the pairwise
    count exactly (ranks are integer multiples of 1/2).
    """
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    pos = int((y == 1).sum())
    neg = int((y == 0).sum())
    if pos == 0 or neg == 0:
        raise UndefinedMetricError("AUC undefined: a single-class label column")
    ranks = rankdata(scores)
    u = ranks[y == 1].sum() - pos * (pos + 1) / 2.0
    return float(u / (pos * neg))


def _embed_for_mode(corpus, params, cfg, map_mode, train_mode_weight):
    X = corpus.to_dense()
    if map_mode == "predict":
        return X, embed_batch(X, params, cfg, w=0.0)
    if map_mode == "train":
        if corpus.labels is None:
            raise InvalidParameterError("train-mode embedding requires labels")
        return X, embed_batch(X, params, cfg, Y=corpus.labels.astype(float),
                              w=train_mode_weight)
    raise InvalidParameterError("map_mode must be 'train' or 'predict'")


def heldout_metrics(corpus: Corpus, params: TopicModelParams, cfg: EmbedConfig,
                    map_mode: str = "predict", method: str = "",
                    lam: float = 0.0, split: str = "",
                    train_mode_weight: float = 1.0) -> MetricsRecord:
    """Per-token data NLL, per-doc label NLL, and per-label AUC on a split.

    Predict mode never reads the labels during embedding; train mode ascends
    the joint objective with the given label weight.
    """
    X, Pi = _embed_for_mode(corpus, params, cfg, map_mode, train_mode_weight)
    M = Pi @ params.phi
    with np.errstate(divide="ignore"):
        logM = np.where(X > 0, np.log(np.where(M > 0, M, 1.0)), 0.0)
    if np.any((M <= 0) & (X > 0)):
        raise InvalidParameterError("mixture probability underflow")
    data_nll = float(-(X * logM).sum() / X.sum())
    label_nll = float("nan")
    aucs = ()
    auc_mean = None
    if corpus.labels is not None and params.n_labels == corpus.n_labels:
        Y = corpus.labels.astype(float)
        Z = Pi @ params.eta.T
        label_nll = float(-(Y * Z - np.logaddexp(0.0, Z)).sum() / corpus.n_docs)
        vals = []
        for l in range(corpus.n_labels):
            try:
                vals.append(auc(Z[:, l], corpus.labels[:, l]))
            except UndefinedMetricError:
                vals.append(None)
        aucs = tuple(vals)
        defined = [a for a in vals if a is not None]
        auc_mean = float(np.mean(defined)) if defined else None
    return MetricsRecord(method, float(lam), params.n_topics, map_mode, split,
                         data_nll, label_nll, aucs, auc_mean, corpus.label_names)


def fitness_landscape(models, corpus: Corpus, cfg: EmbedConfig,
                      split: str = "train", train_mode_weight: float = 1.0):
    """Two records (train and predict mode) per (tag, lam, params) model.

    Per-model failures are collected and returned alongside, so one bad
    model does not sink the batch.
    """
    records, errors = [], []
    for tag, lam, params in models:
        for mode in ("train", "predict"):
            try:
                records.append(heldout_metrics(
                    corpus, params, cfg, map_mode=mode, method=tag, lam=lam,
                    split=split, train_mode_weight=train_mode_weight))
            except Exception as exc:  # propagate per-model, continue others
                errors.append((tag, mode, str(exc)))
    return records, errors


# ---------------------------------------------------------------------------
# serialization (CSV + JSON mirror)

def _csv_header(label_names):
    return ["method", "lambda", "K", "map_mode", "split", "data_nll_per_token",
            "label_nll_per_doc", "auc_mean",
            *(f"auc_{name}" for name in label_names)]


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return CSV_FLOAT_FMT.format(x)
    return str(x)


def metrics_to_csv(records) -> str:
    if not records:
        raise InvalidParameterError("no records to serialize")
    names = records[0].label_names
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_csv_header(names))
    for r in records:
        if r.label_names != names:
            raise InvalidParameterError("records have mismatched label columns")
        aucs = list(r.auc_per_label) + [None] * (len(names) - len(r.auc_per_label))
        writer.writerow([r.method, _fmt(r.lam), r.K, r.map_mode, r.split,
                         _fmt(r.data_nll_per_token), _fmt(r.label_nll_per_doc),
                         _fmt(r.auc_mean), *(_fmt(a) for a in aucs)])
    return buf.getvalue()


def metrics_from_csv(text: str):
    rows = list(csv.reader(io.StringIO(text)))
    header = rows[0]
    names = tuple(h[len("auc_"):] for h in header if h.startswith("auc_")
                  and h != "auc_mean")
    records = []
    for row in rows[1:]:
        if not row:
            continue
        d = dict(zip(header, row))
        aucs = tuple(float(d[f"auc_{n}"]) if d[f"auc_{n}"] else None
                     for n in names)
        records.append(MetricsRecord(
            d["method"], float(d["lambda"]), int(d["K"]), d["map_mode"],
            d["split"], float(d["data_nll_per_token"]),
            float(d["label_nll_per_doc"]),
            aucs, float(d["auc_mean"]) if d["auc_mean"] else None, names))
    return records


def write_metrics(records, csv_path, json_path=None):
    text = metrics_to_csv(records)
    _atomic_write_text(csv_path, text)
    if json_path is not None:
        names = records[0].label_names
        rows = []
        for r in records:
            row = {"method": r.method, "lambda": float(_fmt(r.lam)), "K": r.K,
                   "map_mode": r.map_mode, "split": r.split,
                   "data_nll_per_token": float(_fmt(r.data_nll_per_token)),
                   "label_nll_per_doc": float(_fmt(r.label_nll_per_doc)),
                   "auc_mean": None if r.auc_mean is None else float(_fmt(r.auc_mean))}
            for name, a in zip(names, r.auc_per_label):
                row[f"auc_{name}"] = None if a is None else float(_fmt(a))
            rows.append(row)
        _atomic_write_text(json_path, json.dumps(rows, indent=1, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# topic interpretation

def topic_report(params: TopicModelParams, corpus: Corpus, cfg: EmbedConfig,
                 top_n: int = 10):
    """Per-topic word rankings by p(word|topic) and by p(topic|word).

    p(k|v) = phi_kv w_k / sum_j phi_jv w_j with w the corpus-mean embedded
    topic weights, so anchor words are those a single topic claims.
    """
    if corpus.n_docs == 0:
        raise InvalidParameterError("topic_report needs a nonempty corpus")
    Pi = embed_batch(corpus.to_dense(), params, cfg, w=0.0)
    w = Pi.mean(axis=0)
    joint = params.phi * w[:, None]
    p_topic_given_word = joint / joint.sum(axis=0, keepdims=True)
    report = []
    for k in range(params.n_topics):
        top_words = np.argsort(-params.phi[k])[:top_n]
        anchors = np.argsort(-p_topic_given_word[k])[:top_n]
        report.append({
            "topic": k,
            "weight": float(w[k]),
            "eta": {name: float(params.eta[l, k])
                    for l, name in enumerate(corpus.label_names
                                             or tuple(f"label_{i}"
                                                      for i in range(params.n_labels)))},
            "top_words_by_prob": [(int(v), float(params.phi[k, v]))
                                  for v in top_words],
            "anchor_words": [(int(v), float(p_topic_given_word[k, v]))
                             for v in anchors],
        })
    return report


def format_topic_report(report, vocab_names=None) -> str:
    def name(v):
        return vocab_names[v] if vocab_names else f"word_{v}"

    lines = []
    for entry in report:
        etas = "  ".join(f"{lbl}: {val:+.3f}" for lbl, val in entry["eta"].items())
        lines.append(f"topic {entry['topic']} (weight {entry['weight']:.3f})  {etas}")
        lines.append("  top words by p(word|topic):")
        for v, p in entry["top_words_by_prob"]:
            lines.append(f"    {name(v):>12} {p:.3f}")
        lines.append("  anchor words by p(topic|word):")
        for v, p in entry["anchor_words"]:
            lines.append(f"    {name(v):>12} {p:.3f}")
        lines.append("")
    return "\n".join(lines)
