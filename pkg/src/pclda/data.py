"""Synthetic corpus generators, file formats, and seeded splits.

Corpus file format (bit-exact): UTF-8 text, header line
``#pclda-corpus v1 V=<int>``, then one document per line as space-separated
fields: ``doc_id`` followed by ``tokenId:count`` pairs with ascending token
ids.  Labels live in a separate CSV with header ``doc_id,<name>,...`` and
{0,1} values, one row per document in corpus order.  Checkpoints are a
single JSON document.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DataFormatError, InvalidParameterError
from .model import Corpus, TopicModelParams

CORPUS_HEADER_PREFIX = "#pclda-corpus v1 V="
CHECKPOINT_VERSION = "pclda-checkpoint-v1"


# ---------------------------------------------------------------------------
# toy bars (3x3 grid, rare top-left signal word)

@dataclass(frozen=True)
class ToyBarsConfig:
    n_docs: int = 500
    grid_side: int = 3
    horizontal_bars: tuple = (1, 2)   # grid rows used as bar topics
    vertical_bars: tuple = (1, 2)     # grid columns used as bar topics
    doc_length_range: tuple = (40, 60)
    signal_count: int = 1
    positive_fraction: float = 0.5
    bar_mass: float = 0.96            # mass a bar keeps on its own 3 words
    seed: int = 0

    def __post_init__(self):
        if self.n_docs < 1:
            raise InvalidParameterError("n_docs must be positive")
        if self.grid_side != 3:
            raise InvalidParameterError("the bars task is defined on a 3x3 grid")
        for r in self.horizontal_bars + self.vertical_bars:
            if not 0 <= r < self.grid_side:
                raise InvalidParameterError("bar index out of grid range")
        lo, hi = self.doc_length_range
        if not (1 <= lo <= hi):
            raise InvalidParameterError("bad doc_length_range")
        if not 0 <= self.positive_fraction <= 1:
            raise InvalidParameterError("positive_fraction must be in [0,1]")

    @property
    def vocab_size(self):
        return self.grid_side * self.grid_side


def toy_bars_topics(cfg: ToyBarsConfig) -> np.ndarray:
    """Planted bar distributions over the grid vocabulary, one row per bar.

    Word 0 (the signal word, top-left) carries zero mass in every bar; each
    bar keeps bar_mass on its own 3 grid words and spreads the rest over
    the remaining non-signal words.
    """
    V = cfg.vocab_size
    side = cfg.grid_side
    bars = [tuple(r * side + c for c in range(side)) for r in cfg.horizontal_bars]
    bars += [tuple(r * side + c for r in range(side)) for c in cfg.vertical_bars]
    topics = np.zeros((len(bars), V))
    for k, words in enumerate(bars):
        others = [v for v in range(1, V) if v not in words]
        topics[k, list(words)] = cfg.bar_mass / len(words)
        topics[k, others] = (1.0 - cfg.bar_mass) / len(others)
    return topics


def gen_toy_bars(cfg: ToyBarsConfig) -> Corpus:
    """Misspecified benchmark: bar-structured counts plus a rare signal word.

    Each document mixes one or two bar topics for its (heavy) bar counts;
    positive documents additionally carry exactly signal_count copies of
    word 0 and the single binary label records that presence.
    """
    rng = np.random.default_rng(cfg.seed)
    topics = toy_bars_topics(cfg)
    n_bars = topics.shape[0]
    lo, hi = cfg.doc_length_range
    docs = []
    labels = np.zeros((cfg.n_docs, 1), dtype=np.int8)
    for d in range(cfg.n_docs):
        n_mix = int(rng.integers(1, 3))
        chosen = rng.choice(n_bars, size=n_mix, replace=False)
        mix = topics[chosen].mean(axis=0)
        total = int(rng.integers(lo, hi + 1))
        counts = rng.multinomial(total, mix)
        positive = rng.random() < cfg.positive_fraction
        if positive:
            counts[0] += cfg.signal_count
            labels[d, 0] = 1
        docs.append({int(v): int(c) for v, c in enumerate(counts) if c > 0})
    return Corpus(cfg.vocab_size, tuple(docs), labels, ("signal",))


# ---------------------------------------------------------------------------
# EHR-like multi-label stand-in (planted sLDA instance)

def gen_synthetic_ehr(n_docs: int, vocab_size: int = 100, n_labels: int = 11,
                      k_true: int = 5, seed: int = 0, alpha: float = 1.0,
                      doc_length_range=(30, 80), topic_concentration: float = 0.1,
                      eta_scale: float = 1.0):
    """Draw a corpus from a planted sLDA model; returns (corpus, planted params).

    Topics come from a sparse Dirichlet over the vocabulary, pi ~ Dir(alpha),
    words are multinomial, and each of the L labels is Bernoulli through the
    planted logistic weights (eta_scale = 0 gives coin-flip labels).
    """
    if min(n_docs, vocab_size, n_labels, k_true) < 1:
        raise InvalidParameterError("all sizes must be positive")
    rng = np.random.default_rng(seed)
    phi = rng.dirichlet(np.full(vocab_size, topic_concentration), size=k_true)
    phi = np.maximum(phi, 1e-12)
    phi = phi / phi.sum(axis=1, keepdims=True)
    eta = eta_scale * rng.standard_normal((n_labels, k_true))
    lo, hi = doc_length_range
    docs = []
    labels = np.zeros((n_docs, n_labels), dtype=np.int8)
    for d in range(n_docs):
        pi = rng.dirichlet(np.full(k_true, alpha))
        total = int(rng.integers(lo, hi + 1))
        counts = rng.multinomial(total, pi @ phi)
        while counts.sum() == 0:  # unreachable with total >= 1, kept defensive
            counts = rng.multinomial(total, pi @ phi)
        z = eta @ pi
        labels[d] = (rng.random(n_labels) < 1.0 / (1.0 + np.exp(-z))).astype(np.int8)
        docs.append({int(v): int(c) for v, c in enumerate(counts) if c > 0})
    names = tuple(f"drug_{j}" for j in range(n_labels))
    corpus = Corpus(vocab_size, tuple(docs), labels, names)
    planted = TopicModelParams(phi, eta, alpha)
    return corpus, planted


# ---------------------------------------------------------------------------
# splits

def split(corpus: Corpus, fractions, seed: int):
    """Deterministic shuffled partition; every split must get >= 1 document."""
    fractions = tuple(float(f) for f in fractions)
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise InvalidParameterError("fractions must sum to 1")
    D = corpus.n_docs
    sizes = [int(np.floor(f * D)) for f in fractions]
    remainder = D - sum(sizes)
    order_by_frac = np.argsort([-f for f in fractions], kind="stable")
    for i in range(remainder):
        sizes[order_by_frac[i % len(sizes)]] += 1
    if any(s == 0 for s in sizes):
        raise InvalidParameterError("a split would receive zero documents")
    perm = np.random.default_rng(seed).permutation(D)
    parts = []
    start = 0
    for s in sizes:
        parts.append(corpus.subset(perm[start:start + s]))
        start += s
    return tuple(parts)


# ---------------------------------------------------------------------------
# file formats

def _atomic_write_text(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def write_corpus(corpus: Corpus, path):
    buf = io.StringIO()
    buf.write(f"{CORPUS_HEADER_PREFIX}{corpus.vocab_size}\n")
    for d, doc in enumerate(corpus.docs):
        pairs = " ".join(f"{v}:{doc[v]}" for v in sorted(doc))
        buf.write(f"{d} {pairs}\n")
    _atomic_write_text(path, buf.getvalue())


def read_corpus(path, labels_path=None) -> Corpus:
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(CORPUS_HEADER_PREFIX):
        raise DataFormatError("missing '#pclda-corpus v1' header", line_number=1)
    try:
        V = int(lines[0][len(CORPUS_HEADER_PREFIX):])
    except ValueError:
        raise DataFormatError("malformed vocabulary size in header", line_number=1)
    docs = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) < 2:
            raise DataFormatError("document with no tokens (N_d >= 1 required)",
                                  line_number=lineno)
        doc = {}
        prev = -1
        for pair in fields[1:]:
            try:
                tok, cnt = pair.split(":")
                v, c = int(tok), int(cnt)
            except ValueError:
                raise DataFormatError(f"malformed tokenId:count pair {pair!r}",
                                      line_number=lineno)
            if v >= V or v < 0:
                raise DataFormatError(f"token id {v} out of range for V={V}",
                                      line_number=lineno)
            if c < 1:
                raise DataFormatError(f"count {c} < 1", line_number=lineno)
            if v <= prev:
                raise DataFormatError("token ids must be strictly ascending",
                                      line_number=lineno)
            prev = v
            doc[v] = c
        docs.append(doc)
    labels = names = None
    if labels_path is not None:
        labels, names = read_labels(labels_path, expected_docs=len(docs))
    try:
        return Corpus(V, tuple(docs), labels, names or ())
    except InvalidParameterError as exc:
        raise DataFormatError(str(exc))


def write_labels(corpus: Corpus, path):
    if corpus.labels is None:
        raise InvalidParameterError("corpus has no labels to write")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["doc_id", *corpus.label_names])
    for d in range(corpus.n_docs):
        writer.writerow([d, *corpus.labels[d].tolist()])
    _atomic_write_text(path, buf.getvalue())


def read_labels(path, expected_docs=None):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["doc_id"]:
        raise DataFormatError("labels CSV must start with a 'doc_id,...' header",
                              line_number=1)
    names = tuple(rows[0][1:])
    labels = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(names) + 1:
            raise DataFormatError("label row width does not match header",
                                  line_number=lineno)
        try:
            vals = [int(x) for x in row[1:]]
        except ValueError:
            raise DataFormatError("labels must be integers in {0,1}",
                                  line_number=lineno)
        if any(v not in (0, 1) for v in vals):
            raise DataFormatError("labels must be in {0,1}", line_number=lineno)
        labels.append(vals)
    labels = np.asarray(labels, dtype=np.int8)
    if expected_docs is not None and labels.shape[0] != expected_docs:
        raise DataFormatError(
            f"labels have {labels.shape[0]} rows but corpus has {expected_docs} docs")
    return labels, names


# ---------------------------------------------------------------------------
# model checkpoints

def write_checkpoint(params: TopicModelParams, path, config_echo=None):
    doc = {
        "version": CHECKPOINT_VERSION,
        "K": params.n_topics,
        "V": params.vocab_size,
        "L": params.n_labels,
        "alpha": params.alpha,
        "phi": params.phi.ravel().tolist(),
        "eta": params.eta.ravel().tolist(),
        "config_echo": config_echo or {},
    }
    _atomic_write_text(path, json.dumps(doc, indent=1, sort_keys=True) + "\n")


def read_checkpoint(path):
    """Returns (TopicModelParams, config_echo)."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"checkpoint is not valid JSON: {exc}")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise DataFormatError(
            f"unsupported checkpoint version {doc.get('version')!r}")
    K, V, L = int(doc["K"]), int(doc["V"]), int(doc["L"])
    phi = np.asarray(doc["phi"], dtype=np.float64).reshape(K, V)
    eta = np.asarray(doc["eta"], dtype=np.float64).reshape(L, K)
    try:
        params = TopicModelParams(phi, eta, float(doc["alpha"]))
    except InvalidParameterError as exc:
        raise DataFormatError(f"invalid checkpoint parameters: {exc}")
    return params, doc.get("config_echo", {})
