import numpy as np
import pytest

from pclda import Corpus, EmbedConfig, TopicModelParams, UnconstrainedParams


def random_instance(seed, K=3, V=5, D=4, L=2, T=20):
    """Small random corpus + params for gradient and embedding tests."""
    rng = np.random.default_rng(seed)
    docs = []
    for _ in range(D):
        counts = rng.integers(0, 6, size=V)
        if counts.sum() == 0:
            counts[rng.integers(V)] = 1
        docs.append({int(v): int(c) for v, c in enumerate(counts) if c > 0})
    labels = rng.integers(0, 2, size=(D, L)).astype(np.int8)
    # keep every label column two-class so AUC stays defined
    for l in range(L):
        labels[0, l] = 0
        labels[1, l] = 1
    corpus = Corpus(V, tuple(docs), labels)
    params = UnconstrainedParams(0.5 * rng.standard_normal((K, V)),
                                 0.5 * rng.standard_normal((L, K)),
                                 alpha=1.1)
    cfg = EmbedConfig(T=T, nu=0.005)
    return corpus, params, cfg


_criterion_lines = []


def record_criterion(name, passed, detail=""):
    """Collect a one-line verdict, echoed after the test summary."""
    status = "PASS" if passed else "FAIL"
    _criterion_lines.append(f"{name}: {status}  {detail}".rstrip())


def pytest_terminal_summary(terminalreporter):
    if _criterion_lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(_criterion_lines):
            terminalreporter.write_line(line)


@pytest.fixture
def small_instance():
    return random_instance(0)


@pytest.fixture
def simple_params():
    phi = np.array([[0.7, 0.2, 0.1], [0.1, 0.2, 0.7]])
    eta = np.array([[2.0, -1.0]])
    return TopicModelParams(phi, eta, 1.1)
