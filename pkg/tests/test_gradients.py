import numpy as np
import pytest

from pclda import (Corpus, EmbedConfig, InvalidParameterError, RegConfig,
                   UnconstrainedParams, dirichlet_logpdf, doc_data_loglik,
                   doc_label_loglik, finite_diff_gradient, map_embed, pc_loss,
                   pc_loss_grad)
from pclda.gradients import softmax_rows

from conftest import random_instance

NOREG = RegConfig(tau_phi=0.0, tau_eta=0.0)


def max_rel_err(a, b, floor=1e-8):
    err = 0.0
    for x, y in zip(a.ravel(), b.ravel()):
        if abs(x) < floor and abs(y) < floor:
            continue
        err = max(err, abs(x - y) / max(abs(x), abs(y)))
    return err


class TestUnconstrainedParams:
    def test_softmax_roundtrip(self):
        corpus, params, _ = random_instance(0)
        topic = params.to_topic_params()
        back = UnconstrainedParams.from_topic_params(topic)
        assert np.allclose(back.to_topic_params().phi, topic.phi, atol=1e-12)

    def test_softmax_rows_is_simplex(self):
        rng = np.random.default_rng(0)
        phi = softmax_rows(5 * rng.standard_normal((4, 7)))
        assert np.allclose(phi.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(phi > 0)

    def test_nonfinite_rejected(self):
        with pytest.raises(InvalidParameterError):
            UnconstrainedParams(np.array([[np.nan, 0.0]]), np.zeros((1, 1)), 1.0)


class TestPcLoss:
    def test_breakdown_identity(self):
        corpus, params, cfg = random_instance(1)
        for lam in (0.0, 1.0, 10.0):
            lb = pc_loss(corpus, params, lam, cfg)
            expect = -(lb.prior_term + lb.data_term + lam * lb.label_term) \
                + lb.reg_term
            assert lb.total == pytest.approx(expect, abs=1e-9)

    def test_lambda_zero_is_unsupervised_surrogate(self):
        # [TRIVIAL] total = -(prior + data) at the embedded pi, no reg
        corpus, params, cfg = random_instance(2)
        lb = pc_loss(corpus, params, 0.0, cfg, NOREG)
        topic = params.to_topic_params()
        direct = 0.0
        for doc in corpus.docs:
            pi = map_embed(doc, topic, cfg)
            direct += dirichlet_logpdf(pi, topic.alpha, topic.n_topics)
            direct += doc_data_loglik(doc, pi, topic)
        assert lb.total == pytest.approx(-direct, abs=1e-9)

    def test_single_document_compositional(self):
        # [TRIVIAL] terms match direct core-model calls at the embedding
        corpus, params, cfg = random_instance(3)
        one = corpus.subset([0])
        lam = 10.0
        lb = pc_loss(one, params, lam, cfg, NOREG)
        topic = params.to_topic_params()
        pi = map_embed(one.docs[0], topic, cfg)
        assert lb.prior_term == pytest.approx(
            dirichlet_logpdf(pi, topic.alpha, topic.n_topics), abs=1e-12)
        assert lb.data_term == pytest.approx(
            doc_data_loglik(one.docs[0], pi, topic), abs=1e-12)
        assert lb.label_term == pytest.approx(
            doc_label_loglik(one.labels[0].astype(float), pi, topic), abs=1e-12)

    def test_reimplementation_oracle(self):
        # [DERIVED] straightforward per-document re-evaluation, K=2 V=3 D=4
        rng = np.random.default_rng(99)
        docs = tuple({int(v): int(c) for v, c in enumerate(rng.integers(1, 5, 3))}
                     for _ in range(4))
        labels = np.array([[0], [1], [1], [0]], dtype=np.int8)
        corpus = Corpus(3, docs, labels)
        params = UnconstrainedParams(rng.standard_normal((2, 3)),
                                     rng.standard_normal((1, 2)), 1.1)
        cfg = EmbedConfig(T=30, nu=0.005)
        lam = 10.0
        lb = pc_loss(corpus, params, lam, cfg, NOREG)
        topic = params.to_topic_params()
        total = 0.0
        for d, doc in enumerate(docs):
            pi = map_embed(doc, topic, cfg)
            total -= dirichlet_logpdf(pi, 1.1, 2)
            total -= doc_data_loglik(doc, pi, topic)
            total -= lam * doc_label_loglik(labels[d].astype(float), pi, topic)
        assert lb.total == pytest.approx(total, abs=1e-9)

    def test_lambda_affine(self):
        corpus, params, cfg = random_instance(4)
        l0 = pc_loss(corpus, params, 0.0, cfg).total
        l1 = pc_loss(corpus, params, 1.0, cfg).total
        l5 = pc_loss(corpus, params, 5.0, cfg).total
        assert l5 == pytest.approx(l0 + 5.0 * (l1 - l0), abs=1e-9)

    def test_validation(self):
        corpus, params, cfg = random_instance(5)
        with pytest.raises(InvalidParameterError):
            pc_loss(corpus, params, -1.0, cfg)
        unlabeled = Corpus(corpus.vocab_size, corpus.docs)
        with pytest.raises(InvalidParameterError):
            pc_loss(unlabeled, params, 1.0, cfg)
        with pytest.raises(InvalidParameterError):
            pc_loss(corpus, params, 1.0,
                    EmbedConfig(T=cfg.T, nu=cfg.nu, joint_label_weight=1.0))


class TestPcLossGrad:
    def test_matches_finite_differences(self):
        # [DERIVED] the headline exactness check (more seeds in acceptance P1)
        for seed, lam in ((0, 0.0), (1, 1.0), (2, 10.0)):
            corpus, params, cfg = random_instance(seed)
            _, grad = pc_loss_grad(corpus, params, lam, cfg)
            fd = finite_diff_gradient(corpus, params, lam, cfg)
            assert max_rel_err(grad.ravel(), fd.ravel()) <= 1e-4

    def test_eta_grad_at_lambda_zero_is_regularizer(self):
        # [TRIVIAL] label term absent: only tau_eta * eta remains
        corpus, params, cfg = random_instance(6)
        reg = RegConfig(tau_phi=1e-5, tau_eta=1e-4)
        _, grad = pc_loss_grad(corpus, params, 0.0, cfg, reg)
        assert np.allclose(grad.eta, reg.tau_eta * params.eta, atol=1e-15)

    def test_lambda_linearity_of_eta_grad(self):
        # [TRIVIAL] doubling lambda doubles the label contribution exactly
        corpus, params, cfg = random_instance(7)
        _, g0 = pc_loss_grad(corpus, params, 0.0, cfg, NOREG)
        _, g1 = pc_loss_grad(corpus, params, 3.0, cfg, NOREG)
        _, g2 = pc_loss_grad(corpus, params, 6.0, cfg, NOREG)
        assert np.allclose(g2.eta, 2.0 * g1.eta, atol=1e-12)
        assert np.allclose(g0.eta, 0.0, atol=1e-15)

    def test_permutation_equivariance(self):
        corpus, params, cfg = random_instance(8)
        perm = np.array([2, 0, 1])
        permuted = UnconstrainedParams(params.phi_logits[perm],
                                       params.eta[:, perm], params.alpha)
        _, g = pc_loss_grad(corpus, params, 2.0, cfg)
        _, gp = pc_loss_grad(corpus, permuted, 2.0, cfg)
        assert np.allclose(g.phi_logits[perm], gp.phi_logits, atol=1e-12)
        assert np.allclose(g.eta[:, perm], gp.eta, atol=1e-12)

    def test_gen_weight_zero_drops_generative_grad(self):
        # discriminative-only: loss total excludes prior+data, grads follow
        corpus, params, cfg = random_instance(9)
        lb, grad = pc_loss_grad(corpus, params, 1.0, cfg, NOREG, gen_weight=0.0)
        assert lb.total == pytest.approx(-lb.label_term, abs=1e-9)
        fd = finite_diff_gradient(corpus, params, 1.0, cfg, NOREG,
                                  gen_weight=0.0)
        assert max_rel_err(grad.ravel(), fd.ravel()) <= 1e-4

    def test_phi_grad_nonzero_under_gen_weight_zero(self):
        # [TRIVIAL] phi still shapes the embedding, so its gradient survives
        corpus, params, cfg = random_instance(10)
        _, grad = pc_loss_grad(corpus, params, 1.0, cfg, NOREG, gen_weight=0.0)
        assert np.max(np.abs(grad.phi_logits)) > 0.0

    def test_reverse_sweep_visits_each_iterate_once(self):
        # memory contract: T reverse steps, each stored iterate visited once
        corpus, params, cfg = random_instance(11)
        seen = []
        pc_loss_grad(corpus, params, 1.0, cfg, sweep_hook=seen.append)
        assert seen == list(range(cfg.T, 0, -1))

    def test_determinism(self):
        corpus, params, cfg = random_instance(12)
        lb1, g1 = pc_loss_grad(corpus, params, 2.0, cfg)
        lb2, g2 = pc_loss_grad(corpus, params, 2.0, cfg)
        assert lb1.total == lb2.total
        assert np.array_equal(g1.ravel(), g2.ravel())

    def test_chunked_accumulation_matches_single_chunk(self):
        # document order and chunk boundaries must not change the result
        from pclda.gradients import _loss_impl
        corpus, params, cfg = random_instance(13)
        lb_a, g_a = _loss_impl(corpus, params, 2.0, cfg, RegConfig(),
                               want_grad=True, chunk_size=1)
        lb_b, g_b = _loss_impl(corpus, params, 2.0, cfg, RegConfig(),
                               want_grad=True, chunk_size=1024)
        assert lb_a.total == pytest.approx(lb_b.total, abs=1e-12)
        assert np.allclose(g_a.ravel(), g_b.ravel(), atol=1e-12)


class TestFiniteDiffGradient:
    def test_h_validation(self):
        corpus, params, cfg = random_instance(14)
        with pytest.raises(InvalidParameterError):
            finite_diff_gradient(corpus, params, 1.0, cfg, h=0.0)

    def test_quadratic_regularizer_exact(self):
        # [TRIVIAL] central differences are exact on quadratics up to roundoff
        corpus, params, cfg = random_instance(15)
        reg = RegConfig(tau_phi=0.5, tau_eta=0.25)
        fd = finite_diff_gradient(corpus, params, 0.0, cfg, reg, h=1e-4)
        _, exact = pc_loss_grad(corpus, params, 0.0, cfg, reg)
        assert np.allclose(fd.eta, exact.eta, atol=1e-8)

    def test_h_sweep_truncation_order(self):
        # [DERIVED] error vs the exact gradient shrinks roughly like h^2
        corpus, params, cfg = random_instance(16, K=2, V=4, D=2, T=10)
        _, exact = pc_loss_grad(corpus, params, 1.0, cfg)
        errs = []
        for h in (1e-3, 1e-4):
            fd = finite_diff_gradient(corpus, params, 1.0, cfg, h=h)
            errs.append(np.max(np.abs(fd.ravel() - exact.ravel())))
        # two decades of h: expect about four decades of error, allow slack
        assert errs[1] < errs[0] * 1e-1
