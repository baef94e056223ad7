"""Collapsed Gibbs sampler tests: conditional oracle, recovery, invariants."""

import math

import numpy as np
import pytest

from conftest import greedy_topic_alignment, synthetic_lda_data
from veritopic.errors import DataError, FormatError
from veritopic.lda import (
    GibbsState,
    LdaConfig,
    TopicModel,
    conditional_distribution,
    infer_theta,
    joint_log_likelihood,
    log_likelihood,
    model_from_bytes,
    model_to_bytes,
    read_model_file,
    read_theta_tsv,
    train,
    write_model_file,
    write_theta_tsv,
)


def brute_force_conditional(n_dk, n_kw_table, n_k, word, alpha, beta):
    """Loop evaluation of (n_dk+a)(n_kw+b)/(n_k+Vb), normalized by its sum."""
    k_count = len(n_dk)
    v = len(n_kw_table[0])
    weights = []
    for k in range(k_count):
        weights.append(
            (n_dk[k] + alpha) * (n_kw_table[k][word] + beta) / (n_k[k] + v * beta)
        )
    total = sum(weights)
    return [w / total for w in weights]


class TestConditional:
    def test_uniform_on_zero_counts(self):
        cfg = LdaConfig(k=4, alpha=0.3, beta=0.2, iterations=1, burn_in=0)
        result = conditional_distribution(
            np.zeros(4), np.zeros((4, 5)), np.zeros(4), 2, cfg
        )
        np.testing.assert_allclose(result, np.full(4, 0.25), atol=1e-15)

    def test_hand_computed_example(self):
        # K=2, V=2, alpha=beta=1: unnormalized [2*2/4, 1*1/2] = [1.0, 0.5]
        cfg = LdaConfig(k=2, alpha=1.0, beta=1.0, iterations=1, burn_in=0)
        n_kw = np.array([[1, 1], [0, 0]])
        result = conditional_distribution(np.array([1, 0]), n_kw, np.array([2, 0]), 0, cfg)
        np.testing.assert_allclose(result, [2.0 / 3.0, 1.0 / 3.0], atol=1e-15)

    def test_matches_brute_force_randomized(self):
        rng = np.random.default_rng(123)
        for _ in range(200):
            k = int(rng.integers(1, 8))
            v = int(rng.integers(1, 12))
            alpha = float(rng.uniform(0.01, 2.0))
            beta = float(rng.uniform(0.01, 2.0))
            cfg = LdaConfig(k=k, alpha=alpha, beta=beta, iterations=1, burn_in=0)
            n_kw = rng.integers(0, 20, size=(k, v))
            n_dk = rng.integers(0, 15, size=k)
            n_k = n_kw.sum(axis=1)
            word = int(rng.integers(v))
            ours = conditional_distribution(n_dk, n_kw, n_k, word, cfg)
            oracle = brute_force_conditional(
                n_dk.tolist(), n_kw.tolist(), n_k.tolist(), word, alpha, beta
            )
            np.testing.assert_allclose(ours, oracle, atol=1e-12)

    def test_sums_to_one(self):
        rng = np.random.default_rng(5)
        cfg = LdaConfig(k=6, alpha=0.1, beta=0.01, iterations=1, burn_in=0)
        for _ in range(50):
            n_kw = rng.integers(0, 30, size=(6, 9))
            result = conditional_distribution(
                rng.integers(0, 10, size=6), n_kw, n_kw.sum(axis=1), 3, cfg
            )
            assert abs(result.sum() - 1.0) < 1e-12

    def test_negative_count_rejected(self):
        cfg = LdaConfig(k=2, alpha=1.0, beta=1.0, iterations=1, burn_in=0)
        with pytest.raises(DataError, match="negative"):
            conditional_distribution(
                np.array([-1, 0]), np.zeros((2, 2)), np.zeros(2), 0, cfg
            )

    def test_word_out_of_range(self):
        cfg = LdaConfig(k=2, alpha=1.0, beta=1.0, iterations=1, burn_in=0)
        with pytest.raises(DataError, match="out of range"):
            conditional_distribution(np.zeros(2), np.zeros((2, 2)), np.zeros(2), 2, cfg)


class TestTrain:
    def test_synthetic_recovery(self):
        phi_true, docs = synthetic_lda_data(seed=42)
        cfg = LdaConfig(k=3, alpha=0.1, beta=0.01, iterations=300, burn_in=200, seed=7)
        model = train(docs, cfg, vocab_size=30)
        aligned = greedy_topic_alignment(phi_true, model.phi)
        l1 = np.mean(
            [np.abs(phi_true[i] - model.phi[aligned[i]]).sum() for i in range(3)]
        )
        assert l1 <= 0.15

    def test_single_topic_degenerate(self):
        docs = [[0, 1, 1], [2, 0]]
        cfg = LdaConfig(k=1, alpha=0.5, beta=0.2, iterations=20, burn_in=10, seed=1)
        model = train(docs, cfg, vocab_size=3)
        counts = np.array([2, 2, 1], dtype=float)
        expected_phi = (counts + 0.2) / (5 + 3 * 0.2)
        np.testing.assert_allclose(model.phi[0], expected_phi, atol=1e-12)
        theta = infer_theta(model, docs[0], "d0")
        np.testing.assert_allclose(theta.theta, [1.0], atol=0)

    def test_deterministic_same_seed(self):
        _, docs = synthetic_lda_data(n_docs=30, doc_len=20, seed=9)
        cfg = LdaConfig(k=3, alpha=0.1, beta=0.01, iterations=40, burn_in=20, seed=11)
        a = train(docs, cfg, vocab_size=30)
        b = train(docs, cfg, vocab_size=30)
        assert np.array_equal(a.n_kw, b.n_kw)
        assert np.array_equal(a.phi, b.phi)
        assert model_to_bytes(a) == model_to_bytes(b)

    def test_different_seed_differs(self):
        _, docs = synthetic_lda_data(n_docs=30, doc_len=20, seed=9)
        cfg1 = LdaConfig(k=3, iterations=40, burn_in=20, seed=11)
        cfg2 = LdaConfig(k=3, iterations=40, burn_in=20, seed=12)
        assert not np.array_equal(
            train(docs, cfg1, vocab_size=30).n_kw, train(docs, cfg2, vocab_size=30).n_kw
        )

    def test_count_conservation_every_sweep(self):
        _, docs = synthetic_lda_data(n_docs=10, doc_len=15, seed=3)
        doc_lengths = np.array([len(d) for d in docs])
        total = doc_lengths.sum()
        checked = []

        def on_sweep(sweep: int, state: GibbsState) -> None:
            assert np.array_equal(state.n_dk.sum(axis=1), doc_lengths)
            assert state.n_kw.sum() == total
            assert np.array_equal(state.n_kw.sum(axis=1), state.n_k)
            assert state.n_dk.min() >= 0 and state.n_kw.min() >= 0
            checked.append(sweep)

        cfg = LdaConfig(k=4, iterations=25, burn_in=10, seed=2)
        train(docs, cfg, vocab_size=30, on_sweep=on_sweep)
        assert checked == list(range(25))

    def test_phi_rows_are_distributions(self):
        _, docs = synthetic_lda_data(n_docs=20, doc_len=10, seed=6)
        model = train(docs, LdaConfig(k=5, iterations=30, burn_in=10, seed=4), vocab_size=30)
        assert model.phi.min() >= 0
        np.testing.assert_allclose(model.phi.sum(axis=1), 1.0, atol=1e-9)

    def test_empty_corpus_errors(self):
        cfg = LdaConfig(k=2, iterations=5, burn_in=0, seed=1)
        with pytest.raises(DataError, match="no tokens"):
            train([[], []], cfg, vocab_size=5)
        with pytest.raises(DataError, match="no tokens"):
            train([], cfg, vocab_size=5)

    def test_empty_documents_tolerated_among_real_ones(self):
        cfg = LdaConfig(k=2, iterations=10, burn_in=5, seed=1)
        model = train([[0, 1], [], [2]], cfg, vocab_size=3)
        np.testing.assert_allclose(model.phi.sum(axis=1), 1.0, atol=1e-9)

    def test_burn_in_equals_iterations_falls_back_to_final_counts(self):
        cfg = LdaConfig(k=2, iterations=10, burn_in=10, seed=1)
        model = train([[0, 1, 2, 0]], cfg, vocab_size=3)
        expected = (model.n_kw + cfg.beta) / (
            model.n_k + 3 * cfg.beta
        )[:, None]
        expected /= expected.sum(axis=1, keepdims=True)
        np.testing.assert_allclose(model.phi, expected, atol=1e-12)


@pytest.fixture(scope="module")
def trained():
    phi_true, docs = synthetic_lda_data(seed=42)
    cfg = LdaConfig(
        k=3, alpha=0.1, beta=0.01, iterations=300, burn_in=200, seed=7,
        infer_iterations=50,
    )
    model = train(docs, cfg, vocab_size=30)
    return phi_true, model


class TestInfer:

    def test_empty_doc_prior_mean(self, trained):
        _, model = trained
        theta = infer_theta(model, [], "empty")
        np.testing.assert_allclose(theta.theta, np.full(3, 1 / 3), atol=0)

    def test_pure_topic_doc_recovered(self, trained):
        phi_true, model = trained
        aligned = greedy_topic_alignment(phi_true, model.phi)
        top_words = np.argsort(phi_true[0])[::-1][:10]
        doc = [int(w) for w in top_words] * 3
        theta = infer_theta(model, doc, "probe")
        assert int(np.argmax(theta.theta)) == aligned[0]

    def test_theta_sums_to_one(self, trained):
        _, model = trained
        rng = np.random.default_rng(0)
        for i in range(20):
            doc = rng.integers(0, 30, size=rng.integers(1, 40)).tolist()
            theta = infer_theta(model, doc, f"doc{i}")
            assert theta.theta.min() >= 0
            assert abs(theta.theta.sum() - 1.0) < 1e-9

    def test_deterministic_per_doc_id(self, trained):
        _, model = trained
        doc = [0, 5, 12, 29, 3]
        a = infer_theta(model, doc, "same-id")
        b = infer_theta(model, doc, "same-id")
        assert np.array_equal(a.theta, b.theta)

    def test_stream_depends_on_seed_and_doc_id(self):
        from veritopic.lda import _doc_stream_seed

        assert _doc_stream_seed(7, "a") == _doc_stream_seed(7, "a")
        assert _doc_stream_seed(7, "a") != _doc_stream_seed(7, "b")
        assert _doc_stream_seed(7, "a") != _doc_stream_seed(8, "a")

    def test_does_not_mutate_model(self, trained):
        _, model = trained
        n_kw_before = model.n_kw.copy()
        phi_before = model.phi.copy()
        infer_theta(model, [1, 2, 3, 4, 5], "probe")
        assert np.array_equal(model.n_kw, n_kw_before)
        assert np.array_equal(model.phi, phi_before)
        assert not model.n_kw.flags.writeable

    def test_out_of_vocab_token_rejected(self, trained):
        _, model = trained
        with pytest.raises(DataError, match="outside the model vocabulary"):
            infer_theta(model, [30], "bad")


class TestLogLikelihood:
    def test_empty_corpus_zero(self):
        assert joint_log_likelihood(np.zeros((0, 3)), np.zeros((3, 0)), 0.1, 0.01) == 0.0

    def test_single_token_closed_form(self):
        # K=1, one doc, one token of word 0: word term log(beta/(V*beta)) = log(1/V)
        v, beta = 7, 0.35
        n_dk = np.array([[1]])
        n_kw = np.zeros((1, v))
        n_kw[0, 0] = 1
        value = joint_log_likelihood(n_dk, n_kw, alpha=0.5, beta=beta)
        assert value == pytest.approx(math.log(1.0 / v), abs=1e-12)

    def test_trend_increases_on_synthetic(self):
        _, docs = synthetic_lda_data(n_docs=80, doc_len=30, seed=21)
        cfg = LdaConfig(k=3, iterations=60, burn_in=40, seed=13)
        model = train(docs, cfg, vocab_size=30)
        first = np.mean(model.train_log[:10])
        last = np.mean(model.train_log[-10:])
        assert last > first

    def test_state_wrapper(self):
        n_dk = np.array([[2, 1]])
        n_kw = np.array([[1, 1], [1, 0]])
        state = GibbsState(n_dk, n_kw, n_kw.sum(axis=1), None, None, None)
        cfg = LdaConfig(k=2, alpha=0.1, beta=0.2, iterations=1, burn_in=0)
        assert log_likelihood(state, cfg) == joint_log_likelihood(n_dk, n_kw, 0.1, 0.2)


class TestModelFile:
    def test_roundtrip(self, tmp_path):
        _, docs = synthetic_lda_data(n_docs=15, doc_len=8, seed=2)
        model = train(docs, LdaConfig(k=3, iterations=20, burn_in=10, seed=5), vocab_size=30)
        path = tmp_path / "m.vlda"
        write_model_file(model, path)
        loaded = read_model_file(path)
        assert loaded == model
        assert loaded.config == model.config
        assert np.array_equal(loaded.n_k, model.n_k)

    def test_bad_magic(self):
        with pytest.raises(FormatError, match="not an LDA model"):
            model_from_bytes(b"NOPE" + bytes(64))

    def test_truncated(self, tmp_path):
        _, docs = synthetic_lda_data(n_docs=5, doc_len=6, seed=2)
        model = train(docs, LdaConfig(k=2, iterations=5, burn_in=0, seed=5), vocab_size=30)
        data = model_to_bytes(model)
        with pytest.raises(FormatError, match="truncated"):
            model_from_bytes(data[:-10])


class TestThetaTsv:
    def test_roundtrip(self, tmp_path):
        from veritopic.lda import TopicDistribution

        dists = [
            TopicDistribution("a", np.array([0.25, 0.75])),
            TopicDistribution("b", np.array([0.6, 0.4])),
        ]
        path = tmp_path / "t.tsv"
        write_theta_tsv(dists, path)
        loaded = read_theta_tsv(path)
        assert list(loaded) == ["a", "b"]
        np.testing.assert_array_equal(loaded["a"], [0.25, 0.75])
        np.testing.assert_array_equal(loaded["b"], [0.6, 0.4])

    def test_exact_float_roundtrip(self, tmp_path):
        from veritopic.lda import TopicDistribution

        rng = np.random.default_rng(1)
        theta = rng.dirichlet(np.ones(7))
        path = tmp_path / "t.tsv"
        write_theta_tsv([TopicDistribution("x", theta)], path)
        np.testing.assert_array_equal(read_theta_tsv(path)["x"], theta)

    def test_duplicate_id_rejected(self, tmp_path):
        path = tmp_path / "t.tsv"
        path.write_text("a\t0.5\t0.5\na\t0.5\t0.5\n")
        with pytest.raises(FormatError, match="duplicate"):
            read_theta_tsv(path)


def test_config_validation():
    with pytest.raises(DataError):
        LdaConfig(k=0)
    with pytest.raises(DataError):
        LdaConfig(alpha=0.0)
    with pytest.raises(DataError):
        LdaConfig(iterations=5, burn_in=6)
