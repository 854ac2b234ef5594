import math

import numpy as np
import pytest

from zsic import attention as at
from zsic import data
from zsic.numerics import ParamStore, Tensor, bilstm_forward


class Stats:
    def __init__(self, probs):
        self.probs = probs

    def prob(self, token):
        return self.probs.get(token, 0.0)


class FixedClf:
    def __init__(self, probs):
        self.probs = probs

    def predict_proba(self, w):
        return np.asarray(self.probs[int(w[0])])


def one_dim_table(tokens):
    return data.EmbeddingTable(1, {t: np.array([float(i)]) for i, t in enumerate(tokens)})


class TestGeneralWordImportance:
    def test_unseen_word(self):
        assert at.general_word_importance("x", Stats({})) == 1.0

    def test_half_at_eps(self):
        assert at.general_word_importance("x", Stats({"x": 1e-5})) == 0.5

    def test_frequent_word(self):
        assert at.general_word_importance("x", Stats({"x": 0.01})) == pytest.approx(9.990e-4, abs=1e-7)

    def test_monotone(self):
        probs = np.linspace(0, 1, 50)
        vals = [at.general_word_importance("x", Stats({"x": p})) for p in probs]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert all(0 < v <= 1 for v in vals)


class TestClassSpecificImportance:
    @pytest.mark.parametrize(
        "probs,expected",
        [([0.25] * 4, 1 / math.log(4)), ([0.5, 0.5], 1 / math.log(2)), ([1.0, 0.0, 0.0], 1000.0)],
    )
    def test_values(self, probs, expected):
        t = at.class_specific_importance("a", one_dim_table(["a"]), FixedClf({0: probs}))
        assert t == pytest.approx(expected, rel=1e-12)

    def test_ridge_puts_mass_on_own_class(self):
        labels = [data.IntentLabel(0, "a", ("a",)), data.IntentLabel(1, "b", ("b",))]
        table = data.EmbeddingTable(2, {"a": np.array([1.0, 0.0]), "b": np.array([0.0, 1.0])})
        clf = at.fit_ridge_classifier(labels, table)
        for i, tok in enumerate("ab"):
            assert np.argmax(clf.predict_proba(table[tok])) == i

    def test_ridge_uses_all_labels(self):
        labels = [data.IntentLabel(i, n, (n,)) for i, n in enumerate("abc")]
        table = data.EmbeddingTable(3, {n: np.eye(3)[i] for i, n in enumerate("abc")})
        assert at.fit_ridge_classifier(labels, table).n_classes == 3


def test_signature_ablation_channels():
    stats = Stats({"a": 1e-5})
    table = one_dim_table(["a"])
    clf = FixedClf({0: [0.5, 0.5]})
    np.testing.assert_allclose(at.signature(["a"], table, stats, clf), [[0.5, 1 / math.log(2)]])
    np.testing.assert_allclose(at.signature(["a"], table, stats, clf, {"gw"}), [[1.0, 1 / math.log(2)]])
    np.testing.assert_allclose(at.signature(["a"], table, stats, clf, {"cw"}), [[0.5, 1.0]])


def test_parse_ablations():
    assert at.parse_ablations("gw, meta-adapt") == {"gw", "meta_adapt"}
    assert at.parse_ablations(None) == frozenset()
    with pytest.raises(ValueError):
        at.parse_ablations("ds,mlp")
    with pytest.raises(ValueError):
        at.parse_ablations("attention")


@pytest.fixture
def attn():
    store = ParamStore()
    return at.MixtureAttention.init(store, d_w=3, d_h=4, d_b=2, d_a=5, rng=np.random.default_rng(7)), store


class TestAttentionDistributions:
    def test_single_token(self, attn):
        a, _ = attn
        assert at.ds_attention([[0.3, 2.0]], a.sig) == pytest.approx([1.0])
        assert at.mlp_attention(np.ones((8, 1)), a.mlp) == pytest.approx([1.0])

    def test_sum_to_one(self, attn, rng):
        a, _ = attn
        p = at.ds_attention(rng.random((6, 2)), a.sig)
        q = at.mlp_attention(rng.uniform(-1, 1, (8, 6)), a.mlp)
        assert abs(p.sum() - 1) < 1e-12 and abs(q.sum() - 1) < 1e-12
        assert np.all(p > 0) and np.all(q > 0)

    def test_zero_w2_gives_uniform(self, attn, rng):
        a, _ = attn
        a.mlp.W2.data[...] = 0
        np.testing.assert_allclose(at.mlp_attention(rng.uniform(-1, 1, (8, 5)), a.mlp), [0.2] * 5, atol=1e-15)

    def test_duplicate_columns_equal_weight(self, attn, rng):
        a, _ = attn
        col = rng.uniform(-1, 1, (8, 1))
        H = np.hstack([col, rng.uniform(-1, 1, (8, 1)), col])
        q = at.mlp_attention(H, a.mlp)
        assert q[0] == q[2]

    def test_mixture(self, attn):
        a, _ = attn
        p, q = np.array([0.7, 0.3]), np.array([0.2, 0.8])
        np.testing.assert_allclose(at.mixture(p, q, a.mix), [0.45, 0.55])
        a.mix.b.data[...] = [[1.0, 0.0]]
        np.testing.assert_array_equal(at.mixture(p, q, a.mix), p)
        a.mix.b.data[...] = [[2.0, -1.0]]
        np.testing.assert_allclose(at.mixture(p, p, a.mix), p, atol=1e-15)
        with pytest.raises(ValueError):
            at.mixture(p, [1.0], a.mix)


@pytest.fixture
def featurizer(rng):
    tokens = ["w%d" % i for i in range(6)]
    table = data.EmbeddingTable(3, {t: rng.standard_normal(3) for t in tokens})
    labels = [data.IntentLabel(0, "w0", ("w0", "w1")), data.IntentLabel(1, "w2", ("w2",))]
    stats = data.unigram_stats([data.Utterance(tuple(tokens[:4]), 0, "")])
    return at.Featurizer(table, stats, at.fit_ridge_classifier(labels, table))


@pytest.mark.parametrize("ablations", [frozenset(), {"ds"}, {"mlp"}, {"gw", "cw"}])
def test_encode_matches_loop_oracle(attn, featurizer, ablations):
    a, _ = attn
    utt = data.Utterance(("w1", "w5", "w0", "w3"), 0, "")
    emb = featurizer.table.lookup(utt.tokens)
    H = bilstm_forward(emb, a.enc.fwd, a.enc.bwd)
    sig = at.signature(utt.tokens, featurizer.table, featurizer.stats, featurizer.clf, ablations)
    featurizer.ablations = frozenset(ablations)
    featurizer._sig.clear()
    x = at.encode(utt, featurizer, a, ablations)
    p = at.ds_attention(sig, a.sig)
    q = at.mlp_attention(H, a.mlp)
    w = q if "ds" in ablations else p if "mlp" in ablations else at.mixture(p, q, a.mix)
    oracle = sum(w[t] * H[:, t] for t in range(H.shape[1]))
    np.testing.assert_allclose(x, oracle, atol=1e-12)


def test_single_token_selects_state(attn, featurizer):
    a, _ = attn
    utt = data.Utterance(("w2",), 1, "")
    H = bilstm_forward(featurizer.table.lookup(utt.tokens), a.enc.fwd, a.enc.bwd)
    np.testing.assert_allclose(at.encode(utt, featurizer, a), H[:, 0], atol=1e-15)


def test_batch_matches_single(attn, featurizer):
    a, _ = attn
    utts = [data.Utterance(("w1", "w2"), 0, ""), data.Utterance(("w0", "w3", "w4", "w5", "w1"), 1, "")]
    X, S, mask = featurizer.batch(utts)
    batch = at.encode_batch(X, S, mask, a).data
    for i, u in enumerate(utts):
        np.testing.assert_allclose(batch[i], at.encode(u, featurizer, a), atol=1e-14)


def test_group_names_registered(attn):
    _, store = attn
    for abl in ("ds", "mlp"):
        assert set(at.group_names(abl)) <= set(store.names())
    assert at.group_names("gw") == []
