import math

import numpy as np
import pytest

from zsic import data, metalearn as ml
from zsic.harness.synth import synth_corpus
from zsic.numerics import AdamState, Tensor

SMALL = dict(d_h=8, d_b=4, d_a=8, d_s=8)


@pytest.fixture(scope="module")
def problem():
    corpus, table = synth_corpus(n_classes=5, n_seen=4, samples_per_class=10, seed=0, d_w=8, scale=3.0)
    split = data.split_standard(corpus)
    return corpus, table, split, data.unigram_stats(split.train)


def make_model(problem, **overrides):
    corpus, table, _, stats = problem
    return ml.Model(corpus.labels, table, stats, ml.TrainConfig(**{**SMALL, **overrides}))


class TestProjection:
    def test_zero_maps_to_zero(self, rng):
        params = ml.ProjectionParams(Tensor(rng.standard_normal((5, 3))), Tensor(rng.standard_normal((4, 5))))
        assert np.all(ml.project_label(np.zeros(3), params) == 0.0)

    def test_scalar_case(self):
        params = ml.ProjectionParams(Tensor(np.ones((1, 1))), Tensor(np.ones((1, 1))))
        assert ml.project_label([1.0], params)[0] == pytest.approx(math.tanh(math.tanh(1.0)), abs=1e-15)
        assert ml.project_label([1.0], params)[0] == pytest.approx(0.64201, abs=1e-5)

    def test_bounded_and_length_checked(self, rng):
        params = ml.ProjectionParams(Tensor(rng.standard_normal((5, 3)) * 10), Tensor(rng.standard_normal((4, 5)) * 10))
        assert np.all(np.abs(ml.project_label(rng.standard_normal(3) * 10, params)) <= 1)
        with pytest.raises(ValueError):
            ml.project_label(np.zeros(4), params)


class TestClassProbabilities:
    def test_spot_values(self):
        p = ml.class_probabilities([0.0], [[0.0], [2.0]])
        np.testing.assert_allclose(p, [0.8808, 0.1192], atol=1e-4)

    def test_equidistant(self):
        np.testing.assert_allclose(ml.class_probabilities([0, 0], [[1, 0], [0, -1]]), [0.5, 0.5])

    def test_single_prototype(self):
        assert ml.class_probabilities([3.0, 4.0], [[0.0, 0.0]])[0] == 1.0

    def test_argmax_is_nearest(self, rng):
        for _ in range(50):
            G = rng.standard_normal((6, 4))
            x = rng.standard_normal(4)
            d = [np.linalg.norm(x - g) for g in G]
            assert np.argmax(ml.class_probabilities(x, G)) == np.argmin(d)


def test_uniform_probabilities_give_log_k(problem):
    model = make_model(problem)
    model.proj.M2.data[...] = 0.0  # every prototype is the zero vector
    batch = [u for u in problem[2].train[:6]]
    classes = sorted(problem[0].seen_ids)
    assert float(model.loss(batch, classes).data) == pytest.approx(math.log(len(classes)), abs=1e-12)


def test_loss_decreases(problem):
    model = make_model(problem)
    seen = sorted(problem[0].seen_ids)
    batch = [u for u in problem[2].train if u.label_id in seen][::2]
    adam = AdamState()
    losses = [ml.meta_train_step(batch, model, adam, 0.01, seen) for _ in range(50)]
    assert losses[-1] < losses[0]


def test_step_rejects_foreign_labels(problem):
    model = make_model(problem)
    batch = problem[2].train[:3]
    with pytest.raises(ValueError):
        ml.meta_train_step(batch, model, AdamState(), 0.01, {99})
    with pytest.raises(ValueError):
        ml.meta_adapt_step(batch, model, AdamState(), 0.01, {99})


def test_adapt_ablation_is_noop(problem):
    model = make_model(problem, ablations="meta_adapt")
    before = model.store.state_dict()
    batch = [u for u in problem[2].train if u.label_id == 0][:4]
    assert ml.meta_adapt_step(batch, model, AdamState(), 0.1, {0}, {0, 1}) is None
    after = model.store.state_dict()
    assert all(np.array_equal(before[k], after[k]) for k in before)


def test_adapt_moves_projection(problem):
    model = make_model(problem)
    before = model.store.state_dict()
    batch = [u for u in problem[2].train if u.label_id == 0][:4]
    ml.meta_adapt_step(batch, model, AdamState(), 0.1, {0}, {0, 1, 2})
    after = model.store.state_dict()
    assert not np.array_equal(before["proj.M1"], after["proj.M1"])
    assert all(np.array_equal(before[k], after[k]) for k in before if not k.startswith("proj."))


def test_ablated_groups_are_frozen(problem):
    assert set(make_model(problem, ablations="ds").frozen_groups()) >= {"sig.F", "sig.fwd.W", "mix.b"}
    assert set(make_model(problem, ablations="mlp").frozen_groups()) == {"mlp.W1", "mlp.W2", "mix.b"}
    assert make_model(problem).frozen_groups() == []


def test_train_is_deterministic(problem, tmp_path):
    corpus, table, split, _ = problem
    config = ml.TrainConfig(episodes=4, seed=3, **SMALL)
    paths = []
    for i in range(2):
        res = ml.train(corpus, split, table, config)
        paths.append(tmp_path / f"m{i}.ckpt")
        res.model.save(paths[-1])
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_save_load_roundtrip(problem, tmp_path):
    corpus, table, split, stats = problem
    model = make_model(problem, ablations="gw")
    path = tmp_path / "m.ckpt"
    model.save(path, {"note": 1})
    loaded, header = ml.Model.load(path, corpus.labels, table, stats)
    assert header["ablations"] == ["gw"] and header["note"] == 1
    np.testing.assert_array_equal(loaded.embed(split.test), model.embed(split.test))


def test_predict_standard_is_nearest(problem):
    corpus, _, split, _ = problem
    model = make_model(problem)
    X = model.embed(split.test)
    batch = ml.predict_standard_batch(X, model, corpus.unseen_ids)
    for x, b in zip(X, batch):
        assert ml.predict_standard(x, model, corpus.unseen_ids) == b


class TestGeneralizedDecision:
    ids = [0, 1, 2, 3]
    unseen = {2, 3}

    def test_zero_threshold_is_argmax(self, rng):
        P = rng.dirichlet(np.ones(4), size=200)
        np.testing.assert_array_equal(ml.generalized_decision(P, self.ids, self.unseen, 0.0), P.argmax(axis=1))

    def test_confident_seen_kept(self):
        P = np.array([[0.7, 0.1, 0.15, 0.05]])
        assert ml.generalized_decision(P, self.ids, self.unseen, 0.6)[0] == 0

    def test_unconfident_falls_back_to_unseen(self):
        P = np.array([[0.5, 0.1, 0.15, 0.25]])
        assert ml.generalized_decision(P, self.ids, self.unseen, 0.6)[0] == 3

    def test_threshold_one(self, rng):
        P = rng.dirichlet(np.ones(4), size=200)
        assert set(ml.generalized_decision(P, self.ids, self.unseen, 1.0)) <= self.unseen

    def test_batch_matches_single(self, problem):
        corpus, _, split, _ = problem
        model = make_model(problem)
        X = model.embed(split.test[:10])
        batch = ml.predict_generalized_batch(X, model, corpus.seen_ids, corpus.unseen_ids, 0.6)
        for x, b in zip(X, batch):
            assert ml.predict_generalized(x, model, corpus.seen_ids, corpus.unseen_ids, 0.6) == b
        with pytest.raises(ValueError):
            ml.predict_generalized_batch(X, model, corpus.seen_ids, corpus.unseen_ids, 1.5)


def test_config_validation():
    with pytest.raises(ValueError):
        ml.TrainConfig(lr_train=0)
    with pytest.raises(ValueError):
        ml.TrainConfig(threshold=2)
    assert ml.TrainConfig().meta_seen_count(5) == 4
    assert ml.TrainConfig().meta_seen_count(24) == 21
    cfg = ml.TrainConfig(ablations="gw,cw")
    assert ml.TrainConfig.from_dict(cfg.to_dict()) == cfg
