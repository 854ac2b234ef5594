"""Episodic meta-learning over label-description prototypes.

Each episode splits the seen classes into meta-seen and meta-unseen parts.
Meta-training fits every parameter group on meta-seen utterances; meta-adapting
then fine-tunes only the projection network on meta-unseen utterances.
Classification is by nearest projected label description.
"""

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import data
from .attention import Featurizer, MixtureAttention, encode_batch, fit_ridge_classifier, group_names, parse_ablations
from .numerics import autograd as ag
from .numerics import checkpoint
from .numerics.autograd import Tensor
from .numerics.linalg import softmax
from .numerics.optim import AdamState, ParamStore, adam_step

log = logging.getLogger(__name__)

PROJECTION_GROUPS = ("proj.M1", "proj.M2")


@dataclass
class TrainConfig:
    episodes: int = 200
    n_meta_seen: int = None  # None: |seen| - max(1, round(|seen| / 8))
    lr_train: float = 0.006
    lr_adapt: float = 0.002
    batch_size: int = 32
    seed: int = 0
    threshold: float = 0.6
    ablations: frozenset = frozenset()
    d_h: int = 64
    d_b: int = 16
    d_a: int = 64
    d_s: int = 128
    reg: float = 1.0
    holdout: float = 0.1
    patience: int = 20

    def __post_init__(self):
        self.ablations = parse_ablations(self.ablations)
        if self.episodes < 1 or self.batch_size < 1:
            raise ValueError("episodes and batch_size must be positive")
        if self.lr_train <= 0 or self.lr_adapt <= 0:
            raise ValueError("learning rates must be positive")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must lie in [0, 1], got {self.threshold}")

    def meta_seen_count(self, n_seen):
        n = self.n_meta_seen
        if n is None:
            n = n_seen - max(1, round(n_seen / 8))
        if not 1 <= n < n_seen:
            raise ValueError(f"n_meta_seen must be in [1, {n_seen - 1}], got {n}")
        return n

    def to_dict(self):
        d = asdict(self)
        d["ablations"] = sorted(self.ablations)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


# settings reported for the two benchmark corpora
SNIPS = dict(lr_train=0.006, lr_adapt=0.002, n_meta_seen=4, threshold=0.6)
SMP = dict(lr_train=0.008, lr_adapt=0.004, n_meta_seen=21, threshold=0.8)


@dataclass
class ProjectionParams:
    M1: Tensor  # (d_s, d_w)
    M2: Tensor  # (2*d_h, d_s)


def project(E, params):
    """Prototypes tanh(M2 tanh(M1 e)) for the rows of E (K, d_w) -> (K, 2*d_h)."""
    E = E if isinstance(E, Tensor) else Tensor(E)
    return ag.tanh(ag.tanh(E @ params.M1.T) @ params.M2.T)


def project_label(e, params):
    e = np.asarray(e, dtype=np.float64)
    if e.shape != (params.M1.shape[1],):
        raise ValueError(f"label embedding must have length {params.M1.shape[1]}")
    return project(e[None], params).data[0].copy()


def class_probabilities(x, prototypes):
    """softmax of negative Euclidean distances from ``x`` to each prototype."""
    G = np.atleast_2d(np.asarray(prototypes, dtype=np.float64))
    if G.shape[0] == 0 or G.size == 0:
        raise ValueError("need at least one prototype")
    d = np.sqrt(((G - np.asarray(x, dtype=np.float64)) ** 2).sum(axis=1))
    return softmax(-d)


class Model:
    def __init__(self, labels, table, stats, config):
        self.labels = list(labels)
        self.config = config
        self.ablations = config.ablations
        rng = np.random.default_rng(config.seed)
        d_w = table.dim
        self.dims = dict(d_w=d_w, d_h=config.d_h, d_b=config.d_b, d_a=config.d_a, d_s=config.d_s)

        self.store = ParamStore()
        self.attn = MixtureAttention.init(self.store, d_w, config.d_h, config.d_b, config.d_a, rng)
        lim1, lim2 = np.sqrt(1.0 / d_w), np.sqrt(1.0 / config.d_s)
        self.proj = ProjectionParams(
            self.store.add("proj.M1", rng.uniform(-lim1, lim1, size=(config.d_s, d_w))),
            self.store.add("proj.M2", rng.uniform(-lim2, lim2, size=(2 * config.d_h, config.d_s))),
        )
        for ablation in self.ablations:
            for name in group_names(ablation):
                self.store.set_trainable(name, False)

        self.clf = fit_ridge_classifier(self.labels, table, config.reg)
        self.featurizer = Featurizer(table, stats, self.clf, self.ablations)
        self.label_emb = np.stack([data.label_embedding(lab, table) for lab in self.labels])

    def frozen_groups(self):
        return [n for n in self.store if not self.store.is_trainable(n)]

    def features(self, utterances):
        X, S, mask = self.featurizer.batch(utterances)
        return encode_batch(X, S, mask, self.attn, self.ablations)

    def prototypes(self, class_ids):
        return project(self.label_emb[list(class_ids)], self.proj)

    def loss(self, utterances, class_ids):
        """Mean negative log-probability of the true class among ``class_ids``."""
        class_ids = sorted(class_ids)
        index = {c: i for i, c in enumerate(class_ids)}
        try:
            targets = [index[u.label_id] for u in utterances]
        except KeyError as exc:
            raise ValueError(f"utterance label {exc.args[0]} is not among the episode classes") from None
        dist = ag.pairwise_distance(self.features(utterances), self.prototypes(class_ids))
        return ag.cross_entropy(-dist, targets)

    def embed(self, utterances, batch_size=256):
        """Features for evaluation, computed without recording gradients."""
        out = []
        with self.store.only(()):
            for i in range(0, len(utterances), batch_size):
                out.append(self.features(utterances[i:i + batch_size]).data)
        return np.concatenate(out) if out else np.zeros((0, 2 * self.dims["d_h"]))

    def prototype_matrix(self, class_ids):
        with self.store.only(()):
            return self.prototypes(sorted(class_ids)).data

    # --- persistence -------------------------------------------------------

    def save(self, path, extra_header=None):
        tensors = self.store.state_dict()
        tensors["ridge.W"] = self.clf.W
        header = {
            "config": self.config.to_dict(),
            "dims": self.dims,
            "ablations": sorted(self.ablations),
            "frozen": self.frozen_groups(),
            "labels": [lab.name for lab in self.labels],
        }
        header.update(extra_header or {})
        checkpoint.save(path, tensors, header)

    @classmethod
    def load(cls, path, labels, table, stats):
        tensors, header = checkpoint.load(path)
        config = TrainConfig.from_dict(header["config"])
        if header["labels"] != [lab.name for lab in labels]:
            raise ValueError("checkpoint labels do not match the supplied label set")
        model = cls(labels, table, stats, config)
        model.clf.W = tensors.pop("ridge.W")
        model.featurizer = Featurizer(table, stats, model.clf, model.ablations)
        model.store.load_state_dict(tensors)
        return model, header


def meta_train_step(batch, model, adam, lr, meta_seen_ids):
    """One Adam step on all trainable groups; returns the batch loss."""
    bad = {u.label_id for u in batch} - set(meta_seen_ids)
    if bad:
        raise ValueError(f"meta-training batch has non-meta-seen labels {sorted(bad)}")
    model.store.zero_grad()
    loss = model.loss(batch, meta_seen_ids)
    loss.backward()
    adam_step(model.store, adam, lr)
    return float(loss.data)


def meta_adapt_step(batch, model, adam, lr, meta_unseen_ids, candidate_ids=None):
    """One Adam step on the projection network only; no-op under the meta_adapt ablation.

    Probabilities are normalised over ``candidate_ids`` (by default the
    meta-unseen classes alone). Training passes every class of the episode:
    with a single meta-unseen class the meta-unseen-only softmax is
    identically 1 and the step would never move the projection.
    """
    bad = {u.label_id for u in batch} - set(meta_unseen_ids)
    if bad:
        raise ValueError(f"meta-adapting batch has non-meta-unseen labels {sorted(bad)}")
    if "meta_adapt" in model.ablations:
        return None
    candidates = set(meta_unseen_ids) | set(candidate_ids or ())
    with model.store.only(PROJECTION_GROUPS):
        model.store.zero_grad()
        loss = model.loss(batch, candidates)
        loss.backward()
        adam_step(model.store, adam, lr)
    return float(loss.data)


def _holdout(train, fraction, rng):
    by_class = {}
    for i, u in enumerate(train):
        by_class.setdefault(u.label_id, []).append(i)
    held = []
    for c in sorted(by_class):
        idx = by_class[c]
        k = int(np.floor(fraction * len(idx)))
        held.extend(idx[j] for j in rng.permutation(len(idx))[:k])
    held = set(held)
    return [u for i, u in enumerate(train) if i not in held], [train[i] for i in sorted(held)]


def _batches(items, size, rng):
    order = rng.permutation(len(items))
    for i in range(0, len(items), size):
        yield [items[j] for j in order[i:i + size]]


@dataclass
class TrainResult:
    model: Model
    history: list = field(default_factory=list)
    best_episode: int = 0


def train(corpus, split, table, config, stats=None, callback=None):
    """Episodic meta-training on ``split.train``; returns a :class:`TrainResult`.

    A stratified ``config.holdout`` fraction of the training utterances is
    kept aside; after each episode its loss over all seen prototypes is
    measured and the best parameters are restored at the end. Training stops
    early after ``config.patience`` episodes without improvement.
    """
    stats = stats or data.unigram_stats(split.train)
    model = Model(corpus.labels, table, stats, config)
    seen = sorted({u.label_id for u in split.train})
    n_meta_seen = config.meta_seen_count(len(seen))

    rng = np.random.default_rng(config.seed + 1)
    fit, held = _holdout(split.train, config.holdout, rng) if config.holdout > 0 else (split.train, [])
    by_class = {c: [u for u in fit if u.label_id == c] for c in seen}
    adam_train, adam_adapt = AdamState(), AdamState()

    result = TrainResult(model)
    best_loss, best_state, stale = np.inf, None, 0
    for ep in range(config.episodes):
        episode = data.sample_episode(seen, n_meta_seen, rng)
        meta_seen = [u for c in sorted(episode.meta_seen_ids) for u in by_class[c]]
        meta_unseen = [u for c in sorted(episode.meta_unseen_ids) for u in by_class[c]]
        all_ids = episode.meta_seen_ids | episode.meta_unseen_ids

        train_losses = [
            meta_train_step(b, model, adam_train, config.lr_train, episode.meta_seen_ids)
            for b in _batches(meta_seen, config.batch_size, rng)
        ]
        adapt_losses = [
            meta_adapt_step(b, model, adam_adapt, config.lr_adapt, episode.meta_unseen_ids, all_ids)
            for b in _batches(meta_unseen, config.batch_size, rng)
        ]
        record = {
            "episode": ep,
            "train_loss": float(np.mean(train_losses)) if train_losses else None,
            "adapt_loss": float(np.mean(adapt_losses)) if adapt_losses and adapt_losses[0] is not None else None,
        }
        if held:
            with model.store.only(()):
                val = float(model.loss(held, seen).data)
            record["val_loss"] = val
            if val < best_loss - 1e-12:
                best_loss, best_state, stale = val, model.store.state_dict(), 0
                result.best_episode = ep
            else:
                stale += 1
        result.history.append(record)
        log.debug("episode %d: %s", ep, record)
        if callback:
            callback(record)
        if held and config.patience and stale >= config.patience:
            break

    if best_state is not None:
        model.store.load_state_dict(best_state)
    else:
        result.best_episode = len(result.history) - 1
    return result


def predict_standard(x, model, unseen_ids):
    """Nearest unseen prototype; ties go to the lowest class id."""
    ids = sorted(unseen_ids)
    if not ids:
        raise ValueError("no unseen classes to predict from")
    G = model.prototype_matrix(ids)
    d = np.sqrt(((G - np.asarray(x)) ** 2).sum(axis=1))
    return ids[int(np.argmin(d))]


def predict_generalized(x, model, seen_ids, unseen_ids, threshold):
    """Overall argmax if its probability reaches ``threshold``, else the best unseen class."""
    return int(predict_generalized_batch(np.asarray(x)[None], model, seen_ids, unseen_ids, threshold)[0])


def predict_standard_batch(X, model, unseen_ids):
    ids = sorted(unseen_ids)
    G = model.prototype_matrix(ids)
    d = np.sqrt(((X[:, None, :] - G[None]) ** 2).sum(axis=-1))
    return np.array(ids)[np.argmin(d, axis=1)]


def generalized_decision(probs, ids, unseen_ids, threshold):
    """Threshold rule on a (n, K) probability matrix whose columns follow ``ids``."""
    ids = np.asarray(ids)
    unseen_cols = np.flatnonzero(np.isin(ids, sorted(unseen_ids)))
    if unseen_cols.size == 0:
        raise ValueError("no unseen classes among the candidates")
    best = probs.argmax(axis=1)
    fallback = unseen_cols[probs[:, unseen_cols].argmax(axis=1)]
    confident = probs.max(axis=1) >= threshold
    return ids[np.where(confident, best, fallback)]


def predict_generalized_batch(X, model, seen_ids, unseen_ids, threshold):
    if not seen_ids or not unseen_ids:
        raise ValueError("generalized prediction needs seen and unseen classes")
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    probs, ids = candidate_probabilities(X, model, set(seen_ids) | set(unseen_ids))
    return generalized_decision(probs, ids, unseen_ids, threshold)


def candidate_probabilities(X, model, candidate_ids):
    ids = sorted(candidate_ids)
    G = model.prototype_matrix(ids)
    d = np.sqrt(((X[:, None, :] - G[None]) ** 2).sum(axis=-1))
    return softmax(-d, axis=1), ids
