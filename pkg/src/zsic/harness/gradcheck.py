"""Central finite-difference check of every parameter group in the full model."""

import time

import numpy as np

from .. import data
from ..metalearn import Model, TrainConfig
from .synth import synth_corpus

MICRO_DIMS = dict(d_h=8, d_b=4, d_a=8, d_s=8)


def relative_error(analytic, numeric, floor=1e-6):
    """Entrywise |a - n| / max(|a|, |n|, floor), maximised over the group.

    ``floor`` keeps entries whose true gradient sits below finite-difference
    resolution (roundoff ~ machine eps * loss / step) from dominating.
    """
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float((np.abs(analytic - numeric) / denom).max())


def micro_problem(seed=0, ablations=()):
    """Three seen-class utterances and a micro model (d_w=8) around them."""
    corpus, table = synth_corpus(
        n_classes=4, n_seen=3, samples_per_class=4, seed=seed, d_w=8, scale=3.0
    )
    batch = []
    for c in sorted(corpus.seen_ids):
        batch.append(next(u for u in corpus.utterances if u.label_id == c))
    stats = data.unigram_stats([u for u in corpus.utterances if u.label_id in corpus.seen_ids])
    config = TrainConfig(seed=seed, ablations=frozenset(ablations), **MICRO_DIMS)
    model = Model(corpus.labels, table, stats, config)
    return model, batch, sorted(corpus.seen_ids)


def finite_difference(model, name, loss_fn, step=1e-5):
    param = model.store[name].data
    grad = np.zeros_like(param)
    with model.store.only(()):
        for idx in np.ndindex(param.shape):
            orig = param[idx]
            param[idx] = orig + step
            up = float(loss_fn().data)
            param[idx] = orig - step
            down = float(loss_fn().data)
            param[idx] = orig
            grad[idx] = (up - down) / (2 * step)
    return grad


def gradcheck(seed=0, step=1e-5, ablations=()):
    """Return ``({group: max relative error}, seconds)`` on the micro problem."""
    start = time.perf_counter()
    model, batch, classes = micro_problem(seed, ablations)

    def loss_fn():
        return model.loss(batch, classes)

    model.store.zero_grad()
    loss_fn().backward()
    analytic = {n: model.store[n].grad.copy() for n in model.store.trainable_names()}
    model.store.zero_grad()
    errors = {
        name: relative_error(g, finite_difference(model, name, loss_fn, step))
        for name, g in analytic.items()
    }
    return errors, time.perf_counter() - start
