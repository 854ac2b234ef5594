"""Synthetic intent corpora with controllable label-space geometry.

Every class owns a set of signature tokens whose vectors cluster around a
class direction; utterances mix a few signature tokens with shared filler
tokens that live in the orthogonal complement of the class subspace. The
label description is the class's signature-token list.

``vocab_design``
    ``"orthogonal"``    class directions are mutually orthonormal, so an
                        unseen class shares no direction with any seen one.
    ``"compositional"`` (default) directions are normalised sums of two
                        orthonormal attribute axes, and the seen classes
                        span every attribute the unseen classes use, so
                        knowledge can transfer to unseen labels.
"""

import itertools
import logging
from math import comb

import numpy as np

from ..data import Corpus, EmbeddingTable, IntentLabel, Utterance

log = logging.getLogger(__name__)

VOCAB_DESIGNS = ("compositional", "orthogonal")


def _orthonormal(rng, d):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def _attribute_pairs(n_classes, n_seen, rng, max_tries=2000):
    k = max(3, n_seen)
    while comb(k, 2) < n_classes:
        k += 1
    all_pairs = list(itertools.combinations(range(k), 2))
    best = None
    for _ in range(max_tries):
        idx = rng.choice(len(all_pairs), size=n_classes, replace=False)
        pairs = [all_pairs[i] for i in idx]
        inc = np.zeros((n_classes, k))
        for row, (a, b) in enumerate(pairs):
            inc[row, [a, b]] = 1.0
        seen_rank = np.linalg.matrix_rank(inc[:n_seen])
        if seen_rank == np.linalg.matrix_rank(inc):
            return k, pairs
        if best is None or seen_rank > best[0]:
            best = (seen_rank, pairs)
    log.warning("no attribute assignment puts unseen classes in the seen span; using best effort")
    return k, best[1]


def class_directions(n_classes, n_seen, d_w, vocab_design, rng):
    """(n_classes, d_w) unit directions plus the orthonormal basis of the unused complement."""
    basis = _orthonormal(rng, d_w)
    if vocab_design == "orthogonal":
        if n_classes > d_w:
            raise ValueError(f"orthogonal design needs n_classes <= d_w ({d_w})")
        return basis[:, :n_classes].T.copy(), basis[:, n_classes:].T.copy()
    if vocab_design == "compositional":
        k, pairs = _attribute_pairs(n_classes, n_seen, rng)
        if k >= d_w:
            raise ValueError(f"compositional design needs more than {k} embedding dims")
        attrs = basis[:, :k].T
        dirs = np.stack([(attrs[a] + attrs[b]) / np.sqrt(2.0) for a, b in pairs])
        return dirs, basis[:, k:].T.copy()
    raise ValueError(f"unknown vocab_design {vocab_design!r}; choose from {VOCAB_DESIGNS}")


def synth_corpus(
    n_classes=8,
    n_seen=6,
    samples_per_class=50,
    vocab_design="compositional",
    seed=0,
    d_w=16,
    signature_tokens=6,
    filler_tokens=24,
    noise=0.2,
    scale=1.0,
):
    """Build a labelled corpus and its embedding table; deterministic in ``seed``.

    Classes ``0 .. n_seen-1`` are seen, the rest unseen.
    """
    if not 1 <= n_seen < n_classes:
        raise ValueError("need 1 <= n_seen < n_classes")
    if samples_per_class < 4:
        raise ValueError("samples_per_class must be at least 4")
    rng = np.random.default_rng(seed)
    dirs, complement = class_directions(n_classes, n_seen, d_w, vocab_design, rng)

    vectors = {}
    sig_tokens = []
    for c in range(n_classes):
        toks = [f"c{c}w{j}" for j in range(signature_tokens)]
        for tok in toks:
            jitter = rng.standard_normal(d_w) * (noise / np.sqrt(d_w))
            vectors[tok] = dirs[c] + jitter
        sig_tokens.append(toks)
    fillers = [f"f{j}" for j in range(filler_tokens)]
    for tok in fillers:
        coef = rng.standard_normal(complement.shape[0]) / np.sqrt(max(complement.shape[0], 1))
        vectors[tok] = coef @ complement

    labels = [IntentLabel(c, f"intent_{c}", tuple(sig_tokens[c])) for c in range(n_classes)]
    utterances = []
    for c in range(n_classes):
        for _ in range(samples_per_class):
            n_sig = int(rng.integers(2, 4))
            n_fill = int(rng.integers(2, 7))
            toks = list(rng.choice(sig_tokens[c], size=n_sig, replace=False))
            toks += list(rng.choice(fillers, size=n_fill, replace=True))
            toks = [str(t) for t in rng.permutation(toks)]
            utterances.append(Utterance(tuple(toks), c, " ".join(toks)))

    vectors = {tok: scale * vec for tok, vec in vectors.items()}
    corpus = Corpus(utterances, labels, set(range(n_seen)), set(range(n_seen, n_classes)))
    table = EmbeddingTable(d_w, vectors, oov_policy="zero")
    return corpus, table
