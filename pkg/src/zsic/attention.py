"""Utterance encoder: BiLSTM states pooled by a mixture of distributional-signature
attention and MLP attention.

The distributional signature of a word is the pair (s, t):

* ``s`` general importance, ``eps / (eps + P(w))`` from seen-data unigram counts;
* ``t`` class-specific importance, the inverse entropy of a ridge classifier's
  label distribution for the word, fitted on label-description embeddings.

Both are constants of the data, so they are computed once per token and fed
to a small BiLSTM whose states score the tokens.
"""

from dataclasses import dataclass

import numpy as np

from . import data
from .numerics import autograd as ag
from .numerics.autograd import Tensor
from .numerics.linalg import entropy, ridge_solve, softmax
from .numerics.lstm import LstmParams, bilstm

GW_EPS = 1e-5
ENTROPY_FLOOR = 1e-3
ABLATIONS = ("gw", "cw", "ds", "mlp", "meta_adapt")


def parse_ablations(value):
    """Turn ``"gw,meta-adapt"`` (or an iterable) into a validated frozenset."""
    if value is None:
        return frozenset()
    items = value.split(",") if isinstance(value, str) else list(value)
    flags = frozenset(s.strip().replace("-", "_") for s in items if s.strip())
    unknown = flags - set(ABLATIONS)
    if unknown:
        raise ValueError(f"unknown ablation(s): {', '.join(sorted(unknown))}")
    if {"ds", "mlp"} <= flags:
        raise ValueError("cannot ablate both ds and mlp attention: no attention would remain")
    return flags


@dataclass
class RidgeClassifier:
    W: np.ndarray  # (d_w, C)

    @property
    def n_classes(self):
        return self.W.shape[1]

    def predict_proba(self, w):
        return softmax(np.asarray(w) @ self.W)


def fit_ridge_classifier(labels, table, reg=1.0):
    """Ridge map from every label-description embedding (seen and unseen) to its one-hot row."""
    if len(labels) < 2:
        raise ValueError("ridge classifier needs at least two classes")
    E = np.stack([data.label_embedding(lab, table) for lab in labels])
    return RidgeClassifier(ridge_solve(E, np.eye(len(labels)), reg))


def general_word_importance(token, stats, eps=GW_EPS):
    return eps / (eps + stats.prob(token))


def class_specific_importance(token, table, clf, floor=ENTROPY_FLOOR):
    h = entropy(clf.predict_proba(table[token]))
    return 1.0 / max(h, floor)


def signature(tokens, table, stats, clf, ablations=frozenset()):
    """(N, 2) array of [s, t] per token; an ablated channel is the constant 1."""
    sig = np.ones((len(tokens), 2))
    if "gw" not in ablations:
        sig[:, 0] = [general_word_importance(t, stats) for t in tokens]
    if "cw" not in ablations:
        sig[:, 1] = [class_specific_importance(t, table, clf) for t in tokens]
    return sig


@dataclass
class SignatureParams:
    fwd: LstmParams
    bwd: LstmParams
    F: Tensor  # (1, 2*d_b)


@dataclass
class MlpAttnParams:
    W1: Tensor  # (d_a, 2*d_h)
    W2: Tensor  # (1, d_a)


@dataclass
class MixtureParams:
    b: Tensor  # (1, 2)


@dataclass
class EncoderParams:
    fwd: LstmParams
    bwd: LstmParams


@dataclass
class MixtureAttention:
    enc: EncoderParams
    sig: SignatureParams
    mlp: MlpAttnParams
    mix: MixtureParams

    @classmethod
    def init(cls, store, d_w, d_h, d_b, d_a, rng):
        """Create all encoder/attention groups and register them in ``store``."""

        def lstm_group(prefix, input_dim, hidden):
            p = LstmParams.init(input_dim, hidden, rng)
            store.add(prefix + ".W", p.W)
            store.add(prefix + ".b", p.b)
            return p

        enc = EncoderParams(lstm_group("enc.fwd", d_w, d_h), lstm_group("enc.bwd", d_w, d_h))
        sig = SignatureParams(
            lstm_group("sig.fwd", 2, d_b),
            lstm_group("sig.bwd", 2, d_b),
            store.add("sig.F", rng.uniform(-0.1, 0.1, size=(1, 2 * d_b))),
        )
        mlp = MlpAttnParams(
            store.add("mlp.W1", rng.uniform(-0.1, 0.1, size=(d_a, 2 * d_h))),
            store.add("mlp.W2", rng.uniform(-0.1, 0.1, size=(1, d_a))),
        )
        mix = MixtureParams(store.add("mix.b", np.array([[0.5, 0.5]])))
        return cls(enc, sig, mlp, mix)


def group_names(ablation):
    """Parameter groups that an ablation removes from the model."""
    if ablation == "ds":
        return ["sig.fwd.W", "sig.fwd.b", "sig.bwd.W", "sig.bwd.b", "sig.F", "mix.b"]
    if ablation == "mlp":
        return ["mlp.W1", "mlp.W2", "mix.b"]
    return []


# --- batched graph pieces --------------------------------------------------


def ds_scores(S, mask, params):
    """Signature BiLSTM over (B, L, 2) inputs, then softmax(F Z) per sequence."""
    B, L, _ = S.shape
    Z = bilstm(S, mask, params.fwd, params.bwd)
    logits = ag.reshape(Z @ params.F.T, (B, L))
    return ag.masked_softmax(logits, mask)


def mlp_scores(H, mask, params):
    B, L, _ = H.shape
    logits = ag.reshape(ag.relu(H @ params.W1.T) @ params.W2.T, (B, L))
    return ag.masked_softmax(logits, mask)


def mix_scores(p, q, params):
    B, L = p.shape
    return ag.reshape(ag.stack([p, q], axis=-1) @ params.b.T, (B, L))


def encode_batch(X, S, mask, attn, ablations=frozenset()):
    """Utterance features (B, 2*d_h) from padded embeddings X and signatures S."""
    X = X if isinstance(X, Tensor) else Tensor(X)
    S = S if isinstance(S, Tensor) else Tensor(S)
    B, L, _ = X.shape
    H = bilstm(X, mask, attn.enc.fwd, attn.enc.bwd)
    if "ds" in ablations:
        a = mlp_scores(H, mask, attn.mlp)
    elif "mlp" in ablations:
        a = ds_scores(S, mask, attn.sig)
    else:
        a = mix_scores(ds_scores(S, mask, attn.sig), mlp_scores(H, mask, attn.mlp), attn.mix)
    x = ag.reshape(a, (B, 1, L)) @ H
    return ag.reshape(x, (B, H.shape[2]))


# --- single-utterance views -------------------------------------------------


def ds_attention(signature_pairs, params):
    """DS attention p over one utterance given its (N, 2) signature pairs."""
    S = np.asarray(signature_pairs, dtype=np.float64)
    p = ds_scores(Tensor(S[None]), np.ones((1, len(S))), params)
    return p.data[0].copy()


def mlp_attention(H, params):
    """MLP attention q over one utterance given its (2*d_h, N) state matrix."""
    H = H.data if isinstance(H, Tensor) else np.asarray(H, dtype=np.float64)
    q = mlp_scores(Tensor(H.T[None]), np.ones((1, H.shape[1])), params)
    return q.data[0].copy()


def mixture(p, q, params):
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"attention length mismatch: {p.shape} vs {q.shape}")
    b = params.b.data
    return b[0, 0] * p + b[0, 1] * q


class Featurizer:
    """Per-token caches of frozen inputs: word vectors and (s, t) signatures."""

    def __init__(self, table, stats, clf, ablations=frozenset()):
        self.table = table
        self.stats = stats
        self.clf = clf
        self.ablations = frozenset(ablations)
        self._sig = {}

    def features(self, tokens):
        missing = [t for t in set(tokens) if t not in self._sig]
        if missing:
            for tok, row in zip(missing, signature(missing, self.table, self.stats, self.clf, self.ablations)):
                self._sig[tok] = row
        sig = np.array([self._sig[t] for t in tokens]).reshape(len(tokens), 2)
        return self.table.lookup(tokens), sig

    def batch(self, utterances):
        """Pad a list of utterances into (X, S, mask)."""
        B = len(utterances)
        L = max(len(u.tokens) for u in utterances)
        X = np.zeros((B, L, self.table.dim))
        S = np.zeros((B, L, 2))
        mask = np.zeros((B, L))
        for i, u in enumerate(utterances):
            emb, sig = self.features(u.tokens)
            n = len(u.tokens)
            X[i, :n] = emb
            S[i, :n] = sig
            mask[i, :n] = 1.0
        return X, S, mask


def encode(utterance, featurizer, attn, ablations=frozenset()):
    """Final semantic feature x (length 2*d_h) for one utterance."""
    if not utterance.tokens:
        raise ValueError("cannot encode an empty utterance")
    X, S, mask = featurizer.batch([utterance])
    return encode_batch(X, S, mask, attn, ablations).data[0].copy()
