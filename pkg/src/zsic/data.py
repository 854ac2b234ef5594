"""Corpus, label and embedding ingestion; unigram statistics; task splits and episodes.

File formats
------------
corpus     ``text<TAB>label`` per line, UTF-8
labels     ``label<TAB>seen|unseen<TAB>description`` per line
embeddings word2vec text: optional ``V d`` header, then ``token v1 ... vd``
"""

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class ParseError(DataError):
    pass


class UnknownLabelError(DataError):
    pass


def tokenize(text):
    return text.lower().split()


@dataclass(frozen=True)
class Utterance:
    tokens: tuple
    label_id: int
    text: str = ""


@dataclass(frozen=True)
class IntentLabel:
    id: int
    name: str
    description_tokens: tuple


@dataclass
class Corpus:
    utterances: list
    labels: list
    seen_ids: frozenset
    unseen_ids: frozenset
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.seen_ids = frozenset(self.seen_ids)
        self.unseen_ids = frozenset(self.unseen_ids)
        if self.seen_ids & self.unseen_ids:
            raise DataError(f"classes both seen and unseen: {sorted(self.seen_ids & self.unseen_ids)}")
        ids = [lab.id for lab in self.labels]
        if ids != list(range(len(ids))):
            raise DataError("label ids must be dense 0..C-1 in order")
        if self.seen_ids | self.unseen_ids != set(ids):
            raise DataError("every label must be marked seen or unseen")
        for lab in self.labels:
            if not lab.description_tokens:
                raise DataError(f"label {lab.name!r} has an empty description")
        for u in self.utterances:
            if not u.tokens:
                raise DataError("empty utterance")
            if u.label_id not in self.seen_ids and u.label_id not in self.unseen_ids:
                raise DataError(f"utterance label {u.label_id} is not a known class")

    @property
    def n_classes(self):
        return len(self.labels)

    def label_by_name(self, name):
        for lab in self.labels:
            if lab.name == name:
                return lab
        raise KeyError(name)

    def __eq__(self, other):
        if not isinstance(other, Corpus):
            return NotImplemented
        return (
            self.utterances == other.utterances
            and self.labels == other.labels
            and self.seen_ids == other.seen_ids
            and self.unseen_ids == other.unseen_ids
        )


def _name_tokens(name):
    return tuple(t for t in re.split(r"[\s_\-]+", name.lower()) if t)


def load_labels(path):
    """Read ``label<TAB>seen|unseen<TAB>description`` lines.

    Returns ``(labels, seen_ids, unseen_ids)``. A missing description falls
    back to the tokens of the label name.
    """
    labels, seen, unseen = [], set(), set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n\r")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) < 2:
                raise ParseError(f"{path}:{lineno}: expected label<TAB>seen|unseen[<TAB>description]")
            name, flag = cols[0].strip(), cols[1].strip().lower()
            if flag not in ("seen", "unseen"):
                raise ParseError(f"{path}:{lineno}: flag must be 'seen' or 'unseen', got {flag!r}")
            if any(lab.name == name for lab in labels):
                raise ParseError(f"{path}:{lineno}: duplicate label {name!r}")
            desc = tuple(tokenize(cols[2])) if len(cols) > 2 else ()
            if not desc:
                desc = _name_tokens(name)
            if not desc:
                raise ParseError(f"{path}:{lineno}: label has neither name tokens nor description")
            lab = IntentLabel(len(labels), name, desc)
            labels.append(lab)
            (seen if flag == "seen" else unseen).add(lab.id)
    return labels, seen, unseen


def default_labels_path(path):
    return Path(path).with_name("labels.tsv")


def load_corpus(path, format="tsv", labels_path=None):
    """Load a corpus file and its companion labels file.

    Empty utterances are skipped and counted in ``corpus.meta["rejected_empty"]``.
    """
    if format != "tsv":
        raise ValueError(f"unknown corpus format {format!r}")
    labels_path = labels_path or default_labels_path(path)
    labels, seen, unseen = load_labels(labels_path)
    by_name = {lab.name: lab.id for lab in labels}

    utterances, rejected = [], 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n\r")
            if not line:
                continue
            if "\t" not in line:
                raise ParseError(f"{path}:{lineno}: missing tab between text and label")
            text, name = line.rsplit("\t", 1)
            name = name.strip()
            if name not in by_name:
                raise UnknownLabelError(f"{path}:{lineno}: unknown label {name!r}")
            tokens = tuple(tokenize(text))
            if not tokens:
                rejected += 1
                continue
            utterances.append(Utterance(tokens, by_name[name], text))
    if rejected:
        log.warning("%s: rejected %d empty utterances", path, rejected)
    return Corpus(utterances, labels, seen, unseen, meta={"rejected_empty": rejected})


def write_corpus(corpus, corpus_path, labels_path):
    with open(labels_path, "w", encoding="utf-8") as fh:
        for lab in corpus.labels:
            flag = "seen" if lab.id in corpus.seen_ids else "unseen"
            fh.write(f"{lab.name}\t{flag}\t{' '.join(lab.description_tokens)}\n")
    with open(corpus_path, "w", encoding="utf-8") as fh:
        for u in corpus.utterances:
            text = u.text if u.text and "\t" not in u.text and "\n" not in u.text else " ".join(u.tokens)
            fh.write(f"{text}\t{corpus.labels[u.label_id].name}\n")


class Vocab:
    def __init__(self, tokens=()):
        self.index = {}
        self.tokens = []
        for tok in tokens:
            self.add(tok)

    def add(self, token):
        if token not in self.index:
            self.index[token] = len(self.tokens)
            self.tokens.append(token)
        return self.index[token]

    def __contains__(self, token):
        return token in self.index

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    @classmethod
    def from_corpus(cls, utterances, labels=()):
        vocab = cls()
        for u in utterances:
            for tok in u.tokens:
                vocab.add(tok)
        for lab in labels:
            for tok in lab.description_tokens:
                vocab.add(tok)
        return vocab


@dataclass
class EmbeddingTable:
    """Frozen word vectors.

    ``vectors`` covers the vocabulary it was built for; any other token
    (first met at test time) maps to the zero vector.
    """

    dim: int
    vectors: dict
    oov_policy: str = "uniform"
    meta: dict = field(default_factory=dict)

    def __getitem__(self, token):
        vec = self.vectors.get(token)
        if vec is None:
            return np.zeros(self.dim)
        return vec

    def __contains__(self, token):
        return token in self.vectors

    def lookup(self, tokens):
        return np.stack([self[t] for t in tokens]) if tokens else np.zeros((0, self.dim))

    def __eq__(self, other):
        if not isinstance(other, EmbeddingTable):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.vectors.keys() == other.vectors.keys()
            and all(np.array_equal(v, other.vectors[k]) for k, v in self.vectors.items())
        )


OOV_POLICIES = ("zero", "uniform")


def read_word_vectors(path):
    """Parse a word2vec text file into ``(dim, {token: vector}, duplicates)``."""
    vectors, dim, duplicates = {}, None, 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip().split(" ")
            if not parts or parts == [""]:
                continue
            if lineno == 1 and len(parts) == 2:
                try:
                    int(parts[0])
                    dim = int(parts[1])
                    continue
                except ValueError:
                    pass
            token, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            if len(values) != dim:
                raise ParseError(f"{path}:{lineno}: expected {dim} values, got {len(values)}")
            if token in vectors:
                duplicates += 1
                continue
            try:
                vectors[token] = np.array([float(v) for v in values])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    if dim is None:
        raise ParseError(f"{path}: no vectors found")
    return dim, vectors, duplicates


def build_table(dim, vectors, vocab, oov_policy="uniform", seed=0, train_tokens=None):
    """Select ``vocab`` rows from ``vectors``, filling tokens the file lacks.

    Missing tokens get ``oov_policy`` treatment; when ``train_tokens`` is
    given, missing tokens outside it (test-only words) always get zeros.
    """
    if oov_policy not in OOV_POLICIES:
        raise ValueError(f"oov_policy must be one of {OOV_POLICIES}")
    rng = np.random.default_rng(seed)
    table, missing = {}, 0
    for tok in vocab:
        vec = vectors.get(tok)
        if vec is None:
            missing += 1
            test_only = train_tokens is not None and tok not in train_tokens
            if oov_policy == "zero" or test_only:
                vec = np.zeros(dim)
            else:
                vec = rng.uniform(-0.1, 0.1, size=dim)
        table[tok] = np.asarray(vec, dtype=np.float64)
    return EmbeddingTable(dim, table, oov_policy, meta={"oov": missing})


def load_embeddings(path, vocab, oov_policy="uniform", seed=0, train_tokens=None):
    """Build an embedding table for ``vocab`` from a word2vec text file.

    Duplicated tokens keep their first vector; the count is recorded in
    ``table.meta["duplicates"]``.
    """
    dim, vectors, duplicates = read_word_vectors(path)
    table = build_table(dim, vectors, vocab, oov_policy, seed, train_tokens)
    table.meta["duplicates"] = duplicates
    return table


def write_embeddings(path, vectors):
    dim = len(next(iter(vectors.values())))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(vectors)} {dim}\n")
        for tok, vec in vectors.items():
            fh.write(tok + " " + " ".join(repr(float(x)) for x in vec) + "\n")


@dataclass
class UnigramStats:
    counts: Counter
    total: int

    def prob(self, token):
        return self.counts.get(token, 0) / self.total

    __getitem__ = prob


def unigram_stats(train):
    counts = Counter()
    for u in train:
        counts.update(u.tokens)
    total = sum(counts.values())
    if total == 0:
        raise DataError("unigram statistics need at least one training token")
    return UnigramStats(counts, total)


def label_embedding(label, table):
    if not label.description_tokens:
        raise DataError(f"label {label.name!r} has no description tokens")
    return table.lookup(label.description_tokens).mean(axis=0)


@dataclass
class DataSplit:
    train: list
    test: list
    candidate_ids: frozenset
    task: str


def split_standard(corpus):
    if not corpus.seen_ids or not corpus.unseen_ids:
        raise DataError("standard split needs both seen and unseen classes")
    train = [u for u in corpus.utterances if u.label_id in corpus.seen_ids]
    test = [u for u in corpus.utterances if u.label_id in corpus.unseen_ids]
    if not train or not test:
        raise DataError("standard split produced an empty train or test side")
    return DataSplit(train, test, frozenset(corpus.unseen_ids), "standard")


def split_generalized(corpus, ratio=0.7, rng_seed=0):
    """Per seen class, floor(ratio * n) samples train; the rest plus all unseen test."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    if not corpus.seen_ids or not corpus.unseen_ids:
        raise DataError("generalized split needs both seen and unseen classes")
    rng = np.random.default_rng(rng_seed)
    by_class = {c: [] for c in sorted(corpus.seen_ids)}
    for i, u in enumerate(corpus.utterances):
        if u.label_id in by_class:
            by_class[u.label_id].append(i)
    train_idx, test_idx = [], []
    for c, idx in by_class.items():
        if len(idx) < 2:
            raise DataError(f"seen class {corpus.labels[c].name!r} has {len(idx)} samples; cannot split")
        order = rng.permutation(len(idx))
        k = int(np.floor(ratio * len(idx) + 1e-9))  # 0.29 * 100 is 28.999...
        train_idx.extend(idx[j] for j in order[:k])
        test_idx.extend(idx[j] for j in order[k:])
    train_idx.sort()
    test_idx.extend(i for i, u in enumerate(corpus.utterances) if u.label_id in corpus.unseen_ids)
    test_idx.sort()
    return DataSplit(
        [corpus.utterances[i] for i in train_idx],
        [corpus.utterances[i] for i in test_idx],
        frozenset(corpus.seen_ids | corpus.unseen_ids),
        "generalized",
    )


@dataclass(frozen=True)
class Episode:
    meta_seen_ids: frozenset
    meta_unseen_ids: frozenset


def sample_episode(seen_ids, n_meta_seen, rng):
    seen = sorted(seen_ids)
    if not 1 <= n_meta_seen < len(seen):
        raise ValueError(f"n_meta_seen must be in [1, {len(seen) - 1}], got {n_meta_seen}")
    chosen = rng.choice(len(seen), size=n_meta_seen, replace=False)
    meta_seen = frozenset(seen[i] for i in chosen)
    return Episode(meta_seen, frozenset(seen) - meta_seen)
