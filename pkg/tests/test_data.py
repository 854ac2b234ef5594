from collections import Counter

import numpy as np
import pytest

from conftest import write_files
from zsic import data

LABELS = ["play_music\tseen\tplay music", "get_weather\tseen", "book_table\tunseen\treserve a table"]
LINES = [
    "Play some jazz\tplay_music",
    "play the song\tplay_music",
    "what's the weather\tget_weather",
    "rain tomorrow\tget_weather",
    "book a table for two\tbook_table",
]


@pytest.fixture
def corpus_files(tmp_path):
    return write_files(tmp_path, LINES, LABELS)


def test_load_corpus(corpus_files):
    path, _ = corpus_files
    corpus = data.load_corpus(path)
    assert len(corpus.utterances) == 5
    assert corpus.seen_ids == {0, 1} and corpus.unseen_ids == {2}
    assert corpus.utterances[0].tokens == ("play", "some", "jazz")
    assert corpus.labels[1].description_tokens == ("get", "weather")
    assert corpus.labels[2].description_tokens == ("reserve", "a", "table")
    assert corpus.meta["rejected_empty"] == 0


def test_loading_is_idempotent(corpus_files):
    path, labels = corpus_files
    assert data.load_corpus(path, labels_path=labels) == data.load_corpus(path)


def test_missing_tab_reports_line(tmp_path):
    path, _ = write_files(tmp_path, LINES[:2] + ["no tab here"], LABELS)
    with pytest.raises(data.ParseError, match=r"corpus\.tsv:3"):
        data.load_corpus(path)


def test_unknown_label(tmp_path):
    path, _ = write_files(tmp_path, ["hello\tnot_a_label"], LABELS)
    with pytest.raises(data.UnknownLabelError, match="not_a_label"):
        data.load_corpus(path)


def test_empty_utterances_counted(tmp_path):
    path, _ = write_files(tmp_path, LINES + ["   \tplay_music", "\tget_weather"], LABELS)
    corpus = data.load_corpus(path)
    assert len(corpus.utterances) == 5
    assert corpus.meta["rejected_empty"] == 2


def test_bad_label_flag(tmp_path):
    path, _ = write_files(tmp_path, LINES, ["play_music\tmaybe"])
    with pytest.raises(data.ParseError, match="labels.tsv:1"):
        data.load_corpus(path)


def test_write_corpus_roundtrip(corpus_files, tmp_path):
    corpus = data.load_corpus(corpus_files[0])
    out = tmp_path / "copy"
    out.mkdir()
    data.write_corpus(corpus, out / "corpus.tsv", out / "labels.tsv")
    assert data.load_corpus(out / "corpus.tsv") == corpus


def test_unigram_stats():
    utt = [data.Utterance(("a", "a", "b"), 0, "a a b")]
    stats = data.unigram_stats(utt)
    assert stats["a"] == pytest.approx(2 / 3, abs=1e-15)
    assert stats["b"] == pytest.approx(1 / 3, abs=1e-15)
    assert stats["zzz"] == 0.0
    assert abs(sum(stats[t] for t in stats.counts) - 1) < 1e-12
    with pytest.raises(data.DataError):
        data.unigram_stats([])


def test_unigram_sum_random(rng):
    words = [f"w{i}" for i in range(40)]
    utt = [data.Utterance(tuple(rng.choice(words, size=rng.integers(1, 9))), 0, "") for _ in range(200)]
    stats = data.unigram_stats(utt)
    assert abs(sum(stats[t] for t in stats.counts) - 1) < 1e-12


def _vectors_file(tmp_path, lines, header=True):
    path = tmp_path / "vec.txt"
    body = (["%d %d" % (len(lines), len(lines[0].split()) - 1)] if header else []) + lines
    path.write_text("\n".join(body) + "\n")
    return path


def test_embeddings_oov_policies(tmp_path):
    path = _vectors_file(tmp_path, ["a 1 2", "b 3 4", "a 9 9"])
    vocab = data.Vocab(["a", "b", "c"])
    table = data.load_embeddings(path, vocab, "zero")
    np.testing.assert_array_equal(table["a"], [1, 2])
    np.testing.assert_array_equal(table["c"], [0, 0])
    np.testing.assert_array_equal(table["never_seen"], [0, 0])
    assert table.meta["duplicates"] == 1 and table.meta["oov"] == 1

    uni = data.load_embeddings(path, vocab, "uniform", seed=3)
    assert np.all(np.abs(uni["c"]) <= 0.1) and np.any(uni["c"] != 0)
    assert uni == data.load_embeddings(path, vocab, "uniform", seed=3)


def test_test_only_tokens_get_zero(tmp_path):
    path = _vectors_file(tmp_path, ["a 1 2"], header=False)
    table = data.load_embeddings(path, data.Vocab(["a", "tr", "te"]), "uniform", train_tokens={"a", "tr"})
    assert np.any(table["tr"] != 0)
    np.testing.assert_array_equal(table["te"], [0, 0])


def test_embedding_dim_mismatch(tmp_path):
    path = _vectors_file(tmp_path, ["a 1 2", "b 3"], header=False)
    with pytest.raises(data.ParseError, match=":2"):
        data.load_embeddings(path, data.Vocab(["a"]))


def test_label_embedding_is_mean():
    table = data.EmbeddingTable(2, {"x": np.array([1.0, 0.0]), "y": np.array([0.0, 3.0])})
    lab = data.IntentLabel(0, "x_y", ("x", "y"))
    np.testing.assert_array_equal(data.label_embedding(lab, table), [0.5, 1.5])


def _toy_corpus(per_class=10, n_seen=2, n_unseen=1):
    labels = [data.IntentLabel(i, f"l{i}", (f"l{i}",)) for i in range(n_seen + n_unseen)]
    utts = [data.Utterance((f"t{c}", str(j)), c, "") for c in range(len(labels)) for j in range(per_class)]
    return data.Corpus(utts, labels, set(range(n_seen)), set(range(n_seen, n_seen + n_unseen)))


def test_generalized_split_counts():
    corpus = _toy_corpus(per_class=10)
    split = data.split_generalized(corpus, 0.7, rng_seed=0)
    train = Counter(u.label_id for u in split.train)
    test = Counter(u.label_id for u in split.test)
    assert train == {0: 7, 1: 7}
    assert test == {0: 3, 1: 3, 2: 10}
    assert split.candidate_ids == {0, 1, 2}
    assert split == data.split_generalized(corpus, 0.7, rng_seed=0)


@pytest.mark.parametrize("n,ratio,k", [(100, 0.29, 29), (3, 0.5, 1), (7, 0.7, 4)])
def test_generalized_split_floor(n, ratio, k):
    split = data.split_generalized(_toy_corpus(per_class=n), ratio)
    assert sum(u.label_id == 0 for u in split.train) == k


def test_generalized_split_needs_two_samples():
    with pytest.raises(data.DataError):
        data.split_generalized(_toy_corpus(per_class=1), 0.7)


def test_standard_split():
    split = data.split_standard(_toy_corpus())
    assert {u.label_id for u in split.train} == {0, 1}
    assert {u.label_id for u in split.test} == {2}


def test_episode_frequencies():
    rng = np.random.default_rng(0)
    counts = Counter()
    for _ in range(10000):
        ep = data.sample_episode(range(5), 4, rng)
        assert len(ep.meta_seen_ids) == 4 and not ep.meta_seen_ids & ep.meta_unseen_ids
        counts.update(ep.meta_unseen_ids)
    for c in range(5):
        assert abs(counts[c] / 10000 - 0.2) <= 0.02


def test_episode_bounds():
    with pytest.raises(ValueError):
        data.sample_episode(range(5), 5, np.random.default_rng(0))
