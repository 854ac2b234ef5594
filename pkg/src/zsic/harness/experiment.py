"""Experiment configuration, data preparation, training and evaluation."""

import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import data, metalearn
from ..attention import parse_ablations
from ..metalearn import Model, TrainConfig
from . import report as report_io
from .metrics import partition_metrics
from .report import F1_NOTE, MetricsReport
from .synth import synth_corpus

log = logging.getLogger(__name__)

TASKS = ("standard", "generalized")


@dataclass
class ExperimentConfig:
    task: str = "standard"
    corpus: str = None
    labels: str = None
    embeddings: str = None
    out: str = "runs/default"
    ratio: float = 0.7
    oov_policy: str = "uniform"
    synth_classes: int = 8
    synth_seen: int = 6
    synth_samples: int = 50
    synth_design: str = "compositional"
    synth_seed: int = 0
    synth_scale: float = 3.0
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.corpus and not self.embeddings:
            raise ValueError("a corpus file needs an embeddings file")

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "train"}
        d["train"] = self.train.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["train"] = TrainConfig.from_dict(d.get("train", {}))
        return cls(**d)


_EXPERIMENT_KEYS = {f.name: f.type for f in dataclasses.fields(ExperimentConfig) if f.name != "train"}
_TRAIN_KEYS = {f.name: f.type for f in dataclasses.fields(TrainConfig)}
_TYPES = {"int": int, "float": float, "str": str}


def _coerce(key, value, typ):
    if key == "ablations":
        return parse_ablations(value)
    if key == "n_meta_seen" and value in (None, "", "auto"):
        return None
    if value is None or not isinstance(value, str):
        return value
    caster = _TYPES.get(getattr(typ, "__name__", typ), str)
    try:
        return caster(value)
    except ValueError as exc:
        raise ValueError(f"bad value for {key}: {value!r}") from exc


def read_config_file(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def build_config(values):
    """Build an :class:`ExperimentConfig` from a flat mapping of overrides."""
    values = {k.replace("-", "_"): v for k, v in values.items() if v is not None}
    if "ablate" in values:
        values["ablations"] = values.pop("ablate")
    exp, trn = {}, {}
    for key, value in values.items():
        if key in _EXPERIMENT_KEYS:
            exp[key] = _coerce(key, value, _EXPERIMENT_KEYS[key])
        elif key in _TRAIN_KEYS:
            trn[key] = _coerce(key, value, _TRAIN_KEYS[key])
        else:
            raise KeyError(f"unknown configuration key {key!r}")
    return ExperimentConfig(train=TrainConfig(**trn), **exp)


def prepare_data(config):
    """Return ``(corpus, table, split)`` for a config (synthetic if no corpus file)."""
    if config.corpus:
        corpus = data.load_corpus(config.corpus, labels_path=config.labels)
    else:
        corpus, table = synth_corpus(
            config.synth_classes,
            config.synth_seen,
            config.synth_samples,
            config.synth_design,
            config.synth_seed,
            scale=config.synth_scale,
        )
    if config.task == "standard":
        split = data.split_standard(corpus)
    else:
        split = data.split_generalized(corpus, config.ratio, config.train.seed)
    if config.corpus:
        vocab = data.Vocab.from_corpus(corpus.utterances, corpus.labels)
        train_tokens = set(data.Vocab.from_corpus(split.train, corpus.labels))
        table = data.load_embeddings(config.embeddings, vocab, config.oov_policy, config.train.seed, train_tokens)
    return corpus, table, split


def evaluate(model, corpus, split, task, threshold):
    X = model.embed(split.test)
    gold = np.array([u.label_id for u in split.test])
    names = [lab.name for lab in corpus.labels]
    notes = [F1_NOTE]
    if task == "standard":
        pred = metalearn.predict_standard_batch(X, model, corpus.unseen_ids)
        parts = {"unseen": partition_metrics(pred, gold, corpus.unseen_ids, names)}
    else:
        pred = metalearn.predict_generalized_batch(X, model, corpus.seen_ids, corpus.unseen_ids, threshold)
        notes.append(f"threshold={threshold!r}")
        classes = corpus.seen_ids | corpus.unseen_ids
        seen_mask = np.isin(gold, sorted(corpus.seen_ids))
        parts = {
            "seen": partition_metrics(pred[seen_mask], gold[seen_mask], classes, names),
            "unseen": partition_metrics(pred[~seen_mask], gold[~seen_mask], classes, names),
            "overall": partition_metrics(pred, gold, classes, names),
        }
    if model.ablations:
        notes.append("ablations=" + ",".join(sorted(model.ablations)))
    return MetricsReport(task, parts, notes), pred


def train_model(config, corpus=None, table=None, split=None):
    if corpus is None:
        corpus, table, split = prepare_data(config)
    result = metalearn.train(corpus, split, table, config.train)
    return result, corpus, table, split


def output_paths(out):
    out = Path(out)
    return {"model": out / "model.ckpt", "csv": out / "report.csv", "txt": out / "report.txt"}


def save_model(result, config, path):
    result.model.save(
        path,
        {
            "experiment": config.to_dict(),
            "episodes_run": len(result.history),
            "best_episode": result.best_episode,
        },
    )


def load_model(path):
    """Rebuild data from the checkpoint's stored config and load the parameters."""
    from ..numerics import checkpoint

    _, header = checkpoint.load(path)
    config = ExperimentConfig.from_dict(header["experiment"])
    corpus, table, split = prepare_data(config)
    stats = data.unigram_stats(split.train)
    model, _ = Model.load(path, corpus.labels, table, stats)
    return model, config, corpus, split


def write_report(report, out):
    paths = output_paths(out)
    Path(out).mkdir(parents=True, exist_ok=True)
    report_io.write(report, paths["csv"], paths["txt"])
    return paths


def run_experiment(config):
    """Train, checkpoint, evaluate and write ``model.ckpt``, ``report.csv`` and ``report.txt``."""
    result, corpus, table, split = train_model(config)
    paths = output_paths(config.out)
    Path(config.out).mkdir(parents=True, exist_ok=True)
    save_model(result, config, paths["model"])
    report, _ = evaluate(result.model, corpus, split, config.task, config.train.threshold)
    write_report(report, config.out)
    return report, result
