"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 gradient check failed.
"""

import argparse
import logging
import sys
from pathlib import Path

from . import data
from .harness import experiment as exp
from .harness import report as report_io
from .harness.gradcheck import gradcheck
from .harness.synth import VOCAB_DESIGNS, synth_corpus
from .metalearn import SMP, SNIPS
from .numerics.checkpoint import CheckpointError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CHECK = 0, 1, 2, 3
GRADCHECK_TOL = 1e-4
PRESETS = {"snips": SNIPS, "smp": SMP}

log = logging.getLogger("zsic")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _config_args():
    p = _Parser(add_help=False)
    p.add_argument("--config", help="key = value configuration file (flags override it)")
    p.add_argument("--task", choices=exp.TASKS)
    p.add_argument("--ablate", help="comma list of gw,cw,ds,mlp,meta-adapt")
    p.add_argument("--seed", type=int)
    p.add_argument("--threshold", type=float, help="generalized-task fallback threshold")
    p.add_argument("--out", help="output directory")
    p.add_argument("--preset", choices=sorted(PRESETS), help="benchmark learning-rate/episode settings")
    p.add_argument("--corpus")
    p.add_argument("--labels")
    p.add_argument("--embeddings")
    p.add_argument("--episodes", type=int)
    p.add_argument("--n-meta-seen", type=int)
    p.add_argument("--lr-train", type=float)
    p.add_argument("--lr-adapt", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--ratio", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--synth-design", choices=VOCAB_DESIGNS)
    return p


def build_parser():
    parser = _Parser(prog="zsic", description="Zero-shot intent classification")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    common = _config_args()
    sub.add_parser("train", parents=[common], help="train and write <out>/model.ckpt")
    ev = sub.add_parser("eval", parents=[common], help="evaluate <out>/model.ckpt")
    ev.add_argument("--model", help="checkpoint path (default <out>/model.ckpt)")
    sub.add_parser("experiment", parents=[common], help="train + evaluate + report")

    syn = sub.add_parser("synth", help="write a synthetic corpus, labels and embeddings")
    syn.add_argument("--out", required=True)
    syn.add_argument("--n-classes", type=int, default=8)
    syn.add_argument("--n-seen", type=int, default=6)
    syn.add_argument("--samples", type=int, default=50)
    syn.add_argument("--design", choices=VOCAB_DESIGNS, default="compositional")
    syn.add_argument("--scale", type=float, default=3.0)
    syn.add_argument("--seed", type=int, default=0)

    gc = sub.add_parser("gradcheck", help="finite-difference check of every parameter group")
    gc.add_argument("--seed", type=int, default=0)
    gc.add_argument("--ablate")
    return parser


_CONFIG_FLAGS = (
    "task", "ablate", "seed", "threshold", "out", "corpus", "labels", "embeddings",
    "episodes", "n_meta_seen", "lr_train", "lr_adapt", "batch_size", "ratio", "patience",
    "synth_design",
)


def config_from_args(args):
    values = exp.read_config_file(args.config) if args.config else {}
    if args.preset:
        values.update(PRESETS[args.preset])
    values.update({k: getattr(args, k) for k in _CONFIG_FLAGS if getattr(args, k) is not None})
    try:
        return exp.build_config(values)
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc).strip("'\"")) from exc


def cmd_train(args):
    config = config_from_args(args)
    result, *_ = exp.train_model(config)
    path = exp.output_paths(config.out)["model"]
    Path(config.out).mkdir(parents=True, exist_ok=True)
    exp.save_model(result, config, path)
    print(f"trained {len(result.history)} episodes (best {result.best_episode}); wrote {path}")


def cmd_eval(args):
    out = args.out or exp.ExperimentConfig().out
    path = args.model or exp.output_paths(out)["model"]
    model, config, corpus, split = exp.load_model(path)
    threshold = config.train.threshold if args.threshold is None else args.threshold
    report, _ = exp.evaluate(model, corpus, split, config.task, threshold)
    exp.write_report(report, out)
    print(report_io.to_text(report), end="")


def cmd_experiment(args):
    config = config_from_args(args)
    report, _ = exp.run_experiment(config)
    print(report_io.to_text(report), end="")


def cmd_synth(args):
    try:
        corpus, table = synth_corpus(args.n_classes, args.n_seen, args.samples, args.design, args.seed, scale=args.scale)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data.write_corpus(corpus, out / "corpus.tsv", out / "labels.tsv")
    data.write_embeddings(out / "embeddings.txt", table.vectors)
    print(f"wrote {len(corpus.utterances)} utterances, {corpus.n_classes} labels to {out}")


def cmd_gradcheck(args):
    try:
        errors, seconds = gradcheck(seed=args.seed, ablations=exp.parse_ablations(args.ablate))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    worst = 0.0
    for name, err in errors.items():
        status = "ok" if err < GRADCHECK_TOL else "FAIL"
        print(f"{name:<12} max_rel_err={err:.3e} {status}")
        worst = max(worst, err)
    print(f"worst={worst:.3e} tol={GRADCHECK_TOL:.0e} time={seconds:.1f}s")
    return EXIT_OK if worst < GRADCHECK_TOL else EXIT_CHECK


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "experiment": cmd_experiment,
    "synth": cmd_synth,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
        code = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (data.DataError, CheckpointError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
