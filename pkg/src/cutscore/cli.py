"""Command-line entry point exposing the pipeline end to end.

Subcommands: synth, augment, train, eval, baselines, retrain, score.
Exit codes: 0 success, 1 usage error (bad flags; nothing is written),
2 data or model error (missing/malformed files, schema mismatches).

All randomness in a subcommand derives from its --seed: augmentation,
splitting, weight initialization, and epoch shuffling each use a child
seed obtained with a fixed per-stage salt, so `train` and `eval` invoked
with the same --seed and data flags reconstruct the identical split.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import assessment, baselines, synthgen, trajectories, training
from .errors import ClassCountMismatch, CutscoreError
from .network import init_model
from .training import TrainConfig, history_to_json, load_model, save_model
from .util import atomic_write_text, derive_seed

# per-stage salts for child seeds
SALT_AUGMENT = 1
SALT_SPLIT = 2
SALT_INIT = 3
SALT_TRAIN = 4

CLASS_CHOICES = (2, 3, 6)


def band_label(label: int, classes: int) -> int:
    """Coarsen 6 quality classes to 2 ({0-2}, {3-5}) or 3 ({0-1}, {2-3}, {4-5})."""
    if classes == 6:
        return label
    if classes == 3:
        return label // 2
    return 0 if label < 3 else 1


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; this CLI reserves 2 for data errors
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _split_ratios(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated ratios")
    try:
        ratios = tuple(float(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if min(ratios) <= 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise argparse.ArgumentTypeError("ratios must be positive and sum to 1")
    return ratios


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="dataset directory of trajectory CSVs")
    p.add_argument("--labels", default=None, help="labels file (default: DATA/labels.csv)")
    p.add_argument("--window", type=int, default=64, help="window length N (default 64)")


def _add_split_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--split", type=_split_ratios, default=(0.70, 0.15, 0.15),
                   help="train,val,test ratios (default 0.70,0.15,0.15)")
    p.add_argument("--split-level", choices=("trajectory", "window"), default="trajectory",
                   help="keep a recording's windows together (trajectory) or split loose windows")
    p.add_argument("--classes", type=int, choices=CLASS_CHOICES, default=6,
                   help="number of classes; 2/3 band the 0-5 labels (default 6)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cutscore", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a labeled synthetic dataset")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--per-class", type=int, default=30, help="trajectories per class (default 30)")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("augment", help="window a dataset into a window CSV")
    _add_data_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output window CSV file")

    p = sub.add_parser("train", help="train the CNN from scratch")
    _add_data_flags(p)
    _add_split_flags(p)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output model JSON file")
    p.add_argument("--metrics", default=None, help="output per-epoch metrics JSON file")

    p = sub.add_parser("eval", help="evaluate a model on the test split")
    _add_data_flags(p)
    _add_split_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="also write the JSON report here")
    p.add_argument("--csv", default=None, help="write the confusion matrix as CSV here")

    p = sub.add_parser("baselines", help="fit classical baselines and compare")
    _add_data_flags(p)
    _add_split_flags(p)
    p.add_argument("--model", default=None, help="optional CNN model to include in the table")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--knn-k", type=int, default=5)
    p.add_argument("--out", default=None, help="write the comparison CSV here (default: stdout)")

    p = sub.add_parser("retrain", help="transfer-retrain a model with frozen blocks")
    _add_data_flags(p)
    _add_split_flags(p)
    p.add_argument("--model", required=True, help="input model JSON file")
    p.add_argument("--freeze-blocks", type=int, choices=range(5), default=0)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output model JSON file")
    p.add_argument("--metrics", default=None)

    p = sub.add_parser("score", help="score one trajectory with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--trajectory", required=True)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _usage_error(message: str) -> int:
    sys.stderr.write(f"cutscore: error: {message}\n")
    return 1


def _validate_common(args: argparse.Namespace) -> str | None:
    if getattr(args, "seed", 0) < 0:
        return "--seed must be nonnegative"
    if getattr(args, "window", 64) < 2:
        return "--window must be at least 2"
    if getattr(args, "epochs", 1) < 1:
        return "--epochs must be at least 1"
    if getattr(args, "batch", 1) < 1:
        return "--batch must be at least 1"
    if getattr(args, "lr", 1.0) <= 0:
        return "--lr must be positive"
    if getattr(args, "per_class", 1) < 1:
        return "--per-class must be at least 1"
    if getattr(args, "knn_k", 1) < 1:
        return "--knn-k must be at least 1"
    return None


def _load_windows(args: argparse.Namespace) -> list[trajectories.Window]:
    ts = trajectories.load_dataset(args.data, args.labels)
    classes = getattr(args, "classes", 6)
    for t in ts:
        t.label = band_label(t.label, classes)
    windows, skipped = trajectories.augment_dataset(
        ts, args.window, derive_seed(args.seed, SALT_AUGMENT)
    )
    for traj_id in skipped:
        sys.stderr.write(f"cutscore: skipping {traj_id}: shorter than one window\n")
    return windows


def _load_split(args: argparse.Namespace) -> training.SplitDataset:
    return training.split_dataset(
        _load_windows(args),
        ratios=args.split,
        seed=derive_seed(args.seed, SALT_SPLIT),
        class_count=args.classes,
        group_by_source=args.split_level == "trajectory",
    )


def _cmd_synth(args: argparse.Namespace) -> int:
    cfg = synthgen.SynthConfig(per_class=args.per_class, seed=args.seed)
    synthgen.generate(cfg, args.out)
    print(f"wrote {6 * args.per_class} trajectories to {args.out}")
    return 0


def _cmd_augment(args: argparse.Namespace) -> int:
    windows = _load_windows(args)
    trajectories.write_windows(windows, args.out)
    print(f"wrote {len(windows)} windows of {args.window} frames to {args.out}")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    split = _load_split(args)
    model = init_model(
        input_len=args.window,
        num_classes=args.classes,
        seed=derive_seed(args.seed, SALT_INIT),
    )
    cfg = TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch,
        split_ratios=args.split,
        seed=derive_seed(args.seed, SALT_TRAIN),
    )
    best, history = training.train(model, split, cfg)
    save_model(best, args.out)
    if args.metrics:
        atomic_write_text(args.metrics, history_to_json(history))
    meta = best.train_meta
    print(f"best val acc {meta['best_val_acc']:.4f}; model written to {args.out}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    if model.input_len != args.window:
        return _usage_error(
            f"--window {args.window} does not match the model's window ({model.input_len})"
        )
    if model.num_classes != args.classes:
        raise ClassCountMismatch(
            f"model has {model.num_classes} classes, --classes is {args.classes}"
        )
    split = _load_split(args)
    accuracy, cm = assessment.evaluate(model, split.test)
    doc = {"accuracy": accuracy, "confusion": cm.counts.tolist()}
    text = json.dumps(doc, indent=2)
    print(text)
    if args.out:
        atomic_write_text(args.out, text + "\n")
    if args.csv:
        atomic_write_text(args.csv, cm.to_csv())
    return 0


def _cmd_baselines(args: argparse.Namespace) -> int:
    split = _load_split(args)
    cfg = baselines.BaselineConfig(knn_k=args.knn_k)
    results = baselines.run_baselines(split.train, split.test, cfg)
    if args.model:
        model = load_model(args.model)
        if model.num_classes != args.classes:
            raise ClassCountMismatch(
                f"model has {model.num_classes} classes, --classes is {args.classes}"
            )
        results["cnn"] = assessment.evaluate(model, split.test)[0]
    lines = ["model,classes,accuracy"]
    lines += [f"{name},{args.classes},{acc:.4f}" for name, acc in results.items()]
    table = "\n".join(lines) + "\n"
    if args.out:
        atomic_write_text(args.out, table)
    else:
        print(table, end="")
    return 0


def _cmd_retrain(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    if model.input_len != args.window:
        return _usage_error(
            f"--window {args.window} does not match the model's window ({model.input_len})"
        )
    if model.num_classes != args.classes:
        raise ClassCountMismatch(
            f"model has {model.num_classes} classes, --classes is {args.classes}"
        )
    split = _load_split(args)
    cfg = TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch,
        split_ratios=args.split,
        seed=derive_seed(args.seed, SALT_TRAIN),
        freeze_blocks=args.freeze_blocks,
    )
    best, history = training.retrain_transfer(model, split, cfg)
    save_model(best, args.out)
    if args.metrics:
        atomic_write_text(args.metrics, history_to_json(history))
    meta = best.train_meta
    print(f"best val acc {meta['best_val_acc']:.4f}; model written to {args.out}")
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    t = trajectories.parse_trajectory(args.trajectory)
    windows = trajectories.sample_and_augment(
        t, model.input_len, derive_seed(args.seed, SALT_AUGMENT)
    )
    report = assessment.score_windows(model, windows)
    print(json.dumps(report.to_json_dict(), indent=2))
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "augment": _cmd_augment,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "baselines": _cmd_baselines,
    "retrain": _cmd_retrain,
    "score": _cmd_score,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse --help exits 0, usage errors exit 1
        return int(exc.code or 0)
    problem = _validate_common(args)
    if problem:
        return _usage_error(problem)
    try:
        return _COMMANDS[args.command](args)
    except CutscoreError as exc:
        sys.stderr.write(f"cutscore: {type(exc).__name__}: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"cutscore: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
