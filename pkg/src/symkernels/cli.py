"""Command-line entry point: ``symkernels {train,eval,verify,bench}``.

Exit codes: 0 success, 1 verification failure or diverged training,
2 usage error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from symkernels.data import CifarFormatError, load_cifar10
from symkernels.nn import CheckpointError, load_checkpoint

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_IO = 3

log = logging.getLogger("symkernels")


def _level(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid level {text!r}") from None
    if value not in range(5):
        raise argparse.ArgumentTypeError(f"level must be 0..4, got {value}")
    return value


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _seed(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="symkernels", description="CNNs with symmetric 3x3 convolution kernels."
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="train on CIFAR-10 and write metrics / checkpoint")
    tr.add_argument("--level", type=_level, required=True)
    tr.add_argument("--epochs", type=_positive, required=True)
    tr.add_argument("--batch-size", type=_positive, default=1280)
    tr.add_argument("--lr", type=float, default=0.02)
    tr.add_argument("--decay", type=float, default=0.97)
    tr.add_argument("--decay-every", type=_positive, default=5)
    tr.add_argument("--seed", type=_seed, default=0)
    tr.add_argument("--data-dir", required=True)
    tr.add_argument("--subset", type=_positive)
    tr.add_argument("--metrics-out")
    tr.add_argument("--checkpoint-out")
    tr.add_argument("--checkpoint-in")
    tr.add_argument("--eval-every", type=_positive, default=5)

    ev = sub.add_parser("eval", help="test loss and accuracy of a checkpoint")
    ev.add_argument("--checkpoint-in", required=True)
    ev.add_argument("--data-dir", required=True)

    ve = sub.add_parser("verify", help="run the invariance / gradient property suite")
    ve.add_argument("--level", type=_level, required=True)
    ve.add_argument("--seed", type=_seed, default=0)
    ve.add_argument("--images", type=_positive, default=100, help="random images for invariance")

    be = sub.add_parser("bench", help="time the tied convolution forward per level")
    be.add_argument("--levels", type=_level, nargs="+", default=[0, 1, 2, 3, 4])
    be.add_argument("--repetitions", type=int, default=200)
    return parser


def cmd_train(args) -> int:
    from symkernels.train import RunConfig, TrainingDiverged, run

    config = RunConfig(
        level=args.level,
        epochs=args.epochs,
        batch_size=args.batch_size,
        base_lr=args.lr,
        decay=args.decay,
        decay_every=args.decay_every,
        seed=args.seed,
        data_dir=args.data_dir,
        subset=args.subset,
        metrics_out=args.metrics_out,
        checkpoint_out=args.checkpoint_out,
        checkpoint_in=args.checkpoint_in,
        eval_every=args.eval_every,
    )
    try:
        config.validate()
    except ValueError as exc:
        print(f"symkernels train: {exc}", file=sys.stderr)
        return EXIT_USAGE
    train_set, test_set = load_cifar10(args.data_dir)
    try:
        _, rows = run(config, train_set, test_set)
    except TrainingDiverged as exc:
        print(f"symkernels train: {exc}", file=sys.stderr)
        return EXIT_FAILED
    for row in rows:
        print(row.csv_line())
    return EXIT_OK


def cmd_eval(args) -> int:
    from symkernels.train import evaluate

    net = load_checkpoint(args.checkpoint_in)
    _, test_set = load_cifar10(args.data_dir)
    loss, acc = evaluate(net, test_set)
    print(f"level {net.level}")
    print(f"test_loss {loss:.6f}")
    print(f"test_acc {acc:.6f}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from symkernels.verify import run_suite

    results = run_suite(args.level, seed=args.seed, n_images=args.images)
    for r in results:
        print(r.line())
    ok = all(r.ok for r in results)
    print(f"verify level {args.level}: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAILED


def cmd_bench(args) -> int:
    from symkernels.bench import run_bench

    if args.repetitions < 10:
        print("symkernels bench: --repetitions must be >= 10", file=sys.stderr)
        return EXIT_USAGE
    print("level,median_ns_per_output,multiplies_per_output_per_slice")
    for row in run_bench(args.levels, args.repetitions):
        print(row.line())
    return EXIT_OK


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "verify": cmd_verify, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except (OSError, CifarFormatError, CheckpointError) as exc:
        print(f"symkernels {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
