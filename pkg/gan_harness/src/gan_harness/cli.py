"""Command line for the audio-to-image harness.

Subcommands: make-toy (synthetic paired corpus), train, infer, evaluate.
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys

from .data import CorpusError, load_manifest, split_corpus, write_image
from .evaluate import evaluate
from .infer import infer, load_checkpoint
from .toy import make_toy_corpus
from .train import TrainConfig, train


def cmd_make_toy(args) -> int:
    manifest = make_toy_corpus(args.output, pairs=args.pairs, duration_s=args.duration)
    print(f"toy corpus: {args.pairs} pairs, manifest {manifest}")
    return 0


def cmd_train(args) -> int:
    corpus = load_manifest(args.manifest)
    config = TrainConfig(
        lr_generator=args.lr_generator,
        lr_discriminator=args.lr_discriminator,
        epochs=args.epochs,
        seed=args.seed,
        checkpoint_every=args.checkpoint_every,
    )
    if args.train_count is not None:
        test_count = (
            args.test_count
            if args.test_count is not None
            else len(corpus) - args.train_count
        )
        corpus, _ = split_corpus(corpus, args.train_count, test_count, args.seed)
    result = train(corpus, config, args.output)
    last = result.epochs[-1]
    print(
        f"trained {config.epochs} epochs on {len(corpus)} pairs: "
        f"train MSE {last['train_mse']:.4f}, checkpoint {result.checkpoint_path}"
    )
    return 0


def cmd_infer(args) -> int:
    image = infer(load_checkpoint(args.checkpoint), args.wav)
    write_image(args.output, image)
    print(f"wrote {args.output}")
    return 0


def cmd_evaluate(args) -> int:
    corpus = load_manifest(args.manifest)
    train_keys = None
    if args.train_count is not None:
        test_count = (
            args.test_count
            if args.test_count is not None
            else len(corpus) - args.train_count
        )
        train_set, _ = split_corpus(corpus, args.train_count, test_count, args.seed)
        train_keys = set(train_set.keys())
    summary = evaluate(args.checkpoint, corpus, args.output, train_keys=train_keys)
    for key, value in summary.items():
        print(f"{key}: {value}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gan-harness", description="Audio-to-image GAN harness."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-toy", help="write a synthetic paired corpus")
    p.add_argument("--output", required=True)
    p.add_argument("--pairs", type=int, default=8)
    p.add_argument("--duration", type=float, default=1.0)
    p.set_defaults(func=cmd_make_toy)

    p = sub.add_parser("train", help="train on a paired corpus manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--epochs", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr-generator", dest="lr_generator", type=float, default=0.00001)
    p.add_argument("--lr-discriminator", dest="lr_discriminator", type=float, default=0.00004)
    p.add_argument("--train-count", dest="train_count", type=int)
    p.add_argument("--test-count", dest="test_count", type=int)
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="generate the image for one WAV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--wav", required=True)
    p.add_argument("--output", required=True, help="output PNG path")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("evaluate", help="MSE report over a paired corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--train-count", dest="train_count", type=int)
    p.add_argument("--test-count", dest="test_count", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        return int(exit_.code or 0)
    try:
        return args.func(args)
    except (CorpusError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
