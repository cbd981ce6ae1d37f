"""``birkhoff-perf`` command-line interface.

Exit codes: 0 success, 1 usage, 2 bad data, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path
from typing import Sequence

from ._io import atomic_write_text, dumps_json
from .corpus import SynthConfig, generate_synthetic, load_manifest, split
from .errors import BirkhoffError, DataError
from .evaluation import distributions_csv, evaluate, feature_means, format_table, run_ablation
from .features import FEATURE_NAMES
from .midi_io import read_midi
from .model import (
    AESTHETIC_NAMES,
    TrainedModel,
    aesthetic_features,
    aesthetic_matrix,
    predict,
    train_model,
)
from .pipeline import Sample, analyze_pair, extract_corpus

EXIT_OK, EXIT_USAGE = 0, 1
log = logging.getLogger("birkhoff_perf")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _open_ratio(text: str) -> float:
    value = float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"ratio must lie in (0, 1), got {text}")
    return value


def _emit(text: str, output: str | None) -> None:
    if output:
        atomic_write_text(output, text)
    else:
        sys.stdout.write(text)


def _split_samples(
    manifest: str, ratio: float, seed: int, workers: int | None
) -> tuple[list[Sample], list[Sample]]:
    entries = load_manifest(manifest)
    train, test = split(entries, ratio, seed)
    samples = extract_corpus(train + test, workers)
    return samples[: len(train)], samples[len(train):]


def _load_model(path: str) -> TrainedModel:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read model {path}: {exc}") from exc
    return TrainedModel.from_json(text)


# --- subcommands --------------------------------------------------------------------


def cmd_extract(args) -> int:
    _, feats = analyze_pair(read_midi(args.score), read_midi(args.performance))
    d = feats.to_dict()
    if args.format == "json":
        text = dumps_json(d)
    elif args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(FEATURE_NAMES)
        writer.writerow([repr(d[n]) for n in FEATURE_NAMES])
        text = buf.getvalue()
    else:
        body = [[n, f"{d[n]:.6f}", "" if d["flags"][n] else "imputed"] for n in FEATURE_NAMES]
        text = format_table(["feature", "value", "note"], body)
    _emit(text, args.output)
    return EXIT_OK


def cmd_align(args) -> int:
    result, _ = analyze_pair(read_midi(args.score), read_midi(args.performance))
    _emit(dumps_json(result.to_dict()), args.output)
    return EXIT_OK


def cmd_synth(args) -> int:
    config = SynthConfig(seed=args.seed, n_pieces=args.n_pieces, bars_per_piece=args.bars)
    manifest = generate_synthetic(config, args.out_dir)
    print(manifest)
    return EXIT_OK


def cmd_train(args) -> int:
    if args.all:
        train = extract_corpus(load_manifest(args.manifest), args.workers)
    else:
        train, _ = _split_samples(args.manifest, args.ratio, args.seed, args.workers)
    model = train_model(
        [s.features for s in train], [s.label for s in train],
        args.lr, args.iterations, args.seed, ablate=args.ablate_target,
    )  # fmt: skip
    model.training_meta["split"] = None if args.all else {"ratio": args.ratio, "seed": args.seed}
    atomic_write_text(args.output, model.to_json())

    meta = model.training_meta
    lines = [f"iter {k:>5}  loss {v:.6f}" for k, v in meta["loss_checkpoints"].items()]
    lines.append(f"final       loss {meta['final_loss']:.6f}")
    print("\n".join(lines))
    return EXIT_OK


def cmd_score(args) -> int:
    model = _load_model(args.model)
    alignment, feats = analyze_pair(read_midi(args.score), read_midi(args.performance))
    m, probs, cls = predict(feats, model)
    a = aesthetic_features(feats, model.regressors)
    report = {
        "basic_features": feats.to_dict(),
        "aesthetic_features": dict(zip(("H", "S", "C", "R"), (a.h, a.s, a.c, a.r))),
        "measure": m,
        "class_probabilities": dict(zip(model.class_names, (float(p) for p in probs))),
        "predicted_class": cls,
        "alignment_stats": {
            "matches": len(alignment.matches),
            "missing_score": len(alignment.missing_score),
            "extra_perf": len(alignment.extra_perf),
            "total_cost": alignment.total_cost,
        },
    }
    _emit(dumps_json(report), args.output)
    return EXIT_OK


def _evaluation_samples(args, model: TrainedModel) -> list[Sample]:
    """The held-out side of the split the model was trained with, or every
    entry when the model saw the whole manifest or --all is given."""
    entries = load_manifest(args.manifest)
    recorded = model.training_meta.get("split")
    if not args.all and recorded:
        _, entries = split(entries, recorded["ratio"], recorded["seed"])
    return extract_corpus(entries, args.workers)


def cmd_evaluate(args) -> int:
    model = _load_model(args.model)
    samples = _evaluation_samples(args, model)
    ev = evaluate(model, samples)
    means = feature_means(samples, aesthetic_matrix([s.features for s in samples], model.regressors))
    if args.dump_distributions:
        atomic_write_text(args.dump_distributions, distributions_csv(model, samples))
    if args.format == "json":
        text = dumps_json({"evaluation": ev.to_dict(), "feature_means": means.to_dict()})
    else:
        names = list(model.class_names)
        cm = [[names[k], *(str(v) for v in row)] for k, row in enumerate(ev.confusion)]
        text = (
            f"accuracy {ev.accuracy:.4f}\nkappa    {ev.kappa:.4f}\n\n"
            + format_table(["true\\pred", *names], cm)
            + "\n"
            + means.to_text()
        )
    _emit(text, args.output)
    return EXIT_OK


def cmd_ablate(args) -> int:
    train, test = _split_samples(args.manifest, args.ratio, args.seed, args.workers)
    report = run_ablation(train, test, args.lr, args.iterations, args.seed)
    text = dumps_json(report.to_dict()) if args.format == "json" else report.to_text()
    _emit(text, args.output)
    return EXIT_OK


# --- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="birkhoff-perf", description="Aesthetic scoring of MIDI performances.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def output(p, formats=None):
        p.add_argument("-o", "--output", help="write here instead of stdout (atomically)")
        if formats:
            p.add_argument("--format", choices=formats, default=formats[0])

    def pair(p):
        p.add_argument("score", help="reference score MIDI file")
        p.add_argument("performance", help="performance MIDI file")

    def training(p):
        p.add_argument("manifest", help="corpus manifest JSON")
        p.add_argument("--seed", type=int, default=0, help="split and training seed (default 0)")
        p.add_argument("--ratio", type=_open_ratio, default=0.8, help="train fraction of pieces")
        p.add_argument("--lr", type=_positive_float, default=0.01)
        p.add_argument("--iterations", type=_positive_int, default=1000)
        workers(p)

    def workers(p):
        p.add_argument("--workers", type=_positive_int, default=None,
                       help="extraction processes (default: $BIRKHOFF_PERF_WORKERS or CPU count)")  # fmt: skip

    p = sub.add_parser("extract", help="10 basic features of one performance")
    pair(p)
    output(p, ["json", "csv", "text"])
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("align", help="note alignment of one performance against its score")
    pair(p)
    output(p)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("synth", help="generate a synthetic three-class corpus")
    p.add_argument("out_dir")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--n-pieces", type=_positive_int, default=40)
    p.add_argument("--bars", type=_positive_int, default=8, help="bars per piece (>= 4)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="fit regressors and the measure on a corpus")
    training(p)
    p.add_argument("-o", "--output", required=True, help="model JSON path")
    p.add_argument("--ablate-target", choices=AESTHETIC_NAMES, default=None,
                   help="drop one aesthetic term from the measure")  # fmt: skip
    p.add_argument("--all", action="store_true", help="train on every entry, no held-out split")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score one performance with a trained model")
    p.add_argument("model")
    pair(p)
    output(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", help="accuracy, kappa and class feature means")
    p.add_argument("model")
    p.add_argument("manifest")
    p.add_argument("--all", action="store_true", help="evaluate every entry, not just the held-out split")
    p.add_argument("--dump-distributions", metavar="CSV", help="per-sample features, H, S, C, R and M")
    workers(p)
    output(p, ["json", "text"])
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="full model against the four one-term-removed variants")
    training(p)
    output(p, ["json", "text"])
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")  # fmt: skip
    try:
        return args.func(args)
    except BirkhoffError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
