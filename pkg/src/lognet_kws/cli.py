"""``lognet-kws`` command line.

Exit codes: 0 success, 1 unexpected error, 2 bad flags, 3 missing file,
4 no speech detected, 5 invalid data or file format, 64 unknown subcommand.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from ._io import atomic_write_text
from .aggregate import METHODS, aggregate, canonical_method
from .audio import SampleRateError, WavFormatError, load_wav, to_8k
from .evalkit.analysis import (adaptive_binning_names, architecture_sweep, default_ks,
                               feature_reduction_sweep, permutation_importance, reduction_csv,
                               sweep_csv)
from .evalkit.dataset import SPLIT_ALIASES, SPLIT_MODES, DatasetError, build_index
from .evalkit.evaluate import (EmptySplitError, ExtractionError, extract_features, fit_and_score,
                               make_classifier, split_features)
from .evalkit.fetch import DATA_ENV, DEFAULT_URL, default_data_dir, fetch_dataset
from .evalkit.metrics import compute_metrics
from .features import MfccConfig, mfcc_from_segment
from .lognet import LogNetArch, LogNetClassifier, forward
from .pipeline import clip_features
from .vad import OfflineVadConfig, StreamVad, StreamVadConfig, has_activity

log = logging.getLogger("lognet_kws")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_NO_SPEECH = 4
EXIT_DATA = 5
EXIT_UNKNOWN_COMMAND = 64

TRAIN_ARCH = "64:50:40:4"
EMBEDDED_ARCH = "64:33:9:4"
CACHE_ENV = "LOGNET_KWS_CACHE"


class NoSpeechError(Exception):
    pass


def _arch(text: str) -> LogNetArch:
    try:
        return LogNetArch.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _method(text: str) -> str:
    try:
        return canonical_method(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _split(text: str) -> str:
    key = SPLIT_ALIASES.get(text, text)
    if key not in SPLIT_MODES:
        raise argparse.ArgumentTypeError(f"split must be one of {sorted(SPLIT_ALIASES)}")
    return key


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("values must be positive integers")
    return values


def _default_cache() -> Path:
    env = os.environ.get(CACHE_ENV)
    return Path(env) if env else Path.home() / ".cache" / "lognet_kws" / "features"


# Shared flag groups ---------------------------------------------------------


def _add_data(p):
    p.add_argument("--data", type=Path, default=None,
                   help=f"dataset root with go/left/right/stop folders (default: ${DATA_ENV} "
                        "or ~/.cache/lognet_kws/speech_commands)")
    p.add_argument("--split", type=_split, default="speaker_independent",
                   help="random | speaker-independent (default: speaker-independent)")
    p.add_argument("--seed", type=int, default=1, help="seed for splits, training and permutations")
    p.add_argument("--cache-dir", type=Path, default=None,
                   help=f"feature cache directory (default: ${CACHE_ENV} or ~/.cache/lognet_kws/features)")
    p.add_argument("--no-cache", action="store_true", help="do not read or write the feature cache")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for feature extraction")


def _add_agg(p, default="adaptive_binning"):
    p.add_argument("--agg", type=_method, default=default,
                   help=f"aggregation: basic | temporal | windowed | adaptive or one of {', '.join(METHODS)}")


def _add_training(p):
    p.add_argument("--epochs", type=int, default=150, help="maximum training epochs")
    p.add_argument("--lr", type=float, default=1e-3, help="SGD learning rate")
    p.add_argument("--batch-size", type=int, default=64, help="mini-batch size")
    p.add_argument("--patience", type=int, default=15, help="early-stopping patience in epochs")


def _add_output(p, what):
    p.add_argument("--out", type=Path, required=True, help=f"output directory for {what}")
    p.add_argument("--csv", action="store_true", help="also write CSV companions next to the JSON")


def _training_kwargs(args) -> dict:
    return {"epochs": args.epochs, "learning_rate": args.lr, "batch_size": args.batch_size,
            "patience": args.patience}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lognet-kws", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("fetch", help="download and unpack the four command folders")
    p.add_argument("--dest", type=Path, default=None, help="target directory (default: dataset root)")
    p.add_argument("--url", default=DEFAULT_URL, help="archive URL or local .tar.gz path")
    p.add_argument("--sha256", default=None, help="expected archive checksum")
    p.add_argument("--force", action="store_true", help="re-extract even if the folders exist")

    p = sub.add_parser("train", help="train a model and report test-split metrics")
    _add_data(p)
    _add_agg(p)
    p.add_argument("--arch", type=_arch, default=LogNetArch.parse(TRAIN_ARCH),
                   help=f"N:P:M:4 (default {TRAIN_ARCH}); N must match the aggregation")
    _add_training(p)
    _add_output(p, "model.lgnt and report.json")

    p = sub.add_parser("eval", help="score a saved model on a dataset split")
    p.add_argument("--model", type=Path, required=True, help="model file written by train")
    _add_data(p)
    p.add_argument("--subset", choices=("train", "test", "all"), default="test",
                   help="which part of the split to score (default test)")
    _add_output(p, "report.json")

    p = sub.add_parser("infer", help="classify one WAV file")
    p.add_argument("wav", type=Path, help="8 or 16 kHz mono 16-bit PCM WAV")
    p.add_argument("--model", type=Path, required=True, help="model file written by train")

    p = sub.add_parser("stream", help="replay a WAV through the streaming detector")
    p.add_argument("wav", type=Path, help="8 or 16 kHz mono 16-bit PCM WAV")
    p.add_argument("--model", type=Path, default=None, help="classify each detected segment")
    p.add_argument("--trace", type=Path, default=None, help="write the per-frame FSM trace CSV here")
    p.add_argument("--chunk", type=int, default=256, help="samples per push (default 256)")

    p = sub.add_parser("pfi", help="permutation feature importance with speaker-grouped folds")
    _add_data(p)
    _add_agg(p)
    p.add_argument("--arch", type=_arch, default=LogNetArch.parse(TRAIN_ARCH), help="N:P:M:4")
    p.add_argument("--folds", type=int, default=3, help="cross-validation folds")
    p.add_argument("--repeats", type=int, default=10, help="permutations per feature and fold")
    _add_training(p)
    _add_output(p, "pfi.json")

    p = sub.add_parser("reduce", help="accuracy after keeping the top-k ranked features")
    _add_data(p)
    _add_agg(p)
    p.add_argument("--arch", type=_arch, default=LogNetArch.parse(TRAIN_ARCH),
                   help="N:P:M:4 (N is the full feature count)")
    p.add_argument("--pfi", type=Path, default=None,
                   help="pfi.csv ranking to use (default: compute importance first)")
    p.add_argument("--ks", type=_int_list, default=None, help="comma-separated k values (default N, N-4, ...)")
    _add_training(p)
    _add_output(p, "reduction.json")

    p = sub.add_parser("sweep", help="test accuracy over a P x M grid")
    _add_data(p)
    _add_agg(p)
    p.add_argument("--p-values", type=_int_list, default=[10, 20, 33, 50, 70], help="reservoir sizes")
    p.add_argument("--m-values", type=_int_list, default=[5, 9, 20, 40], help="hidden sizes")
    _add_training(p)
    _add_output(p, "sweep.json")

    p = sub.add_parser("export-header", help="write model tables as a C header")
    p.add_argument("--model", type=Path, required=True, help="model file written by train")
    p.add_argument("--out", type=Path, required=True, help="header path, e.g. lognet_model.h")
    p.add_argument("--guard", default="LOGNET_MODEL_H", help="include-guard macro")

    p = sub.add_parser("mem-budget", help="RAM budget of the embedded pipeline")
    p.add_argument("--arch", type=_arch, default=LogNetArch.parse(EMBEDDED_ARCH),
                   help=f"N:P:M:4 (default {EMBEDDED_ARCH})")
    _add_agg(p)
    p.add_argument("--csv", action="store_true", help="print CSV instead of the text table")
    p.add_argument("--out", type=Path, default=None, help="also write memory.json here")

    p = sub.add_parser("timer", help="sampling-timer interrupt frequency")
    p.add_argument("--f-clk", type=float, default=48e6, help="timer clock in Hz (default 48e6)")
    p.add_argument("--div", type=float, default=64, help="prescaler divider (default 64)")
    p.add_argument("--cc", type=float, default=93, help="compare value (default 93)")
    p.add_argument("--target", type=float, default=8000.0, help="desired rate in Hz")
    return parser


# Helpers --------------------------------------------------------------------


def _index(args):
    root = args.data if args.data is not None else default_data_dir()
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} not found; run 'lognet-kws fetch' or set ${DATA_ENV}")
    return build_index(root, args.split, args.seed)


def _all_features(args, index, method):
    cache = None if args.no_cache else (args.cache_dir or _default_cache())
    return extract_features(index.entries, [method], cache_dir=cache, n_jobs=args.jobs)[method]


def _features(args, index, method):
    return split_features(index, _all_features(args, index, method))


def _write_json(path: Path, payload) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _classifier(args, arch, method):
    return make_classifier(arch, args.seed, method, **_training_kwargs(args))


def _check_dim(arch, X, method):
    if arch.n_input != X.shape[1]:
        raise ValueError(f"architecture {arch} expects N={arch.n_input}, "
                         f"but {method} yields {X.shape[1]} features")


def _load_model(path):
    from .deploy.persistence import load_model
    return load_model(path)


# Subcommands ----------------------------------------------------------------


def cmd_fetch(args) -> int:
    dest = fetch_dataset(args.dest, args.url, args.sha256, force=args.force)
    print(dest)
    return EXIT_OK


def cmd_train(args) -> int:
    from .deploy.persistence import save_model

    index = _index(args)
    train, test = _features(args, index, args.agg)
    _check_dim(args.arch, train.X, args.agg)
    report, clf = fit_and_score(train, test, _classifier(args, args.arch, args.agg))
    report.extra.update({"method": args.agg, "split": index.mode, "seed": args.seed,
                         "arch": str(args.arch), "n_train": len(train), "n_test": len(test),
                         "best_epoch": clf.history_.best_epoch})
    save_model(clf.model_, args.out / "model.lgnt")
    atomic_write_text(args.out / "report.json", report.to_json() + "\n")
    if args.csv:
        atomic_write_text(args.out / "confusion.csv", report.confusion_csv())
        atomic_write_text(args.out / "per_class.csv", report.per_class_csv())
    print(report.table())
    return EXIT_OK


def cmd_eval(args) -> int:
    model = _load_model(args.model)
    index = _index(args)
    fs = _all_features(args, index, model.method)
    if args.subset != "all":
        fs = dict(zip(("train", "test"), split_features(index, fs)))[args.subset]
    if len(fs) == 0:
        raise EmptySplitError("empty split")
    _check_dim(model.arch, fs.X, model.method)
    clf = LogNetClassifier.from_model(model)
    report = compute_metrics(fs.labels, clf.predict(fs.X), list(model.labels), fs.fallback_count)
    report.extra.update({"method": model.method, "split": index.mode, "seed": args.seed,
                         "arch": str(model.arch), "subset": args.subset})
    atomic_write_text(args.out / "report.json", report.to_json() + "\n")
    if args.csv:
        atomic_write_text(args.out / "confusion.csv", report.confusion_csv())
        atomic_write_text(args.out / "per_class.csv", report.per_class_csv())
    print(report.table())
    return EXIT_OK


def _prob_line(label, probs) -> str:
    return f"{label}\t" + ",".join(f"{p:.6f}" for p in probs)


def cmd_infer(args) -> int:
    model = _load_model(args.model)
    clip = load_wav(args.wav)
    vad_cfg = OfflineVadConfig()
    if not has_activity(to_8k(clip), vad_cfg):
        raise NoSpeechError(f"no speech detected in {args.wav}")
    cf = clip_features(clip, [model.method], vad_cfg, fallback=True)
    if cf.fallback:
        print(f"note: no segment in the command duration range; using the whole clip of {args.wav}",
              file=sys.stderr)
    probs = forward(model, cf.vectors[model.method])
    print(_prob_line(model.labels[int(np.argmax(probs))], probs))
    return EXIT_OK


def cmd_stream(args) -> int:
    if args.chunk < 1:
        raise ValueError("--chunk must be positive")
    model = _load_model(args.model) if args.model is not None else None
    clip = to_8k(load_wav(args.wav))
    vad = StreamVad(StreamVadConfig(), record_trace=args.trace is not None)
    segments = []
    for i in range(0, len(clip), args.chunk):
        segments.extend(vad.push(clip.samples[i:i + args.chunk]))
    if args.trace is not None:
        atomic_write_text(args.trace, vad.trace_csv())
    print("start_sample\tend_sample\tlabel\tprobabilities")
    for seg in segments:
        if model is not None:
            vec = aggregate(mfcc_from_segment(seg.slice(clip).samples, MfccConfig()), model.method).values
            probs = forward(model, vec)
            print(f"{seg.start_sample}\t{seg.end_sample}\t" + _prob_line(model.labels[int(np.argmax(probs))], probs))
        else:
            print(f"{seg.start_sample}\t{seg.end_sample}\t-\t-")
    print(f"segments={len(segments)} rejected={vad.discarded}", file=sys.stderr)
    if not segments:
        raise NoSpeechError(f"no speech detected in {args.wav}")
    return EXIT_OK


def _pfi(args, train):
    est = _classifier(args, args.arch, args.agg)
    return permutation_importance(train.X, train.labels, train.speakers, est, args.folds,
                                  args.repeats, args.seed, args.jobs)


def _names(method, n):
    return adaptive_binning_names() if method == "adaptive_binning" and n == 64 else [f"f{j}" for j in range(n)]


def cmd_pfi(args) -> int:
    index = _index(args)
    train, _ = _features(args, index, args.agg)
    _check_dim(args.arch, train.X, args.agg)
    res = _pfi(args, train)
    names = _names(args.agg, train.X.shape[1])
    payload = {"method": args.agg, "split": index.mode, "seed": args.seed, "arch": str(args.arch),
               "folds": args.folds, "repeats": args.repeats, "baseline": res.baseline.tolist(),
               "features": names, "mean_drop": res.drops.tolist(), "std_drop": res.drops_std.tolist(),
               "ranking": res.ranking.tolist()}
    _write_json(args.out / "pfi.json", payload)
    if args.csv:
        atomic_write_text(args.out / "pfi.csv", res.to_csv(names))
    for j in res.ranking[:10]:
        print(f"{names[j]:<16}{res.drops[j]:+.4f}")
    return EXIT_OK


def _read_ranking(path: Path, n: int) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    try:
        ranked = sorted(rows, key=lambda r: int(r["rank"]))
        ranking = np.array([int(r["feature"]) for r in ranked])
    except (KeyError, ValueError):
        raise ValueError(f"{path} is not a pfi.csv ranking") from None
    if sorted(ranking.tolist()) != list(range(n)):
        raise ValueError(f"{path} ranks {len(ranking)} features, expected a permutation of {n}")
    return ranking


def cmd_reduce(args) -> int:
    index = _index(args)
    train, test = _features(args, index, args.agg)
    _check_dim(args.arch, train.X, args.agg)
    n = train.X.shape[1]
    if args.pfi is not None:
        ranking = _read_ranking(args.pfi, n)
    else:
        ranking = _pfi(argparse.Namespace(**vars(args), folds=3, repeats=10), train).ranking
    est = _classifier(args, args.arch, args.agg)
    curve = feature_reduction_sweep(train.X, train.labels, test.X, test.labels, ranking, est,
                                    args.ks or default_ks(n), args.seed, args.jobs)
    _write_json(args.out / "reduction.json",
                {"method": args.agg, "split": index.mode, "seed": args.seed, "arch": str(args.arch),
                 "ranking": ranking.tolist(), "curve": [{"k": k, "accuracy": a} for k, a in curve]})
    if args.csv:
        atomic_write_text(args.out / "reduction.csv", reduction_csv(curve))
    for k, a in curve:
        print(f"k={k:<4}accuracy={a:.4f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    index = _index(args)
    train, test = _features(args, index, args.agg)
    est = make_classifier(None, args.seed, args.agg, **_training_kwargs(args))
    cells = architecture_sweep(train.X, train.labels, test.X, test.labels, args.p_values,
                               args.m_values, est, args.seed, args.jobs)
    _write_json(args.out / "sweep.json",
                {"method": args.agg, "split": index.mode, "seed": args.seed,
                 "cells": [{"P": c.p_reservoir, "M": c.m_hidden, "accuracy": c.accuracy} for c in cells]})
    if args.csv:
        atomic_write_text(args.out / "sweep.csv", sweep_csv(cells))
    buf = io.StringIO()
    buf.write("P\\M" + "".join(f"{m:>8}" for m in args.m_values) + "\n")
    acc = {(c.p_reservoir, c.m_hidden): c.accuracy for c in cells}
    for p in args.p_values:
        buf.write(f"{p:<3}" + "".join(f"{acc[p, m]:>8.4f}" for m in args.m_values) + "\n")
    print(buf.getvalue(), end="")
    return EXIT_OK


def cmd_export_header(args) -> int:
    from .deploy.header import header_text
    model = _load_model(args.model)
    atomic_write_text(args.out, header_text(model, args.guard))
    print(args.out)
    return EXIT_OK


def cmd_mem_budget(args) -> int:
    from .deploy.memory import (AGGREGATION_SCRATCH, PipelineMemoryConfig, aggregation_footprint,
                                aggregation_table, estimate_memory)
    budget = estimate_memory(args.arch, PipelineMemoryConfig(method=args.agg))
    if args.csv:
        print(budget.to_csv(), end="")
    else:
        print(budget.table())
        print()
        print(aggregation_table())
    if args.out is not None:
        payload = {
            "arch": str(args.arch),
            "items": [{"name": i.name, "bytes": i.bytes, "dynamic": i.dynamic,
                       "description": i.description} for i in budget.items],
            "total_bytes": budget.total,
            "capacity_bytes": budget.capacity,
            "utilization": budget.utilization,
            "utilization_pct": budget.utilization_pct,
            "aggregation": {m: aggregation_footprint(m).total for m in AGGREGATION_SCRATCH},
        }
        _write_json(args.out, payload)
    return EXIT_OK


def cmd_timer(args) -> int:
    from .deploy.timer import timer_interrupt_frequency, timer_notes
    f = timer_interrupt_frequency(args.f_clk, args.div, args.cc)
    print(f"f_clk={args.f_clk:g} Hz  DIV={args.div:g}  CC={args.cc:g}")
    print(f"interrupt frequency = f_clk / (DIV * (CC + 1)) = {f:.1f} Hz")
    for note in timer_notes(args.f_clk, args.div, args.cc, args.target):
        print(f"note: {note}")
    return EXIT_OK


COMMANDS = {
    "fetch": cmd_fetch, "train": cmd_train, "eval": cmd_eval, "infer": cmd_infer,
    "stream": cmd_stream, "pfi": cmd_pfi, "reduce": cmd_reduce, "sweep": cmd_sweep,
    "export-header": cmd_export_header, "mem-budget": cmd_mem_budget, "timer": cmd_timer,
}


def _first_positional(argv):
    for tok in argv:
        if not tok.startswith("-"):
            return tok
        if tok == "--":
            return None
    return None


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    first = _first_positional(argv)
    if first is not None and first not in COMMANDS:
        print(f"lognet-kws: unknown subcommand {first!r} (choose from {', '.join(COMMANDS)})",
              file=sys.stderr)
        return EXIT_UNKNOWN_COMMAND
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except NoSpeechError as exc:
        print(f"lognet-kws: {exc}", file=sys.stderr)
        return EXIT_NO_SPEECH
    except FileNotFoundError as exc:
        print(f"lognet-kws: file not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_MISSING
    except (WavFormatError, SampleRateError, DatasetError, EmptySplitError, ExtractionError,
            ValueError) as exc:
        print(f"lognet-kws: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - last-resort diagnostic
        log.debug("unexpected failure", exc_info=True)
        print(f"lognet-kws: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
