"""Command-line entry point: ``chatterdtw <command> ...``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import experiment as ex
from .dtw import DtwConfig
from .knn import accuracy, classify_test, classify_train_loo, two_class
from .preprocess import (
    DEFAULT_CUTOFF_HZ,
    DEFAULT_DOWNSAMPLE,
    DEFAULT_ORDER,
    DEFAULT_TARGET_LEN,
    preprocess_signal,
    segment,
)
from .signal_io import (
    load_labels,
    load_matrix,
    load_segment_configs,
    load_segment_tags,
    load_segments,
    load_signal,
    save_matrix,
    save_segments,
)
from .similarity import build_matrix

log = logging.getLogger("chatterdtw")


def _slope(text: str):
    if text.lower() in ("none", "off"):
        return None
    a, _, b = text.partition("/")
    return int(a), int(b or a)


def _add_dtw_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=["exact", "fastdtw"], default="fastdtw")
    p.add_argument("--window-radius", type=int, default=None, help="Sakoe-Chiba band (exact mode)")
    p.add_argument("--slope", type=_slope, default=None, metavar="A/B",
                   help="slope constraint steps, e.g. 1/1 for P=1 (exact mode)")
    p.add_argument("--fastdtw-radius", type=int, default=1)


def _dtw_config(args) -> DtwConfig:
    return DtwConfig(mode=args.mode, window_radius=args.window_radius,
                     slope_steps=args.slope, fastdtw_radius=args.fastdtw_radius)


def _load_input_segments(dirs):
    segs = []
    for d in dirs:
        segs.extend(load_segments(d))
    return segs


def _merged_tags(paths):
    tags = {}
    for p in paths:
        tags.update(load_segment_tags(p))
    return tags


def cmd_preprocess(args) -> int:
    labels = load_labels(args.labels, index_scale=args.label_index_scale)
    out = []
    for path in args.signals:
        ts = load_signal(path, format=args.format, sample_rate_hz=args.sample_rate_hz)
        if not args.already_downsampled:
            ts = preprocess_signal(ts, args.cutoff_hz, args.order, args.downsample_factor, args.zero_phase)
        regions = labels.get(ts.source_id)
        if regions is None:
            log.warning("%s: no label regions for source %r, skipped", path, ts.source_id)
            continue
        out.extend(segment(ts, regions, args.target_len, config_id=args.config_id or ts.source_id))
    if not out:
        log.error("no segments produced")
        return 1
    save_segments(out, args.out)
    print(f"wrote {len(out)} segments to {args.out}")
    return 0


def cmd_distmat(args) -> int:
    segs = _load_input_segments(args.input)
    matrix, stats = build_matrix(segs, _dtw_config(args), args.workers)
    save_matrix(matrix, args.out)
    print(f"{len(segs)}x{len(segs)} matrix -> {args.out}: {stats.seconds:.2f} s, "
          f"{stats.cells_per_second:.1f} cells/s ({stats.workers} workers, {stats.mode})")
    return 0


def cmd_classify(args) -> int:
    matrix = load_matrix(args.matrix)
    tags = _merged_tags(args.labels)
    if args.classes == 2:
        tags = {k: two_class(v) for k, v in tags.items()}
    if matrix.is_square:
        preds = classify_train_loo(matrix, tags, args.k, args.seed)
    else:
        preds = classify_test(matrix, tags, args.k, args.seed, tags)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(out)
    w.writerow(["segment_id", "predicted", "true", "neighbors"])
    for p in preds:
        w.writerow([p.segment_id, p.predicted_tag.value, p.true_tag.value if p.true_tag else "",
                    " ".join(p.neighbor_ids)])
    if args.out:
        out.close()
    if all(p.true_tag is not None for p in preds):
        print(f"accuracy: {accuracy(preds):.4f}", file=sys.stderr)
    return 0


def _finish_report(report, args) -> int:
    print(report.to_text())
    if args.out:
        report.write_csv(args.out)
    return 0


def cmd_split(args, class_mode) -> int:
    matrix = load_matrix(args.matrix)
    tags = _merged_tags(args.labels)
    groups = None
    if args.split_by_cut:
        groups = {}
        for p in args.labels:
            groups.update({s.segment_id: s.source_id for s in load_segments(p)})
    report = ex.run_split_experiment(matrix, tags, args.split, args.repeats, range(1, args.k_max + 1),
                                     class_mode, args.seed, groups)
    return _finish_report(report, args)


def cmd_transfer(args) -> int:
    matrix = load_matrix(args.matrix)
    tags = _merged_tags(args.labels)
    configs = {}
    for p in args.labels:
        configs.update(load_segment_configs(p))
    train, cross = ex.split_by_config(matrix, configs, args.train_config, args.test_config)
    report = ex.run_transfer_experiment(train, tags, cross, tags, args.split, args.split, args.repeats,
                                        range(1, args.k_max + 1), "three" if args.classes == 3 else "two",
                                        args.seed)
    return _finish_report(report, args)


def cmd_heatmap(args) -> int:
    matrix = load_matrix(args.matrix)
    tags = _merged_tags(args.labels)
    if args.classes == 2:
        tags = {k: two_class(v) for k, v in tags.items()}
    rows = ex.export_heatmap(matrix, tags, args.out)
    for r in rows:
        print(f"{r.tag_row.value:>12} {r.tag_col.value:>12} {r.mean:12.4f} {r.count:8d}")
    return 0


def cmd_bench(args) -> int:
    segs = _load_input_segments(args.input)
    record, matrix = ex.benchmark(segs, _dtw_config(args), args.workers)
    if args.matrix_out:
        save_matrix(matrix, args.matrix_out)
    if args.out:
        ex.write_bench_record(record, args.out)
    print(",".join(ex.BENCH_FIELDS))
    print(",".join(str(record[f]) for f in ex.BENCH_FIELDS))
    return 0


def _experiment_args(p: argparse.ArgumentParser, classes: bool = True) -> None:
    p.add_argument("--matrix", required=True)
    p.add_argument("--labels", required=True, nargs="+", help="segment index file(s) or directories")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=ex.DEFAULT_REPEATS)
    p.add_argument("--split", type=float, default=ex.DEFAULT_SPLIT)
    p.add_argument("--k-max", type=int, default=5)
    p.add_argument("--out", default=None, help="CSV report path")
    if classes:
        p.add_argument("--classes", type=int, choices=[2, 3], default=2)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chatterdtw", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="filter, downsample and segment labeled signals")
    p.add_argument("signals", nargs="+")
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True, help="output segment directory")
    p.add_argument("--format", choices=["text", "binary"], default="text")
    p.add_argument("--sample-rate-hz", type=float, default=None)
    p.add_argument("--cutoff-hz", type=float, default=DEFAULT_CUTOFF_HZ)
    p.add_argument("--order", type=int, default=DEFAULT_ORDER)
    p.add_argument("--downsample-factor", type=int, default=DEFAULT_DOWNSAMPLE)
    p.add_argument("--target-len", type=int, default=DEFAULT_TARGET_LEN)
    p.add_argument("--zero-phase", action="store_true")
    p.add_argument("--already-downsampled", action="store_true",
                   help="signals are already filtered and downsampled; only segment them")
    p.add_argument("--label-index-scale", type=int, default=1,
                   help="divide label indices by this factor (16 for 160 kHz indices)")
    p.add_argument("--config-id", default=None, help="cutting configuration, e.g. 5.08cm")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("distmat", help="pairwise DTW matrix over segment directories")
    p.add_argument("--input", required=True, nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    _add_dtw_args(p)
    p.set_defaults(func=cmd_distmat)

    p = sub.add_parser("classify", help="kNN predictions from a matrix (square = leave-one-out)")
    p.add_argument("--matrix", required=True)
    p.add_argument("--labels", required=True, nargs="+")
    p.add_argument("--k", type=int, default=1, choices=range(1, 6))
    p.add_argument("--classes", type=int, choices=[2, 3], default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("experiment", help="repeated-split, transfer and three-class protocols")
    esub = p.add_subparsers(dest="protocol", required=True)
    e = esub.add_parser("split")
    _experiment_args(e)
    e.add_argument("--split-by-cut", action="store_true", help="keep all segments of a cut on one side")
    e.set_defaults(func=lambda a: cmd_split(a, "three" if a.classes == 3 else "two"))
    e = esub.add_parser("three-class")
    _experiment_args(e, classes=False)
    e.add_argument("--split-by-cut", action="store_true")
    e.set_defaults(func=lambda a: cmd_split(a, "three"))
    e = esub.add_parser("transfer")
    _experiment_args(e)
    e.add_argument("--train-config", required=True)
    e.add_argument("--test-config", required=True)
    e.set_defaults(func=cmd_transfer)

    p = sub.add_parser("heatmap", help="average distance per tag pair as CSV")
    p.add_argument("--matrix", required=True)
    p.add_argument("--labels", required=True, nargs="+")
    p.add_argument("--classes", type=int, choices=[2, 3], default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("bench", help="time a matrix build")
    p.add_argument("--input", required=True, nargs="+")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None, help="append the timing record to this CSV")
    p.add_argument("--matrix-out", default=None)
    _add_dtw_args(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
