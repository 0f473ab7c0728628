"""Repeated-split, transfer and three-class experiments; heatmap and timing exports."""
from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field
from typing import Callable, Literal, Mapping, Optional, Sequence

import numpy as np

from .dtw import DtwConfig
from .knn import accuracy, classify_test, classify_train_loo, two_class
from .signal_io import DistanceMatrix, LabeledSegment, Tag
from .similarity import build_matrix, extract_block, label_block_averages

log = logging.getLogger(__name__)

ClassMode = Literal["two", "three"]

DEFAULT_SPLIT = 0.67
DEFAULT_REPEATS = 10
DEFAULT_K = (1, 2, 3, 4, 5)
MAX_SPLIT_ATTEMPTS = 100


@dataclass(frozen=True)
class KScore:
    test_mean: float
    test_std: float
    train_mean: float
    train_std: float


@dataclass
class ExperimentReport:
    per_k: dict[int, KScore]
    config: dict
    test_runs: dict[int, list[float]] = field(default_factory=dict, repr=False)
    train_runs: dict[int, list[float]] = field(default_factory=dict, repr=False)

    @property
    def best_k(self) -> int:
        # first K reaching the maximum
        return max(self.per_k, key=lambda k: (self.per_k[k].test_mean, -k))

    @property
    def best(self) -> KScore:
        return self.per_k[self.best_k]

    def rows(self) -> list[dict]:
        return [{"k": k, "test_mean": s.test_mean, "test_std": s.test_std,
                 "train_mean": s.train_mean, "train_std": s.train_std}
                for k, s in sorted(self.per_k.items())]

    def to_text(self) -> str:
        lines = [f"{'K':>3}  {'test':>15}  {'train':>15}"]
        for k, s in sorted(self.per_k.items()):
            lines.append(f"{k:>3}  {100 * s.test_mean:6.1f} ± {100 * s.test_std:4.1f}%  "
                         f"{100 * s.train_mean:6.1f} ± {100 * s.train_std:4.1f}%")
        b = self.best
        lines.append(f"best: {self.best_k}-NN, {100 * b.test_mean:.1f} ± {100 * b.test_std:.1f}%")
        return "\n".join(lines)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["k", "test_mean", "test_std", "train_mean", "train_std"])
            w.writeheader()
            w.writerows(self.rows())


def _rng(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(x) for x in key])))


def _knn_seed(seed: int, repeat: int, k: int, side: int) -> int:
    return int(np.random.SeedSequence([int(seed), repeat, k, side]).generate_state(1, np.uint64)[0])


def map_tags(tags: Mapping[str, Tag], class_mode: ClassMode) -> dict[str, Tag]:
    if class_mode == "two":
        return {k: two_class(Tag(v)) for k, v in tags.items()}
    if class_mode == "three":
        return {k: Tag(v) for k, v in tags.items()}
    raise ValueError(f"unknown class mode {class_mode!r}")


def _draw(
    rng: np.random.Generator,
    ids: Sequence[str],
    n_take: int,
    tags: Mapping[str, Tag],
    required: set,
    groups: Optional[Mapping[str, str]] = None,
) -> tuple[list[str], list[str]]:
    """Random subset of ``ids`` covering every class in ``required``; redrawn on failure."""
    for attempt in range(MAX_SPLIT_ATTEMPTS):
        if groups is None:
            perm = rng.permutation(len(ids))
            take = sorted(perm[:n_take])
            rest = sorted(perm[n_take:])
            chosen, left = [ids[i] for i in take], [ids[i] for i in rest]
        else:
            keys = sorted({groups[i] for i in ids})
            order = rng.permutation(len(keys))
            n_groups = max(1, min(len(keys) - 1, int(round(n_take / len(ids) * len(keys)))))
            picked = {keys[i] for i in order[:n_groups]}
            chosen = [i for i in ids if groups[i] in picked]
            left = [i for i in ids if groups[i] not in picked]
        if required <= {tags[i] for i in chosen}:
            return chosen, left
        log.warning("split attempt %d left a class out of the training side; redrawing", attempt + 1)
    raise RuntimeError(f"no split with every class on the training side after {MAX_SPLIT_ATTEMPTS} attempts")


def _summarise(test_runs, train_runs) -> dict[int, KScore]:
    return {k: KScore(float(np.mean(test_runs[k])), float(np.std(test_runs[k])),
                      float(np.mean(train_runs[k])), float(np.std(train_runs[k])))
            for k in test_runs}


def _check_k(k_values: Sequence[int], n_train: int) -> list[int]:
    ks = sorted(set(int(k) for k in k_values))
    if not ks or ks[0] < 1:
        raise ValueError("k values must be positive")
    if ks[-1] > n_train - 1:
        raise ValueError(f"k={ks[-1]} too large for a training side of {n_train} segments")
    return ks


def run_split_experiment(
    matrix: DistanceMatrix,
    tags: Mapping[str, Tag],
    split_fraction: float = DEFAULT_SPLIT,
    repeats: int = DEFAULT_REPEATS,
    k_values: Sequence[int] = DEFAULT_K,
    class_mode: ClassMode = "two",
    seed: int = 0,
    groups: Optional[Mapping[str, str]] = None,
) -> ExperimentReport:
    """Repeated random train/test splits of one square matrix.

    Training accuracy is leave-one-out on the training block; test accuracy
    classifies the test rows against the training columns. ``groups`` (segment
    -> parent cut) switches to splitting whole cuts instead of segments.
    """
    if not matrix.is_square:
        raise ValueError("split experiment needs a square matrix")
    if not 0 < split_fraction < 1:
        raise ValueError("split_fraction must be in (0, 1)")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    ids = list(matrix.row_ids)
    t = map_tags({i: tags[i] for i in ids}, class_mode)
    n_train = int(round(split_fraction * len(ids)))
    if not 1 <= n_train <= len(ids) - 1:
        raise ValueError(f"split {split_fraction} of {len(ids)} segments leaves one side empty")
    ks = _check_k(k_values, n_train)
    required = set(t.values())

    test_runs = {k: [] for k in ks}
    train_runs = {k: [] for k in ks}
    for rep in range(repeats):
        train, test = _draw(_rng(seed, rep), ids, n_train, t, required, groups)
        if not test:
            raise ValueError("degenerate split: empty test side")
        train_block = extract_block(matrix, train, train)
        test_block = extract_block(matrix, test, train)
        for k in ks:
            train_runs[k].append(accuracy(classify_train_loo(train_block, t, k, _knn_seed(seed, rep, k, 0))))
            test_runs[k].append(accuracy(classify_test(test_block, t, k, _knn_seed(seed, rep, k, 1), t)))

    config = {"protocol": "split", "split_fraction": split_fraction, "repeats": repeats,
              "k_values": ks, "class_mode": class_mode, "seed": seed,
              "split_by": "group" if groups is not None else "segment",
              "dtw": matrix.dtw_config.to_dict() if matrix.dtw_config else None}
    return ExperimentReport(_summarise(test_runs, train_runs), config, test_runs, train_runs)


def run_three_class(
    matrix: DistanceMatrix,
    tags: Mapping[str, Tag],
    split_fraction: float = DEFAULT_SPLIT,
    repeats: int = DEFAULT_REPEATS,
    k_values: Sequence[int] = DEFAULT_K,
    seed: int = 0,
    groups: Optional[Mapping[str, str]] = None,
) -> ExperimentReport:
    return run_split_experiment(matrix, tags, split_fraction, repeats, k_values, "three", seed, groups)


def run_transfer_experiment(
    train_matrix: DistanceMatrix,
    train_tags: Mapping[str, Tag],
    cross_block: DistanceMatrix,
    test_tags: Mapping[str, Tag],
    train_use_fraction: float = DEFAULT_SPLIT,
    test_use_fraction: float = DEFAULT_SPLIT,
    repeats: int = DEFAULT_REPEATS,
    k_values: Sequence[int] = DEFAULT_K,
    class_mode: ClassMode = "two",
    seed: int = 0,
) -> ExperimentReport:
    """Train on one cutting configuration and test on another.

    ``cross_block`` rows are the test configuration's segments, columns the
    training configuration's. Each repeat subsamples both sides.
    """
    if not train_matrix.is_square:
        raise ValueError("train_matrix must be square")
    missing = set(cross_block.col_ids) - set(train_matrix.row_ids)
    if missing:
        raise ValueError(f"{len(missing)} cross-block columns are not in the training matrix")
    for f in (train_use_fraction, test_use_fraction):
        if not 0 < f <= 1:
            raise ValueError("use fractions must be in (0, 1]")
    tr_ids = list(cross_block.col_ids)
    te_ids = list(cross_block.row_ids)
    tr_tags = map_tags({i: train_tags[i] for i in tr_ids}, class_mode)
    te_tags = map_tags({i: test_tags[i] for i in te_ids}, class_mode)
    n_tr = max(1, int(round(train_use_fraction * len(tr_ids))))
    n_te = max(1, int(round(test_use_fraction * len(te_ids))))
    ks = _check_k(k_values, n_tr)
    required = set(tr_tags.values())

    test_runs = {k: [] for k in ks}
    train_runs = {k: [] for k in ks}
    for rep in range(repeats):
        rng = _rng(seed, rep)
        train, _ = _draw(rng, tr_ids, n_tr, tr_tags, required)
        test = sorted(rng.permutation(len(te_ids))[:n_te])
        test = [te_ids[i] for i in test]
        train_block = extract_block(train_matrix, train, train)
        test_block = extract_block(cross_block, test, train)
        for k in ks:
            train_runs[k].append(accuracy(classify_train_loo(train_block, tr_tags, k, _knn_seed(seed, rep, k, 0))))
            test_runs[k].append(accuracy(classify_test(test_block, tr_tags, k, _knn_seed(seed, rep, k, 1), te_tags)))

    config = {"protocol": "transfer", "train_use_fraction": train_use_fraction,
              "test_use_fraction": test_use_fraction, "repeats": repeats, "k_values": ks,
              "class_mode": class_mode, "seed": seed,
              "dtw": train_matrix.dtw_config.to_dict() if train_matrix.dtw_config else None}
    return ExperimentReport(_summarise(test_runs, train_runs), config, test_runs, train_runs)


def split_by_config(
    matrix: DistanceMatrix, configs: Mapping[str, str], train_config: str, test_config: str
) -> tuple[DistanceMatrix, DistanceMatrix]:
    """From a merged square matrix, the training block and the test-vs-train cross block."""
    tr = [i for i in matrix.row_ids if configs.get(i) == train_config]
    te = [i for i in matrix.row_ids if configs.get(i) == test_config]
    if not tr or not te:
        raise ValueError(f"no segments for configuration {train_config if not tr else test_config!r}")
    return extract_block(matrix, tr, tr), extract_block(matrix, te, tr)


def export_heatmap(matrix: DistanceMatrix, tags: Mapping[str, Tag], out_path) -> list:
    """Write the tag-pair average table as CSV; returns the rows."""
    rows = label_block_averages(matrix, tags)
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tag_row", "tag_col", "mean", "count"])
        for r in rows:
            w.writerow([r.tag_row.value, r.tag_col.value, repr(r.mean), r.count])
    return rows


def unordered_pair_means(rows) -> dict[frozenset, float]:
    """Collapse ordered tag pairs into unordered ones, weighting by count."""
    acc: dict[frozenset, list[float]] = {}
    for r in rows:
        key = frozenset((r.tag_row, r.tag_col))
        s = acc.setdefault(key, [0.0, 0])
        s[0] += r.mean * r.count
        s[1] += r.count
    return {k: s / n for k, (s, n) in acc.items() if n}


BENCH_FIELDS = ["segments", "mode", "workers", "seconds", "cells", "cells_per_second", "dp_cells"]


def benchmark(
    segments: Sequence[LabeledSegment],
    config: DtwConfig,
    workers: int = 1,
    progress: Optional[Callable[[int, int], None]] = None,
) -> tuple[dict, DistanceMatrix]:
    """Time one matrix build. ``cells`` counts the DTW problems the mode is responsible for."""
    matrix, stats = build_matrix(segments, config, workers, progress=progress)
    record = {"segments": len(segments), "mode": stats.mode, "workers": stats.workers,
              "seconds": stats.seconds, "cells": stats.cells,
              "cells_per_second": stats.cells_per_second, "dp_cells": stats.dp_cells}
    return record, matrix


def write_bench_record(record: dict, path, append: bool = True) -> None:
    new = not append or not os.path.exists(path)
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BENCH_FIELDS)
        if new:
            w.writeheader()
        w.writerow(record)
