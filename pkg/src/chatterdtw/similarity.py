"""Pairwise DTW matrices over segments, block extraction and label-block averages."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .dtw import DtwConfig, dtw_distance
from .errors import UnknownId
from .signal_io import TAG_ORDER, DistanceMatrix, LabeledSegment, Tag

log = logging.getLogger(__name__)


class PairError(RuntimeError):
    def __init__(self, row_id: str, col_id: str, cause: Exception):
        super().__init__(f"DTW failed for pair ({row_id}, {col_id}): {cause}")
        self.row_id = row_id
        self.col_id = col_id


@dataclass(frozen=True)
class BuildStats:
    seconds: float
    cells: int
    dp_cells: int
    workers: int
    mode: str

    @property
    def cells_per_second(self) -> float:
        return self.cells / self.seconds if self.seconds > 0 else float("inf")


def _cell_tasks(n: int, symmetric: bool) -> np.ndarray:
    if symmetric:
        p, q = np.triu_indices(n, k=1)
    else:
        p, q = np.nonzero(~np.eye(n, dtype=bool))
    return np.stack([p, q], axis=1)


def _fill(values, tasks, a_series, b_series, a_ids, b_ids, config, workers, chunk_size, progress):
    """Evaluate ``values[p, q] = dtw(a[p], b[q])`` for every task; returns summed DP cells."""
    dp_cells = np.zeros(len(tasks), dtype=np.int64)

    def run(lo: int, hi: int) -> int:
        for t in range(lo, hi):
            p, q = tasks[t]
            try:
                res = dtw_distance(a_series[p], b_series[q], config)
            except Exception as exc:
                raise PairError(a_ids[p], b_ids[q], exc) from exc
            values[p, q] = res.distance
            dp_cells[t] = res.cells_evaluated
        return hi - lo

    chunks = [(i, min(i + chunk_size, len(tasks))) for i in range(0, len(tasks), chunk_size)]
    done = 0
    if workers == 1:
        for lo, hi in chunks:
            done += run(lo, hi)
            if progress:
                progress(done, len(tasks))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for fut in [pool.submit(run, lo, hi) for lo, hi in chunks]:
                done += fut.result()
                if progress:
                    progress(done, len(tasks))
    return int(dp_cells.sum())


def _series(segments):
    return [np.ascontiguousarray(s.samples, dtype=np.float64) for s in segments]


def build_matrix(
    segments: Sequence[LabeledSegment],
    config: DtwConfig,
    workers: int = 1,
    chunk_size: int = 64,
    progress: Optional[Callable[[int, int], None]] = None,
) -> tuple[DistanceMatrix, BuildStats]:
    """Compute the full matrix and report timing.

    Exact mode computes the upper triangle and mirrors it; FastDTW mode
    computes every off-diagonal cell since it is not symmetric. Each cell
    is written to its own slot, so the result does not depend on ``workers``.
    """
    n = len(segments)
    if n < 2:
        raise ValueError("need at least 2 segments")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    ids = tuple(s.segment_id for s in segments)
    series = _series(segments)
    symmetric = config.mode == "exact"
    tasks = _cell_tasks(n, symmetric)
    values = np.zeros((n, n))

    start = time.perf_counter()
    dp_cells = _fill(values, tasks, series, series, ids, ids, config, workers, chunk_size, progress)
    if symmetric:
        iu = np.triu_indices(n, k=1)
        values[(iu[1], iu[0])] = values[iu]
    seconds = time.perf_counter() - start

    cells = len(tasks) if symmetric else n * n
    stats = BuildStats(seconds, cells, dp_cells, workers, config.mode)
    log.info("built %dx%d matrix in %.2fs (%.1f cells/s)", n, n, seconds, stats.cells_per_second)
    return DistanceMatrix(values, ids, ids, config), stats


def cross_matrix(
    row_segments: Sequence[LabeledSegment],
    col_segments: Sequence[LabeledSegment],
    config: DtwConfig,
    workers: int = 1,
    chunk_size: int = 64,
) -> DistanceMatrix:
    """Rectangular block ``dtw(row, col)``, e.g. one configuration's segments against another's."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    r_ids = tuple(s.segment_id for s in row_segments)
    c_ids = tuple(s.segment_id for s in col_segments)
    values = np.zeros((len(r_ids), len(c_ids)))
    p, q = np.indices(values.shape)
    tasks = np.stack([p.ravel(), q.ravel()], axis=1)
    _fill(values, tasks, _series(row_segments), _series(col_segments), r_ids, c_ids,
          config, workers, chunk_size, None)
    return DistanceMatrix(values, r_ids, c_ids, config)


def pairwise_matrix(segments: Sequence[LabeledSegment], config: DtwConfig, workers: int = 1) -> DistanceMatrix:
    return build_matrix(segments, config, workers)[0]


def extract_block(matrix: DistanceMatrix, row_ids: Sequence[str], col_ids: Sequence[str]) -> DistanceMatrix:
    """Sub-matrix for the given ids, e.g. test rows against training columns."""
    try:
        r = [matrix.row_index[k] for k in row_ids]
        c = [matrix.col_index[k] for k in col_ids]
    except KeyError as exc:
        raise UnknownId(f"id {exc.args[0]!r} not in matrix") from None
    return DistanceMatrix(matrix.values[np.ix_(r, c)], tuple(row_ids), tuple(col_ids), matrix.dtw_config)


@dataclass(frozen=True)
class BlockAverage:
    tag_row: Tag
    tag_col: Tag
    mean: float
    count: int
    std: float

    @property
    def stderr(self) -> float:
        return self.std / np.sqrt(self.count) if self.count else float("nan")


def label_block_averages(matrix: DistanceMatrix, tags: Mapping[str, Tag]) -> list[BlockAverage]:
    """Mean distance for every ordered pair of tags present in a square matrix.

    Diagonal entries are excluded from same-tag blocks.
    """
    if not matrix.is_square:
        raise ValueError("label block averages need a square matrix")
    try:
        row_tags = np.array([Tag(tags[k]).value for k in matrix.row_ids])
    except KeyError as exc:
        raise UnknownId(f"segment {exc.args[0]!r} has no tag") from None
    present = [t for t in TAG_ORDER if np.any(row_tags == t.value)]
    off_diag = ~np.eye(len(row_tags), dtype=bool)
    out = []
    for tr in present:
        for tc in present:
            mask = np.outer(row_tags == tr.value, row_tags == tc.value) & off_diag
            vals = matrix.values[mask]
            mean = float(vals.mean()) if len(vals) else float("nan")
            std = float(vals.std()) if len(vals) else float("nan")
            out.append(BlockAverage(tr, tc, mean, int(len(vals)), std))
    return out
