"""K-nearest-neighbor classification on precomputed distance matrices."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import UnknownId
from .signal_io import DistanceMatrix, Tag


@dataclass(frozen=True)
class Prediction:
    segment_id: str
    predicted_tag: Tag
    true_tag: Optional[Tag]
    neighbor_ids: tuple[str, ...]


def row_rng(seed: int, row: int) -> np.random.Generator:
    """Counter-based stream for one row; independent of evaluation order."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, row])))


def vote(neighbor_tags: Sequence[Tag], rng: np.random.Generator) -> Tag:
    """Majority tag; ties are broken uniformly at random among the tied tags."""
    counts = Counter(neighbor_tags)
    top = max(counts.values())
    tied = sorted((t for t, c in counts.items() if c == top), key=lambda t: t.value)
    if len(tied) == 1:
        return tied[0]
    return tied[int(rng.integers(len(tied)))]


def two_class(tag: Tag) -> Tag:
    """Collapse intermediate chatter into chatter."""
    return Tag.CHATTER if tag is Tag.INTERMEDIATE else tag


def _tags_for(ids: Sequence[str], tags: Mapping[str, Tag]) -> list[Tag]:
    try:
        return [tags[k] for k in ids]
    except KeyError as exc:
        raise UnknownId(f"training segment {exc.args[0]!r} has no tag") from None


def _nearest(dists: np.ndarray, k: int) -> np.ndarray:
    # stable sort: equal distances keep ascending column order
    return np.argsort(dists, kind="stable")[:k]


def classify_test(
    block: DistanceMatrix,
    train_tags: Mapping[str, Tag],
    k: int,
    rng_seed: int = 0,
    true_tags: Optional[Mapping[str, Tag]] = None,
) -> list[Prediction]:
    """Label each test row of a ``test x train`` block by its ``k`` nearest columns."""
    n_train = len(block.col_ids)
    if not 1 <= k <= n_train:
        raise ValueError(f"k={k} must be between 1 and the number of training segments ({n_train})")
    col_tags = _tags_for(block.col_ids, train_tags)
    out = []
    for r, sid in enumerate(block.row_ids):
        nn = _nearest(block.values[r], k)
        pred = vote([col_tags[c] for c in nn], row_rng(rng_seed, r))
        truth = true_tags.get(sid) if true_tags is not None else None
        out.append(Prediction(sid, pred, truth, tuple(block.col_ids[c] for c in nn)))
    return out


def classify_train_loo(
    square: DistanceMatrix,
    train_tags: Mapping[str, Tag],
    k: int,
    rng_seed: int = 0,
) -> list[Prediction]:
    """Leave-one-out: each row is classified from all other columns.

    Uses row ``p`` of the matrix, so for asymmetric (FastDTW) matrices the
    distances are those computed with segment ``p`` as the first argument.
    """
    if not square.is_square:
        raise ValueError("leave-one-out needs a square matrix")
    n = len(square.row_ids)
    if not 1 <= k <= n - 1:
        raise ValueError(f"k={k} must be between 1 and N-1 ({n - 1})")
    tags = _tags_for(square.col_ids, train_tags)
    out = []
    for p, sid in enumerate(square.row_ids):
        others = np.delete(np.arange(n), p)
        nn = others[_nearest(square.values[p, others], k)]
        pred = vote([tags[c] for c in nn], row_rng(rng_seed, p))
        out.append(Prediction(sid, pred, tags[p], tuple(square.col_ids[c] for c in nn)))
    return out


def accuracy(predictions: Sequence[Prediction]) -> float:
    if not predictions:
        raise ValueError("no predictions")
    return sum(p.predicted_tag == p.true_tag for p in predictions) / len(predictions)
