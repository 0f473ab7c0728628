"""Reading signals and label tables; persisting distance matrices."""
from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Optional, Sequence

import numpy as np

from .dtw import DtwConfig
from .errors import CorruptMatrix, EmptyInput, LabelError, OverlappingRegions, SignalFormatError

RAW_SAMPLE_RATE_HZ = 160_000.0


class Tag(str, enum.Enum):
    STABLE = "stable"
    INTERMEDIATE = "intermediate"
    CHATTER = "chatter"
    UNKNOWN = "unknown"

    @classmethod
    def parse(cls, text: str) -> "Tag":
        t = text.strip().lower()
        for tag in cls:
            if t == tag.value or t == tag.value[0]:
                return tag
        raise LabelError(f"unknown tag {text!r}")

    @property
    def short(self) -> str:
        return self.value[0]


# display and table ordering
TAG_ORDER = (Tag.STABLE, Tag.INTERMEDIATE, Tag.CHATTER)


@dataclass(frozen=True)
class TimeSeries:
    samples: np.ndarray
    sample_rate_hz: float
    source_id: str = ""

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1 or len(s) < 2:
            raise ValueError("a time series needs at least 2 samples")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class LabelRegion:
    """Half-open sample range ``[start_index, end_index)`` carrying one tag."""

    start_index: int
    end_index: int
    tag: Tag

    def __post_init__(self):
        if self.start_index < 0:
            raise LabelError("start_index must be non-negative")
        if self.end_index <= self.start_index:
            raise LabelError(f"end {self.end_index} <= start {self.start_index}")

    def __len__(self) -> int:
        return self.end_index - self.start_index


@dataclass(frozen=True)
class LabeledSegment:
    samples: np.ndarray
    tag: Tag
    config_id: str
    segment_id: str
    source_id: str = ""
    start_index: int = 0
    end_index: int = 0

    def __post_init__(self):
        if self.tag is Tag.UNKNOWN:
            raise ValueError("segments cannot carry the unknown tag")


@dataclass
class DistanceMatrix:
    values: np.ndarray
    row_ids: tuple[str, ...]
    col_ids: tuple[str, ...]
    dtw_config: Optional[DtwConfig] = None
    _row_index: dict = field(default=None, init=False, repr=False, compare=False)
    _col_index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.row_ids = tuple(str(r) for r in self.row_ids)
        self.col_ids = tuple(str(c) for c in self.col_ids)
        if self.values.ndim != 2 or self.values.shape != (len(self.row_ids), len(self.col_ids)):
            raise CorruptMatrix(
                f"values shape {self.values.shape} does not match "
                f"{len(self.row_ids)} row ids x {len(self.col_ids)} col ids"
            )
        if len(set(self.row_ids)) != len(self.row_ids) or len(set(self.col_ids)) != len(self.col_ids):
            raise CorruptMatrix("duplicate ids")
        if not np.all(self.values >= 0):
            raise CorruptMatrix("entries must be non-negative and not NaN")
        if self.is_square and np.any(np.diag(self.values) != 0):
            raise CorruptMatrix("square matrix has a non-zero diagonal")

    @property
    def is_square(self) -> bool:
        return self.row_ids == self.col_ids

    @property
    def row_index(self) -> dict[str, int]:
        if self._row_index is None:
            self._row_index = {k: i for i, k in enumerate(self.row_ids)}
        return self._row_index

    @property
    def col_index(self) -> dict[str, int]:
        if self._col_index is None:
            self._col_index = {k: i for i, k in enumerate(self.col_ids)}
        return self._col_index

    def __eq__(self, other) -> bool:
        if not isinstance(other, DistanceMatrix):
            return NotImplemented
        return (
            self.row_ids == other.row_ids
            and self.col_ids == other.col_ids
            and self.dtw_config == other.dtw_config
            and self.values.shape == other.values.shape
            and self.values.tobytes() == other.values.tobytes()
        )


# --------------------------------------------------------------------------
# signals
# --------------------------------------------------------------------------

def _sidecar(path: Path) -> dict:
    meta = path.with_name(path.name + ".json")
    if meta.exists():
        return json.loads(meta.read_text())
    return {}


def load_signal(
    path,
    format: Literal["text", "binary"] = "text",
    sample_rate_hz: Optional[float] = None,
    source_id: Optional[str] = None,
) -> TimeSeries:
    """Load a single-channel signal.

    Text files hold one sample per line; any further comma or whitespace
    separated columns are ignored, as are blank lines and ``#`` comments.
    Binary files are raw little-endian float64. The sample rate comes from
    ``sample_rate_hz`` or, failing that, from a ``<file>.json`` sidecar with a
    ``sample_rate_hz`` key.
    """
    path = Path(path)
    if not path.is_file():
        raise SignalFormatError(f"{path}: no such file")
    meta = _sidecar(path)
    rate = sample_rate_hz if sample_rate_hz is not None else meta.get("sample_rate_hz")
    if rate is None:
        raise SignalFormatError(f"{path}: sample rate not given and no sidecar metadata found")
    sid = source_id or meta.get("source_id") or path.stem

    if format == "binary":
        raw = path.read_bytes()
        if len(raw) == 0:
            raise EmptyInput(f"{path}: empty file")
        if len(raw) % 8:
            raise SignalFormatError(f"{path}: size {len(raw)} is not a multiple of 8 bytes")
        samples = np.frombuffer(raw, dtype="<f8").astype(np.float64)
        bad = np.flatnonzero(~np.isfinite(samples))
        if len(bad):
            raise SignalFormatError(f"{path}: non-finite value at sample {bad[0]}")
    elif format == "text":
        values = []
        with path.open() as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                first = line.replace(",", " ").split()[0]
                try:
                    v = float(first)
                except ValueError:
                    raise SignalFormatError(f"{path}:{lineno}: cannot parse {first!r} as a number") from None
                if not math.isfinite(v):
                    raise SignalFormatError(f"{path}:{lineno}: non-finite value {first!r}")
                values.append(v)
        if not values:
            raise EmptyInput(f"{path}: no samples")
        samples = np.array(values)
    else:
        raise ValueError(f"unknown signal format {format!r}")

    if len(samples) < 2:
        raise EmptyInput(f"{path}: {len(samples)} sample(s), need at least 2")
    return TimeSeries(samples, float(rate), sid)


def save_signal(ts: TimeSeries, path) -> None:
    """Write raw float64 samples plus a JSON sidecar."""
    path = Path(path)
    path.write_bytes(ts.samples.astype("<f8").tobytes())
    path.with_name(path.name + ".json").write_text(
        json.dumps({"sample_rate_hz": ts.sample_rate_hz, "source_id": ts.source_id})
    )


# --------------------------------------------------------------------------
# labels
# --------------------------------------------------------------------------

def validate_regions(regions: Iterable[LabelRegion], where: str = "") -> list[LabelRegion]:
    ordered = sorted(regions, key=lambda r: (r.start_index, r.end_index))
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.start_index < prev.end_index:
            raise OverlappingRegions(
                f"{where}regions [{prev.start_index}, {prev.end_index}) and "
                f"[{cur.start_index}, {cur.end_index}) overlap"
            )
    return ordered


def load_labels(path, index_scale: int = 1) -> dict[str, list[LabelRegion]]:
    """Read a ``source_id,start,end,tag`` table into regions grouped by source.

    ``end`` is exclusive. Indices must be in the (downsampled) signal domain;
    pass ``index_scale`` to convert from a finer domain, e.g. 16 when the table
    was written against 160 kHz raw indices and the signals run at 10 kHz.
    All four tags are accepted here; unknown regions are discarded by
    segmentation.
    """
    path = Path(path)
    if index_scale < 1:
        raise ValueError("index_scale must be >= 1")
    grouped: dict[str, list[LabelRegion]] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyInput(f"{path}: empty label file")
        if [h.strip().lower() for h in header[:4]] != ["source_id", "start", "end", "tag"]:
            raise LabelError(f"{path}:1: expected header source_id,start,end,tag")
        for lineno, row in enumerate(reader, 2):
            if not row or not "".join(row).strip():
                continue
            if len(row) < 4:
                raise LabelError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
            sid, start, end, tag = (c.strip() for c in row[:4])
            try:
                s, e = int(start), int(end)
            except ValueError:
                raise LabelError(f"{path}:{lineno}: non-integer index") from None
            try:
                region = LabelRegion(s // index_scale, -(-e // index_scale), Tag.parse(tag))
            except LabelError as exc:
                raise type(exc)(f"{path}:{lineno}: {exc}") from None
            grouped.setdefault(sid, []).append(region)
    return {sid: validate_regions(regs, f"{path}: {sid}: ") for sid, regs in grouped.items()}


# --------------------------------------------------------------------------
# distance matrices
# --------------------------------------------------------------------------

MATRIX_MAGIC = "CHATTERDTW-MATRIX"
MATRIX_VERSION = 1


def save_matrix(matrix: DistanceMatrix, path) -> None:
    """Write the self-describing binary matrix format.

    Layout: UTF-8 header lines (magic, ``key=value`` pairs, ``end``), the row
    ids then the column ids one per line, then row-major ``<f8`` values.
    """
    for k in matrix.row_ids + matrix.col_ids:
        if "\n" in k or "\r" in k:
            raise ValueError(f"id {k!r} contains a line break")
    ids = "".join(k + "\n" for k in matrix.row_ids + matrix.col_ids).encode()
    header = [MATRIX_MAGIC, f"version={MATRIX_VERSION}",
              f"rows={len(matrix.row_ids)}", f"cols={len(matrix.col_ids)}",
              f"id_bytes={len(ids)}"]
    if matrix.dtw_config is not None:
        header += [f"dtw.{k}={v}" for k, v in matrix.dtw_config.to_dict().items()]
    header.append("end")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode())
        fh.write(ids)
        fh.write(np.ascontiguousarray(matrix.values, dtype="<f8").tobytes())


def load_matrix(path) -> DistanceMatrix:
    data = Path(path).read_bytes()
    pos = 0
    fields: dict[str, str] = {}
    lines = []
    while True:
        nl = data.find(b"\n", pos)
        if nl < 0:
            raise CorruptMatrix(f"{path}: truncated header")
        line = data[pos:nl].decode("utf-8", errors="replace")
        pos = nl + 1
        lines.append(line)
        if line == "end":
            break
    if lines[0] != MATRIX_MAGIC:
        raise CorruptMatrix(f"{path}: not a distance matrix file")
    for line in lines[1:-1]:
        k, _, v = line.partition("=")
        fields[k] = v
    try:
        version = int(fields["version"])
        rows, cols, id_bytes = int(fields["rows"]), int(fields["cols"]), int(fields["id_bytes"])
    except (KeyError, ValueError):
        raise CorruptMatrix(f"{path}: incomplete header") from None
    if version != MATRIX_VERSION:
        raise CorruptMatrix(f"{path}: unsupported format version {version}")

    ids = data[pos:pos + id_bytes].decode().split("\n")
    if ids and ids[-1] == "":
        ids.pop()
    pos += id_bytes
    if len(ids) != rows + cols:
        raise CorruptMatrix(f"{path}: header declares {rows}+{cols} ids, found {len(ids)}")
    body = data[pos:]
    if len(body) != rows * cols * 8:
        raise CorruptMatrix(f"{path}: expected {rows * cols} values, found {len(body) / 8:g}")
    values = np.frombuffer(body, dtype="<f8").astype(np.float64).reshape(rows, cols)
    dtw = {k[4:]: v for k, v in fields.items() if k.startswith("dtw.")}
    config = DtwConfig.from_dict(dtw) if dtw else None
    return DistanceMatrix(values, tuple(ids[:rows]), tuple(ids[rows:]), config)


# --------------------------------------------------------------------------
# segment directories
# --------------------------------------------------------------------------

SEGMENT_INDEX = "index.csv"
_INDEX_COLUMNS = ["segment_id", "tag", "config_id", "source_id", "start", "end", "file"]


def save_segments(segments: Sequence[LabeledSegment], directory) -> None:
    """Write segments as ``<n>.f64`` files plus an ``index.csv`` table."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with (directory / SEGMENT_INDEX).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_INDEX_COLUMNS)
        for n, seg in enumerate(segments):
            fname = f"{n:06d}.f64"
            (directory / fname).write_bytes(np.asarray(seg.samples, dtype="<f8").tobytes())
            w.writerow([seg.segment_id, seg.tag.value, seg.config_id, seg.source_id,
                        seg.start_index, seg.end_index, fname])


def load_segments(directory) -> list[LabeledSegment]:
    directory = Path(directory)
    out = []
    with (directory / SEGMENT_INDEX).open(newline="") as fh:
        for row in csv.DictReader(fh):
            samples = np.frombuffer((directory / row["file"]).read_bytes(), dtype="<f8").astype(np.float64)
            out.append(LabeledSegment(samples, Tag.parse(row["tag"]), row["config_id"], row["segment_id"],
                                      row["source_id"], int(row["start"]), int(row["end"])))
    return out


def load_segment_tags(path) -> dict[str, Tag]:
    """Read ``segment_id`` -> tag from a segment index (or any CSV with those two columns)."""
    path = Path(path)
    if path.is_dir():
        path = path / SEGMENT_INDEX
    with path.open(newline="") as fh:
        return {row["segment_id"]: Tag.parse(row["tag"]) for row in csv.DictReader(fh)}


def load_segment_configs(path) -> dict[str, str]:
    path = Path(path)
    if path.is_dir():
        path = path / SEGMENT_INDEX
    with path.open(newline="") as fh:
        return {row["segment_id"]: row["config_id"] for row in csv.DictReader(fh)}
