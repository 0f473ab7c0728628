"""Anti-alias filtering, decimation, z-normalization and segmentation."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import signal as sps

from .errors import DegenerateSegment
from .signal_io import LabeledSegment, LabelRegion, Tag, TimeSeries

log = logging.getLogger(__name__)

DEFAULT_ORDER = 100
DEFAULT_CUTOFF_HZ = 5_000.0
DEFAULT_DOWNSAMPLE = 16
DEFAULT_TARGET_LEN = 10_000


@dataclass(frozen=True)
class FilterSpec:
    cutoff_hz: float
    order: int
    sample_rate_hz: float
    sections: np.ndarray  # (ceil(order/2), 6) rows of b0 b1 b2 a0 a1 a2

    def response(self, freqs_hz) -> np.ndarray:
        """Complex frequency response at ``freqs_hz``."""
        _, h = sps.sosfreqz(self.sections, worN=np.atleast_1d(np.asarray(freqs_hz, dtype=float)),
                            fs=self.sample_rate_hz)
        return h

    def poles(self) -> np.ndarray:
        return np.concatenate([np.roots(s[3:]) for s in self.sections])


def design_butterworth_lowpass(cutoff_hz: float, order: int, sample_rate_hz: float) -> FilterSpec:
    """Digital Butterworth low-pass as cascaded biquads (bilinear transform, prewarped)."""
    if order < 1:
        raise ValueError("filter order must be >= 1")
    if not 0 < cutoff_hz < sample_rate_hz / 2:
        raise ValueError(f"cutoff {cutoff_hz} Hz must lie in (0, {sample_rate_hz / 2}) Hz")
    sos = sps.butter(order, cutoff_hz, btype="lowpass", output="sos", fs=sample_rate_hz)
    spec = FilterSpec(float(cutoff_hz), int(order), float(sample_rate_hz), sos)
    assert len(sos) == math.ceil(order / 2)
    if np.any(np.abs(spec.poles()) >= 1):
        raise ValueError("designed filter is unstable")
    return spec


def apply_filter(ts: TimeSeries, spec: FilterSpec, zero_phase: bool = False) -> TimeSeries:
    """Run the biquad cascade over the signal (causal unless ``zero_phase``)."""
    if spec.sample_rate_hz != ts.sample_rate_hz:
        raise ValueError(f"filter designed for {spec.sample_rate_hz} Hz, signal is {ts.sample_rate_hz} Hz")
    if zero_phase:
        out = sps.sosfiltfilt(spec.sections, ts.samples)
    else:
        out = sps.sosfilt(spec.sections, ts.samples)
    return TimeSeries(out, ts.sample_rate_hz, ts.source_id)


def downsample(ts: TimeSeries, factor: int) -> TimeSeries:
    """Keep every ``factor``-th sample; assumes the signal is already band-limited."""
    if factor < 1:
        raise ValueError("downsample factor must be >= 1")
    return TimeSeries(ts.samples[::factor].copy(), ts.sample_rate_hz / factor, ts.source_id)


def znormalize(samples: Sequence[float]) -> np.ndarray:
    """Zero mean, unit population standard deviation."""
    x = np.asarray(samples, dtype=np.float64)
    if len(x) < 2:
        raise DegenerateSegment("need at least 2 samples to normalize")
    centred = x - x.mean()
    std = np.sqrt(np.mean(centred ** 2))
    if not std > 0 or not np.isfinite(std):
        raise DegenerateSegment("segment has zero variance")
    out = centred / std
    # second pass removes the residual mean left by rounding
    return out - out.mean()


def split_lengths(length: int, target_len: int) -> list[int]:
    """Piece lengths for a region: ``round(L / target)`` pieces (at least one), sizes within 1."""
    k = max(1, round(length / target_len))
    k = min(k, length)
    base, extra = divmod(length, k)
    return [base + 1] * extra + [base] * (k - extra)


def segment(
    ts: TimeSeries,
    regions: Sequence[LabelRegion],
    target_len: int = DEFAULT_TARGET_LEN,
    config_id: Optional[str] = None,
) -> list[LabeledSegment]:
    """Cut labeled regions into near-equal z-normalized pieces.

    Unknown regions are skipped; constant pieces are dropped with a warning.
    """
    if target_len < 2:
        raise ValueError("target_len must be >= 2")
    config_id = ts.source_id if config_id is None else config_id
    out = []
    for region in regions:
        if region.end_index > len(ts):
            raise IndexError(
                f"{ts.source_id}: region [{region.start_index}, {region.end_index}) "
                f"exceeds signal length {len(ts)}"
            )
        if region.tag is Tag.UNKNOWN:
            continue
        start = region.start_index
        for piece, n in enumerate(split_lengths(len(region), target_len)):
            chunk = ts.samples[start:start + n]
            sid = f"{ts.source_id}:{region.start_index}-{region.end_index}:{piece}"
            try:
                normed = znormalize(chunk)
            except DegenerateSegment:
                log.warning("dropping constant segment %s", sid)
            else:
                out.append(LabeledSegment(normed, region.tag, config_id, sid, ts.source_id, start, start + n))
            start += n
    return out


def preprocess_signal(
    ts: TimeSeries,
    cutoff_hz: float = DEFAULT_CUTOFF_HZ,
    order: int = DEFAULT_ORDER,
    factor: int = DEFAULT_DOWNSAMPLE,
    zero_phase: bool = False,
) -> TimeSeries:
    """Filter then downsample; the order matters for anti-aliasing."""
    spec = design_butterworth_lowpass(cutoff_hz, order, ts.sample_rate_hz)
    return downsample(apply_filter(ts, spec, zero_phase=zero_phase), factor)
