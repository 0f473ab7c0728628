"""Exact constrained DTW and the FastDTW multiresolution approximation.

All dynamic programs run over a *window*: for every row ``i`` of the cost grid a
contiguous column range ``lo[i] <= j <= hi[i]``. The unconstrained problem, the
Sakoe-Chiba band and the FastDTW corridor are all windows, so one set of
kernels serves every mode.

Step naming: a *vertical* step advances ``i`` only, a *horizontal* step
advances ``j`` only, a *diagonal* step advances both.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numba
import numpy as np

from .errors import InfeasibleWindow

Mode = Literal["exact", "fastdtw"]

_INF = np.inf


@dataclass(frozen=True)
class DtwConfig:
    """DTW parameter record.

    ``window_radius`` is the Sakoe-Chiba band half-width (None = unconstrained).
    ``slope_steps`` is ``(a, b)``: at most ``a`` consecutive horizontal or
    vertical steps, then at least ``b`` diagonal steps before the next one.
    Band and slope apply to ``mode="exact"`` only.
    """

    mode: Mode = "fastdtw"
    window_radius: Optional[int] = None
    slope_steps: Optional[tuple[int, int]] = None
    fastdtw_radius: int = 1

    def __post_init__(self):
        if self.mode not in ("exact", "fastdtw"):
            raise ValueError(f"unknown DTW mode {self.mode!r}")
        if self.window_radius is not None and self.window_radius < 0:
            raise ValueError("window_radius must be non-negative")
        if self.slope_steps is not None:
            a, b = self.slope_steps
            if a < 1 or b < 1:
                raise ValueError("slope steps a and b must both be >= 1")
            object.__setattr__(self, "slope_steps", (int(a), int(b)))
        if self.fastdtw_radius < 0:
            raise ValueError("fastdtw_radius must be non-negative")
        if self.mode == "fastdtw" and (self.window_radius is not None or self.slope_steps is not None):
            raise ValueError("band and slope constraints are only available in exact mode")

    @property
    def slope_intensity(self) -> Optional[float]:
        if self.slope_steps is None:
            return None
        a, b = self.slope_steps
        return b / a

    def to_dict(self) -> dict[str, str]:
        return {
            "mode": self.mode,
            "window_radius": "none" if self.window_radius is None else str(self.window_radius),
            "slope_steps": "none" if self.slope_steps is None else f"{self.slope_steps[0]}/{self.slope_steps[1]}",
            "fastdtw_radius": str(self.fastdtw_radius),
        }

    @classmethod
    def from_dict(cls, d: dict[str, str]) -> "DtwConfig":
        wr = d.get("window_radius", "none")
        ss = d.get("slope_steps", "none")
        slope = None
        if ss != "none":
            a, b = ss.split("/")
            slope = (int(a), int(b))
        return cls(
            mode=d.get("mode", "fastdtw"),  # type: ignore[arg-type]
            window_radius=None if wr == "none" else int(wr),
            slope_steps=slope,
            fastdtw_radius=int(d.get("fastdtw_radius", "1")),
        )


@dataclass(frozen=True)
class WarpingPath:
    """Ordered (i, j) index pairs, stored as an ``(L, 2)`` int array."""

    pairs: np.ndarray

    def __len__(self) -> int:
        return len(self.pairs)

    def as_tuples(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in self.pairs]

    def check(self, m: int, n: int) -> None:
        """Raise ``ValueError`` unless the path is a valid warping path on an m x n grid."""
        p = np.asarray(self.pairs)
        if p.ndim != 2 or p.shape[1] != 2 or len(p) == 0:
            raise ValueError("path must be a non-empty (L, 2) array")
        if tuple(p[0]) != (0, 0) or tuple(p[-1]) != (m - 1, n - 1):
            raise ValueError("boundary condition violated")
        steps = np.diff(p, axis=0)
        if np.any(steps < 0):
            raise ValueError("monotonicity violated")
        if np.any(steps > 1) or np.any(steps.sum(axis=1) == 0):
            raise ValueError("continuity violated")
        if not max(m, n) <= len(p) <= m + n - 1:
            raise ValueError("path length out of bounds")


@dataclass(frozen=True)
class DtwResult:
    distance: float
    path: Optional[WarpingPath] = None
    cells_evaluated: int = field(default=0, compare=False)


def local_distance(x: float, y: float) -> float:
    """Euclidean distance between two scalars."""
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError(f"non-finite input to local distance: {x!r}, {y!r}")
    return abs(x - y)


def coarsen(a: Sequence[float]) -> np.ndarray:
    """Halve the resolution by averaging adjacent pairs; an odd tail is kept as-is."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 1 or len(a) < 2:
        raise ValueError("coarsen needs a 1-D sequence of length >= 2")
    half = len(a) // 2
    out = (a[0:2 * half:2] + a[1:2 * half:2]) / 2.0
    if len(a) % 2:
        out = np.append(out, a[-1])
    return out


# --------------------------------------------------------------------------
# kernels
# --------------------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _dp_distance(x, y, lo, hi):
    m = x.shape[0]
    n = y.shape[0]
    prev = np.full(n, _INF)
    cur = np.full(n, _INF)
    for i in range(m):
        if i >= 2:
            for j in range(lo[i - 2], hi[i - 2] + 1):
                cur[j] = _INF
        for j in range(lo[i], hi[i] + 1):
            c = abs(x[i] - y[j])
            if i == 0 and j == 0:
                cur[j] = c
                continue
            best = _INF
            if i > 0 and j > 0 and prev[j - 1] < best:
                best = prev[j - 1]
            if i > 0 and prev[j] < best:
                best = prev[j]
            if j > 0 and cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = c + best
        prev, cur = cur, prev
    return prev[n - 1]


@numba.njit(cache=True, nogil=True)
def _offsets(lo, hi):
    m = lo.shape[0]
    off = np.empty(m + 1, dtype=np.int64)
    off[0] = 0
    for i in range(m):
        off[i + 1] = off[i] + hi[i] - lo[i] + 1
    return off


@numba.njit(cache=True, nogil=True)
def _dp_path(x, y, lo, hi):
    """Full-table DP over the window followed by backtracking."""
    m = x.shape[0]
    n = y.shape[0]
    off = _offsets(lo, hi)
    D = np.full(off[m], _INF)

    for i in range(m):
        for j in range(lo[i], hi[i] + 1):
            c = abs(x[i] - y[j])
            if i == 0 and j == 0:
                D[0] = c
                continue
            best = _INF
            if i > 0:
                if lo[i - 1] <= j - 1 <= hi[i - 1]:
                    v = D[off[i - 1] + j - 1 - lo[i - 1]]
                    if v < best:
                        best = v
                if lo[i - 1] <= j <= hi[i - 1]:
                    v = D[off[i - 1] + j - lo[i - 1]]
                    if v < best:
                        best = v
            if j - 1 >= lo[i]:
                v = D[off[i] + j - 1 - lo[i]]
                if v < best:
                    best = v
            D[off[i] + j - lo[i]] = c + best

    dist = D[off[m - 1] + n - 1 - lo[m - 1]]
    path = np.empty((m + n - 1, 2), dtype=np.int64)
    if not dist < _INF:
        return dist, path[:0]
    i = m - 1
    j = n - 1
    k = 0
    path[k, 0] = i
    path[k, 1] = j
    while i > 0 or j > 0:
        # preference on ties: diagonal, vertical, horizontal
        bi = -1
        bj = -1
        best = _INF
        if i > 0 and j > 0 and lo[i - 1] <= j - 1 <= hi[i - 1]:
            v = D[off[i - 1] + j - 1 - lo[i - 1]]
            if v < best:
                best = v
                bi = i - 1
                bj = j - 1
        if i > 0 and lo[i - 1] <= j <= hi[i - 1]:
            v = D[off[i - 1] + j - lo[i - 1]]
            if v < best:
                best = v
                bi = i - 1
                bj = j
        if j > 0 and j - 1 >= lo[i]:
            v = D[off[i] + j - 1 - lo[i]]
            if v < best:
                best = v
                bi = i
                bj = j - 1
        i = bi
        j = bj
        k += 1
        path[k, 0] = i
        path[k, 1] = j
    return dist, path[: k + 1][::-1].copy()


# Slope-constrained DP. States per cell:
#   0 .. b-1        arrived diagonally, d = state+1 diagonals since the last run
#                   (state b-1 is "free": a new run may start)
#   b .. b+a-1      inside a vertical run of length state-b+1
#   b+a .. b+2a-1   inside a horizontal run of length state-b-a+1

@numba.njit(cache=True, nogil=True)
def _slope_cell(c, dg, up, left, out, a, b, first):
    S = b + 2 * a
    for s in range(S):
        out[s] = _INF
    if first:
        out[b - 1] = c
        return
    # diagonal arrivals
    if dg is not None:
        best = _INF
        for s in range(b, S):
            if dg[s] < best:
                best = dg[s]
        if b == 1:
            if dg[0] < best:
                best = dg[0]
            out[0] = best
        else:
            out[0] = best
            for d in range(1, b - 1):
                out[d] = dg[d - 1]
            out[b - 1] = min(dg[b - 2], dg[b - 1])
    # vertical arrivals
    if up is not None:
        out[b] = up[b - 1]
        for k in range(1, a):
            out[b + k] = up[b + k - 1]
    # horizontal arrivals
    if left is not None:
        out[b + a] = left[b - 1]
        for k in range(1, a):
            out[b + a + k] = left[b + a + k - 1]
    for s in range(S):
        if out[s] < _INF:
            out[s] += c


@numba.njit(cache=True, nogil=True)
def _slope_table(x, y, lo, hi, a, b):
    m = x.shape[0]
    off = _offsets(lo, hi)
    S = b + 2 * a
    D = np.full((off[m], S), _INF)
    for i in range(m):
        for j in range(lo[i], hi[i] + 1):
            c = abs(x[i] - y[j])
            idx = off[i] + j - lo[i]
            if i == 0 and j == 0:
                _slope_cell(c, None, None, None, D[idx], a, b, True)
                continue
            dg = None
            up = None
            left = None
            if i > 0 and j > 0 and lo[i - 1] <= j - 1 <= hi[i - 1]:
                dg = D[off[i - 1] + j - 1 - lo[i - 1]]
            if i > 0 and lo[i - 1] <= j <= hi[i - 1]:
                up = D[off[i - 1] + j - lo[i - 1]]
            if j - 1 >= lo[i]:
                left = D[idx - 1]
            _slope_cell(c, dg, up, left, D[idx], a, b, False)
    return D, off


@numba.njit(cache=True, nogil=True)
def _slope_distance(x, y, lo, hi, a, b):
    m = x.shape[0]
    n = y.shape[0]
    S = b + 2 * a
    prev = np.full((n, S), _INF)
    cur = np.full((n, S), _INF)
    for i in range(m):
        if i >= 2:
            for j in range(lo[i - 2], hi[i - 2] + 1):
                cur[j, :] = _INF
        for j in range(lo[i], hi[i] + 1):
            c = abs(x[i] - y[j])
            if i == 0 and j == 0:
                _slope_cell(c, None, None, None, cur[j], a, b, True)
                continue
            dg = None
            up = None
            left = None
            if i > 0 and j > 0 and lo[i - 1] <= j - 1 <= hi[i - 1]:
                dg = prev[j - 1]
            if i > 0 and lo[i - 1] <= j <= hi[i - 1]:
                up = prev[j]
            if j - 1 >= lo[i]:
                left = cur[j - 1]
            _slope_cell(c, dg, up, left, cur[j], a, b, False)
        prev, cur = cur, prev
    return prev[n - 1].min()


@numba.njit(cache=True, nogil=True)
def _slope_backtrack(D, off, lo, m, n, a, b):
    S = b + 2 * a
    last = D[off[m - 1] + n - 1 - lo[m - 1]]
    # final state preference: diagonal states, then vertical, then horizontal
    s = 0
    for t in range(1, S):
        if last[t] < last[s]:
            s = t
    path = np.empty((m + n - 1, 2), dtype=np.int64)
    i = m - 1
    j = n - 1
    k = 0
    path[0, 0] = i
    path[0, 1] = j
    while i > 0 or j > 0:
        if s < b:
            pi = i - 1
            pj = j - 1
            row = D[off[pi] + pj - lo[pi]]
            if s == 0:
                ns = b
                for t in range(b, S):
                    if row[t] < row[ns]:
                        ns = t
                if b == 1 and row[0] <= row[ns]:
                    ns = 0
            elif s < b - 1:
                ns = s - 1
            else:
                ns = b - 2 if row[b - 2] <= row[b - 1] else b - 1
        elif s < b + a:
            pi = i - 1
            pj = j
            ns = b - 1 if s == b else s - 1
        else:
            pi = i
            pj = j - 1
            ns = b - 1 if s == b + a else s - 1
        i = pi
        j = pj
        s = ns
        k += 1
        path[k, 0] = i
        path[k, 1] = j
    return path[: k + 1][::-1].copy()


@numba.njit(cache=True, nogil=True)
def _expand_window(cpath, m, n, radius):
    """Project a coarse path onto the m x n grid and widen it by ``radius`` cells."""
    plo = np.full(m, n, dtype=np.int64)
    phi = np.full(m, -1, dtype=np.int64)
    for k in range(cpath.shape[0]):
        ci = cpath[k, 0]
        cj = cpath[k, 1]
        j0 = 2 * cj
        j1 = min(2 * cj + 1, n - 1)
        for fi in range(2 * ci, min(2 * ci + 2, m)):
            if j0 < plo[fi]:
                plo[fi] = j0
            if j1 > phi[fi]:
                phi[fi] = j1
    lo = np.empty(m, dtype=np.int64)
    hi = np.empty(m, dtype=np.int64)
    for i in range(m):
        a = n
        b = -1
        for r in range(max(0, i - radius), min(m, i + radius + 1)):
            if plo[r] < a:
                a = plo[r]
            if phi[r] > b:
                b = phi[r]
        lo[i] = max(0, a - radius)
        hi[i] = min(n - 1, b + radius)
    return lo, hi


# --------------------------------------------------------------------------
# public API
# --------------------------------------------------------------------------

def _as_series(a, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if len(arr) == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _full_window(m: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.zeros(m, dtype=np.int64), np.full(m, n - 1, dtype=np.int64)


def _band_window(m: int, n: int, r: int) -> tuple[np.ndarray, np.ndarray]:
    i = np.arange(m, dtype=np.int64)
    return np.maximum(i - r, 0), np.minimum(i + r, n - 1)


def _cells(lo: np.ndarray, hi: np.ndarray) -> int:
    return int(np.sum(hi - lo + 1))


def dtw_exact(a, b, config: Optional[DtwConfig] = None, return_path: bool = False) -> DtwResult:
    """Exact DTW distance under the band/slope constraints of ``config``.

    The ``mode`` and ``fastdtw_radius`` fields of ``config`` are ignored.
    Raises ``InfeasibleWindow`` when no warping path satisfies the constraints.
    """
    x = _as_series(a, "a")
    y = _as_series(b, "b")
    m, n = len(x), len(y)
    r = config.window_radius if config is not None else None
    slope = config.slope_steps if config is not None else None

    if r is None:
        lo, hi = _full_window(m, n)
    else:
        if r < abs(m - n):
            raise InfeasibleWindow(f"band radius {r} < length difference {abs(m - n)}")
        lo, hi = _band_window(m, n, r)

    if slope is None:
        if return_path:
            dist, p = _dp_path(x, y, lo, hi)
            path = WarpingPath(p)
        else:
            dist = _dp_distance(x, y, lo, hi)
            path = None
    else:
        sa, sb = slope
        if return_path:
            D, off = _slope_table(x, y, lo, hi, sa, sb)
            dist = D[off[m - 1] + n - 1 - lo[m - 1]].min()
            path = WarpingPath(_slope_backtrack(D, off, lo, m, n, sa, sb)) if np.isfinite(dist) else None
        else:
            dist = _slope_distance(x, y, lo, hi, sa, sb)
            path = None
        if not np.isfinite(dist):
            raise InfeasibleWindow(f"no warping path of a {m}x{n} grid satisfies slope steps {slope}")
    return DtwResult(float(dist), path, _cells(lo, hi))


def _fastdtw(x: np.ndarray, y: np.ndarray, radius: int, need_path: bool):
    m, n = len(x), len(y)
    min_size = radius + 2
    if m <= min_size or n <= min_size:
        lo, hi = _full_window(m, n)
        cells = _cells(lo, hi)
        if need_path:
            dist, p = _dp_path(x, y, lo, hi)
            return dist, p, cells
        return _dp_distance(x, y, lo, hi), None, cells
    _, cpath, ccells = _fastdtw(coarsen(x), coarsen(y), radius, True)
    lo, hi = _expand_window(cpath, m, n, radius)
    cells = ccells + _cells(lo, hi)
    if need_path:
        dist, p = _dp_path(x, y, lo, hi)
        return dist, p, cells
    return _dp_distance(x, y, lo, hi), None, cells


def fastdtw(a, b, radius: int = 1, return_path: bool = False) -> DtwResult:
    """Multiresolution DTW approximation.

    Both series are halved recursively until one is no longer than
    ``radius + 2``; that level is solved exactly, and each finer level is
    solved inside the projected path widened by ``radius`` cells.
    """
    if radius < 0:
        raise ValueError("radius must be non-negative")
    x = _as_series(a, "a")
    y = _as_series(b, "b")
    dist, p, cells = _fastdtw(x, y, int(radius), return_path)
    return DtwResult(float(dist), WarpingPath(p) if p is not None else None, cells)


def dtw_distance(a, b, config: DtwConfig) -> DtwResult:
    """Dispatch on ``config.mode``."""
    if config.mode == "fastdtw":
        return fastdtw(a, b, config.fastdtw_radius)
    return dtw_exact(a, b, config)
